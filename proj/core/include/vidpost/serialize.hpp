// SPDX-License-Identifier: Apache-2.0
//
// File formats: policy/prompt JSON documents (17-significant-digit floats,
// explicit dims, row-major arrays), worker-profile ingestion, plan and
// simulator reports, JSON-lines logs and the run manifest. All emitters are
// deterministic: identical inputs give byte-identical files.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vidpost/advantage.hpp"
#include "vidpost/dpo.hpp"
#include "vidpost/pipeline_sim.hpp"
#include "vidpost/toygen.hpp"

namespace vidpost::serialize {

/// %.17g rendering used by the policy/prompt documents.
std::string format_double(double v);

/// FNV-1a 64-bit, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& payload);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

std::string policy_to_json(const toygen::PolicyParams& policy);
toygen::PolicyParams policy_from_json(const std::string& text);

std::string prompt_to_json(const toygen::PromptSpec& prompt);
toygen::PromptSpec prompt_from_json(const std::string& text);

std::vector<sched::WorkerProfile> profiles_from_json(const std::string& text);
std::string profiles_to_json(const std::vector<sched::WorkerProfile>& profiles);

std::string plan_to_json(const sched::SchedulePlan& plan, double serial_makespan);
std::string sim_report_to_json(const sched::SimReport& report);
std::string sim_events_to_csv(const sched::SimReport& report);

/// One train.jsonl line per (iteration, prompt).
std::string train_record_line(int iteration,
                              const advantage::PromptIterationStats& stats);

/// One train.jsonl line per preference-optimization step.
std::string dpo_record_line(int iteration, double beta,
                            const dpo::BackwardResult& result);

/// Curriculum transition event line.
std::string curriculum_event_line(int iteration, int from_phase, int to_phase,
                                  double trigger_std);

std::string preference_pair_line(const dpo::PreferencePair& pair);
dpo::PreferencePair preference_pair_from_line(const std::string& line);

struct ManifestEntry {
  std::string key;
  std::string value;
};

/// manifest.json: sorted resolved config, its hash, the seed and the tool
/// version. Re-running the same manifest reproduces all numeric outputs.
std::string manifest_json(const std::vector<ManifestEntry>& config,
                          std::uint64_t seed);

inline constexpr const char* kToolVersion = "vidpost 0.1.0";

}  // namespace vidpost::serialize
