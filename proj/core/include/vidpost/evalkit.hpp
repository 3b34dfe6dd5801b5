// SPDX-License-Identifier: Apache-2.0
//
// Good-Same-Bad pairwise evaluation algebra and deterministic experiment
// report generation.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vidpost/errors.hpp"

namespace vidpost::evalkit {

struct GsbCounts {
  std::int64_t good = 0;
  std::int64_t same = 0;
  std::int64_t bad = 0;
};

struct GsbMetrics {
  double winrate = 0.0;     // G / (G + B)
  double preference = 0.0;  // (G + 0.5 S) / (G + S + B)
  double margin = 0.0;      // (G - B) / (G + S + B)
};

/// Throws ConfigError on an all-zero count set and when G + B = 0 (the win
/// rate is undefined there).
GsbMetrics gsb_metrics(const GsbCounts& counts);

/// True iff |preference - 0.5 - margin/2| <= tol: the algebraic identity
/// linking the three statistics.
bool check_identity(const GsbMetrics& metrics, double tol);

struct GsbRow {
  std::string aspect;
  GsbCounts counts;
};

/// Parse "aspect,good,same,bad" rows; a header line is skipped if present.
std::vector<GsbRow> parse_gsb_csv(const std::filesystem::path& file);

enum class ReportFormat { Json, Csv };

struct ReportSources {
  std::vector<std::filesystem::path> train_logs;   // JSON-lines training logs
  std::vector<std::filesystem::path> sim_reports;  // simulator report JSON
  std::vector<std::filesystem::path> gsb_tables;   // aspect,good,same,bad CSV
};

/// Aggregate the sources into one deterministic report file (sorted keys;
/// identical inputs give byte-identical output). JSON reports carry the
/// per-iteration mean reward per channel of every training log.
void emit_report(const ReportSources& sources, const std::filesystem::path& out,
                 ReportFormat format);

}  // namespace vidpost::evalkit
