// SPDX-License-Identifier: Apache-2.0
//
// Discrete-event model of the training pipeline: disaggregated role pools
// with a strictly sequential stage chain versus one temporally multiplexed
// pool, and serial versus grouped-parallel reward stages.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vidpost/sched.hpp"

namespace vidpost::sched {

enum class PipelineMode { Disaggregated, Colocated };
enum class RewardMode { Fixed, Serial, Planned };

struct PipelineConfig {
  double rollout_s = 1.0;  // stage wall time on its dedicated role pool
  double reward_s = 1.0;
  double actor_s = 1.0;
  int rollout_nodes = 1;
  int reward_nodes = 1;
  int actor_nodes = 1;
  PipelineMode mode = PipelineMode::Disaggregated;
  RewardMode reward_mode = RewardMode::Fixed;
  std::vector<WorkerProfile> workers;   // for Serial / Planned reward stages
  std::optional<SchedulePlan> plan;     // for Planned
  int iterations = 1;
};

struct SimEvent {
  double time = 0.0;
  std::string node;
  std::string what;
};

struct SimReport {
  double makespan = 0.0;
  std::vector<std::pair<std::string, double>> node_busy;
  // Role work totals (node-seconds); identical across pipeline modes.
  double rollout_busy = 0.0;
  double reward_busy = 0.0;
  double actor_busy = 0.0;
  double utilization = 0.0;  // sum(node busy) / (nodes * makespan)
  std::vector<SimEvent> events;
};

/// Wall time of the reward stage for the configured reward mode.
double resolve_reward_stage_seconds(const PipelineConfig& cfg);

SimReport simulate_pipeline(const PipelineConfig& cfg);

}  // namespace vidpost::sched
