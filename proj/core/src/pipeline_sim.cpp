// SPDX-License-Identifier: Apache-2.0
#include "vidpost/pipeline_sim.hpp"

#include <cstddef>

namespace vidpost::sched {

namespace {

struct Stage {
  const char* label;
  double duration;  // wall time on the stage's dedicated role pool
  int role_nodes;
};

std::string node_name(const char* prefix, int i) {
  return std::string(prefix) + "-" + std::to_string(i);
}

}  // namespace

double resolve_reward_stage_seconds(const PipelineConfig& cfg) {
  switch (cfg.reward_mode) {
    case RewardMode::Fixed:
      return cfg.reward_s;
    case RewardMode::Serial:
      if (cfg.workers.empty())
        throw ConfigError("pipeline: serial reward mode needs worker profiles");
      return serial_makespan(cfg.workers);
    case RewardMode::Planned:
      if (!cfg.plan.has_value())
        throw ConfigError("pipeline: planned reward mode needs a schedule plan");
      if (cfg.workers.empty())
        throw ConfigError("pipeline: planned reward mode needs worker profiles");
      validate_plan(*cfg.plan, cfg.workers);
      return plan_makespan(*cfg.plan, cfg.workers);
  }
  throw ConfigError("pipeline: invalid reward mode");
}

SimReport simulate_pipeline(const PipelineConfig& cfg) {
  if (cfg.iterations < 1) throw ConfigError("pipeline: iterations must be >= 1");
  if (cfg.rollout_nodes < 1 || cfg.reward_nodes < 1 || cfg.actor_nodes < 1)
    throw ConfigError("pipeline: node counts must be >= 1");
  if (!(cfg.rollout_s > 0.0) || !(cfg.actor_s > 0.0))
    throw ConfigError("pipeline: stage durations must be > 0");
  const double reward_s = resolve_reward_stage_seconds(cfg);
  if (!(reward_s > 0.0)) throw ConfigError("pipeline: reward stage must be > 0");

  const Stage stages[3] = {
      {"rollout", cfg.rollout_s, cfg.rollout_nodes},
      {"reward", reward_s, cfg.reward_nodes},
      {"actor", cfg.actor_s, cfg.actor_nodes},
  };
  const int total_nodes = cfg.rollout_nodes + cfg.reward_nodes + cfg.actor_nodes;

  SimReport rep;
  double now = 0.0;

  if (cfg.mode == PipelineMode::Disaggregated) {
    // Dedicated pools; the strict rollout -> reward -> actor chain leaves
    // each pool idle during the other two stages.
    std::vector<std::pair<std::string, double>> busy;
    for (int s = 0; s < 3; ++s)
      for (int i = 0; i < stages[s].role_nodes; ++i)
        busy.emplace_back(node_name(stages[s].label, i), 0.0);

    for (int it = 0; it < cfg.iterations; ++it) {
      std::size_t offset = 0;
      for (int s = 0; s < 3; ++s) {
        for (int i = 0; i < stages[s].role_nodes; ++i)
          rep.events.push_back(
              {now, busy[offset + static_cast<std::size_t>(i)].first,
               std::string(stages[s].label) + ":start"});
        const double end = now + stages[s].duration;
        for (int i = 0; i < stages[s].role_nodes; ++i) {
          busy[offset + static_cast<std::size_t>(i)].second += stages[s].duration;
          rep.events.push_back(
              {end, busy[offset + static_cast<std::size_t>(i)].first,
               std::string(stages[s].label) + ":end"});
        }
        now = end;
        offset += static_cast<std::size_t>(stages[s].role_nodes);
      }
    }
    rep.node_busy = std::move(busy);
  } else {
    // One temporally multiplexed pool. Stage work (role nodes x duration)
    // is spread over the whole pool, so no node ever idles.
    std::vector<std::pair<std::string, double>> busy;
    for (int i = 0; i < total_nodes; ++i)
      busy.emplace_back(node_name("pool", i), 0.0);

    for (int it = 0; it < cfg.iterations; ++it) {
      for (const auto& st : stages) {
        const double scaled =
            st.duration * static_cast<double>(st.role_nodes) / total_nodes;
        for (auto& nb : busy)
          rep.events.push_back({now, nb.first, std::string(st.label) + ":start"});
        const double end = now + scaled;
        for (auto& nb : busy) {
          nb.second += scaled;
          rep.events.push_back({end, nb.first, std::string(st.label) + ":end"});
        }
        now = end;
      }
    }
    rep.node_busy = std::move(busy);
  }

  rep.makespan = now;
  rep.rollout_busy =
      static_cast<double>(cfg.rollout_nodes) * cfg.rollout_s * cfg.iterations;
  rep.reward_busy =
      static_cast<double>(cfg.reward_nodes) * reward_s * cfg.iterations;
  rep.actor_busy =
      static_cast<double>(cfg.actor_nodes) * cfg.actor_s * cfg.iterations;

  // Each co-located node accumulates exactly the same stage sequence as
  // the clock, so its busy time equals the makespan and utilization is 1.
  double total_busy = 0.0;
  double capacity = 0.0;
  for (const auto& nb : rep.node_busy) {
    total_busy += nb.second;
    capacity += rep.makespan;
  }
  rep.utilization = total_busy / capacity;
  return rep;
}

}  // namespace vidpost::sched
