// SPDX-License-Identifier: Apache-2.0
#include "vidpost/curriculum.hpp"

#include <algorithm>

namespace vidpost::curriculum {

void validate_config(const CurriculumConfig& cfg) {
  if (!(cfg.tau_sat > 0.0)) throw ConfigError("curriculum: tau_sat must be > 0");
  if (cfg.window < 1) throw ConfigError("curriculum: window must be >= 1");
  if (cfg.min_dwell < cfg.window)
    throw ConfigError("curriculum: min_dwell must be >= window");
}

toygen::RewardVector phase_weights(Phase phase) {
  switch (phase) {
    case Phase::Fidelity: return {0.8, 0.1, 0.1};
    case Phase::Temporal: return {0.2, 0.6, 0.2};
    case Phase::Semantic: return {0.1, 0.2, 0.7};
  }
  throw ConfigError("phase_weights: invalid phase");
}

int active_channel(Phase phase) { return static_cast<int>(phase) - 1; }

CurriculumState update_curriculum(CurriculumState state,
                                  double active_channel_group_std,
                                  const CurriculumConfig& cfg) {
  validate_config(cfg);
  if (active_channel_group_std < 0.0)
    throw ConfigError("update_curriculum: std must be >= 0");

  state.window.push_back(active_channel_group_std);
  while (static_cast<int>(state.window.size()) > cfg.window)
    state.window.pop_front();
  state.iterations_in_phase += 1;

  if (state.phase != Phase::Semantic &&
      static_cast<int>(state.window.size()) == cfg.window &&
      state.iterations_in_phase >= cfg.min_dwell &&
      saturation_score(state.window) < cfg.tau_sat) {
    state.phase = static_cast<Phase>(static_cast<int>(state.phase) + 1);
    state.window.clear();
    state.iterations_in_phase = 0;
  }
  return state;
}

double saturation_score(const std::deque<double>& window) {
  if (window.empty()) throw ConfigError("saturation_score: empty window");
  return *std::max_element(window.begin(), window.end());
}

}  // namespace vidpost::curriculum
