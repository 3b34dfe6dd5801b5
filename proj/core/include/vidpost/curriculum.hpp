// SPDX-License-Identifier: Apache-2.0
//
// Self-paced phase controller: watches intra-group reward std of the active
// channel and advances Fidelity -> Temporal -> Semantic once the signal
// saturates. Transitions are forward-only.
#pragma once

#include <deque>

#include "vidpost/errors.hpp"
#include "vidpost/toygen.hpp"

namespace vidpost::curriculum {

enum class Phase : int { Fidelity = 1, Temporal = 2, Semantic = 3 };

struct CurriculumConfig {
  double tau_sat = 0.01;  // saturation threshold on intra-group std
  int window = 5;         // ring-buffer length K
  int min_dwell = 5;      // minimum iterations before a transition (>= window)
};

struct CurriculumState {
  Phase phase = Phase::Fidelity;
  std::deque<double> window;  // last K stds of the active channel
  int iterations_in_phase = 0;
};

void validate_config(const CurriculumConfig& cfg);

/// Channel weights per phase; each row sums to 1.
toygen::RewardVector phase_weights(Phase phase);

/// Index of the channel a phase emphasizes (0 fidelity, 1 temporal, 2 semantic).
int active_channel(Phase phase);

/// Push the latest std; advance the phase when the window is full, every
/// entry is below tau_sat and the dwell requirement is met.
CurriculumState update_curriculum(CurriculumState state,
                                  double active_channel_group_std,
                                  const CurriculumConfig& cfg);

/// Max of the window: the group is saturated when even its most
/// discriminative recent iteration is below tau_sat.
double saturation_score(const std::deque<double>& window);

}  // namespace vidpost::curriculum
