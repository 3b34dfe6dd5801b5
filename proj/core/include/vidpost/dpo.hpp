// SPDX-License-Identifier: Apache-2.0
//
// Preference-optimization math: the logistic preference loss, its decoupled
// two-pass backward with live-memory and flop accounting, and synthetic
// temporal-negative constructors for preference pairs.
#pragma once

#include <cstdint>
#include <vector>

#include "vidpost/tape.hpp"
#include "vidpost/toygen.hpp"

namespace vidpost::dpo {

enum class Provenance { PolicyHardNegative, Synthetic, Annotated };

struct PreferencePair {
  toygen::PromptSpec prompt;
  toygen::VideoTensor winner;
  toygen::VideoTensor loser;
  Provenance provenance = Provenance::Synthetic;
};

struct DpoConfig {
  double beta = 0.1;  // KL-strength scale; must be > 0
};

struct BranchUnits {
  std::int64_t winner = 0;  // L_w
  std::int64_t loser = 0;   // L_l
};

/// Accounting of one backward invocation. `flops` counts backward-pass
/// arithmetic; units count retained intermediate gradients plus the
/// parameter-gradient buffer.
struct MemoryTrace {
  std::int64_t peak_live_units = 0;
  BranchUnits branch_units;
  std::int64_t flops = 0;
};

/// (logp_w_theta - logp_w_ref) - (logp_l_theta - logp_l_ref).
double preference_margin(double logp_w_theta, double logp_w_ref,
                         double logp_l_theta, double logp_l_ref);

/// -ln sigmoid(beta * margin), computed stably.
double dpo_loss(double margin, double beta);

/// eta = sigmoid(-beta * margin) * beta; the scalar weight of both decoupled
/// branch gradients.
double eta_coefficient(double margin, double beta);

struct BackwardResult {
  /// Gradient of the loss w.r.t. the flat parameter vector (mean cells, sigma).
  std::vector<double> param_gradient;
  MemoryTrace trace;
  double loss = 0.0;
  double margin = 0.0;
  double eta = 0.0;
};

/// Loss value only (used by finite-difference oracles).
double dpo_loss_value(const PreferencePair& pair,
                      const toygen::PolicyParams& policy,
                      const toygen::PolicyParams& reference,
                      const DpoConfig& cfg);

/// Single graph task over both branches: every intermediate gradient stays
/// live until the task completes, so the peak is L_w + L_l plus parameters.
BackwardResult fused_backward(const Tape& tape, const PreferencePair& pair,
                              const toygen::PolicyParams& policy,
                              const toygen::PolicyParams& reference,
                              const DpoConfig& cfg);

/// eta is precomputed without recording, then the two branch backwards run
/// as independent tasks; each branch's intermediates are released before the
/// other's backward begins, so the peak is max(L_w, L_l) plus parameters.
BackwardResult decoupled_backward(const Tape& tape, const PreferencePair& pair,
                                  const toygen::PolicyParams& policy,
                                  const toygen::PolicyParams& reference,
                                  const DpoConfig& cfg);

enum class NegativeKind { Reversal, Shuffle, Freeze };

/// Frame index the Freeze constructor locks onto for a given seed
/// (uniform over [0, T-2]).
int freeze_index(int t_count, std::uint64_t seed);

/// Reversal: frames in reverse order. Shuffle: frames permuted within
/// non-overlapping windows of 4. Freeze: frames from a seed-chosen index
/// onward replaced by that frame.
toygen::VideoTensor make_temporal_negative(const toygen::VideoTensor& video,
                                           NegativeKind kind, std::uint64_t seed);

}  // namespace vidpost::dpo
