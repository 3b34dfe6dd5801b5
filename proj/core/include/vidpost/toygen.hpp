// SPDX-License-Identifier: Apache-2.0
//
// Synthetic video environment: a diagonal-Gaussian policy over raw video
// cells, analytic multi-channel rewards and exact KL to a reference policy.
// Everything here has a closed form, which is what makes the optimization
// stack above it testable against oracles.
#pragma once

#include <cstdint>
#include <vector>

#include "vidpost/grid.hpp"

namespace vidpost::toygen {

using VideoTensor = Grid;

/// Diagonal Gaussian over video cells: per-cell mean plus one shared
/// standard deviation.
struct PolicyParams {
  Grid mean;
  double sigma = 1.0;
};

/// Conditioning for one prompt: a fidelity target pattern, an expected
/// per-frame intensity drift and a semantic target embedding.
struct PromptSpec {
  Grid target;
  double drift = 0.0;
  std::vector<double> embedding;
};

/// One score per reward channel; higher is better on every channel.
struct RewardVector {
  double fidelity = 0.0;
  double temporal = 0.0;
  double semantic = 0.0;

  [[nodiscard]] double channel(int i) const {
    return i == 0 ? fidelity : (i == 1 ? temporal : semantic);
  }
};

struct Sample {
  VideoTensor video;
  RewardVector rewards;
  Grid logp_cells;
  double logp_sum = 0.0;
};

/// G sampled videos for one prompt: the unit group-relative optimization
/// operates on.
struct GroupRollout {
  PromptSpec prompt;
  std::vector<Sample> samples;
  std::uint64_t seed = 0;
};

struct LogProb {
  Grid cells;
  double sum = 0.0;
};

/// Gradient container matching PolicyParams: per-cell mean gradient plus a
/// scalar sigma gradient.
struct PolicyGradient {
  Grid mean;
  double sigma = 0.0;
};

void validate_policy(const PolicyParams& policy);
void validate_prompt(const PromptSpec& prompt, const Dims& dims);

/// Draw g videos cell-wise from Normal(mean, sigma^2). Pure in
/// (policy, prompt, g, seed): identical inputs give bit-identical rollouts.
GroupRollout sample_group(const PolicyParams& policy, const PromptSpec& prompt,
                          int g, std::uint64_t seed);

/// fidelity  = -mean squared error to prompt.target
/// temporal  = -mean_{t>=1} |frame_t - frame_{t-1} - drift| averaged per cell
/// semantic  = cosine(pooled(video), prompt.embedding)
RewardVector reward_channels(const VideoTensor& video, const PromptSpec& prompt);

/// Deterministic pooling used by the semantic channel: per-frame means,
/// truncated or zero-padded to `len`.
std::vector<double> pooled_semantic(const VideoTensor& video, std::size_t len);

/// Per-cell Gaussian log-density and its row-major sum.
LogProb log_prob(const PolicyParams& policy, const VideoTensor& video);

/// d logp_sum / d mean, cell-wise: (v - mu) / sigma^2.
Grid log_prob_mean_grad(const PolicyParams& policy, const VideoTensor& video);

/// Exact diagonal-Gaussian KL(policy || reference), summed over cells.
double kl_to_reference(const PolicyParams& policy, const PolicyParams& reference);

/// Gradient of kl_to_reference with respect to the policy mean.
Grid kl_mean_grad(const PolicyParams& policy, const PolicyParams& reference);

/// Ascent step on mean and sigma; sigma is clamped to >= 1e-6.
PolicyParams policy_update(const PolicyParams& policy, const PolicyGradient& grad,
                           double lr);

}  // namespace vidpost::toygen
