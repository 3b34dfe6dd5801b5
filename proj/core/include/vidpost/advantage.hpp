// SPDX-License-Identifier: Apache-2.0
//
// Group-relative optimization math: standardized advantages, spatiotemporal
// advantage maps, prior-anchored reliability scaling and contrastive reward
// transformation, the advantage-level minimum-norm combiner, and one full
// group-relative iteration over the synthetic environment.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vidpost/toygen.hpp"

namespace vidpost::advantage {

struct AdvantageConfig {
  double epsilon = 1e-8;  // denominator guard on the group std
  double kl_coeff = 0.0;  // weight of the KL penalty to the reference policy
};

/// Nonnegative spatiotemporal weight field with mean 1, used to redistribute
/// a scalar advantage over video positions.
struct AdvantageMap {
  Grid weights;
};

/// Reward prior used as a trust anchor for reliability scaling.
struct PriorAnchor {
  enum class Source { ReferencePolicyStats, Fixed };
  double mu0 = 0.0;
  double sigma0 = 1.0;
  Source source = Source::Fixed;
};

struct BpgoConfig {
  double lambda_mean = 0.0;  // sensitivity to group-mean deviation
  double lambda_var = 0.0;   // sensitivity to excess group std
  double gamma = 0.0;        // contrastive stretch factor
  double kappa = 0.0;        // ambiguity band half-width, in sigma0 units
};

/// Row i holds the advantage vector induced by reward model i across a group.
struct ObjectiveSet {
  std::vector<std::vector<double>> advantages;  // N rows x G columns
};

/// Point on the probability simplex.
struct SimplexWeights {
  std::vector<double> c;
};

/// A_i = (r_i - mean) / (population std + epsilon). Output is re-centered so
/// its mean is zero to machine precision.
std::vector<double> grpo_advantages(std::span<const double> rewards,
                                    const AdvantageConfig& cfg);

enum class MapProvider { Uniform, TemporalEnergy };

/// Uniform: all-ones. TemporalEnergy: weight proportional to |frame_t -
/// frame_{t-1}| (frame 0 reuses frame 1's energy), mean-normalized to 1;
/// falls back to uniform when the video is static.
AdvantageMap build_advantage_map(const toygen::VideoTensor& video,
                                 MapProvider provider);

struct VipoResult {
  double objective = 0.0;
  /// Per-sample contribution to d objective / d policy.mean; the total
  /// gradient is the element-wise sum over samples.
  std::vector<Grid> mean_gradients;
};

/// (1/G) sum_i A_i * <M_i, logp_cells_i> / (T*H*W), with log-probabilities
/// evaluated under `policy` so the gradient is well-defined. With uniform
/// maps this reduces exactly to the scalar group-relative objective.
VipoResult vipo_objective(const toygen::GroupRollout& group,
                          const std::vector<AdvantageMap>& maps,
                          std::span<const double> advantages,
                          const toygen::PolicyParams& policy);

/// Reliability-adaptive group weight in (0, 1]:
/// exp(-lambda_mean*|mean-mu0|/sigma0) * exp(-lambda_var*max(0,std-sigma0)/sigma0).
double ras_group_weight(double group_mean, double group_std,
                        const PriorAnchor& prior, const BpgoConfig& cfg);

/// Contrastive reward transformation: stretch advantages of samples beating
/// the prior band by (1+gamma), compress ambiguous ones by 1/(1+gamma), then
/// re-center to zero mean.
std::vector<double> crt_transform(std::span<const double> rewards,
                                  std::span<const double> advantages,
                                  const PriorAnchor& prior, const BpgoConfig& cfg);

/// Minimize ||sum_i c_i A_i||^2 over the probability simplex, with a 1e-12
/// ridge toward uniform weights for tie-breaking.
SimplexWeights joint_minnorm_weights(const ObjectiveSet& objs);

/// Objective value ||sum_i c_i A_i||^2 (without the ridge term).
double minnorm_value(const ObjectiveSet& objs, std::span<const double> c);

/// sum_i c_i * L_i.
double combined_objective(std::span<const double> per_objective_losses,
                          const SimplexWeights& c);

struct IterationConfig {
  int group_size = 8;
  AdvantageConfig adv;
  std::optional<BpgoConfig> bpgo;    // requires `prior` when set
  std::optional<PriorAnchor> prior;
  MapProvider maps = MapProvider::Uniform;
  toygen::RewardVector channel_weights{1.0, 0.0, 0.0};
  double lr = 0.1;
  std::uint64_t seed = 0;
};

struct PromptIterationStats {
  std::size_t prompt_index = 0;
  toygen::RewardVector reward_mean;
  toygen::RewardVector reward_std;  // population std per channel
  double scalar_mean = 0.0;
  double scalar_std = 0.0;
  std::vector<double> scalar_rewards;
  std::vector<double> advantages;
  double ras_weight = 1.0;
  double kl = 0.0;
};

struct IterationStats {
  std::vector<PromptIterationStats> prompts;
  double kl = 0.0;
  double objective = 0.0;
};

struct IterationResult {
  toygen::PolicyParams policy;
  IterationStats stats;
};

/// One sample -> evaluate -> update step: per prompt, sample a group, score
/// the channels, scalarize with the channel weights, standardize, apply the
/// optional contrastive transform and maps, scale by the optional reliability
/// weight, subtract kl_coeff * KL to the reference, and take one ascent step
/// on the policy mean. Per-prompt noise streams derive from (seed, index).
IterationResult grpo_iteration(const toygen::PolicyParams& policy,
                               const toygen::PolicyParams& reference,
                               std::span<const toygen::PromptSpec> prompts,
                               const IterationConfig& cfg);

}  // namespace vidpost::advantage
