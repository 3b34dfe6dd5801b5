// SPDX-License-Identifier: Apache-2.0
#include "vidpost/advantage.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "vidpost/rng.hpp"

namespace vidpost::advantage {

namespace {

struct Moments {
  double mean = 0.0;
  double std = 0.0;  // population
};

Moments moments(std::span<const double> xs) {
  Moments m;
  const double n = static_cast<double>(xs.size());
  double s = 0.0;
  for (double x : xs) s += x;
  m.mean = s / n;
  double sq = 0.0;
  for (double x : xs) {
    const double d = x - m.mean;
    sq += d * d;
  }
  m.std = std::sqrt(sq / n);
  return m;
}

void recenter(std::span<double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  const double m = s / static_cast<double>(xs.size());
  for (double& x : xs) x -= m;
}

}  // namespace

std::vector<double> grpo_advantages(std::span<const double> rewards,
                                    const AdvantageConfig& cfg) {
  if (rewards.size() < 2)
    throw ConfigError("grpo_advantages: group size must be >= 2");
  if (!(cfg.epsilon > 0.0))
    throw ConfigError("grpo_advantages: epsilon must be > 0");
  if (!all_finite(rewards))
    throw NumericError("grpo_advantages: non-finite reward");

  const Moments m = moments(rewards);
  std::vector<double> out(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = rewards[i] - m.mean;
  // Second centering pass removes the rounding residue of the first, keeping
  // the zero-mean contract at 1e-12 even for badly scaled inputs.
  recenter(out);
  const double denom = m.std + cfg.epsilon;
  for (double& a : out) a /= denom;
  return out;
}

AdvantageMap build_advantage_map(const toygen::VideoTensor& video,
                                 MapProvider provider) {
  const Dims d = video.dims();
  if (!d.valid()) throw ConfigError("build_advantage_map: invalid dims");

  AdvantageMap map;
  map.weights = Grid(d, 1.0);
  if (provider == MapProvider::Uniform) return map;

  if (d.t < 2)
    throw ConfigError("build_advantage_map: temporal-energy needs T >= 2");

  const std::size_t frame = static_cast<std::size_t>(d.h) * d.w;
  const std::size_t n = video.size();
  Grid energy(d);
  double total = 0.0;
  for (int t = 1; t < d.t; ++t) {
    const std::size_t base = static_cast<std::size_t>(t) * frame;
    for (std::size_t c = 0; c < frame; ++c) {
      const double e = std::abs(video[base + c] - video[base - frame + c]);
      energy[base + c] = e;
      total += e;
    }
  }
  // Frame 0 reuses frame 1's energy.
  for (std::size_t c = 0; c < frame; ++c) {
    energy[c] = energy[frame + c];
    total += energy[c];
  }
  if (total <= 0.0) return map;  // static video: uniform fallback

  const double scale = static_cast<double>(n) / total;
  for (std::size_t c = 0; c < n; ++c) map.weights[c] = energy[c] * scale;
  return map;
}

VipoResult vipo_objective(const toygen::GroupRollout& group,
                          const std::vector<AdvantageMap>& maps,
                          std::span<const double> advantages,
                          const toygen::PolicyParams& policy) {
  const std::size_t g = group.samples.size();
  if (maps.size() != g || advantages.size() != g)
    throw ConfigError("vipo_objective: need one map and one advantage per sample");
  toygen::validate_policy(policy);

  const Dims dims = policy.mean.dims();
  const std::size_t n = policy.mean.size();
  const double cells = static_cast<double>(n);
  const double sigma2 = policy.sigma * policy.sigma;

  VipoResult out;
  out.mean_gradients.reserve(g);
  double obj = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const auto& video = group.samples[i].video;
    require_same_dims(video.dims(), dims, "vipo_objective.video");
    require_same_dims(maps[i].weights.dims(), dims, "vipo_objective.map");

    const auto lp = toygen::log_prob(policy, video);
    double weighted = 0.0;
    Grid grad(dims);
    const double a = advantages[i];
    const double scale = a / (static_cast<double>(g) * cells);
    for (std::size_t c = 0; c < n; ++c) {
      const double m = maps[i].weights[c];
      weighted += m * lp.cells[c];
      grad[c] = scale * m * (video[c] - policy.mean[c]) / sigma2;
    }
    obj += a * weighted;
    out.mean_gradients.push_back(std::move(grad));
  }
  out.objective = obj / (static_cast<double>(g) * cells);
  return out;
}

double ras_group_weight(double group_mean, double group_std,
                        const PriorAnchor& prior, const BpgoConfig& cfg) {
  if (!(prior.sigma0 > 0.0)) throw ConfigError("ras_group_weight: sigma0 must be > 0");
  if (group_std < 0.0) throw ConfigError("ras_group_weight: std must be >= 0");
  const double mean_term =
      -cfg.lambda_mean * std::abs(group_mean - prior.mu0) / prior.sigma0;
  const double var_term =
      -cfg.lambda_var * std::max(0.0, group_std - prior.sigma0) / prior.sigma0;
  return std::exp(mean_term) * std::exp(var_term);
}

std::vector<double> crt_transform(std::span<const double> rewards,
                                  std::span<const double> advantages,
                                  const PriorAnchor& prior, const BpgoConfig& cfg) {
  if (rewards.size() != advantages.size())
    throw ConfigError("crt_transform: length mismatch");
  if (!(prior.sigma0 > 0.0)) throw ConfigError("crt_transform: sigma0 must be > 0");

  const double band = cfg.kappa * prior.sigma0;
  std::vector<double> out(advantages.size());
  for (std::size_t i = 0; i < advantages.size(); ++i) {
    double m = 1.0;
    if (rewards[i] > prior.mu0 + band)
      m = 1.0 + cfg.gamma;
    else if (std::abs(rewards[i] - prior.mu0) <= band)
      m = 1.0 / (1.0 + cfg.gamma);
    out[i] = advantages[i] * m;
  }
  recenter(out);
  return out;
}

double minnorm_value(const ObjectiveSet& objs, std::span<const double> c) {
  const std::size_t n = objs.advantages.size();
  if (c.size() != n) throw ConfigError("minnorm_value: weight length mismatch");
  const std::size_t g = objs.advantages.front().size();
  double value = 0.0;
  for (std::size_t k = 0; k < g; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += c[i] * objs.advantages[i][k];
    value += s * s;
  }
  return value;
}

namespace {

constexpr double kRidge = 1e-12;

// Euclidean projection onto the probability simplex.
std::vector<double> project_simplex(std::vector<double> v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0;
  double theta = 0.0;
  int rho = 0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    css += u[j];
    const double t = (css - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) {
      rho = static_cast<int>(j + 1);
      theta = t;
    }
  }
  (void)rho;
  for (double& x : v) x = std::max(0.0, x - theta);
  return v;
}

}  // namespace

SimplexWeights joint_minnorm_weights(const ObjectiveSet& objs) {
  const std::size_t n = objs.advantages.size();
  if (n < 1) throw ConfigError("joint_minnorm_weights: need N >= 1");
  const std::size_t g = objs.advantages.front().size();
  if (g < 2) throw ConfigError("joint_minnorm_weights: need G >= 2");
  for (const auto& row : objs.advantages) {
    if (row.size() != g) throw ConfigError("joint_minnorm_weights: ragged rows");
    if (!all_finite(row)) throw NumericError("joint_minnorm_weights: non-finite row");
  }

  if (n == 1) return SimplexWeights{{1.0}};

  // Gram matrix K_ij = <A_i, A_j>.
  std::vector<std::vector<double>> gram(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < g; ++k)
        s += objs.advantages[i][k] * objs.advantages[j][k];
      gram[i][j] = gram[j][i] = s;
    }

  const double uniform = 1.0 / static_cast<double>(n);

  if (n == 2) {
    // One free variable: c = (x, 1-x). Exact minimizer of the quadratic,
    // clamped to [0, 1]; the ridge resolves the degenerate case.
    const double a = gram[0][0] - 2.0 * gram[0][1] + gram[1][1] + 2.0 * kRidge;
    const double b = gram[0][1] - gram[1][1] + kRidge;
    double x = a > 0.0 ? std::clamp(-b / a, 0.0, 1.0) : uniform;
    return SimplexWeights{{x, 1.0 - x}};
  }

  // Projected gradient on f(c) = c'Kc + ridge*||c - u||^2 from the uniform
  // point. Fixed step 1/L with L from the row-sum bound on K.
  double l = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::abs(gram[i][j]);
    l = std::max(l, row);
  }
  const double step = 1.0 / (2.0 * (l + kRidge) + 1e-30);

  std::vector<double> c(n, uniform);
  std::vector<double> grad(n), next(n);
  for (int it = 0; it < 200000; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += gram[i][j] * c[j];
      grad[i] = 2.0 * s + 2.0 * kRidge * (c[i] - uniform);
    }
    for (std::size_t i = 0; i < n; ++i) next[i] = c[i] - step * grad[i];
    next = project_simplex(std::move(next));
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) delta += std::abs(next[i] - c[i]);
    c = next;
    if (delta < 1e-14) break;
  }
  return SimplexWeights{c};
}

double combined_objective(std::span<const double> per_objective_losses,
                          const SimplexWeights& c) {
  if (per_objective_losses.size() != c.c.size())
    throw ConfigError("combined_objective: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < c.c.size(); ++i)
    s += c.c[i] * per_objective_losses[i];
  return s;
}

IterationResult grpo_iteration(const toygen::PolicyParams& policy,
                               const toygen::PolicyParams& reference,
                               std::span<const toygen::PromptSpec> prompts,
                               const IterationConfig& cfg) {
  if (cfg.group_size < 2) throw ConfigError("grpo_iteration: G must be >= 2");
  if (prompts.empty()) throw ConfigError("grpo_iteration: no prompts");
  if (cfg.bpgo.has_value() && !cfg.prior.has_value())
    throw ConfigError("grpo_iteration: bpgo requires a prior anchor");
  toygen::validate_policy(policy);
  toygen::validate_policy(reference);
  require_same_dims(policy.mean.dims(), reference.mean.dims(), "grpo_iteration");

  IterationResult out;
  out.stats.prompts.reserve(prompts.size());

  Grid total_grad(policy.mean.dims(), 0.0);
  double objective = 0.0;
  const double kl = toygen::kl_to_reference(policy, reference);

  for (std::size_t p = 0; p < prompts.size(); ++p) {
    const std::uint64_t group_seed = CounterRng::derive(cfg.seed, p);
    const auto group =
        toygen::sample_group(policy, prompts[p], cfg.group_size, group_seed);

    PromptIterationStats ps;
    ps.prompt_index = p;
    ps.kl = kl;

    const std::size_t g = group.samples.size();
    std::vector<double> scalar(g);
    for (int ch = 0; ch < 3; ++ch) {
      std::vector<double> vals(g);
      for (std::size_t i = 0; i < g; ++i)
        vals[i] = group.samples[i].rewards.channel(ch);
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(g);
      double sq = 0.0;
      for (double v : vals) sq += (v - mean) * (v - mean);
      const double sd = std::sqrt(sq / static_cast<double>(g));
      if (ch == 0) { ps.reward_mean.fidelity = mean; ps.reward_std.fidelity = sd; }
      if (ch == 1) { ps.reward_mean.temporal = mean; ps.reward_std.temporal = sd; }
      if (ch == 2) { ps.reward_mean.semantic = mean; ps.reward_std.semantic = sd; }
    }
    for (std::size_t i = 0; i < g; ++i) {
      const auto& r = group.samples[i].rewards;
      scalar[i] = cfg.channel_weights.fidelity * r.fidelity +
                  cfg.channel_weights.temporal * r.temporal +
                  cfg.channel_weights.semantic * r.semantic;
    }
    {
      double mean = 0.0;
      for (double v : scalar) mean += v;
      mean /= static_cast<double>(g);
      double sq = 0.0;
      for (double v : scalar) sq += (v - mean) * (v - mean);
      ps.scalar_mean = mean;
      ps.scalar_std = std::sqrt(sq / static_cast<double>(g));
    }

    std::vector<double> adv = grpo_advantages(scalar, cfg.adv);
    double ras = 1.0;
    if (cfg.bpgo.has_value()) {
      adv = crt_transform(scalar, adv, *cfg.prior, *cfg.bpgo);
      ras = ras_group_weight(ps.scalar_mean, ps.scalar_std, *cfg.prior, *cfg.bpgo);
    }
    ps.ras_weight = ras;
    ps.scalar_rewards = scalar;
    ps.advantages = adv;

    std::vector<AdvantageMap> maps;
    maps.reserve(g);
    for (std::size_t i = 0; i < g; ++i)
      maps.push_back(build_advantage_map(group.samples[i].video, cfg.maps));

    const auto vr = vipo_objective(group, maps, adv, policy);
    objective += ras * vr.objective;
    for (const auto& sg : vr.mean_gradients)
      for (std::size_t c = 0; c < total_grad.size(); ++c)
        total_grad[c] += ras * sg[c];

    out.stats.prompts.push_back(std::move(ps));
  }

  if (cfg.adv.kl_coeff != 0.0) {
    const Grid kg = toygen::kl_mean_grad(policy, reference);
    for (std::size_t c = 0; c < total_grad.size(); ++c)
      total_grad[c] -= cfg.adv.kl_coeff * kg[c];
    objective -= cfg.adv.kl_coeff * kl;
  }

  out.stats.kl = kl;
  out.stats.objective = objective;
  out.policy =
      toygen::policy_update(policy, {std::move(total_grad), 0.0}, cfg.lr);
  return out;
}

}  // namespace vidpost::advantage
