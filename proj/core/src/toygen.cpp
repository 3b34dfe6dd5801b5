// SPDX-License-Identifier: Apache-2.0
#include "vidpost/toygen.hpp"

#include <cmath>
#include <cstddef>

#include "vidpost/rng.hpp"

namespace vidpost::toygen {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)
constexpr double kSigmaFloor = 1e-6;

double norm(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x * x;
  return std::sqrt(s);
}
}  // namespace

void validate_policy(const PolicyParams& policy) {
  if (!policy.mean.dims().valid()) throw ConfigError("policy: invalid dims");
  if (!(policy.sigma > 0.0)) throw ConfigError("policy: sigma must be > 0");
  if (!all_finite(policy.mean)) throw NumericError("policy: non-finite mean");
}

void validate_prompt(const PromptSpec& prompt, const Dims& dims) {
  require_same_dims(prompt.target.dims(), dims, "prompt.target");
  if (prompt.embedding.empty() || norm(prompt.embedding) <= 0.0)
    throw ConfigError("prompt: embedding norm must be > 0");
  if (!std::isfinite(prompt.drift)) throw NumericError("prompt: non-finite drift");
}

GroupRollout sample_group(const PolicyParams& policy, const PromptSpec& prompt,
                          int g, std::uint64_t seed) {
  validate_policy(policy);
  validate_prompt(prompt, policy.mean.dims());
  if (g < 1) throw ConfigError("sample_group: g must be >= 1");

  GroupRollout out;
  out.prompt = prompt;
  out.seed = seed;
  out.samples.reserve(static_cast<std::size_t>(g));

  CounterRng rng(seed);
  const std::size_t n = policy.mean.size();
  for (int i = 0; i < g; ++i) {
    Sample s;
    s.video = Grid(policy.mean.dims());
    for (std::size_t c = 0; c < n; ++c)
      s.video[c] = policy.mean[c] + policy.sigma * rng.normal();
    auto lp = log_prob(policy, s.video);
    s.logp_cells = std::move(lp.cells);
    s.logp_sum = lp.sum;
    s.rewards = reward_channels(s.video, prompt);
    out.samples.push_back(std::move(s));
  }
  return out;
}

RewardVector reward_channels(const VideoTensor& video, const PromptSpec& prompt) {
  require_same_dims(video.dims(), prompt.target.dims(), "reward_channels");
  const Dims d = video.dims();
  const std::size_t n = video.size();

  RewardVector r;

  double sq = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const double e = video[c] - prompt.target[c];
    sq += e * e;
  }
  r.fidelity = -sq / static_cast<double>(n);

  if (d.t >= 2) {
    const std::size_t frame = static_cast<std::size_t>(d.h) * d.w;
    double acc = 0.0;
    for (int t = 1; t < d.t; ++t) {
      const std::size_t base = static_cast<std::size_t>(t) * frame;
      for (std::size_t c = 0; c < frame; ++c)
        acc += std::abs(video[base + c] - video[base - frame + c] - prompt.drift);
    }
    r.temporal = -acc / (static_cast<double>(d.t - 1) * frame);
  } else {
    r.temporal = 0.0;  // no transitions to score
  }

  const auto pooled = pooled_semantic(video, prompt.embedding.size());
  const double np = norm(pooled);
  const double ne = norm(prompt.embedding);
  if (np > 0.0 && ne > 0.0) {
    double dot = 0.0;
    for (std::size_t i = 0; i < pooled.size(); ++i)
      dot += pooled[i] * prompt.embedding[i];
    r.semantic = dot / (np * ne);
  } else {
    r.semantic = 0.0;
  }
  return r;
}

std::vector<double> pooled_semantic(const VideoTensor& video, std::size_t len) {
  const Dims d = video.dims();
  const std::size_t frame = static_cast<std::size_t>(d.h) * d.w;
  std::vector<double> pooled(len, 0.0);
  const std::size_t frames = std::min<std::size_t>(len, static_cast<std::size_t>(d.t));
  for (std::size_t t = 0; t < frames; ++t) {
    double s = 0.0;
    for (std::size_t c = 0; c < frame; ++c) s += video[t * frame + c];
    pooled[t] = s / static_cast<double>(frame);
  }
  return pooled;
}

LogProb log_prob(const PolicyParams& policy, const VideoTensor& video) {
  validate_policy(policy);
  require_same_dims(video.dims(), policy.mean.dims(), "log_prob");

  const double sigma2 = policy.sigma * policy.sigma;
  const double cell_const = -0.5 * (kLog2Pi + std::log(sigma2));
  const std::size_t n = video.size();

  LogProb out;
  out.cells = Grid(video.dims());
  double sum = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const double d = video[c] - policy.mean[c];
    const double lp = cell_const - d * d / (2.0 * sigma2);
    out.cells[c] = lp;
    sum += lp;
  }
  out.sum = sum;
  return out;
}

Grid log_prob_mean_grad(const PolicyParams& policy, const VideoTensor& video) {
  validate_policy(policy);
  require_same_dims(video.dims(), policy.mean.dims(), "log_prob_mean_grad");
  const double sigma2 = policy.sigma * policy.sigma;
  Grid g(video.dims());
  for (std::size_t c = 0; c < video.size(); ++c)
    g[c] = (video[c] - policy.mean[c]) / sigma2;
  return g;
}

double kl_to_reference(const PolicyParams& policy, const PolicyParams& reference) {
  validate_policy(policy);
  validate_policy(reference);
  require_same_dims(policy.mean.dims(), reference.mean.dims(), "kl_to_reference");

  const double st = policy.sigma;
  const double sr = reference.sigma;
  const double per_cell = std::log(sr / st) + (st * st) / (2.0 * sr * sr) - 0.5;
  double sq = 0.0;
  for (std::size_t c = 0; c < policy.mean.size(); ++c) {
    const double d = policy.mean[c] - reference.mean[c];
    sq += d * d;
  }
  return static_cast<double>(policy.mean.size()) * per_cell + sq / (2.0 * sr * sr);
}

Grid kl_mean_grad(const PolicyParams& policy, const PolicyParams& reference) {
  require_same_dims(policy.mean.dims(), reference.mean.dims(), "kl_mean_grad");
  const double sr2 = reference.sigma * reference.sigma;
  Grid g(policy.mean.dims());
  for (std::size_t c = 0; c < policy.mean.size(); ++c)
    g[c] = (policy.mean[c] - reference.mean[c]) / sr2;
  return g;
}

PolicyParams policy_update(const PolicyParams& policy, const PolicyGradient& grad,
                           double lr) {
  validate_policy(policy);
  require_same_dims(grad.mean.dims(), policy.mean.dims(), "policy_update");
  if (lr < 0.0) throw ConfigError("policy_update: lr must be >= 0");
  if (!all_finite(grad.mean) || !std::isfinite(grad.sigma))
    throw NumericError("policy_update: non-finite gradient");

  PolicyParams next = policy;
  for (std::size_t c = 0; c < next.mean.size(); ++c)
    next.mean[c] += lr * grad.mean[c];
  next.sigma = std::max(kSigmaFloor, policy.sigma + lr * grad.sigma);
  return next;
}

}  // namespace vidpost::toygen
