// SPDX-License-Identifier: Apache-2.0
#include "vidpost/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "vidpost/rng.hpp"

namespace vidpost::dpo {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr int kShuffleWindow = 4;

double softplus(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct BranchForward {
  std::vector<double> residual;   // d = y - mu
  std::vector<double> cell_logp;  // l = c0 - d^2/(2 s^2)
  double logp = 0.0;
};

BranchForward branch_forward(const Tape& tape, const toygen::PolicyParams& policy,
                             const toygen::VideoTensor& video) {
  require_same_dims(video.dims(), tape.dims(), "dpo.branch");
  require_same_dims(policy.mean.dims(), tape.dims(), "dpo.policy");
  const std::size_t n = static_cast<std::size_t>(tape.cells());
  const double s2 = policy.sigma * policy.sigma;
  const double c0 = -0.5 * (kLog2Pi + std::log(s2));

  BranchForward f;
  f.residual.resize(n);
  f.cell_logp.resize(n);
  double sum = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const double d = video[c] - policy.mean[c];
    f.residual[c] = d;
    const double l = c0 - d * d / (2.0 * s2);
    f.cell_logp[c] = l;
    sum += l;
  }
  f.logp = sum;
  return f;
}

/// One branch backward. Seeds dLoss/dlogp, walks the tape in reverse,
/// accumulates into the flat parameter gradient, and meters intermediate
/// units and flops. Returns the units this branch allocated; the caller
/// releases them at the end of the owning graph task.
std::int64_t branch_backward(const Tape& tape, const toygen::PolicyParams& policy,
                             const BranchForward& fwd, double seed,
                             std::vector<double>& param_grad, UnitMeter& meter) {
  const std::size_t n = static_cast<std::size_t>(tape.cells());
  const double sigma = policy.sigma;
  const double s2 = sigma * sigma;
  const double s3 = s2 * sigma;
  const double inv_sigma = 1.0 / sigma;
  meter.flops += 3;
  std::int64_t allocated = 0;

  // ReduceSum backward: broadcast the seed over cells.
  std::vector<double> grad_l(n);
  meter.allocate(static_cast<std::int64_t>(n));
  allocated += static_cast<std::int64_t>(n);
  for (std::size_t c = 0; c < n; ++c) grad_l[c] = seed;
  meter.flops += static_cast<std::int64_t>(n);

  // GaussCellLogDensity backward: dl/dd = -d/s^2, dl/dsigma accumulated.
  std::vector<double> grad_d(n);
  meter.allocate(static_cast<std::int64_t>(n));
  allocated += static_cast<std::int64_t>(n);
  double grad_sigma = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const double d = fwd.residual[c];
    grad_d[c] = grad_l[c] * (-d / s2);
    grad_sigma += grad_l[c] * (d * d / s3 - inv_sigma);
  }
  meter.flops += 8 * static_cast<std::int64_t>(n);
  param_grad[n] += grad_sigma;

  // AffineResidual backward: d(y - mu)/dmu = -1, into the parameter buffer.
  for (std::size_t c = 0; c < n; ++c) param_grad[c] += -grad_d[c];
  meter.flops += 2 * static_cast<std::int64_t>(n);

  return allocated;
}

struct Margins {
  double margin = 0.0;
  double eta = 0.0;
  double loss = 0.0;
};

Margins head(const BranchForward& fw, const BranchForward& fl,
             const toygen::PolicyParams& reference, const PreferencePair& pair,
             const Tape& tape, const DpoConfig& cfg) {
  if (!(cfg.beta > 0.0)) throw ConfigError("dpo: beta must be > 0");
  const auto rw = branch_forward(tape, reference, pair.winner);
  const auto rl = branch_forward(tape, reference, pair.loser);
  Margins m;
  m.margin = preference_margin(fw.logp, rw.logp, fl.logp, rl.logp);
  m.eta = eta_coefficient(m.margin, cfg.beta);
  m.loss = dpo_loss(m.margin, cfg.beta);
  return m;
}

void validate_pair(const PreferencePair& pair) {
  require_same_dims(pair.winner.dims(), pair.loser.dims(), "preference pair");
  if (!all_finite(pair.winner) || !all_finite(pair.loser))
    throw NumericError("preference pair: non-finite video");
}

}  // namespace

double preference_margin(double logp_w_theta, double logp_w_ref,
                         double logp_l_theta, double logp_l_ref) {
  return (logp_w_theta - logp_w_ref) - (logp_l_theta - logp_l_ref);
}

double dpo_loss(double margin, double beta) {
  if (!(beta > 0.0)) throw ConfigError("dpo_loss: beta must be > 0");
  return softplus(-beta * margin);
}

double eta_coefficient(double margin, double beta) {
  if (!(beta > 0.0)) throw ConfigError("eta_coefficient: beta must be > 0");
  return sigmoid(-beta * margin) * beta;
}

double dpo_loss_value(const PreferencePair& pair,
                      const toygen::PolicyParams& policy,
                      const toygen::PolicyParams& reference,
                      const DpoConfig& cfg) {
  validate_pair(pair);
  const Tape tape = Tape::gaussian_logp(pair.winner.dims());
  const auto fw = branch_forward(tape, policy, pair.winner);
  const auto fl = branch_forward(tape, policy, pair.loser);
  return head(fw, fl, reference, pair, tape, cfg).loss;
}

BackwardResult fused_backward(const Tape& tape, const PreferencePair& pair,
                              const toygen::PolicyParams& policy,
                              const toygen::PolicyParams& reference,
                              const DpoConfig& cfg) {
  validate_pair(pair);
  toygen::validate_policy(policy);
  toygen::validate_policy(reference);

  const std::size_t p = static_cast<std::size_t>(tape.param_units());
  BackwardResult out;
  out.param_gradient.assign(p, 0.0);

  UnitMeter meter;
  meter.allocate(tape.param_units());  // shared parameter-gradient buffer

  const auto fw = branch_forward(tape, policy, pair.winner);
  const auto fl = branch_forward(tape, policy, pair.loser);
  const Margins m = head(fw, fl, reference, pair, tape, cfg);

  // One graph task over both branches: intermediates from the winner branch
  // stay live while the loser branch runs.
  const std::int64_t units_w =
      branch_backward(tape, policy, fw, -m.eta, out.param_gradient, meter);
  const std::int64_t units_l =
      branch_backward(tape, policy, fl, m.eta, out.param_gradient, meter);
  meter.release(units_w + units_l);  // task completion
  meter.release(tape.param_units());

  if (!all_finite(out.param_gradient))
    throw NumericError("fused_backward: non-finite gradient");

  out.trace.peak_live_units = meter.peak;
  out.trace.branch_units = {units_w, units_l};
  out.trace.flops = meter.flops;
  out.loss = m.loss;
  out.margin = m.margin;
  out.eta = m.eta;
  return out;
}

BackwardResult decoupled_backward(const Tape& tape, const PreferencePair& pair,
                                  const toygen::PolicyParams& policy,
                                  const toygen::PolicyParams& reference,
                                  const DpoConfig& cfg) {
  validate_pair(pair);
  toygen::validate_policy(policy);
  toygen::validate_policy(reference);

  const std::size_t p = static_cast<std::size_t>(tape.param_units());
  BackwardResult out;
  out.param_gradient.assign(p, 0.0);

  UnitMeter meter;
  meter.allocate(tape.param_units());

  // eta is precomputed in a non-gradient context; nothing is retained here.
  const auto fw = branch_forward(tape, policy, pair.winner);
  const auto fl = branch_forward(tape, policy, pair.loser);
  const Margins m = head(fw, fl, reference, pair, tape, cfg);

  // Independent task per branch; each releases before the next begins.
  const std::int64_t units_w =
      branch_backward(tape, policy, fw, -m.eta, out.param_gradient, meter);
  meter.release(units_w);
  const std::int64_t units_l =
      branch_backward(tape, policy, fl, m.eta, out.param_gradient, meter);
  meter.release(units_l);
  meter.release(tape.param_units());

  if (!all_finite(out.param_gradient))
    throw NumericError("decoupled_backward: non-finite gradient");

  out.trace.peak_live_units = meter.peak;
  out.trace.branch_units = {units_w, units_l};
  out.trace.flops = meter.flops;
  out.loss = m.loss;
  out.margin = m.margin;
  out.eta = m.eta;
  return out;
}

int freeze_index(int t_count, std::uint64_t seed) {
  if (t_count < 2) throw ConfigError("freeze_index: T must be >= 2");
  CounterRng rng(seed);
  return static_cast<int>(rng.uniform_int(0, static_cast<std::uint64_t>(t_count - 2)));
}

toygen::VideoTensor make_temporal_negative(const toygen::VideoTensor& video,
                                           NegativeKind kind, std::uint64_t seed) {
  const Dims d = video.dims();
  if (d.t < 2) throw ConfigError("make_temporal_negative: T must be >= 2");
  const std::size_t frame = static_cast<std::size_t>(d.h) * d.w;

  auto copy_frame = [&](toygen::VideoTensor& dst, int to, const toygen::VideoTensor& src,
                        int from) {
    const std::size_t db = static_cast<std::size_t>(to) * frame;
    const std::size_t sb = static_cast<std::size_t>(from) * frame;
    for (std::size_t c = 0; c < frame; ++c) dst[db + c] = src[sb + c];
  };

  toygen::VideoTensor out(d);
  switch (kind) {
    case NegativeKind::Reversal:
      for (int t = 0; t < d.t; ++t) copy_frame(out, t, video, d.t - 1 - t);
      return out;
    case NegativeKind::Shuffle: {
      CounterRng rng(seed);
      std::vector<int> order(static_cast<std::size_t>(d.t));
      for (int t = 0; t < d.t; ++t) order[static_cast<std::size_t>(t)] = t;
      for (int base = 0; base < d.t; base += kShuffleWindow) {
        const int end = std::min(base + kShuffleWindow, d.t);
        for (int i = end - 1; i > base; --i) {
          const int j = base + static_cast<int>(rng.uniform_int(
                                   0, static_cast<std::uint64_t>(i - base)));
          std::swap(order[static_cast<std::size_t>(i)],
                    order[static_cast<std::size_t>(j)]);
        }
      }
      for (int t = 0; t < d.t; ++t) copy_frame(out, t, video, order[static_cast<std::size_t>(t)]);
      return out;
    }
    case NegativeKind::Freeze: {
      const int tstar = freeze_index(d.t, seed);
      for (int t = 0; t < d.t; ++t) copy_frame(out, t, video, std::min(t, tstar));
      return out;
    }
  }
  throw ConfigError("make_temporal_negative: invalid kind");
}

}  // namespace vidpost::dpo
