// SPDX-License-Identifier: Apache-2.0
#include "vidpost/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "vidpost/advantage.hpp"
#include "vidpost/curriculum.hpp"
#include "vidpost/dpo.hpp"
#include "vidpost/evalkit.hpp"
#include "vidpost/pipeline_sim.hpp"
#include "vidpost/rng.hpp"
#include "vidpost/sched.hpp"
#include "vidpost/serialize.hpp"
#include "vidpost/toygen.hpp"

namespace vidpost::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Input problems (missing/malformed files) are usage errors: exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Dims parse_dims(const std::string& text) {
  Dims d;
  char x1 = 0, x2 = 0;
  std::istringstream ss(text);
  if (!(ss >> d.t >> x1 >> d.h >> x2 >> d.w) || x1 != 'x' || x2 != 'x' ||
      !d.valid())
    throw UsageError("dims must look like 8x8x8");
  return d;
}

std::vector<double> parse_csv_doubles(const std::string& text, std::size_t n,
                                      const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  if (out.size() != n)
    throw UsageError(std::string(what) + ": expected " + std::to_string(n) +
                     " comma-separated values");
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoull(tok));
  if (out.empty()) throw UsageError("empty seed list");
  return out;
}

std::string load_input_file(const fs::path& path, const char* what) {
  try {
    return serialize::read_text_file(path);
  } catch (const IoError& e) {
    throw UsageError(std::string(what) + ": " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());
}

/// Fixed synthetic prompt: a smooth separable intensity pattern whose
/// semantic embedding is its own pooled signature, so every channel has an
/// attainable optimum.
toygen::PromptSpec synthetic_prompt(const Dims& d, double drift) {
  toygen::PromptSpec p;
  p.target = Grid(d);
  for (int t = 0; t < d.t; ++t)
    for (int h = 0; h < d.h; ++h)
      for (int w = 0; w < d.w; ++w)
        p.target.at(t, h, w) =
            0.5 + 0.4 * std::sin(2.0 * kPi * (h + w) / (d.h + d.w)) *
                      std::cos(kPi * t / d.t) +
            drift * t;
  p.drift = drift;
  p.embedding = toygen::pooled_semantic(p.target, 8);
  if (p.embedding.size() < 8) p.embedding.resize(8, 0.0);
  return p;
}

struct GrpoOptions {
  std::string dims = "8x8x8";
  int group_size = 8;
  int iters = 200;
  std::uint64_t seed = 1;
  std::string seeds;  // optional comma list; overrides seed
  int jobs = 1;
  double lr = 6.0;
  double sigma = 0.3;
  double kl_coeff = 0.0;
  double epsilon = 1e-8;
  std::string weights = "1,0,0";
  bool use_curriculum = false;
  double tau_sat = 0.01;
  int window = 5;
  int min_dwell = 10;
  bool use_bpgo = false;
  double lambda_mean = 0.0;
  double lambda_var = 0.0;
  double gamma = 0.0;
  double kappa = 0.0;
  double prior_mu0 = 0.0;
  double prior_sigma0 = 1.0;
  std::string map_provider = "uniform";
  std::string prompt_file;
  std::string policy_file;
  std::string out;
};

void run_grpo_seed(const GrpoOptions& opt, std::uint64_t seed, const fs::path& dir) {
  ensure_dir(dir);
  const Dims d = parse_dims(opt.dims);

  toygen::PromptSpec prompt;
  if (opt.prompt_file.empty())
    prompt = synthetic_prompt(d, 0.0);
  else
    prompt = serialize::prompt_from_json(load_input_file(opt.prompt_file, "prompt"));
  require_same_dims(prompt.target.dims(), d, "prompt vs --dims");

  toygen::PolicyParams policy;
  if (opt.policy_file.empty()) {
    policy.mean = Grid(d, 0.0);
    policy.sigma = opt.sigma;
  } else {
    policy = serialize::policy_from_json(load_input_file(opt.policy_file, "policy"));
    require_same_dims(policy.mean.dims(), d, "policy vs --dims");
  }
  const toygen::PolicyParams reference = policy;

  advantage::IterationConfig cfg;
  cfg.group_size = opt.group_size;
  cfg.adv.epsilon = opt.epsilon;
  cfg.adv.kl_coeff = opt.kl_coeff;
  cfg.lr = opt.lr;
  cfg.maps = opt.map_provider == "temporal-energy"
                 ? advantage::MapProvider::TemporalEnergy
                 : advantage::MapProvider::Uniform;
  if (opt.use_bpgo) {
    cfg.bpgo = advantage::BpgoConfig{opt.lambda_mean, opt.lambda_var, opt.gamma,
                                     opt.kappa};
    cfg.prior = advantage::PriorAnchor{opt.prior_mu0, opt.prior_sigma0,
                                       advantage::PriorAnchor::Source::Fixed};
  }
  const auto fixed_weights = parse_csv_doubles(opt.weights, 3, "--weights");

  curriculum::CurriculumConfig ccfg{opt.tau_sat, opt.window, opt.min_dwell};
  curriculum::CurriculumState cstate;
  if (opt.use_curriculum) curriculum::validate_config(ccfg);

  std::string train;
  std::string events;
  const std::vector<toygen::PromptSpec> prompts{prompt};

  for (int it = 0; it < opt.iters; ++it) {
    if (opt.use_curriculum) {
      cfg.channel_weights = curriculum::phase_weights(cstate.phase);
    } else {
      cfg.channel_weights = {fixed_weights[0], fixed_weights[1], fixed_weights[2]};
    }
    cfg.seed = CounterRng::derive(seed, static_cast<std::uint64_t>(it) + 1);

    const auto result = advantage::grpo_iteration(policy, reference, prompts, cfg);
    for (const auto& ps : result.stats.prompts)
      train += serialize::train_record_line(it, ps);

    if (opt.use_curriculum) {
      const int ch = curriculum::active_channel(cstate.phase);
      double std_sum = 0.0;
      for (const auto& ps : result.stats.prompts)
        std_sum += ps.reward_std.channel(ch);
      const double mean_std = std_sum / static_cast<double>(result.stats.prompts.size());
      const auto before = cstate.phase;
      cstate = curriculum::update_curriculum(cstate, mean_std, ccfg);
      if (cstate.phase != before)
        events += serialize::curriculum_event_line(
            it, static_cast<int>(before), static_cast<int>(cstate.phase), mean_std);
    }
    policy = result.policy;
  }

  std::vector<serialize::ManifestEntry> man{
      {"command", "grpo-run"},
      {"dims", opt.dims},
      {"epsilon", serialize::format_double(opt.epsilon)},
      {"group_size", std::to_string(opt.group_size)},
      {"iters", std::to_string(opt.iters)},
      {"kl_coeff", serialize::format_double(opt.kl_coeff)},
      {"lr", serialize::format_double(opt.lr)},
      {"map_provider", opt.map_provider},
      {"policy", opt.policy_file.empty() ? "zero-init" : opt.policy_file},
      {"prompt", opt.prompt_file.empty() ? "synthetic" : opt.prompt_file},
      {"sigma", serialize::format_double(opt.sigma)},
  };
  if (opt.use_curriculum) {
    man.push_back({"curriculum", "on"});
    man.push_back({"min_dwell", std::to_string(opt.min_dwell)});
    man.push_back({"tau_sat", serialize::format_double(opt.tau_sat)});
    man.push_back({"window", std::to_string(opt.window)});
  } else {
    man.push_back({"weights", opt.weights});
  }
  if (opt.use_bpgo) {
    man.push_back({"bpgo", "on"});
    man.push_back({"gamma", serialize::format_double(opt.gamma)});
    man.push_back({"kappa", serialize::format_double(opt.kappa)});
    man.push_back({"lambda_mean", serialize::format_double(opt.lambda_mean)});
    man.push_back({"lambda_var", serialize::format_double(opt.lambda_var)});
    man.push_back({"prior_mu0", serialize::format_double(opt.prior_mu0)});
    man.push_back({"prior_sigma0", serialize::format_double(opt.prior_sigma0)});
  }

  serialize::write_text_file(dir / "manifest.json", serialize::manifest_json(man, seed));
  serialize::write_text_file(dir / "train.jsonl", train);
  if (opt.use_curriculum)
    serialize::write_text_file(dir / "events.jsonl", events);
  serialize::write_text_file(dir / "policy.json", serialize::policy_to_json(policy));

  evalkit::ReportSources sources;
  if (opt.iters > 0) sources.train_logs.push_back(dir / "train.jsonl");
  evalkit::emit_report(sources, dir / "report.json", evalkit::ReportFormat::Json);
}

int cmd_grpo(const GrpoOptions& opt) {
  std::vector<std::uint64_t> seeds =
      opt.seeds.empty() ? std::vector<std::uint64_t>{opt.seed}
                        : parse_seed_list(opt.seeds);

  const fs::path out(opt.out);
  if (seeds.size() == 1) {
    run_grpo_seed(opt, seeds[0], out);
    std::cout << "grpo-run: wrote " << (out / "train.jsonl").string() << "\n";
    return 0;
  }

  // Independent per-seed runs; each writes its own subdirectory.
  std::mutex err_mutex;
  std::vector<std::string> errors;
  std::size_t next = 0;
  std::mutex next_mutex;
  const int jobs = std::max(1, opt.jobs);
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) {
    pool.emplace_back([&]() {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard lk(next_mutex);
          if (next >= seeds.size()) return;
          i = next++;
        }
        try {
          run_grpo_seed(opt, seeds[i], out / ("seed-" + std::to_string(seeds[i])));
        } catch (const std::exception& e) {
          std::lock_guard lk(err_mutex);
          errors.emplace_back(e.what());
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (!errors.empty()) {
    for (const auto& e : errors) std::cerr << "error: " << e << "\n";
    return 1;
  }
  std::cout << "grpo-run: wrote " << seeds.size() << " seed directories under "
            << out.string() << "\n";
  return 0;
}

struct DpoOptions {
  std::string dims = "8x6x6";
  int iters = 50;
  std::uint64_t seed = 1;
  double lr = 0.05;
  double beta_start = 1.0;
  double beta_end = 1.0;
  double drift = 0.05;
  double sigma = 1.0;
  double resolution_scale = 1.0;  // scales H and W (mixed-resolution knob)
  std::string negative = "reversal";
  std::string mode = "decoupled";
  std::string out;
};

dpo::NegativeKind parse_negative(const std::string& text) {
  if (text == "reversal") return dpo::NegativeKind::Reversal;
  if (text == "shuffle") return dpo::NegativeKind::Shuffle;
  if (text == "freeze") return dpo::NegativeKind::Freeze;
  throw UsageError("--negative must be reversal, shuffle or freeze");
}

int cmd_dpo(const DpoOptions& opt) {
  const fs::path dir(opt.out);
  ensure_dir(dir);

  Dims d = parse_dims(opt.dims);
  if (opt.resolution_scale != 1.0) {
    if (!(opt.resolution_scale > 0.0))
      throw UsageError("--resolution-scale must be > 0");
    d.h = std::max(1, static_cast<int>(std::lround(d.h * opt.resolution_scale)));
    d.w = std::max(1, static_cast<int>(std::lround(d.w * opt.resolution_scale)));
  }
  if (d.t < 2) throw UsageError("dpo-run needs T >= 2");

  const dpo::NegativeKind kind = parse_negative(opt.negative);
  const bool fused = opt.mode == "fused";
  if (!fused && opt.mode != "decoupled")
    throw UsageError("--mode must be fused or decoupled");

  const toygen::PromptSpec prompt = synthetic_prompt(d, opt.drift);
  toygen::PolicyParams policy{Grid(d, 0.0), opt.sigma};
  const toygen::PolicyParams reference = policy;
  const dpo::Tape tape = dpo::Tape::gaussian_logp(d);

  std::string train;
  std::string pairs;
  for (int it = 0; it < opt.iters; ++it) {
    const double frac =
        opt.iters > 1 ? static_cast<double>(it) / (opt.iters - 1) : 0.0;
    const double beta = opt.beta_start + (opt.beta_end - opt.beta_start) * frac;

    dpo::PreferencePair pair;
    pair.prompt = prompt;
    pair.winner = prompt.target;
    pair.loser = dpo::make_temporal_negative(
        pair.winner, kind, CounterRng::derive(opt.seed, static_cast<std::uint64_t>(it)));
    pair.provenance = dpo::Provenance::Synthetic;
    pairs += serialize::preference_pair_line(pair);

    const dpo::DpoConfig cfg{beta};
    const auto result = fused
                            ? dpo::fused_backward(tape, pair, policy, reference, cfg)
                            : dpo::decoupled_backward(tape, pair, policy, reference, cfg);
    train += serialize::dpo_record_line(it, beta, result);

    // Descent on the loss.
    toygen::PolicyGradient grad{Grid(d), 0.0};
    const std::size_t n = policy.mean.size();
    for (std::size_t c = 0; c < n; ++c) grad.mean[c] = -result.param_gradient[c];
    grad.sigma = -result.param_gradient[n];
    policy = toygen::policy_update(policy, grad, opt.lr);
  }

  const std::vector<serialize::ManifestEntry> man{
      {"beta_end", serialize::format_double(opt.beta_end)},
      {"beta_start", serialize::format_double(opt.beta_start)},
      {"command", "dpo-run"},
      {"dims", opt.dims},
      {"drift", serialize::format_double(opt.drift)},
      {"iters", std::to_string(opt.iters)},
      {"lr", serialize::format_double(opt.lr)},
      {"mode", opt.mode},
      {"negative", opt.negative},
      {"resolution_scale", serialize::format_double(opt.resolution_scale)},
      {"sigma", serialize::format_double(opt.sigma)},
  };
  serialize::write_text_file(dir / "manifest.json", serialize::manifest_json(man, opt.seed));
  serialize::write_text_file(dir / "train.jsonl", train);
  serialize::write_text_file(dir / "pairs.jsonl", pairs);
  serialize::write_text_file(dir / "policy.json", serialize::policy_to_json(policy));

  evalkit::ReportSources sources;
  if (opt.iters > 0) sources.train_logs.push_back(dir / "train.jsonl");
  evalkit::emit_report(sources, dir / "report.json", evalkit::ReportFormat::Json);
  std::cout << "dpo-run: wrote " << (dir / "train.jsonl").string() << "\n";
  return 0;
}

int cmd_sched_plan(const std::string& profiles_file, const std::string& out,
                   bool brute) {
  const auto profiles =
      serialize::profiles_from_json(load_input_file(profiles_file, "profiles"));
  const auto plan = sched::greedy_plan(profiles);
  const double serial = sched::serial_makespan(profiles);

  std::cout << "greedy makespan: " << plan.predicted_makespan
            << " s | serial: " << serial << " s | reduction: "
            << 100.0 * (1.0 - plan.predicted_makespan / serial) << "%\n";
  if (brute) {
    if (profiles.size() > 6) {
      std::cout << "brute-force skipped: |W| > 6\n";
    } else {
      const auto oracle = sched::brute_force_plan(profiles);
      std::cout << "brute-force makespan: " << oracle.predicted_makespan
                << " s | greedy gap: "
                << plan.predicted_makespan - oracle.predicted_makespan << " s\n";
    }
  }

  if (!out.empty()) {
    const fs::path dir(out);
    ensure_dir(dir);
    const std::vector<serialize::ManifestEntry> man{
        {"brute", brute ? "on" : "off"},
        {"command", "sched-plan"},
        {"profiles", profiles_file},
    };
    serialize::write_text_file(dir / "manifest.json", serialize::manifest_json(man, 0));
    serialize::write_text_file(dir / "plan.json", serialize::plan_to_json(plan, serial));
  }
  return 0;
}

struct SimOptions {
  std::string mode = "disaggregated";
  std::string reward_mode = "fixed";
  double rollout_s = 10.0;
  double reward_s = 10.0;
  double actor_s = 10.0;
  int rollout_nodes = 1;
  int reward_nodes = 1;
  int actor_nodes = 1;
  int iterations = 1;
  std::string profiles_file;
  bool events_csv = false;
  std::string out;
};

int cmd_sim(const SimOptions& opt) {
  sched::PipelineConfig cfg;
  cfg.rollout_s = opt.rollout_s;
  cfg.reward_s = opt.reward_s;
  cfg.actor_s = opt.actor_s;
  cfg.rollout_nodes = opt.rollout_nodes;
  cfg.reward_nodes = opt.reward_nodes;
  cfg.actor_nodes = opt.actor_nodes;
  cfg.iterations = opt.iterations;

  if (opt.mode == "disaggregated")
    cfg.mode = sched::PipelineMode::Disaggregated;
  else if (opt.mode == "colocated")
    cfg.mode = sched::PipelineMode::Colocated;
  else
    throw UsageError("--mode must be disaggregated or colocated");

  if (opt.reward_mode == "fixed") {
    cfg.reward_mode = sched::RewardMode::Fixed;
  } else {
    if (opt.profiles_file.empty())
      throw UsageError("--profiles required for reward mode " + opt.reward_mode);
    cfg.workers =
        serialize::profiles_from_json(load_input_file(opt.profiles_file, "profiles"));
    if (opt.reward_mode == "serial") {
      cfg.reward_mode = sched::RewardMode::Serial;
    } else if (opt.reward_mode == "planned") {
      cfg.reward_mode = sched::RewardMode::Planned;
      cfg.plan = sched::greedy_plan(cfg.workers);
    } else {
      throw UsageError("--reward-mode must be fixed, serial or planned");
    }
  }

  const auto report = sched::simulate_pipeline(cfg);
  std::cout << "makespan: " << report.makespan
            << " s | utilization: " << report.utilization << "\n";

  if (!opt.out.empty()) {
    const fs::path dir(opt.out);
    ensure_dir(dir);
    const std::vector<serialize::ManifestEntry> man{
        {"actor_nodes", std::to_string(opt.actor_nodes)},
        {"actor_s", serialize::format_double(opt.actor_s)},
        {"command", "sim-pipeline"},
        {"iterations", std::to_string(opt.iterations)},
        {"mode", opt.mode},
        {"profiles", opt.profiles_file.empty() ? "none" : opt.profiles_file},
        {"reward_mode", opt.reward_mode},
        {"reward_nodes", std::to_string(opt.reward_nodes)},
        {"reward_s", serialize::format_double(opt.reward_s)},
        {"rollout_nodes", std::to_string(opt.rollout_nodes)},
        {"rollout_s", serialize::format_double(opt.rollout_s)},
    };
    serialize::write_text_file(dir / "manifest.json", serialize::manifest_json(man, 0));
    serialize::write_text_file(dir / "sim_report.json",
                               serialize::sim_report_to_json(report));
    if (opt.events_csv)
      serialize::write_text_file(dir / "events.csv",
                                 serialize::sim_events_to_csv(report));
  }
  return 0;
}

int cmd_gsb(const std::string& in_file, const std::string& out,
            const std::string& format) {
  if (!fs::exists(in_file)) throw UsageError("gsb: no such file: " + in_file);
  const auto rows = evalkit::parse_gsb_csv(in_file);
  for (const auto& row : rows) {
    const auto m = evalkit::gsb_metrics(row.counts);
    std::cout << row.aspect << ": winrate " << 100.0 * m.winrate
              << "% | preference " << 100.0 * m.preference << "% | margin "
              << 100.0 * m.margin << "% | identity "
              << (evalkit::check_identity(m, 1e-12) ? "ok" : "VIOLATED") << "\n";
  }
  if (!out.empty()) {
    const fs::path dir(out);
    ensure_dir(dir);
    const std::vector<serialize::ManifestEntry> man{
        {"command", "gsb"}, {"format", format}, {"in", in_file}};
    serialize::write_text_file(dir / "manifest.json", serialize::manifest_json(man, 0));
    evalkit::ReportSources sources;
    sources.gsb_tables.push_back(in_file);
    const bool json = format == "json";
    evalkit::emit_report(sources, dir / (json ? "report.json" : "report.csv"),
                         json ? evalkit::ReportFormat::Json
                              : evalkit::ReportFormat::Csv);
  }
  return 0;
}

// ---- selftest: compact oracle suite ----

bool selftest_grpo() {
  CounterRng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int g = 2 + static_cast<int>(rng.uniform_int(0, 6));
    std::vector<double> r(static_cast<std::size_t>(g));
    for (auto& x : r) x = rng.uniform(-5.0, 5.0);
    const auto a = advantage::grpo_advantages(r, {});
    double mean = 0.0;
    for (double x : a) mean += x;
    mean /= static_cast<double>(g);
    if (std::abs(mean) > 1e-12) return false;
  }
  return true;
}

bool selftest_minnorm() {
  CounterRng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(0, 1));
    const int g = 4;
    advantage::ObjectiveSet objs;
    for (int i = 0; i < n; ++i) {
      std::vector<double> row(static_cast<std::size_t>(g));
      double norm = 0.0;
      for (auto& x : row) {
        x = rng.uniform(-1.0, 1.0);
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (auto& x : row) x /= norm;
      objs.advantages.push_back(std::move(row));
    }
    const auto c = advantage::joint_minnorm_weights(objs);
    const double solver = advantage::minnorm_value(objs, c.c);

    double grid_best = 1e300;
    if (n == 2) {
      for (int i = 0; i <= 1000; ++i) {
        const double x = i / 1000.0;
        grid_best = std::min(grid_best,
                             advantage::minnorm_value(objs, std::vector{x, 1.0 - x}));
      }
    } else {
      for (int i = 0; i <= 1000; ++i)
        for (int j = 0; i + j <= 1000; ++j) {
          const double x = i / 1000.0, y = j / 1000.0;
          grid_best = std::min(
              grid_best, advantage::minnorm_value(objs, std::vector{x, y, 1.0 - x - y}));
        }
    }
    if (solver > grid_best + 1e-5) return false;
  }
  return true;
}

bool selftest_vipo_fd() {
  const Dims d{3, 3, 3};
  CounterRng rng(99);
  toygen::PolicyParams policy{Grid(d), 0.7};
  for (std::size_t c = 0; c < policy.mean.size(); ++c)
    policy.mean[c] = rng.uniform(-1.0, 1.0);
  const auto prompt = synthetic_prompt(d, 0.0);
  const auto group = toygen::sample_group(policy, prompt, 4, 11);

  std::vector<double> scalar(4);
  for (int i = 0; i < 4; ++i)
    scalar[static_cast<std::size_t>(i)] =
        group.samples[static_cast<std::size_t>(i)].rewards.fidelity;
  const auto adv = advantage::grpo_advantages(scalar, {});
  std::vector<advantage::AdvantageMap> maps;
  for (int i = 0; i < 4; ++i)
    maps.push_back(advantage::build_advantage_map(
        group.samples[static_cast<std::size_t>(i)].video,
        advantage::MapProvider::TemporalEnergy));

  const auto res = advantage::vipo_objective(group, maps, adv, policy);
  Grid total(d);
  for (const auto& sg : res.mean_gradients)
    for (std::size_t c = 0; c < total.size(); ++c) total[c] += sg[c];

  const double step = 1e-5;
  double err = 0.0, norm = 0.0;
  for (std::size_t c = 0; c < total.size(); ++c) {
    auto plus = policy, minus = policy;
    plus.mean[c] += step;
    minus.mean[c] -= step;
    const double fd = (advantage::vipo_objective(group, maps, adv, plus).objective -
                       advantage::vipo_objective(group, maps, adv, minus).objective) /
                      (2.0 * step);
    err += (fd - total[c]) * (fd - total[c]);
    norm += total[c] * total[c];
  }
  return std::sqrt(err) <= 1e-6 * std::max(1.0, std::sqrt(norm));
}

bool selftest_dpo() {
  const Dims d{4, 3, 3};
  const dpo::Tape tape = dpo::Tape::gaussian_logp(d);
  CounterRng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    toygen::PolicyParams policy{Grid(d), 0.5 + rng.uniform()};
    toygen::PolicyParams reference{Grid(d), 0.5 + rng.uniform()};
    for (std::size_t c = 0; c < policy.mean.size(); ++c) {
      policy.mean[c] = rng.uniform(-1.0, 1.0);
      reference.mean[c] = rng.uniform(-1.0, 1.0);
    }
    dpo::PreferencePair pair;
    pair.prompt = synthetic_prompt(d, 0.0);
    pair.winner = Grid(d);
    pair.loser = Grid(d);
    for (std::size_t c = 0; c < pair.winner.size(); ++c) {
      pair.winner[c] = rng.uniform(-1.0, 1.0);
      pair.loser[c] = rng.uniform(-1.0, 1.0);
    }
    const dpo::DpoConfig cfg{0.5 + rng.uniform()};
    const auto fused = dpo::fused_backward(tape, pair, policy, reference, cfg);
    const auto dec = dpo::decoupled_backward(tape, pair, policy, reference, cfg);

    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < fused.param_gradient.size(); ++i) {
      diff += (fused.param_gradient[i] - dec.param_gradient[i]) *
              (fused.param_gradient[i] - dec.param_gradient[i]);
      norm += fused.param_gradient[i] * fused.param_gradient[i];
    }
    if (std::sqrt(diff) > 1e-9 * std::max(1e-300, std::sqrt(norm))) return false;

    const auto lw = fused.trace.branch_units.winner;
    const auto ll = fused.trace.branch_units.loser;
    const auto params = tape.param_units();
    if (fused.trace.peak_live_units != lw + ll + params) return false;
    if (dec.trace.peak_live_units != std::max(lw, ll) + params) return false;
    if (fused.trace.flops != dec.trace.flops) return false;
  }
  return true;
}

bool selftest_sched() {
  CounterRng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 5));
    std::vector<sched::WorkerProfile> workers;
    for (int i = 0; i < n; ++i) {
      sched::WorkerProfile p;
      p.name = "w" + std::to_string(i);
      const double r1 = rng.uniform(5.0, 20.0);
      const double r05 = r1 * (1.0 + rng.uniform(0.05, 1.5));
      p.samples = {{0.5, r05}, {1.0, r1}};
      workers.push_back(std::move(p));
    }
    const auto greedy = sched::greedy_plan(workers);
    const auto brute = sched::brute_force_plan(workers);
    const double serial = sched::serial_makespan(workers);
    if (!(brute.predicted_makespan <= greedy.predicted_makespan &&
          greedy.predicted_makespan <= serial))
      return false;
  }
  return true;
}

bool selftest_sim() {
  sched::PipelineConfig cfg;
  cfg.rollout_s = 7.0;
  cfg.reward_s = 5.0;
  cfg.actor_s = 3.0;
  cfg.rollout_nodes = cfg.reward_nodes = cfg.actor_nodes = 2;
  cfg.iterations = 3;
  const auto disagg = sched::simulate_pipeline(cfg);
  cfg.mode = sched::PipelineMode::Colocated;
  const auto coloc = sched::simulate_pipeline(cfg);
  if (std::abs(disagg.utilization - 1.0 / 3.0) > 1e-12) return false;
  if (coloc.utilization != 1.0) return false;
  return disagg.rollout_busy == coloc.rollout_busy &&
         disagg.reward_busy == coloc.reward_busy &&
         disagg.actor_busy == coloc.actor_busy;
}

int cmd_selftest() {
  struct Case {
    const char* name;
    bool (*fn)();
  };
  const Case cases[] = {
      {"grpo-advantage-moments", selftest_grpo},
      {"joint-minnorm-vs-grid", selftest_minnorm},
      {"vipo-finite-differences", selftest_vipo_fd},
      {"dpo-decoupled-vs-fused", selftest_dpo},
      {"scheduler-oracle-ordering", selftest_sched},
      {"pipeline-closed-forms", selftest_sim},
  };
  int failures = 0;
  for (const auto& c : cases) {
    bool ok = false;
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      std::cout << "[FAIL] " << c.name << " (" << e.what() << ")\n";
      ++failures;
      continue;
    }
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << c.name << "\n";
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"vidpost: post-training optimization laboratory"};
  app.require_subcommand(1);
  app.set_config("--config")->envname("VIDPOST_CONFIG");

  GrpoOptions grpo;
  auto* grpo_cmd = app.add_subcommand("grpo-run", "Group-relative policy optimization run");
  grpo_cmd->add_option("--dims", grpo.dims, "Environment dims TxHxW")->envname("VIDPOST_DIMS");
  grpo_cmd->add_option("--group-size", grpo.group_size, "Rollout group size G");
  grpo_cmd->add_option("--iters", grpo.iters, "Iterations");
  grpo_cmd->add_option("--seed", grpo.seed, "Run seed")->envname("VIDPOST_SEED");
  grpo_cmd->add_option("--seeds", grpo.seeds, "Comma list of seeds (per-seed subdirs)");
  grpo_cmd->add_option("--jobs", grpo.jobs, "Parallel seed runs")->envname("VIDPOST_JOBS");
  grpo_cmd->add_option("--lr", grpo.lr, "Learning rate");
  grpo_cmd->add_option("--sigma", grpo.sigma, "Policy sigma");
  grpo_cmd->add_option("--kl-coeff", grpo.kl_coeff, "KL penalty weight");
  grpo_cmd->add_option("--epsilon", grpo.epsilon, "Advantage denominator guard");
  grpo_cmd->add_option("--weights", grpo.weights, "Channel weights fidelity,temporal,semantic");
  grpo_cmd->add_flag("--curriculum", grpo.use_curriculum, "Self-paced channel weights");
  grpo_cmd->add_option("--tau-sat", grpo.tau_sat, "Curriculum saturation threshold");
  grpo_cmd->add_option("--window", grpo.window, "Curriculum window K");
  grpo_cmd->add_option("--min-dwell", grpo.min_dwell, "Curriculum min dwell");
  grpo_cmd->add_flag("--bpgo", grpo.use_bpgo, "Prior-guided RAS/CRT");
  grpo_cmd->add_option("--lambda-mean", grpo.lambda_mean, "RAS mean sensitivity");
  grpo_cmd->add_option("--lambda-var", grpo.lambda_var, "RAS variance sensitivity");
  grpo_cmd->add_option("--gamma", grpo.gamma, "CRT stretch factor");
  grpo_cmd->add_option("--kappa", grpo.kappa, "CRT ambiguity band width");
  grpo_cmd->add_option("--prior-mu0", grpo.prior_mu0, "Prior mean reward");
  grpo_cmd->add_option("--prior-sigma0", grpo.prior_sigma0, "Prior reward std");
  grpo_cmd->add_option("--map-provider", grpo.map_provider, "uniform | temporal-energy")
      ->check(CLI::IsMember({"uniform", "temporal-energy"}));
  grpo_cmd->add_option("--prompt", grpo.prompt_file, "Prompt JSON file")
      ->check(CLI::ExistingFile);
  grpo_cmd->add_option("--policy", grpo.policy_file, "Initial policy JSON file")
      ->check(CLI::ExistingFile);
  grpo_cmd->add_option("--out", grpo.out, "Output directory")
      ->required()
      ->envname("VIDPOST_OUT");

  DpoOptions dpoopt;
  auto* dpo_cmd = app.add_subcommand("dpo-run", "Preference optimization run");
  dpo_cmd->add_option("--dims", dpoopt.dims, "Environment dims TxHxW");
  dpo_cmd->add_option("--iters", dpoopt.iters, "Steps");
  dpo_cmd->add_option("--seed", dpoopt.seed, "Run seed")->envname("VIDPOST_SEED");
  dpo_cmd->add_option("--lr", dpoopt.lr, "Learning rate");
  dpo_cmd->add_option("--beta-start", dpoopt.beta_start, "Beta anneal start");
  dpo_cmd->add_option("--beta-end", dpoopt.beta_end, "Beta anneal end");
  dpo_cmd->add_option("--drift", dpoopt.drift, "Prompt drift");
  dpo_cmd->add_option("--sigma", dpoopt.sigma, "Policy sigma");
  dpo_cmd->add_option("--resolution-scale", dpoopt.resolution_scale,
                      "Scale H and W (mixed-resolution training knob)");
  dpo_cmd->add_option("--negative", dpoopt.negative, "reversal | shuffle | freeze")
      ->check(CLI::IsMember({"reversal", "shuffle", "freeze"}));
  dpo_cmd->add_option("--mode", dpoopt.mode, "fused | decoupled")
      ->check(CLI::IsMember({"fused", "decoupled"}));
  dpo_cmd->add_option("--out", dpoopt.out, "Output directory")
      ->required()
      ->envname("VIDPOST_OUT");

  std::string plan_profiles, plan_out;
  bool plan_brute = false;
  auto* plan_cmd = app.add_subcommand("sched-plan", "Greedy reward-worker grouping");
  plan_cmd->add_option("--profiles", plan_profiles, "Worker profile JSON")
      ->required()
      ->check(CLI::ExistingFile);
  plan_cmd->add_flag("--brute", plan_brute, "Also run the exhaustive oracle");
  plan_cmd->add_option("--out", plan_out, "Output directory")->envname("VIDPOST_OUT");

  SimOptions sim;
  auto* sim_cmd = app.add_subcommand("sim-pipeline", "Discrete-event pipeline simulation");
  sim_cmd->add_option("--mode", sim.mode, "disaggregated | colocated")
      ->check(CLI::IsMember({"disaggregated", "colocated"}));
  sim_cmd->add_option("--reward-mode", sim.reward_mode, "fixed | serial | planned")
      ->check(CLI::IsMember({"fixed", "serial", "planned"}));
  sim_cmd->add_option("--rollout", sim.rollout_s, "Rollout stage seconds");
  sim_cmd->add_option("--reward", sim.reward_s, "Reward stage seconds (fixed mode)");
  sim_cmd->add_option("--actor", sim.actor_s, "Actor stage seconds");
  sim_cmd->add_option("--rollout-nodes", sim.rollout_nodes, "Rollout pool size");
  sim_cmd->add_option("--reward-nodes", sim.reward_nodes, "Reward pool size");
  sim_cmd->add_option("--actor-nodes", sim.actor_nodes, "Actor pool size");
  sim_cmd->add_option("--iterations", sim.iterations, "Iterations");
  sim_cmd->add_option("--profiles", sim.profiles_file, "Worker profile JSON")
      ->check(CLI::ExistingFile);
  sim_cmd->add_flag("--events-csv", sim.events_csv, "Also emit events.csv");
  sim_cmd->add_option("--out", sim.out, "Output directory")->envname("VIDPOST_OUT");

  std::string gsb_in, gsb_out, gsb_format = "json";
  auto* gsb_cmd = app.add_subcommand("gsb", "Good-Same-Bad metric algebra");
  gsb_cmd->add_option("--in", gsb_in, "CSV of aspect,good,same,bad")->required();
  gsb_cmd->add_option("--format", gsb_format, "json | csv")
      ->check(CLI::IsMember({"json", "csv"}));
  gsb_cmd->add_option("--out", gsb_out, "Output directory")->envname("VIDPOST_OUT");

  auto* selftest_cmd = app.add_subcommand("selftest", "Run the oracle suite");

  std::vector<const char*> argv;
  argv.push_back("vidpost");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (grpo_cmd->parsed()) return cmd_grpo(grpo);
    if (dpo_cmd->parsed()) return cmd_dpo(dpoopt);
    if (plan_cmd->parsed()) return cmd_sched_plan(plan_profiles, plan_out, plan_brute);
    if (sim_cmd->parsed()) return cmd_sim(sim);
    if (gsb_cmd->parsed()) return cmd_gsb(gsb_in, gsb_out, gsb_format);
    if (selftest_cmd->parsed()) return cmd_selftest();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace vidpost::cli
