// SPDX-License-Identifier: Apache-2.0
#include "vidpost/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace vidpost::serialize {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fnv1a_hex(const std::string& payload) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : payload) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

void append_array_17g(std::string& out, std::span<const double> xs) {
  out += '[';
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += format_double(xs[i]);
  }
  out += ']';
}

void append_dims(std::string& out, const Dims& d) {
  out += '[';
  out += std::to_string(d.t);
  out += ',';
  out += std::to_string(d.h);
  out += ',';
  out += std::to_string(d.w);
  out += ']';
}

json parse(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw IoError(std::string(what) + ": invalid JSON");
  return j;
}

Dims dims_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw IoError(std::string(what) + ": dims must be [T,H,W]");
  return Dims{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

Grid grid_from_json(const json& values, const Dims& d, const char* what) {
  if (!values.is_array())
    throw IoError(std::string(what) + ": expected a flat array");
  std::vector<double> xs;
  xs.reserve(values.size());
  for (const auto& v : values) xs.push_back(v.get<double>());
  if (static_cast<std::int64_t>(xs.size()) != d.cells())
    throw IoError(std::string(what) + ": array length does not match dims");
  return Grid(d, std::move(xs));
}

}  // namespace

std::string policy_to_json(const toygen::PolicyParams& policy) {
  std::string out = "{\"dims\":";
  append_dims(out, policy.mean.dims());
  out += ",\"mean\":";
  append_array_17g(out, policy.mean.values());
  out += ",\"sigma\":";
  out += format_double(policy.sigma);
  out += "}\n";
  return out;
}

toygen::PolicyParams policy_from_json(const std::string& text) {
  const json j = parse(text, "policy");
  const Dims d = dims_from_json(j.at("dims"), "policy");
  toygen::PolicyParams p;
  p.mean = grid_from_json(j.at("mean"), d, "policy.mean");
  p.sigma = j.at("sigma").get<double>();
  toygen::validate_policy(p);
  return p;
}

std::string prompt_to_json(const toygen::PromptSpec& prompt) {
  std::string out = "{\"dims\":";
  append_dims(out, prompt.target.dims());
  out += ",\"drift\":";
  out += format_double(prompt.drift);
  out += ",\"embedding\":";
  append_array_17g(out, prompt.embedding);
  out += ",\"target\":";
  append_array_17g(out, prompt.target.values());
  out += "}\n";
  return out;
}

toygen::PromptSpec prompt_from_json(const std::string& text) {
  const json j = parse(text, "prompt");
  const Dims d = dims_from_json(j.at("dims"), "prompt");
  toygen::PromptSpec p;
  p.target = grid_from_json(j.at("target"), d, "prompt.target");
  p.drift = j.at("drift").get<double>();
  p.embedding = j.at("embedding").get<std::vector<double>>();
  toygen::validate_prompt(p, d);
  return p;
}

std::vector<sched::WorkerProfile> profiles_from_json(const std::string& text) {
  const json j = parse(text, "profiles");
  if (!j.contains("workers") || !j["workers"].is_array())
    throw IoError("profiles: missing 'workers' array");
  std::vector<sched::WorkerProfile> out;
  for (const auto& w : j["workers"]) {
    sched::WorkerProfile p;
    p.name = w.at("name").get<std::string>();
    for (const auto& s : w.at("samples")) {
      if (!s.is_array() || s.size() != 2)
        throw IoError("profiles: samples must be [quota, seconds] pairs");
      p.samples.push_back({s[0].get<double>(), s[1].get<double>()});
    }
    sched::validate_profile(p);
    out.push_back(std::move(p));
  }
  if (out.empty()) throw IoError("profiles: no workers");
  return out;
}

std::string profiles_to_json(const std::vector<sched::WorkerProfile>& profiles) {
  json workers = json::array();
  for (const auto& p : profiles) {
    json samples = json::array();
    for (const auto& s : p.samples) samples.push_back({s.quota, s.runtime});
    workers.push_back({{"name", p.name}, {"samples", samples}});
  }
  return json{{"workers", workers}}.dump(2) + "\n";
}

std::string plan_to_json(const sched::SchedulePlan& plan, double serial) {
  json groups = json::array();
  for (const auto& g : plan.groups) {
    json members = json::array();
    for (const auto& a : g)
      members.push_back({{"quota", a.quota}, {"worker", a.worker}});
    groups.push_back(members);
  }
  json j{{"groups", groups},
         {"predicted_makespan", plan.predicted_makespan},
         {"serial_makespan", serial},
         {"speedup", serial / plan.predicted_makespan}};
  return j.dump(2) + "\n";
}

std::string sim_report_to_json(const sched::SimReport& report) {
  json busy = json::array();
  for (const auto& nb : report.node_busy)
    busy.push_back({{"busy_s", nb.second}, {"node", nb.first}});
  json j{{"actor_busy", report.actor_busy},
         {"makespan", report.makespan},
         {"node_busy", busy},
         {"reward_busy", report.reward_busy},
         {"rollout_busy", report.rollout_busy},
         {"utilization", report.utilization}};
  return j.dump(2) + "\n";
}

std::string sim_events_to_csv(const sched::SimReport& report) {
  std::string out = "time,node,event\n";
  for (const auto& e : report.events) {
    out += format_double(e.time);
    out += ',';
    out += e.node;
    out += ',';
    out += e.what;
    out += '\n';
  }
  return out;
}

std::string train_record_line(int iteration,
                              const advantage::PromptIterationStats& s) {
  json j{{"advantages", s.advantages},
         {"iteration", iteration},
         {"kl", s.kl},
         {"prompt", s.prompt_index},
         {"ras_weight", s.ras_weight},
         {"rewards",
          {{"fidelity", {{"mean", s.reward_mean.fidelity}, {"std", s.reward_std.fidelity}}},
           {"semantic", {{"mean", s.reward_mean.semantic}, {"std", s.reward_std.semantic}}},
           {"temporal", {{"mean", s.reward_mean.temporal}, {"std", s.reward_std.temporal}}}}},
         {"scalar", {{"mean", s.scalar_mean}, {"std", s.scalar_std}}},
         {"scalar_rewards", s.scalar_rewards}};
  return j.dump() + "\n";
}

std::string dpo_record_line(int iteration, double beta,
                            const dpo::BackwardResult& r) {
  json j{{"beta", beta},
         {"eta", r.eta},
         {"iteration", iteration},
         {"loss", r.loss},
         {"margin", r.margin},
         {"trace",
          {{"flops", r.trace.flops},
           {"l_loser", r.trace.branch_units.loser},
           {"l_winner", r.trace.branch_units.winner},
           {"peak_live_units", r.trace.peak_live_units}}}};
  return j.dump() + "\n";
}

std::string curriculum_event_line(int iteration, int from_phase, int to_phase,
                                  double trigger_std) {
  json j{{"from_phase", from_phase},
         {"iteration", iteration},
         {"to_phase", to_phase},
         {"trigger_std", trigger_std}};
  return j.dump() + "\n";
}

namespace {
const char* provenance_tag(dpo::Provenance p) {
  switch (p) {
    case dpo::Provenance::PolicyHardNegative: return "policy-hard-negative";
    case dpo::Provenance::Synthetic: return "synthetic";
    case dpo::Provenance::Annotated: return "annotated";
  }
  return "synthetic";
}

dpo::Provenance provenance_from_tag(const std::string& tag) {
  if (tag == "policy-hard-negative") return dpo::Provenance::PolicyHardNegative;
  if (tag == "synthetic") return dpo::Provenance::Synthetic;
  if (tag == "annotated") return dpo::Provenance::Annotated;
  throw IoError("unknown provenance tag: " + tag);
}
}  // namespace

std::string preference_pair_line(const dpo::PreferencePair& pair) {
  const Dims d = pair.winner.dims();
  json j{{"dims", {d.t, d.h, d.w}},
         {"drift", pair.prompt.drift},
         {"embedding", pair.prompt.embedding},
         {"loser", std::vector<double>(pair.loser.values().begin(),
                                       pair.loser.values().end())},
         {"provenance", provenance_tag(pair.provenance)},
         {"target", std::vector<double>(pair.prompt.target.values().begin(),
                                        pair.prompt.target.values().end())},
         {"winner", std::vector<double>(pair.winner.values().begin(),
                                        pair.winner.values().end())}};
  return j.dump() + "\n";
}

dpo::PreferencePair preference_pair_from_line(const std::string& line) {
  const json j = parse(line, "preference pair");
  const Dims d = dims_from_json(j.at("dims"), "preference pair");
  dpo::PreferencePair pair;
  pair.prompt.target = grid_from_json(j.at("target"), d, "pair.target");
  pair.prompt.drift = j.at("drift").get<double>();
  pair.prompt.embedding = j.at("embedding").get<std::vector<double>>();
  pair.winner = grid_from_json(j.at("winner"), d, "pair.winner");
  pair.loser = grid_from_json(j.at("loser"), d, "pair.loser");
  pair.provenance = provenance_from_tag(j.at("provenance").get<std::string>());
  return pair;
}

std::string manifest_json(const std::vector<ManifestEntry>& config,
                          std::uint64_t seed) {
  json cfg = json::object();
  for (const auto& e : config) cfg[e.key] = e.value;
  const std::string canonical = cfg.dump();
  json j{{"config", cfg},
         {"config_hash", fnv1a_hex(canonical)},
         {"seed", seed},
         {"tool_version", kToolVersion}};
  return j.dump(2) + "\n";
}

}  // namespace vidpost::serialize
