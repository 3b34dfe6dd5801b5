// SPDX-License-Identifier: Apache-2.0
#include "vidpost/evalkit.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "vidpost/serialize.hpp"

namespace vidpost::evalkit {

GsbMetrics gsb_metrics(const GsbCounts& counts) {
  if (counts.good < 0 || counts.same < 0 || counts.bad < 0)
    throw ConfigError("gsb_metrics: negative count");
  const double total =
      static_cast<double>(counts.good + counts.same + counts.bad);
  if (total < 1.0) throw ConfigError("gsb_metrics: all counts are zero");
  const double decisive = static_cast<double>(counts.good + counts.bad);
  if (decisive == 0.0)
    throw ConfigError("gsb_metrics: winrate undefined with G + B = 0");

  GsbMetrics m;
  m.winrate = static_cast<double>(counts.good) / decisive;
  m.preference =
      (static_cast<double>(counts.good) + 0.5 * static_cast<double>(counts.same)) /
      total;
  m.margin = static_cast<double>(counts.good - counts.bad) / total;
  return m;
}

bool check_identity(const GsbMetrics& metrics, double tol) {
  if (tol < 0.0) throw ConfigError("check_identity: tol must be >= 0");
  return std::abs(metrics.preference - 0.5 - metrics.margin / 2.0) <= tol;
}

std::vector<GsbRow> parse_gsb_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());

  std::vector<GsbRow> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string aspect, g, s, b;
    if (!std::getline(ss, aspect, ',') || !std::getline(ss, g, ',') ||
        !std::getline(ss, s, ',') || !std::getline(ss, b))
      throw IoError("malformed GSB row: " + line);
    if (first) {
      first = false;
      // Tolerate a header row.
      try {
        (void)std::stoll(g);
      } catch (...) {
        continue;
      }
    }
    GsbRow row;
    row.aspect = aspect;
    try {
      row.counts.good = std::stoll(g);
      row.counts.same = std::stoll(s);
      row.counts.bad = std::stoll(b);
    } catch (...) {
      throw IoError("non-integer GSB count in row: " + line);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("no GSB rows in " + file.string());
  return rows;
}

namespace {

using nlohmann::json;

/// Per-iteration mean of each channel, averaged over prompts.
json summarize_train_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  struct Acc {
    double fidelity = 0.0, temporal = 0.0, semantic = 0.0, kl = 0.0;
    int prompts = 0;
  };
  std::map<int, Acc> per_iter;
  bool dpo_log = false;
  json dpo_last;
  int dpo_steps = 0;

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw IoError("malformed log line in " + path.string());
    if (j.contains("rewards")) {
      Acc& a = per_iter[j.at("iteration").get<int>()];
      a.fidelity += j["rewards"]["fidelity"]["mean"].get<double>();
      a.temporal += j["rewards"]["temporal"]["mean"].get<double>();
      a.semantic += j["rewards"]["semantic"]["mean"].get<double>();
      a.kl += j.value("kl", 0.0);
      a.prompts += 1;
    } else if (j.contains("margin")) {
      dpo_log = true;
      dpo_last = j;
      dpo_steps += 1;
    }
  }

  json out;
  out["source"] = path.filename().string();
  if (dpo_log) {
    out["kind"] = "dpo";
    out["steps"] = dpo_steps;
    out["final"] = dpo_last;
    return out;
  }
  out["kind"] = "grpo";
  json iters = json::array();
  for (const auto& [it, a] : per_iter) {
    const double n = static_cast<double>(a.prompts);
    iters.push_back({{"fidelity_mean", a.fidelity / n},
                     {"iteration", it},
                     {"kl", a.kl / n},
                     {"semantic_mean", a.semantic / n},
                     {"temporal_mean", a.temporal / n}});
  }
  out["iterations"] = iters;
  if (!iters.empty()) out["final"] = iters.back();
  return out;
}

}  // namespace

void emit_report(const ReportSources& sources, const std::filesystem::path& out,
                 ReportFormat format) {
  json report;
  report["gsb"] = json::array();
  report["runs"] = json::array();
  report["sim"] = json::array();

  for (const auto& path : sources.train_logs)
    report["runs"].push_back(summarize_train_log(path));

  for (const auto& path : sources.sim_reports) {
    json j = json::parse(serialize::read_text_file(path), nullptr, false);
    if (j.is_discarded()) throw IoError("malformed sim report: " + path.string());
    j["source"] = path.filename().string();
    report["sim"].push_back(j);
  }

  for (const auto& path : sources.gsb_tables) {
    for (const auto& row : parse_gsb_csv(path)) {
      const GsbMetrics m = gsb_metrics(row.counts);
      report["gsb"].push_back({{"aspect", row.aspect},
                               {"bad", row.counts.bad},
                               {"good", row.counts.good},
                               {"identity_ok", check_identity(m, 1e-12)},
                               {"margin", m.margin},
                               {"preference", m.preference},
                               {"same", row.counts.same},
                               {"winrate", m.winrate}});
    }
  }

  if (format == ReportFormat::Json) {
    serialize::write_text_file(out, report.dump(2) + "\n");
    return;
  }

  // CSV: one section per block, deterministic row order.
  std::string csv = "section,key,value\n";
  for (const auto& g : report["gsb"]) {
    const std::string aspect = g["aspect"].get<std::string>();
    csv += "gsb," + aspect + ".winrate," + serialize::format_double(g["winrate"].get<double>()) + "\n";
    csv += "gsb," + aspect + ".preference," + serialize::format_double(g["preference"].get<double>()) + "\n";
    csv += "gsb," + aspect + ".margin," + serialize::format_double(g["margin"].get<double>()) + "\n";
  }
  for (const auto& run : report["runs"]) {
    const std::string src = run["source"].get<std::string>();
    if (run["kind"] == "grpo") {
      for (const auto& it : run["iterations"]) {
        const std::string p = src + ".iter" + std::to_string(it["iteration"].get<int>());
        csv += "run," + p + ".fidelity_mean," + serialize::format_double(it["fidelity_mean"].get<double>()) + "\n";
        csv += "run," + p + ".temporal_mean," + serialize::format_double(it["temporal_mean"].get<double>()) + "\n";
        csv += "run," + p + ".semantic_mean," + serialize::format_double(it["semantic_mean"].get<double>()) + "\n";
      }
    } else {
      csv += "run," + src + ".steps," + std::to_string(run["steps"].get<int>()) + "\n";
    }
  }
  for (const auto& s : report["sim"]) {
    const std::string src = s["source"].get<std::string>();
    csv += "sim," + src + ".makespan," + serialize::format_double(s["makespan"].get<double>()) + "\n";
    csv += "sim," + src + ".utilization," + serialize::format_double(s["utilization"].get<double>()) + "\n";
  }
  serialize::write_text_file(out, csv);
}

}  // namespace vidpost::evalkit
