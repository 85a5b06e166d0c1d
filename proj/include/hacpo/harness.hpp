#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hacpo/errors.hpp"
#include "hacpo/io.hpp"
#include "hacpo/oracle.hpp"
#include "hacpo/trainer.hpp"

// Configuration loading, experiment orchestration and result reporting.
// The config grammar is documented in the README; parsing is strict: every
// diagnostic names the offending field path and unknown keys are rejected.

namespace hacpo {

namespace harness_detail {

using nlohmann::ordered_json;

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw config_error(path + ": " + what);
}

inline void expect_keys(const ordered_json& j, const std::string& path,
                        const std::set<std::string>& known) {
  if (!j.is_object()) fail(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) fail(path + "." + it.key(), "unknown field");
  }
}

template <typename T>
T require(const ordered_json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) fail(path + "." + key, "missing");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(path + "." + key, "wrong type");
  }
}

template <typename T>
T optional_field(const ordered_json& j, const std::string& path, const std::string& key,
                 T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(path + "." + key, "wrong type");
  }
}

}  // namespace harness_detail

inline std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::HACPO: return "hacpo";
    case TrainMode::GspoSingle: return "gspo_single";
    case TrainMode::GspoDouble: return "gspo_double";
    case TrainMode::Naive: return "naive";
  }
  return "hacpo";
}

inline TrainMode mode_from_string(const std::string& s, const std::string& path) {
  if (s == "hacpo") return TrainMode::HACPO;
  if (s == "gspo_single") return TrainMode::GspoSingle;
  if (s == "gspo_double") return TrainMode::GspoDouble;
  if (s == "naive") return TrainMode::Naive;
  harness_detail::fail(path, "expected one of hacpo|gspo_single|gspo_double|naive, got \"" + s +
                                 "\"");
}

inline RunConfig parse_config(const nlohmann::ordered_json& j) {
  using namespace harness_detail;
  RunConfig cfg;
  expect_keys(j, "config", {"agents", "task", "optimization", "clipping"});
  if (!j.contains("agents")) fail("config.agents", "missing");
  if (!j.contains("task")) fail("config.task", "missing");
  if (!j.contains("optimization")) fail("config.optimization", "missing");
  if (!j.contains("clipping")) fail("config.clipping", "missing");

  const auto& agents = j.at("agents");
  if (!agents.is_array() || agents.empty()) fail("config.agents", "expected a nonempty array");
  for (std::size_t a = 0; a < agents.size(); ++a) {
    const std::string path = "agents[" + std::to_string(a) + "]";
    expect_keys(agents[a], path,
                {"policy", "tokenizer", "init_seed", "init_bias", "init_spread"});
    AgentSpec spec;
    const std::string policy = require<std::string>(agents[a], path, "policy");
    if (policy == "positional_tabular") spec.policy = PolicyClass::PositionalTabular;
    else if (policy == "bigram") spec.policy = PolicyClass::Bigram;
    else fail(path + ".policy", "expected positional_tabular|bigram");
    const std::string tok = require<std::string>(agents[a], path, "tokenizer");
    if (tok == "char") spec.tokenizer = TokenScheme::Char;
    else if (tok == "pair") spec.tokenizer = TokenScheme::Pair;
    else fail(path + ".tokenizer", "expected char|pair");
    spec.init_seed = require<std::uint64_t>(agents[a], path, "init_seed");
    spec.init_bias = require<double>(agents[a], path, "init_bias");
    spec.init_spread = optional_field<double>(agents[a], path, "init_spread", 0.5);
    cfg.agents.push_back(spec);
  }

  const auto& task = j.at("task");
  expect_keys(task, "task", {"kind", "alphabet", "response_len", "target", "modulus"});
  const std::string kind = require<std::string>(task, "task", "kind");
  if (kind == "substring_match") cfg.task.kind = TaskKind::SubstringMatch;
  else if (kind == "modular_sum") cfg.task.kind = TaskKind::ModularSum;
  else fail("task.kind", "expected substring_match|modular_sum");
  cfg.task.alphabet = require<std::string>(task, "task", "alphabet");
  cfg.task.response_len = require<int>(task, "task", "response_len");
  if (cfg.task.kind == TaskKind::SubstringMatch) {
    cfg.task.target = require<std::string>(task, "task", "target");
    if (task.contains("modulus")) fail("task.modulus", "not a substring_match field");
  } else {
    cfg.task.modulus = require<int>(task, "task", "modulus");
    if (task.contains("target")) fail("task.target", "not a modular_sum field");
  }

  const auto& opt = j.at("optimization");
  expect_keys(opt, "optimization",
              {"group_size", "batch_prompts", "minibatch_count", "learning_rate", "steps", "seed",
               "mode", "capability_window", "capability_floor", "window_mode", "workers",
               "log_rollouts"});
  cfg.group_size = require<int>(opt, "optimization", "group_size");
  cfg.batch_prompts = require<int>(opt, "optimization", "batch_prompts");
  cfg.minibatch_count = require<int>(opt, "optimization", "minibatch_count");
  cfg.learning_rate = require<double>(opt, "optimization", "learning_rate");
  cfg.steps = require<int>(opt, "optimization", "steps");
  cfg.seed = require<std::uint64_t>(opt, "optimization", "seed");
  cfg.mode = mode_from_string(require<std::string>(opt, "optimization", "mode"),
                              "optimization.mode");
  cfg.capability_window = optional_field<int>(opt, "optimization", "capability_window", 5);
  cfg.capability_floor = optional_field<double>(opt, "optimization", "capability_floor", 1e-3);
  const std::string wm =
      optional_field<std::string>(opt, "optimization", "window_mode", "include_current");
  if (wm == "include_current") cfg.window_mode = WindowMode::IncludeCurrent;
  else if (wm == "exclude_current") cfg.window_mode = WindowMode::ExcludeCurrent;
  else fail("optimization.window_mode", "expected include_current|exclude_current");
  cfg.workers = optional_field<int>(opt, "optimization", "workers", 1);
  cfg.log_rollouts = optional_field<bool>(opt, "optimization", "log_rollouts", false);

  const auto& clip = j.at("clipping");
  expect_keys(clip, "clipping",
              {"eps_low", "eps_high", "delta", "delta_step", "alpha", "stepwise_base"});
  cfg.clip.eps_low = require<double>(clip, "clipping", "eps_low");
  cfg.clip.eps_high = require<double>(clip, "clipping", "eps_high");
  cfg.clip.delta = require<double>(clip, "clipping", "delta");
  cfg.clip.delta_step = require<double>(clip, "clipping", "delta_step");
  cfg.clip.alpha = require<double>(clip, "clipping", "alpha");
  cfg.clip.stepwise_base = optional_field<int>(clip, "clipping", "stepwise_base", 0);

  cfg.validate();
  return cfg;
}

// Fully-resolved echo of a config; parsing it back reproduces the run.
inline nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["agents"] = nlohmann::ordered_json::array();
  for (const AgentSpec& a : cfg.agents) {
    nlohmann::ordered_json spec;
    spec["policy"] = a.policy == PolicyClass::Bigram ? "bigram" : "positional_tabular";
    spec["tokenizer"] = a.tokenizer == TokenScheme::Pair ? "pair" : "char";
    spec["init_seed"] = a.init_seed;
    spec["init_bias"] = a.init_bias;
    spec["init_spread"] = a.init_spread;
    j["agents"].push_back(std::move(spec));
  }
  nlohmann::ordered_json task;
  task["kind"] = cfg.task.kind == TaskKind::ModularSum ? "modular_sum" : "substring_match";
  task["alphabet"] = cfg.task.alphabet;
  task["response_len"] = cfg.task.response_len;
  if (cfg.task.kind == TaskKind::SubstringMatch) task["target"] = cfg.task.target;
  else task["modulus"] = cfg.task.modulus;
  j["task"] = std::move(task);
  nlohmann::ordered_json opt;
  opt["group_size"] = cfg.group_size;
  opt["batch_prompts"] = cfg.batch_prompts;
  opt["minibatch_count"] = cfg.minibatch_count;
  opt["learning_rate"] = cfg.learning_rate;
  opt["steps"] = cfg.steps;
  opt["seed"] = cfg.seed;
  opt["mode"] = to_string(cfg.mode);
  opt["capability_window"] = cfg.capability_window;
  opt["capability_floor"] = cfg.capability_floor;
  opt["window_mode"] =
      cfg.window_mode == WindowMode::ExcludeCurrent ? "exclude_current" : "include_current";
  opt["workers"] = cfg.workers;
  opt["log_rollouts"] = cfg.log_rollouts;
  j["optimization"] = std::move(opt);
  nlohmann::ordered_json clip;
  clip["eps_low"] = cfg.clip.eps_low;
  clip["eps_high"] = cfg.clip.eps_high;
  clip["delta"] = cfg.clip.delta;
  clip["delta_step"] = cfg.clip.delta_step;
  clip["alpha"] = cfg.clip.alpha;
  clip["stepwise_base"] = cfg.clip.stepwise_base;
  j["clipping"] = std::move(clip);
  return j;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read config: " + path.string());
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

// Echo the resolved config, then train. The echo is complete: re-running from
// it reproduces the run byte for byte.
inline std::vector<TrainStepReport> execute_run(const RunConfig& cfg,
                                                const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  std::ofstream echo(out_dir / "config.json");
  if (!echo) throw io_error("cannot write config echo: " + (out_dir / "config.json").string());
  echo << config_to_json(cfg).dump(2) << '\n';
  echo.close();
  return run(cfg, out_dir);
}

// A named batch of runs, each repeated over distinct seeds.
struct MatrixEntry {
  std::string name;
  RunConfig config;
};

struct ExperimentMatrix {
  std::vector<MatrixEntry> runs;
  int repeats = 1;
  std::filesystem::path output_dir;

  void validate() const {
    if (runs.empty()) throw config_error("matrix: no runs");
    if (repeats < 1) throw config_error("matrix: repeats must be >= 1");
    std::set<std::string> names;
    for (const MatrixEntry& e : runs) {
      if (!names.insert(e.name).second)
        throw config_error("matrix: duplicate run name \"" + e.name + "\"");
      e.config.validate();
    }
  }
};

inline std::vector<std::filesystem::path> run_matrix(const ExperimentMatrix& matrix) {
  matrix.validate();
  std::vector<std::filesystem::path> dirs;
  for (const MatrixEntry& entry : matrix.runs) {
    for (int r = 0; r < matrix.repeats; ++r) {
      RunConfig cfg = entry.config;
      cfg.seed = entry.config.seed + static_cast<std::uint64_t>(r);
      const auto dir = matrix.output_dir / (entry.name + "_seed" + std::to_string(cfg.seed));
      execute_run(cfg, dir);
      dirs.push_back(dir);
    }
  }
  return dirs;
}

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

// Across-step statistics of a per-step mean series.
struct SeriesStats {
  bool present = false;
  double mean = 0.0, max = 0.0, min = 0.0, range = 0.0;

  void add(double v) {
    if (!present) {
      mean = v;
      max = min = v;
      present = true;
      count_ = 1;
      sum_ = v;
      return;
    }
    ++count_;
    sum_ += v;
    max = std::max(max, v);
    min = std::min(min, v);
    mean = sum_ / static_cast<double>(count_);
    range = max - min;
  }

 private:
  long count_ = 0;
  double sum_ = 0.0;
};

struct RunSummary {
  std::string name;  // directory name
  std::string mode;
  std::uint64_t seed = 0;
  int steps = 0;
  std::vector<double> final_mean_reward;  // per agent
  std::vector<double> avg_mean_reward;    // per agent, across steps
  SeriesStats s_homo;                     // of the per-step means
  SeriesStats s_hete;
};

inline RunSummary summarize_run(const std::filesystem::path& dir) {
  RunSummary summary;
  summary.name = dir.filename().string();
  {
    std::ifstream in(dir / "config.json");
    if (!in) throw no_data_error("missing config.json in " + dir.string());
    nlohmann::ordered_json cfg;
    in >> cfg;
    summary.mode = cfg.at("optimization").at("mode").get<std::string>();
    summary.seed = cfg.at("optimization").at("seed").get<std::uint64_t>();
  }
  std::ifstream metrics(dir / "metrics.jsonl");
  if (!metrics) throw no_data_error("missing metrics.jsonl in " + dir.string());
  std::string line;
  std::vector<double> sums;
  while (std::getline(metrics, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::ordered_json::parse(line);
    ++summary.steps;
    const auto& per_agent = j.at("per_agent");
    if (summary.final_mean_reward.size() < per_agent.size()) {
      summary.final_mean_reward.resize(per_agent.size(), 0.0);
      sums.resize(per_agent.size(), 0.0);
    }
    for (std::size_t a = 0; a < per_agent.size(); ++a) {
      const double r = per_agent[a].at("mean_reward").get<double>();
      summary.final_mean_reward[a] = r;
      sums[a] += r;
    }
    const auto& rs = j.at("ratio_stats");
    if (!rs.at("s_homo_mean").is_null()) summary.s_homo.add(rs.at("s_homo_mean").get<double>());
    if (!rs.at("s_hete_mean").is_null()) summary.s_hete.add(rs.at("s_hete_mean").get<double>());
  }
  summary.avg_mean_reward = sums;
  for (double& v : summary.avg_mean_reward) v /= std::max(1, summary.steps);
  return summary;
}

inline std::vector<RunSummary> collect_runs(const std::filesystem::path& runs_dir) {
  if (!std::filesystem::is_directory(runs_dir))
    throw no_data_error("runs directory does not exist: " + runs_dir.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(runs_dir)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "metrics.jsonl"))
      dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw no_data_error("no completed runs under " + runs_dir.string());
  std::vector<RunSummary> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(summarize_run(d));
  return out;
}

// Plot data: one (step, series, value) row per metric sample.
inline void write_plot_csv(const std::filesystem::path& runs_dir,
                           const std::filesystem::path& csv_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw io_error("cannot write plot csv: " + csv_path.string());
  csv << "step,series,value\n";
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(runs_dir)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "metrics.jsonl"))
      dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const std::string run = dir.filename().string();
    std::ifstream metrics(dir / "metrics.jsonl");
    std::string line;
    while (std::getline(metrics, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::ordered_json::parse(line);
      const int step = j.at("step").get<int>();
      const auto& per_agent = j.at("per_agent");
      for (std::size_t a = 0; a < per_agent.size(); ++a) {
        csv << step << ',' << run << "/agent" << a << "/mean_reward,"
            << per_agent[a].at("mean_reward").dump() << '\n';
      }
      const auto& rs = j.at("ratio_stats");
      if (!rs.at("s_homo_mean").is_null())
        csv << step << ',' << run << "/s_homo_mean," << rs.at("s_homo_mean").dump() << '\n';
      if (!rs.at("s_hete_mean").is_null())
        csv << step << ',' << run << "/s_hete_mean," << rs.at("s_hete_mean").dump() << '\n';
    }
  }
}

// Human-readable summary: per-run final rewards, paired-seed deltas of every
// mode against the isolated baseline, and the ratio-statistics table.
inline std::string render_report(const std::vector<RunSummary>& summaries) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "run                                   mode          seed  steps  final rewards\n";
  for (const RunSummary& s : summaries) {
    out << std::left << std::setw(38) << s.name << std::setw(14) << s.mode << std::right
        << std::setw(5) << s.seed << std::setw(7) << s.steps << "  ";
    for (double r : s.final_mean_reward) out << std::setw(8) << r;
    out << '\n';
  }

  std::map<std::uint64_t, const RunSummary*> baseline_by_seed;
  for (const RunSummary& s : summaries) {
    if (s.mode == "gspo_single") baseline_by_seed[s.seed] = &s;
  }
  bool header = false;
  for (const RunSummary& s : summaries) {
    if (s.mode == "gspo_single") continue;
    const auto it = baseline_by_seed.find(s.seed);
    if (it == baseline_by_seed.end()) continue;
    if (!header) {
      out << "\npaired deltas vs gspo_single (same seed)\n";
      header = true;
    }
    out << std::left << std::setw(38) << s.name << std::right;
    for (std::size_t a = 0;
         a < std::min(s.final_mean_reward.size(), it->second->final_mean_reward.size()); ++a) {
      out << std::setw(9) << (s.final_mean_reward[a] - it->second->final_mean_reward[a]);
    }
    out << '\n';
  }

  out << "\nimportance-ratio statistics (per-step means across steps)\n";
  out << std::left << std::setw(38) << "run" << std::setw(8) << "series"
      << "    mean      max      min    range\n";
  out << std::setprecision(5);
  for (const RunSummary& s : summaries) {
    if (s.s_homo.present) {
      out << std::left << std::setw(38) << s.name << std::setw(8) << "s_homo" << std::right
          << std::setw(9) << s.s_homo.mean << std::setw(9) << s.s_homo.max << std::setw(9)
          << s.s_homo.min << std::setw(9) << s.s_homo.range << '\n' << std::left;
    }
    if (s.s_hete.present) {
      out << std::left << std::setw(38) << s.name << std::setw(8) << "s_hete" << std::right
          << std::setw(9) << s.s_hete.mean << std::setw(9) << s.s_hete.max << std::setw(9)
          << s.s_hete.min << std::setw(9) << s.s_hete.range << '\n' << std::left;
    }
  }
  return out.str();
}

inline nlohmann::ordered_json verification_report_to_json(const VerificationReport& r) {
  nlohmann::ordered_json j;
  j["suite"] = r.suite;
  j["trials"] = r.trials;
  j["statistic"] = r.statistic;
  j["bound"] = r.bound;
  j["passed"] = r.passed;
  j["runtime_ms"] = r.runtime_ms;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

}  // namespace hacpo
