#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hacpo/errors.hpp"
#include "hacpo/trainer.hpp"

namespace hacpo {

using ordered_json = nlohmann::ordered_json;

// One rollout log record, one JSON object per line.
inline ordered_json rollout_record(const Rollout& r) {
  ordered_json j;
  j["step"] = r.step;
  j["agent"] = r.agent.value;
  j["prompt_id"] = r.prompt_id;
  j["text"] = r.text;
  j["gen_len"] = r.gen_len;
  j["gen_logprob"] = r.gen_logprob;
  j["reward"] = r.reward;
  return j;
}

inline ordered_json metrics_record(const TrainStepReport& report) {
  ordered_json j;
  j["step"] = report.step;
  ordered_json agents = ordered_json::array();
  for (std::size_t a = 0; a < report.per_agent.size(); ++a) {
    const AgentStepStats& st = report.per_agent[a];
    ordered_json entry;
    entry["agent"] = a;
    entry["mean_reward"] = st.mean_reward;
    entry["p_hat"] = st.p_hat;
    entry["objective_homo"] = st.objective_homo;
    entry["objective_hete"] = st.objective_hete;
    entry["grad_norm"] = st.grad_norm;
    agents.push_back(std::move(entry));
  }
  j["per_agent"] = std::move(agents);
  const RatioStats& rs = report.ratio_stats;
  ordered_json stats;
  if (rs.has_homo) {
    stats["s_homo_mean"] = rs.s_homo_mean;
    stats["s_homo_max"] = rs.s_homo_max;
    stats["s_homo_min"] = rs.s_homo_min;
    stats["s_homo_range"] = rs.s_homo_range;
  } else {
    stats["s_homo_mean"] = nullptr;
    stats["s_homo_max"] = nullptr;
    stats["s_homo_min"] = nullptr;
    stats["s_homo_range"] = nullptr;
  }
  if (rs.has_hete) {
    stats["s_hete_mean"] = rs.s_hete_mean;
    stats["s_hete_max"] = rs.s_hete_max;
    stats["s_hete_min"] = rs.s_hete_min;
    stats["s_hete_range"] = rs.s_hete_range;
  } else {
    stats["s_hete_mean"] = nullptr;
    stats["s_hete_max"] = nullptr;
    stats["s_hete_min"] = nullptr;
    stats["s_hete_range"] = nullptr;
  }
  stats["clip_frac_homo"] = rs.clip_frac_homo;
  stats["clip_frac_hete"] = rs.clip_frac_hete;
  stats["discard_frac"] = rs.discard_frac;
  j["ratio_stats"] = std::move(stats);
  if (!report.clip_lower_bounds.empty()) j["clip_lower_bounds"] = report.clip_lower_bounds;
  ordered_json adv = ordered_json::array();
  for (const AdvPairStats& p : report.adv_stats) {
    ordered_json entry;
    entry["source"] = p.source;
    entry["learner"] = p.learner;
    entry["mean_abs_a"] = p.mean_abs_a;
    entry["mean_abs_a_tilde"] = p.mean_abs_a_tilde;
    adv.push_back(std::move(entry));
  }
  j["adv_stats"] = std::move(adv);
  return j;
}

// Policy checkpoint: a JSON header plus the flat theta array.
// {class, V, L_max, agent, resp_len, tokenizer, alphabet, theta}
inline void save_checkpoint(const AgentRuntime& agent, const std::filesystem::path& path) {
  ordered_json j;
  j["class"] = agent.params.cls == PolicyClass::Bigram ? "bigram" : "positional_tabular";
  j["V"] = agent.params.vocab;
  j["L_max"] = agent.params.rows;
  j["agent"] = agent.id.value;
  j["resp_len"] = agent.params.resp_len;
  j["tokenizer"] = agent.tok.scheme() == TokenScheme::Pair ? "pair" : "char";
  j["alphabet"] = agent.tok.alphabet();
  j["theta"] = agent.params.theta;
  std::ofstream out(path);
  if (!out) throw io_error("cannot write checkpoint: " + path.string());
  out << j.dump() << '\n';
}

inline PolicyParams load_checkpoint(const std::filesystem::path& path, AgentId* agent = nullptr) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read checkpoint: " + path.string());
  ordered_json j;
  in >> j;
  PolicyParams p;
  p.cls = j.at("class").get<std::string>() == "bigram" ? PolicyClass::Bigram
                                                       : PolicyClass::PositionalTabular;
  p.vocab = j.at("V").get<int>();
  p.rows = j.at("L_max").get<int>();
  p.resp_len = j.at("resp_len").get<int>();
  p.theta = j.at("theta").get<std::vector<double>>();
  if (agent) agent->value = j.at("agent").get<int>();
  p.validate();
  return p;
}

// Execute a full training run: `steps` train_steps, one metrics line per
// step, final per-agent checkpoints, optionally a rollout log. Deterministic
// for a fixed config: identical bytes regardless of worker count.
inline std::vector<TrainStepReport> run(const RunConfig& cfg,
                                        const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  TrainerState state = init_trainer(cfg);
  std::ofstream metrics(out_dir / "metrics.jsonl");
  if (!metrics) throw io_error("cannot write metrics: " + (out_dir / "metrics.jsonl").string());
  std::ofstream rollout_log;
  if (cfg.log_rollouts) {
    rollout_log.open(out_dir / "rollouts.jsonl");
    if (!rollout_log)
      throw io_error("cannot write rollout log: " + (out_dir / "rollouts.jsonl").string());
  }
  std::vector<TrainStepReport> reports;
  reports.reserve(cfg.steps);
  for (int step = 0; step < cfg.steps; ++step) {
    const std::vector<Prompt> prompts = sample_prompt_batch(cfg, step);
    if (cfg.log_rollouts) {
      // Log the snapshot rollouts by regenerating them; generation is a pure
      // function of (config, step), so this matches what the step consumes.
      std::vector<std::vector<std::vector<Rollout>>> slots;
      detail::generate_rollouts(state, prompts, cfg.effective_group_size(), slots);
      for (const auto& per_agent : slots) {
        for (const auto& per_prompt : per_agent) {
          for (const Rollout& r : per_prompt) rollout_log << rollout_record(r).dump() << '\n';
        }
      }
    }
    reports.push_back(train_step(state, prompts));
    metrics << metrics_record(reports.back()).dump() << '\n';
  }
  for (const AgentRuntime& agent : state.agents) {
    save_checkpoint(agent,
                    out_dir / ("checkpoint_agent" + std::to_string(agent.id.value) + ".json"));
  }
  return reports;
}

}  // namespace hacpo
