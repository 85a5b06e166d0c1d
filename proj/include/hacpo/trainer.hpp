#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hacpo/advantage.hpp"
#include "hacpo/capability.hpp"
#include "hacpo/core.hpp"
#include "hacpo/errors.hpp"
#include "hacpo/policy.hpp"
#include "hacpo/rng.hpp"
#include "hacpo/tasks.hpp"
#include "hacpo/weighting.hpp"

namespace hacpo {

// Training modes:
//   HACPO      — full collaborative objective: capability-aware advantages,
//                exponential reweighting and stepwise-clipped rollout sharing.
//   GspoSingle — each agent trains in isolation on its own rollouts.
//   GspoDouble — isolated training with doubled group size; the
//                resource-matched control for rollout sharing.
//   Naive      — rollout sharing with none of the discrepancy machinery:
//                joint-mean baseline, no capability rescaling, no exponential
//                reweighting, symmetric cross clip.
enum class TrainMode { HACPO, GspoSingle, GspoDouble, Naive };

struct AgentSpec {
  PolicyClass policy = PolicyClass::PositionalTabular;
  TokenScheme tokenizer = TokenScheme::Char;
  std::uint64_t init_seed = 1;
  double init_bias = 0.0;
  double init_spread = 0.5;
};

struct RunConfig {
  std::vector<AgentSpec> agents;
  TaskSpec task;
  int group_size = 8;      // G rollouts per agent per prompt
  int batch_prompts = 16;  // B prompts per step
  int minibatch_count = 2;
  ClipConfig clip;
  int capability_window = 5;
  double capability_floor = 1e-3;
  WindowMode window_mode = WindowMode::IncludeCurrent;
  double learning_rate = 0.05;
  int steps = 200;
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::HACPO;
  int workers = 1;
  bool log_rollouts = false;

  int effective_group_size() const {
    return mode == TrainMode::GspoDouble ? 2 * group_size : group_size;
  }

  void validate() const {
    if (agents.empty()) throw config_error("agents: at least one agent required");
    task.validate();
    if (group_size < 2) throw config_error("optimization.group_size: must be >= 2");
    if (batch_prompts < 1) throw config_error("optimization.batch_prompts: must be >= 1");
    if (minibatch_count < 1) throw config_error("optimization.minibatch_count: must be >= 1");
    if (batch_prompts % minibatch_count != 0)
      throw config_error("optimization.batch_prompts: must be divisible by minibatch_count");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw config_error("optimization.learning_rate: must be finite and >= 0");
    if (steps < 0) throw config_error("optimization.steps: must be >= 0");
    if (workers < 1) throw config_error("optimization.workers: must be >= 1");
    if (capability_window < 1) throw config_error("optimization.capability_window: must be >= 1");
    if (!(capability_floor > 0.0))
      throw config_error("optimization.capability_floor: must be > 0");
    clip.validate(minibatch_count);
    for (const AgentSpec& a : agents) {
      if (!(a.init_spread >= 0.0)) throw config_error("agents.init_spread: must be >= 0");
    }
  }
};

// A live agent: identity, tokenizer and current parameters.
struct AgentRuntime {
  AgentId id;
  AgentSpec spec;
  Tokenizer tok;
  PolicyParams params;
};

namespace detail {

// Tokens this tokenizer needs to cover a text of `text_len` symbols.
inline int tokens_for_text(const Tokenizer& tok, int text_len) {
  return tok.scheme() == TokenScheme::Char ? text_len : (text_len + 1) / 2;
}

inline double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace detail

// Build the agent roster. Each agent's response token length follows from the
// task's symbol length and its tokenizer; positional tables are sized so every
// agent can score every other agent's longest possible text.
inline std::vector<AgentRuntime> init_agents(const RunConfig& cfg) {
  std::vector<AgentRuntime> agents;
  std::vector<Tokenizer> toks;
  std::vector<int> resp_len;
  int max_text_len = 0;
  for (const AgentSpec& spec : cfg.agents) {
    Tokenizer tok(spec.tokenizer, cfg.task.alphabet);
    const int len = detail::tokens_for_text(tok, cfg.task.response_len);
    max_text_len = std::max(max_text_len, len * tok.max_symbols_per_token());
    toks.push_back(std::move(tok));
    resp_len.push_back(len);
  }
  const std::string tilt_text = canonical_target_text(cfg.task);
  for (std::size_t a = 0; a < cfg.agents.size(); ++a) {
    const AgentSpec& spec = cfg.agents[a];
    const int rows = spec.policy == PolicyClass::Bigram
                         ? toks[a].vocab_size() + 1
                         : detail::tokens_for_text(toks[a], max_text_len);
    const std::vector<int> tilt = toks[a].tokenize(tilt_text);
    PolicyParams params = init_policy(spec.policy, toks[a].vocab_size(), rows, resp_len[a],
                                      spec.init_seed, spec.init_spread, spec.init_bias, tilt);
    agents.push_back({AgentId{static_cast<int>(a)}, spec, std::move(toks[a]), std::move(params)});
  }
  return agents;
}

// Value, gradient and bookkeeping of one learner's objective over one group
// at mini-batch index m.
struct ObjectiveTerms {
  double j_homo = 0.0;
  double j_hete = 0.0;
  std::vector<double> grad;  // same shape as the learner's theta
  std::vector<RatioRecord> records;
};

namespace detail {

inline void axpy(std::span<const double> x, double a, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace detail

// Assemble J_homo + J_hete for one learner over one group.
//
// J_homo = (1/G) sum_i min(s*A, clip(s)*A) over the learner's own rollouts.
// J_hete = (1/G) sum over peers' rollouts of clip(reweight(s)) * omega * A.
// The gradient accumulates coefficient * A~ * (1/len) * grad_log_prob for
// every non-gated sample, where the coefficient is s on the homogeneous side
// and grad_weight * s = s^(1+alpha) on the heterogeneous side.
inline ObjectiveTerms objective_terms(const PolicyParams& learner_params,
                                      const Tokenizer& learner_tok, AgentId learner,
                                      const GroupBatch& group, const AdvantageSet& adv,
                                      std::span<const Tokenizer> toks, const ClipConfig& clip,
                                      int m, TrainMode mode) {
  const int n = group.num_agents();
  const int g = group.group_size();
  if (adv.num_agents() != n)
    throw consistency_error("objective_terms: advantage set does not match group agent count");
  for (int j = 0; j < n; ++j) {
    if (static_cast<int>(adv.a[j].size()) != g)
      throw consistency_error("objective_terms: advantage set does not match group size");
  }
  if (learner.value < 0 || learner.value >= n)
    throw invalid_input_error("objective_terms: learner not in group");
  if (static_cast<int>(toks.size()) != n)
    throw consistency_error("objective_terms: tokenizer list does not match group");

  ObjectiveTerms out;
  out.grad.assign(learner_params.theta.size(), 0.0);
  out.records.reserve(static_cast<std::size_t>(n) * g);
  const double inv_g = 1.0 / static_cast<double>(g);

  // Own rollouts.
  for (int i = 0; i < g; ++i) {
    const Rollout& r = group.per_agent[learner.value][i];
    const SequenceRatio sr = sequence_ratio(learner_params, learner_tok, r, learner_tok);
    const double a = adv.effective(learner, learner, i);
    const HomoTerm term = homo_clip_term(sr.s, a, clip);
    out.j_homo += term.value * inv_g;
    if (term.gradient_active && a != 0.0) {
      detail::axpy(grad_log_prob(learner_params, sr.learner_tokens),
                   sr.s * a * inv_g / sr.learner_len, out.grad);
    }
    out.records.push_back({learner, learner, sr.s, sr.s,
                           term.gradient_active ? 1.0 : 0.0, !term.gradient_active, false, m});
  }

  if (mode == TrainMode::GspoSingle || mode == TrainMode::GspoDouble) return out;

  // Shared rollouts from every other agent.
  for (int j = 0; j < n; ++j) {
    if (j == learner.value) continue;
    for (int i = 0; i < g; ++i) {
      const Rollout& r = group.per_agent[j][i];
      const SequenceRatio sr = sequence_ratio(learner_params, learner_tok, r, toks[j]);
      const double a_eff = adv.effective(learner, AgentId{j}, i);
      Reweighted rw{sr.s, 1.0};
      Clipped cl;
      if (mode == TrainMode::HACPO) {
        rw = exponential_reweight(sr.s, clip.alpha);
        cl = stepwise_clip(rw.s_effective, clip, m);
      } else {  // Naive
        cl = symmetric_clip(sr.s, clip.delta);
      }
      out.j_hete += cl.value * a_eff * inv_g;
      if (!cl.clipped && a_eff != 0.0) {
        detail::axpy(grad_log_prob(learner_params, sr.learner_tokens),
                     rw.grad_weight * sr.s * a_eff * inv_g / sr.learner_len, out.grad);
      }
      out.records.push_back({learner, AgentId{j}, sr.s, rw.s_effective,
                             cl.clipped ? 0.0 : rw.grad_weight, cl.clipped, cl.discarded, m});
    }
  }
  return out;
}

struct AgentStepStats {
  double mean_reward = 0.0;
  double p_hat = 0.0;
  double objective_homo = 0.0;
  double objective_hete = 0.0;
  double grad_norm = 0.0;
};

struct RatioStats {
  bool has_homo = false;
  bool has_hete = false;
  double s_homo_mean = 0.0, s_homo_max = 0.0, s_homo_min = 0.0, s_homo_range = 0.0;
  double s_hete_mean = 0.0, s_hete_max = 0.0, s_hete_min = 0.0, s_hete_range = 0.0;
  double clip_frac_homo = 0.0;
  double clip_frac_hete = 0.0;
  double discard_frac = 0.0;
};

struct AdvPairStats {
  int source = 0;
  int learner = 0;
  double mean_abs_a = 0.0;
  double mean_abs_a_tilde = 0.0;
};

struct TrainStepReport {
  int step = 0;
  std::vector<AgentStepStats> per_agent;
  RatioStats ratio_stats;
  std::vector<double> clip_lower_bounds;  // per mini-batch (cross-agent window)
  std::vector<AdvPairStats> adv_stats;
};

struct TrainerState {
  RunConfig cfg;
  std::vector<AgentRuntime> agents;
  CapabilityTracker tracker;
  int step = 0;
};

inline TrainerState init_trainer(const RunConfig& cfg) {
  cfg.validate();
  TrainerState state{cfg, init_agents(cfg),
                     CapabilityTracker(static_cast<int>(cfg.agents.size()),
                                       cfg.capability_window, cfg.capability_floor),
                     0};
  return state;
}

namespace detail {

inline RatioStats summarize_ratios(std::span<const RatioRecord> records) {
  RatioStats st;
  double homo_sum = 0.0, hete_sum = 0.0;
  long homo_n = 0, hete_n = 0, homo_clip = 0, hete_clip = 0, hete_discard = 0;
  for (const RatioRecord& r : records) {
    if (r.learner == r.source) {
      if (!st.has_homo) {
        st.s_homo_max = st.s_homo_min = r.s;
        st.has_homo = true;
      }
      homo_sum += r.s;
      ++homo_n;
      st.s_homo_max = std::max(st.s_homo_max, r.s);
      st.s_homo_min = std::min(st.s_homo_min, r.s);
      if (r.clipped) ++homo_clip;
    } else {
      if (!st.has_hete) {
        st.s_hete_max = st.s_hete_min = r.s;
        st.has_hete = true;
      }
      hete_sum += r.s;
      ++hete_n;
      st.s_hete_max = std::max(st.s_hete_max, r.s);
      st.s_hete_min = std::min(st.s_hete_min, r.s);
      if (r.clipped) ++hete_clip;
      if (r.discarded) ++hete_discard;
    }
  }
  if (homo_n > 0) {
    st.s_homo_mean = homo_sum / homo_n;
    st.s_homo_range = st.s_homo_max - st.s_homo_min;
    st.clip_frac_homo = static_cast<double>(homo_clip) / homo_n;
  }
  if (hete_n > 0) {
    st.s_hete_mean = hete_sum / hete_n;
    st.s_hete_range = st.s_hete_max - st.s_hete_min;
    st.clip_frac_hete = static_cast<double>(hete_clip) / hete_n;
    st.discard_frac = static_cast<double>(hete_discard) / hete_n;
  }
  return st;
}

// Fill rollout slots for every (agent, prompt) pair, optionally across
// threads. Each slot derives its own seed, so the result is identical for
// any worker count.
inline void generate_rollouts(const TrainerState& state, std::span<const Prompt> prompts, int g,
                              std::vector<std::vector<std::vector<Rollout>>>& slots) {
  const int n = static_cast<int>(state.agents.size());
  const int b = static_cast<int>(prompts.size());
  slots.assign(n, std::vector<std::vector<Rollout>>(b));
  const int jobs = n * b;
  const int workers = std::max(1, std::min(state.cfg.workers, jobs));
  std::vector<std::exception_ptr> failures(workers);
  auto work = [&](int w) {
    try {
      for (int job = w; job < jobs; job += workers) {
        const int a = job / b;
        const int p = job % b;
        std::vector<Rollout> rs;
        rs.reserve(g);
        for (int i = 0; i < g; ++i) {
          const std::uint64_t seed =
              derive_seed(state.cfg.seed, static_cast<std::uint64_t>(state.step) + 1, a, p, i);
          Rollout r = sample(state.agents[a].params, state.agents[a].tok, state.agents[a].id,
                             prompts[p], seed, state.step);
          r.reward = verify(state.cfg.task, prompts[p], r.text);
          rs.push_back(std::move(r));
        }
        slots[a][p] = std::move(rs);
      }
    } catch (...) {
      failures[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

}  // namespace detail

// One training step: sample G rollouts per agent per prompt from the current
// (snapshot) policies, score them, record per-agent batch accuracy, compute
// advantages once per group, then run M sequential mini-batch ascent updates
// per agent in id order. Peers' contributions always come from the step's
// snapshot rollouts, so agent update order does not change any objective.
inline TrainStepReport train_step(TrainerState& state, std::span<const Prompt> prompts) {
  const RunConfig& cfg = state.cfg;
  const int n = static_cast<int>(state.agents.size());
  const int b = static_cast<int>(prompts.size());
  const int g = cfg.effective_group_size();
  const int mb = cfg.minibatch_count;
  if (b < 1 || b % mb != 0)
    throw invalid_input_error("train_step: prompt count must be a positive multiple of the "
                              "mini-batch count");

  std::vector<std::vector<std::vector<Rollout>>> slots;
  detail::generate_rollouts(state, prompts, g, slots);

  // Per-agent batch rewards.
  std::vector<std::vector<double>> batch_rewards(n);
  for (int a = 0; a < n; ++a) {
    batch_rewards[a].reserve(static_cast<std::size_t>(b) * g);
    for (int p = 0; p < b; ++p) {
      for (const Rollout& r : slots[a][p]) batch_rewards[a].push_back(r.reward);
    }
  }

  // Capability recording. The current batch enters the window up front unless
  // the independent-window mode is on; that mode still bootstraps from the
  // very first batch so ratios exist from step one.
  const bool cold = !state.tracker.has_history(AgentId{0});
  const bool record_before = cfg.window_mode == WindowMode::IncludeCurrent || cold;
  if (record_before) {
    for (int a = 0; a < n; ++a) state.tracker.record_batch(AgentId{a}, batch_rewards[a]);
  }

  // Assemble groups and compute advantages once, from the snapshot.
  std::vector<GroupBatch> groups;
  groups.reserve(b);
  for (int p = 0; p < b; ++p) {
    std::vector<std::vector<Rollout>> per_agent;
    per_agent.reserve(n);
    for (int a = 0; a < n; ++a) per_agent.push_back(slots[a][p]);
    groups.push_back(GroupBatch::assemble(prompts[p], std::move(per_agent)));
  }
  std::vector<AdvantageSet> advs;
  advs.reserve(b);
  for (const GroupBatch& group : groups) {
    switch (cfg.mode) {
      case TrainMode::HACPO:
        advs.push_back(hacpo_advantages(group, state.tracker));
        break;
      case TrainMode::Naive:
        advs.push_back(joint_mean_advantages(group));
        break;
      default: {  // isolated GSPO variants: per-agent group-relative advantages
        AdvantageSet set;
        set.omega.assign(n, std::vector<double>(n, 1.0));
        set.a.assign(n, {});
        set.baseline.assign(n, 0.0);
        for (int a = 0; a < n; ++a) {
          std::vector<double> rewards;
          rewards.reserve(g);
          for (const Rollout& r : group.per_agent[a]) rewards.push_back(r.reward);
          set.a[a] = single_agent_advantage(rewards);
          set.baseline[a] = detail::mean_of(rewards);
        }
        advs.push_back(std::move(set));
        break;
      }
    }
  }

  if (!record_before) {
    for (int a = 0; a < n; ++a) state.tracker.record_batch(AgentId{a}, batch_rewards[a]);
  }

  // Mini-batch ascent updates, agents in id order against frozen peers.
  std::vector<Tokenizer> toks;
  toks.reserve(n);
  for (const AgentRuntime& a : state.agents) toks.push_back(a.tok);
  const int groups_per_mb = b / mb;
  std::vector<RatioRecord> all_records;
  TrainStepReport report;
  report.step = state.step;
  report.per_agent.resize(n);

  for (int a = 0; a < n; ++a) {
    AgentRuntime& agent = state.agents[a];
    double homo_acc = 0.0, hete_acc = 0.0, norm_acc = 0.0;
    for (int m = 0; m < mb; ++m) {
      std::vector<double> grad(agent.params.theta.size(), 0.0);
      double j_homo = 0.0, j_hete = 0.0;
      for (int p = m * groups_per_mb; p < (m + 1) * groups_per_mb; ++p) {
        ObjectiveTerms terms = objective_terms(agent.params, agent.tok, agent.id, groups[p],
                                               advs[p], toks, cfg.clip, m, cfg.mode);
        detail::axpy(terms.grad, 1.0 / groups_per_mb, grad);
        j_homo += terms.j_homo / groups_per_mb;
        j_hete += terms.j_hete / groups_per_mb;
        all_records.insert(all_records.end(), terms.records.begin(), terms.records.end());
      }
      norm_acc += detail::l2_norm(grad);
      homo_acc += j_homo;
      hete_acc += j_hete;
      for (std::size_t i = 0; i < grad.size(); ++i)
        agent.params.theta[i] += cfg.learning_rate * grad[i];
    }
    AgentStepStats& st = report.per_agent[a];
    st.mean_reward = detail::mean_of(batch_rewards[a]);
    st.p_hat = state.tracker.capability(AgentId{a});
    st.objective_homo = homo_acc / mb;
    st.objective_hete = hete_acc / mb;
    st.grad_norm = norm_acc / mb;
  }

  report.ratio_stats = detail::summarize_ratios(all_records);
  if (cfg.mode == TrainMode::HACPO) {
    for (int m = 0; m < mb; ++m) report.clip_lower_bounds.push_back(cfg.clip.lower_bound(m));
  }

  // Aggregate advantage magnitudes per (source, learner) pair.
  const bool shared = cfg.mode == TrainMode::HACPO || cfg.mode == TrainMode::Naive;
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      if (!shared && j != k) continue;
      AdvPairStats pair;
      pair.source = j;
      pair.learner = k;
      long count = 0;
      for (const AdvantageSet& adv : advs) {
        for (int i = 0; i < g; ++i) {
          pair.mean_abs_a += std::abs(adv.advantage(AgentId{j}, i));
          pair.mean_abs_a_tilde += std::abs(adv.effective(AgentId{k}, AgentId{j}, i));
          ++count;
        }
      }
      pair.mean_abs_a /= count;
      pair.mean_abs_a_tilde /= count;
      report.adv_stats.push_back(pair);
    }
  }

  ++state.step;
  return report;
}

// Draw the step's prompt batch from the task distribution.
inline std::vector<Prompt> sample_prompt_batch(const RunConfig& cfg, int step) {
  std::vector<Prompt> prompts;
  prompts.reserve(cfg.batch_prompts);
  for (int p = 0; p < cfg.batch_prompts; ++p) {
    const int id = step * cfg.batch_prompts + p;
    prompts.push_back(
        sample_prompt(cfg.task, id, derive_seed(cfg.seed, 0x9a0b, static_cast<std::uint64_t>(step), p)));
  }
  return prompts;
}

}  // namespace hacpo
