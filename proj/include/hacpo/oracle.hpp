#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hacpo/advantage.hpp"
#include "hacpo/capability.hpp"
#include "hacpo/core.hpp"
#include "hacpo/errors.hpp"
#include "hacpo/policy.hpp"
#include "hacpo/rng.hpp"
#include "hacpo/tasks.hpp"
#include "hacpo/trainer.hpp"
#include "hacpo/weighting.hpp"

// Brute-force and Monte Carlo verifiers for the estimator and gradient
// claims. Every expected value here comes from direct enumeration or an
// independent sampling loop, never from the training path it is checking.

namespace hacpo {

struct VerificationReport {
  std::string suite;
  long long trials = 0;
  double statistic = 0.0;
  double bound = 0.0;
  bool passed = false;
  long long runtime_ms = 0;
  std::string note;
};

namespace oracle_detail {

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  long long elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace oracle_detail

// ---------------------------------------------------------------------------
// Baseline unbiasedness (Monte Carlo vs exact enumeration)
// ---------------------------------------------------------------------------

// Frozen two-or-more-agent world for the estimator checks: fixed policies over
// one task and prompt, a capability tracker seeded with each agent's exact
// expected reward (the ideal-ratio condition), and a group size.
struct EstimatorFixture {
  TaskSpec task;
  Tokenizer tok{TokenScheme::Char, "abcd"};
  Prompt prompt;
  std::vector<PolicyParams> policies;
  std::vector<double> true_values;  // brute-force expected reward per agent
  int group_size = 8;

  int num_agents() const { return static_cast<int>(policies.size()); }

  // Tracker whose P-hat values equal the exact expected rewards. With
  // `adversarial_for` >= 0, every *other* agent's value is halved, which
  // doubles the capability ratios used by that learner's baseline.
  CapabilityTracker make_tracker(int adversarial_for = -1) const {
    CapabilityTracker t(num_agents(), 1, 1e-6);
    for (int a = 0; a < num_agents(); ++a) {
      double v = true_values[a];
      if (adversarial_for >= 0 && a != adversarial_for) v *= 0.5;
      t.record_batch(AgentId{a}, std::vector<double>{v});
    }
    return t;
  }

  GroupBatch sample_group(std::uint64_t seed, int step = 0) const {
    std::vector<std::vector<Rollout>> per_agent(num_agents());
    for (int a = 0; a < num_agents(); ++a) {
      per_agent[a].reserve(group_size);
      for (int i = 0; i < group_size; ++i) {
        Rollout r = sample(policies[a], tok, AgentId{a}, prompt,
                           derive_seed(seed, 0xeb, a, i), step);
        r.reward = verify(task, prompt, r.text);
        per_agent[a].push_back(std::move(r));
      }
    }
    return GroupBatch::assemble(prompt, std::move(per_agent));
  }
};

// V=4, L=3 substring task with one weak and one strong agent.
inline EstimatorFixture default_estimator_fixture(std::uint64_t seed) {
  EstimatorFixture fx;
  fx.task.kind = TaskKind::SubstringMatch;
  fx.task.alphabet = "abcd";
  fx.task.response_len = 3;
  fx.task.target = "ab";
  fx.prompt = Prompt{0, {}};
  const std::vector<int> tilt = fx.tok.tokenize(canonical_target_text(fx.task));
  fx.policies.push_back(
      init_policy(PolicyClass::PositionalTabular, 4, 3, 3, derive_seed(seed, 1), 0.6, 0.0, tilt));
  fx.policies.push_back(
      init_policy(PolicyClass::PositionalTabular, 4, 3, 3, derive_seed(seed, 2), 0.6, 1.4, tilt));
  for (const PolicyParams& p : fx.policies)
    fx.true_values.push_back(expected_reward_bruteforce(fx.task, fx.prompt, p, fx.tok));
  return fx;
}

// Monte Carlo check that the capability-aware baseline is an unbiased
// estimate of the learner's own expected reward. Pass bound: 4 standard
// errors around the enumeration value. The adversarial variant doubles the
// learner's capability ratios and must fail by roughly half the cross term.
inline VerificationReport check_unbiasedness(const EstimatorFixture& fx, int learner,
                                             long long trials, std::uint64_t seed,
                                             bool adversarial_tracker = false) {
  oracle_detail::StopWatch watch;
  const CapabilityTracker tracker = fx.make_tracker(adversarial_tracker ? learner : -1);
  double sum = 0.0, sum_sq = 0.0;
  for (long long m = 0; m < trials; ++m) {
    const GroupBatch group = fx.sample_group(derive_seed(seed, 0x1a2b, static_cast<std::uint64_t>(m)));
    const double mu = capability_baseline(group, tracker, AgentId{learner});
    sum += mu;
    sum_sq += mu * mu;
  }
  const double mean = sum / static_cast<double>(trials);
  const double var = std::max(0.0, (sum_sq - trials * mean * mean) / static_cast<double>(trials - 1));
  const double se = std::sqrt(var / static_cast<double>(trials));

  VerificationReport report;
  report.suite = std::string("unbiasedness/agent") + std::to_string(learner) +
                 (adversarial_tracker ? "/adversarial" : "");
  report.trials = trials;
  report.statistic = std::abs(mean - fx.true_values[learner]);
  report.bound = 4.0 * se;
  report.passed = report.statistic < report.bound;
  report.runtime_ms = watch.elapsed_ms();
  if (adversarial_tracker) {
    // Predicted bias from the linearity of the baseline: doubling the ratio
    // adds (1/n) * omega(k,j) * E[R_j] per perturbed peer.
    double predicted = 0.0;
    const int n = fx.num_agents();
    const CapabilityTracker ideal = fx.make_tracker();
    for (int j = 0; j < n; ++j) {
      if (j == learner) continue;
      predicted += ideal.capability_ratio(AgentId{learner}, AgentId{j}) * fx.true_values[j] /
                   static_cast<double>(n);
    }
    report.note = "predicted bias " + std::to_string(predicted);
  }
  return report;
}

// Companion check: the raw advantage R - baseline of the learner's own
// samples has Monte Carlo mean zero. Group means are i.i.d. across trials, so
// the standard error comes from their spread.
inline VerificationReport check_corollary(const EstimatorFixture& fx, int learner,
                                          long long trials, std::uint64_t seed,
                                          bool adversarial_tracker = false) {
  oracle_detail::StopWatch watch;
  const CapabilityTracker tracker = fx.make_tracker(adversarial_tracker ? learner : -1);
  double sum = 0.0, sum_sq = 0.0;
  for (long long m = 0; m < trials; ++m) {
    const GroupBatch group = fx.sample_group(derive_seed(seed, 0x3c4d, static_cast<std::uint64_t>(m)));
    const double mu = capability_baseline(group, tracker, AgentId{learner});
    double group_mean = 0.0;
    for (const Rollout& r : group.per_agent[learner]) group_mean += r.reward - mu;
    group_mean /= static_cast<double>(fx.group_size);
    sum += group_mean;
    sum_sq += group_mean * group_mean;
  }
  const double mean = sum / static_cast<double>(trials);
  const double var = std::max(0.0, (sum_sq - trials * mean * mean) / static_cast<double>(trials - 1));
  const double se = std::sqrt(var / static_cast<double>(trials));

  VerificationReport report;
  report.suite = std::string("corollary/agent") + std::to_string(learner) +
                 (adversarial_tracker ? "/adversarial" : "");
  report.trials = trials;
  report.statistic = std::abs(mean);
  report.bound = 4.0 * se;
  report.passed = report.statistic < report.bound;
  report.runtime_ms = watch.elapsed_ms();
  return report;
}

// ---------------------------------------------------------------------------
// Gradient alignment (exact enumeration)
// ---------------------------------------------------------------------------

enum class CollaboratorKind { Self, Competent, Adversarial };

struct AlignmentInstance {
  TaskSpec task;
  Tokenizer tok{TokenScheme::Char, "abcd"};
  Prompt prompt;
  PolicyParams learner;
  PolicyParams source;
  double alpha = 1.0;
  double capability_floor = 1e-3;
};

// Exact expectation gradients of the homogeneous and heterogeneous
// objectives at the snapshot point, and their inner product. Both are plain
// enumeration sums; the heterogeneous side carries the capability ratio and
// the (ratio)^(1+alpha) weight of the shared-sample objective.
struct AlignmentResult {
  double inner_product = 0.0;
  double homo_norm_sq = 0.0;
};

inline AlignmentResult alignment_inner_product(const AlignmentInstance& inst) {
  const int vocab = inst.learner.vocab;
  const int len = inst.learner.resp_len;
  const double p_learn =
      expected_reward_bruteforce(inst.task, inst.prompt, inst.learner, inst.tok);
  const double p_src = expected_reward_bruteforce(inst.task, inst.prompt, inst.source, inst.tok);
  const double omega = std::max(p_src, inst.capability_floor) /
                       std::max(p_learn, inst.capability_floor);

  std::vector<double> grad_homo(inst.learner.theta.size(), 0.0);
  std::vector<double> grad_hete(inst.learner.theta.size(), 0.0);
  const double inv_len = 1.0 / static_cast<double>(len);
  for_each_sequence(vocab, len, [&](std::span<const int> seq) {
    const double log_pk = score(inst.learner, seq).total;
    const double log_pj = score(inst.source, seq).total;
    const double reward = verify(inst.task, inst.prompt, inst.tok.detokenize(seq));
    const std::vector<double> g = grad_log_prob(inst.learner, seq);
    const double w_homo = std::exp(log_pk) * (reward - p_learn) * inv_len;
    const double ratio = std::exp((log_pk - log_pj) * inv_len);
    const double w_hete = std::exp(log_pj) * omega * std::pow(ratio, 1.0 + inst.alpha) *
                          (reward - p_src) * inv_len;
    for (std::size_t i = 0; i < g.size(); ++i) {
      grad_homo[i] += w_homo * g[i];
      grad_hete[i] += w_hete * g[i];
    }
  });

  AlignmentResult out;
  for (std::size_t i = 0; i < grad_homo.size(); ++i) {
    out.inner_product += grad_homo[i] * grad_hete[i];
    out.homo_norm_sq += grad_homo[i] * grad_homo[i];
  }
  return out;
}

// Random V=4, L=2 instance. Competent collaborators are built by exponential
// reward tilting: the source policy matches the positional marginals of
// base(y) * exp(gamma * R(y)) with gamma > 0, so its confidence is positively
// correlated with response quality across the whole sequence space.
// Adversarial collaborators use gamma < 0, violating that assumption by
// construction. Alpha is drawn per instance; note that (1+alpha)/L = 1 makes
// the shared-sample gradient collapse to an exact change of measure, so the
// draw spans both sides of that point.
inline AlignmentInstance random_alignment_instance(CollaboratorKind kind, std::uint64_t seed) {
  AlignmentInstance inst;
  inst.task.kind = TaskKind::SubstringMatch;
  inst.task.alphabet = "abcd";
  inst.task.response_len = 2;
  inst.prompt = Prompt{0, {}};
  Rng rng(derive_seed(seed, 0xa11));

  const int target_len = 1 + static_cast<int>(rng.next_below(2));
  std::string target;
  for (int i = 0; i < target_len; ++i) target += inst.task.alphabet[rng.next_below(4)];
  inst.task.target = target;

  const double alphas[] = {0.0, 0.5, 1.0, 2.0, 3.0};
  inst.alpha = alphas[rng.next_below(5)];
  inst.learner = init_policy(PolicyClass::PositionalTabular, 4, 2, 2, derive_seed(seed, 0xb22),
                             0.8, 0.0);
  if (kind == CollaboratorKind::Self) {
    inst.source = inst.learner;
    return inst;
  }

  double gamma = 1.5 + 2.5 * rng.next_double();
  if (kind == CollaboratorKind::Adversarial) gamma = -gamma;
  const PolicyParams base =
      init_policy(PolicyClass::PositionalTabular, 4, 2, 2, derive_seed(seed, 0xc33), 0.8, 0.0);
  std::vector<std::vector<double>> marginals(2, std::vector<double>(4, 0.0));
  for_each_sequence(4, 2, [&](std::span<const int> seq) {
    const double w = std::exp(score(base, seq).total +
                              gamma * verify(inst.task, inst.prompt, inst.tok.detokenize(seq)));
    for (int pos = 0; pos < 2; ++pos) marginals[pos][seq[pos]] += w;
  });
  inst.source = PolicyParams::zeros(PolicyClass::PositionalTabular, 4, 2, 2);
  for (int pos = 0; pos < 2; ++pos) {
    for (int c = 0; c < 4; ++c) inst.source.at(pos, c) = std::log(marginals[pos][c]);
  }
  return inst;
}

inline VerificationReport check_alignment(CollaboratorKind kind, int trials, std::uint64_t seed) {
  oracle_detail::StopWatch watch;
  int positive = 0;
  for (int t = 0; t < trials; ++t) {
    const AlignmentInstance inst =
        random_alignment_instance(kind, derive_seed(seed, 0xd44, static_cast<std::uint64_t>(t)));
    if (alignment_inner_product(inst).inner_product > 0.0) ++positive;
  }
  VerificationReport report;
  report.trials = trials;
  report.statistic = static_cast<double>(positive) / static_cast<double>(trials);
  report.runtime_ms = watch.elapsed_ms();
  switch (kind) {
    case CollaboratorKind::Self:
      report.suite = "alignment/self";
      report.bound = 1.0;
      report.passed = report.statistic >= 1.0;
      break;
    case CollaboratorKind::Competent:
      report.suite = "alignment/competent";
      report.bound = 0.95;
      report.passed = report.statistic >= 0.95;
      break;
    case CollaboratorKind::Adversarial:
      // Recorded for the report only; the assumption behind the alignment
      // claim is violated by construction, so there is no pass/fail here.
      report.suite = "alignment/adversarial";
      report.bound = 0.0;
      report.passed = true;
      report.note = "informational: assumption violated by construction";
      break;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checks (gates and stop-gradients frozen)
// ---------------------------------------------------------------------------

enum class GradSurface { Score, HomoSurrogate, HeteSurrogate };

// One frozen objective instance: a group, an advantage set, the clip config
// and mini-batch index, plus the learner parameters the surrogate is
// differentiated at.
struct SurrogateInstance {
  PolicyParams learner;
  Tokenizer tok{TokenScheme::Char, "abcd"};
  AgentId learner_id{0};
  GroupBatch group;
  std::vector<Tokenizer> toks;
  AdvantageSet adv;
  ClipConfig clip;
  int minibatch_index = 0;
  TrainMode mode = TrainMode::HACPO;
};

// Value of the surrogate with every clip gate and stop-gradient constant
// frozen at its forward-pass state. Gated samples contribute constants and
// are dropped entirely; active homogeneous samples contribute s(theta) * A
// and active shared samples grad_weight0 * s(theta) * A~, matching what the
// analytic gradient differentiates.
inline double frozen_surrogate_value(const SurrogateInstance& inst, const PolicyParams& at,
                                     std::span<const RatioRecord> forward_records) {
  const int g = inst.group.group_size();
  const double inv_g = 1.0 / static_cast<double>(g);
  double value = 0.0;
  std::size_t idx = 0;
  auto next_record = [&]() -> const RatioRecord& { return forward_records[idx++]; };

  for (int i = 0; i < g; ++i) {
    const Rollout& r = inst.group.per_agent[inst.learner_id.value][i];
    const RatioRecord& rec = next_record();
    if (rec.grad_weight == 0.0) continue;
    const SequenceRatio sr = sequence_ratio(at, inst.tok, r, inst.tok);
    value += sr.s * inst.adv.effective(inst.learner_id, inst.learner_id, i) * inv_g;
  }
  if (inst.mode == TrainMode::GspoSingle || inst.mode == TrainMode::GspoDouble) return value;
  for (int j = 0; j < inst.group.num_agents(); ++j) {
    if (j == inst.learner_id.value) continue;
    for (int i = 0; i < g; ++i) {
      const Rollout& r = inst.group.per_agent[j][i];
      const RatioRecord& rec = next_record();
      if (rec.clipped) continue;
      const SequenceRatio sr = sequence_ratio(at, inst.tok, r, inst.toks[j]);
      value += rec.grad_weight * sr.s * inst.adv.effective(inst.learner_id, AgentId{j}, i) * inv_g;
    }
  }
  return value;
}

// Central finite differences of an arbitrary scalar of the logits.
inline std::vector<double> fd_gradient(const PolicyParams& params,
                                       const std::function<double(const PolicyParams&)>& f,
                                       double h = 1e-5) {
  std::vector<double> grad(params.theta.size(), 0.0);
  PolicyParams probe = params;
  for (std::size_t i = 0; i < params.theta.size(); ++i) {
    const double orig = probe.theta[i];
    probe.theta[i] = orig + h;
    const double up = f(probe);
    probe.theta[i] = orig - h;
    const double down = f(probe);
    probe.theta[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline double gradient_rel_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  diff = std::sqrt(diff);
  const double scale = std::max(std::sqrt(na), std::sqrt(nb));
  if (scale < 1e-12) return diff < 1e-12 ? 0.0 : diff / 1e-12;
  return diff / scale;
}

// Random single-agent instance for the homogeneous surface. The learner is
// nudged off the snapshot so ratios spread around 1, and the clip width is
// random so both live and gated branches appear across instances.
inline SurrogateInstance random_homo_instance(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x4401));
  SurrogateInstance inst;
  const int vocab = 2 + static_cast<int>(rng.next_below(3));
  const int len = 1 + static_cast<int>(rng.next_below(3));
  inst.tok = Tokenizer(TokenScheme::Char, std::string("abcdef").substr(0, vocab));
  inst.toks = {inst.tok};
  inst.mode = TrainMode::GspoSingle;
  const PolicyParams snapshot =
      init_policy(PolicyClass::PositionalTabular, vocab, len, len, derive_seed(seed, 2), 1.0, 0.0);

  const int g = 4;
  std::vector<std::vector<Rollout>> per_agent(1);
  for (int i = 0; i < g; ++i) {
    Rollout r = sample(snapshot, inst.tok, AgentId{0}, Prompt{0, {}}, derive_seed(seed, 3, i));
    r.reward = static_cast<double>(i % 2);  // mixed rewards, never degenerate
    per_agent[0].push_back(std::move(r));
  }
  inst.group = GroupBatch::assemble(Prompt{0, {}}, std::move(per_agent));

  std::vector<double> rewards;
  for (const Rollout& r : inst.group.per_agent[0]) rewards.push_back(r.reward);
  inst.adv.a = {single_agent_advantage(rewards)};
  inst.adv.baseline = {0.5};
  inst.adv.omega = {{1.0}};

  inst.learner = snapshot;
  const double jitter = rng.next_double() < 0.3 ? 0.0 : 0.05 * rng.next_double();
  for (double& t : inst.learner.theta) t += rng.next_uniform(-jitter, jitter);
  inst.clip.eps_low = 3e-4 + 0.05 * rng.next_double();
  inst.clip.eps_high = 4e-4 + 0.05 * rng.next_double();
  return inst;
}

// Random two-agent instance for the heterogeneous surface. The learner's own
// advantages are zeroed so the objective reduces to the shared-sample term.
inline SurrogateInstance random_hete_instance(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x4402));
  SurrogateInstance inst;
  const int vocab = 2 + static_cast<int>(rng.next_below(3));
  const int len = 1 + static_cast<int>(rng.next_below(3));
  const bool cross_tokenizer = rng.next_double() < 0.35;
  const std::string alphabet = std::string("abcdef").substr(0, vocab);
  inst.tok = Tokenizer(TokenScheme::Char, alphabet);
  const Tokenizer source_tok =
      cross_tokenizer ? Tokenizer(TokenScheme::Pair, alphabet) : inst.tok;
  inst.toks = {inst.tok, source_tok};
  inst.mode = TrainMode::HACPO;

  const int source_len = cross_tokenizer ? (len + 1) / 2 : len;
  const PolicyParams source_policy = init_policy(
      PolicyClass::PositionalTabular, source_tok.vocab_size(), std::max(source_len, 1),
      std::max(source_len, 1), derive_seed(seed, 5), 1.0, 0.0);
  const auto learner_cls = rng.next_double() < 0.3 ? PolicyClass::Bigram
                                                   : PolicyClass::PositionalTabular;
  const PolicyParams learner_snapshot =
      init_policy(learner_cls, vocab, std::max(2 * source_len, len), len,
                  derive_seed(seed, 6), 1.0, 0.0);

  const int g = 3;
  std::vector<std::vector<Rollout>> per_agent(2);
  for (int i = 0; i < g; ++i) {
    Rollout own =
        sample(learner_snapshot, inst.tok, AgentId{0}, Prompt{0, {}}, derive_seed(seed, 7, i));
    own.reward = static_cast<double>(i % 2);
    per_agent[0].push_back(std::move(own));
    Rollout shared =
        sample(source_policy, source_tok, AgentId{1}, Prompt{0, {}}, derive_seed(seed, 8, i));
    shared.reward = static_cast<double>((i + 1) % 2);
    per_agent[1].push_back(std::move(shared));
  }
  inst.group = GroupBatch::assemble(Prompt{0, {}}, std::move(per_agent));

  inst.adv.a.assign(2, std::vector<double>(g, 0.0));
  for (int i = 0; i < g; ++i) inst.adv.a[1][i] = rng.next_uniform(-1.5, 1.5);
  inst.adv.baseline = {0.0, 0.0};
  inst.adv.omega = {{1.0, rng.next_uniform(0.5, 2.0)}, {rng.next_uniform(0.5, 2.0), 1.0}};

  inst.learner = learner_snapshot;
  const double jitter = 0.2 * rng.next_double();
  for (double& t : inst.learner.theta) t += rng.next_uniform(-jitter, jitter);
  inst.clip.delta = 0.3 + 0.6 * rng.next_double();
  inst.clip.delta_step = 0.05 * rng.next_double();
  inst.clip.alpha = 3.0 * rng.next_double();
  inst.minibatch_index = static_cast<int>(rng.next_below(2));
  return inst;
}

// Max relative error between the analytic gradient and central finite
// differences of the frozen surrogate, over random instances.
inline VerificationReport check_gradients(GradSurface surface, int trials, std::uint64_t seed,
                                          double h = 1e-5) {
  oracle_detail::StopWatch watch;
  VerificationReport report;
  report.trials = trials;
  report.bound = 1e-5;
  double worst = 0.0;

  for (int t = 0; t < trials; ++t) {
    const std::uint64_t inst_seed = derive_seed(seed, 0xf00d, static_cast<std::uint64_t>(t));
    if (surface == GradSurface::Score) {
      Rng rng(inst_seed);
      const auto cls = rng.next_below(2) ? PolicyClass::Bigram : PolicyClass::PositionalTabular;
      const int vocab = 2 + static_cast<int>(rng.next_below(4));
      const int len = 1 + static_cast<int>(rng.next_below(4));
      const PolicyParams p = init_policy(cls, vocab, len, len, inst_seed, 1.5, 0.0);
      std::vector<int> tokens(len);
      for (int& tk : tokens) tk = static_cast<int>(rng.next_below(vocab));
      const auto analytic = grad_log_prob(p, tokens);
      const auto numeric =
          fd_gradient(p, [&](const PolicyParams& q) { return score(q, tokens).total; }, h);
      worst = std::max(worst, gradient_rel_error(analytic, numeric));
      continue;
    }
    const SurrogateInstance inst = surface == GradSurface::HomoSurrogate
                                       ? random_homo_instance(inst_seed)
                                       : random_hete_instance(inst_seed);
    const ObjectiveTerms forward =
        objective_terms(inst.learner, inst.tok, inst.learner_id, inst.group, inst.adv, inst.toks,
                        inst.clip, inst.minibatch_index, inst.mode);
    const auto numeric = fd_gradient(
        inst.learner,
        [&](const PolicyParams& q) { return frozen_surrogate_value(inst, q, forward.records); },
        h);
    worst = std::max(worst, gradient_rel_error(forward.grad, numeric));
  }

  report.suite = surface == GradSurface::Score
                     ? "gradients/score"
                     : (surface == GradSurface::HomoSurrogate ? "gradients/homo_surrogate"
                                                              : "gradients/hete_surrogate");
  report.statistic = worst;
  report.passed = worst < report.bound;
  report.runtime_ms = watch.elapsed_ms();
  return report;
}

// ---------------------------------------------------------------------------
// Suite runner
// ---------------------------------------------------------------------------

struct SuiteOptions {
  std::uint64_t seed = 1;
  long long mc_trials = 100000;
  int alignment_trials = 200;
  int gradient_trials = 100;
  bool adversarial_tracker = false;
};

inline std::vector<VerificationReport> run_verification_suite(const std::string& name,
                                                              const SuiteOptions& opt) {
  std::vector<VerificationReport> reports;
  const bool all = name == "all";
  if (all || name == "unbiasedness") {
    const EstimatorFixture fx = default_estimator_fixture(opt.seed);
    for (int k = 0; k < fx.num_agents(); ++k) {
      reports.push_back(check_unbiasedness(fx, k, opt.mc_trials, derive_seed(opt.seed, 0x10, k),
                                           opt.adversarial_tracker));
    }
  }
  if (all || name == "corollary") {
    const EstimatorFixture fx = default_estimator_fixture(opt.seed);
    for (int k = 0; k < fx.num_agents(); ++k) {
      reports.push_back(check_corollary(fx, k, opt.mc_trials, derive_seed(opt.seed, 0x20, k),
                                        opt.adversarial_tracker));
    }
  }
  if (all || name == "alignment") {
    reports.push_back(check_alignment(CollaboratorKind::Self, opt.alignment_trials,
                                      derive_seed(opt.seed, 0x30)));
    reports.push_back(check_alignment(CollaboratorKind::Competent, opt.alignment_trials,
                                      derive_seed(opt.seed, 0x31)));
    reports.push_back(check_alignment(CollaboratorKind::Adversarial, opt.alignment_trials,
                                      derive_seed(opt.seed, 0x32)));
  }
  if (all || name == "gradients") {
    reports.push_back(
        check_gradients(GradSurface::Score, opt.gradient_trials, derive_seed(opt.seed, 0x40)));
    reports.push_back(check_gradients(GradSurface::HomoSurrogate, opt.gradient_trials,
                                      derive_seed(opt.seed, 0x41)));
    reports.push_back(check_gradients(GradSurface::HeteSurrogate, opt.gradient_trials,
                                      derive_seed(opt.seed, 0x42)));
  }
  if (reports.empty()) throw invalid_input_error("unknown verification suite: " + name);
  return reports;
}

}  // namespace hacpo
