#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hacpo/core.hpp"
#include "hacpo/errors.hpp"
#include "hacpo/policy.hpp"

namespace hacpo {

// Clipping and reweighting hyperparameters.
//
//   eps_low/eps_high — half-widths of the symmetric-ish window used for an
//                      agent's own samples (GSPO-style, tight).
//   delta            — cross-agent lower clip half-width; the cross window is
//                      [1 - delta, 1.0], upper bound pinned at 1 so shared
//                      rollouts can only downweight learning signals.
//   delta_step       — per-mini-batch tightening of the cross lower bound.
//   alpha            — exponent of the exponential reweighting applied to
//                      cross-agent ratios below 1.
//   stepwise_base    — whether the first mini-batch counts as update 0 or 1
//                      in the tightening schedule.
struct ClipConfig {
  double eps_low = 3e-4;
  double eps_high = 4e-4;
  double delta = 0.8;
  double delta_step = 0.025;
  double alpha = 1.0;
  int stepwise_base = 0;

  // Lower bound of the cross-agent window at mini-batch index m.
  double lower_bound(int m) const { return 1.0 - delta + (stepwise_base + m) * delta_step; }

  void validate(int minibatch_count) const {
    if (!(eps_low > 0.0) || !(eps_high > 0.0))
      throw config_error("clipping.eps_low/eps_high: must be > 0");
    if (!(delta > 0.0) || !(delta < 1.0)) throw config_error("clipping.delta: must be in (0, 1)");
    if (delta_step < 0.0) throw config_error("clipping.delta_step: must be >= 0");
    if (alpha < 0.0) throw config_error("clipping.alpha: must be >= 0");
    if (stepwise_base != 0 && stepwise_base != 1)
      throw config_error("clipping.stepwise_base: must be 0 or 1");
    if (minibatch_count < 1) throw config_error("optimization.minibatch_count: must be >= 1");
    const double last = lower_bound(minibatch_count - 1);
    if (last >= 1.0)
      throw config_error("clipping: lower bound reaches " + std::to_string(last) +
                         " at the final mini-batch (1 - delta + m*delta_step must stay < 1)");
  }
};

// Sequence-level importance ratio of a shared rollout under the learner's
// current policy versus the generator's snapshot.
//
// Same tokenizer: s = exp((log pi_k(tokens) - gen_logprob) / gen_len).
// Different tokenizers: the text is retokenized for the learner and each
// log-likelihood is normalized by its own token count,
// s = exp(log pi_k(y_k)/|y_k| - gen_logprob/|y_j|); the geometric-mean form
// makes re-tokenization length differences cancel and reduces to the single
// formula when the tokenizers match.
struct SequenceRatio {
  double s = 1.0;
  std::vector<int> learner_tokens;  // the token view the learner scores
  int learner_len = 0;
  double learner_logprob = 0.0;
};

inline SequenceRatio sequence_ratio(const PolicyParams& learner, const Tokenizer& learner_tok,
                                    const Rollout& rollout, const Tokenizer& source_tok) {
  SequenceRatio out;
  Retokenized view = retokenize(rollout, source_tok, learner_tok);
  out.learner_tokens = std::move(view.tokens);
  out.learner_len = view.len;
  out.learner_logprob = score(learner, out.learner_tokens).total;
  const double log_s = learner_tok == source_tok
                           ? (out.learner_logprob - rollout.gen_logprob) /
                                 static_cast<double>(rollout.gen_len)
                           : out.learner_logprob / static_cast<double>(out.learner_len) -
                                 rollout.gen_logprob / static_cast<double>(rollout.gen_len);
  out.s = std::exp(log_s);
  return out;
}

// Exponential reweighting s~ = s * sg[s]^alpha for cross-agent ratios below
// one. The stop-gradient factor enters the gradient path as the constant
// multiplier s^alpha, so the value is s^(1+alpha) while the gradient sees
// grad_weight * ds/dtheta. Ratios at or above 1 pass through unchanged; the
// s > 1 region is handled entirely by the upper clip.
struct Reweighted {
  double s_effective = 1.0;
  double grad_weight = 1.0;  // constant multiplier on ds/dtheta
};

inline Reweighted exponential_reweight(double s, double alpha) {
  if (!(s > 0.0)) throw invalid_input_error("exponential_reweight: ratio must be > 0");
  if (s >= 1.0 || alpha == 0.0) return {s, 1.0};
  const double w = std::pow(s, alpha);
  return {s * w, w};
}

// Clamp into the cross-agent window [1 - delta + m*delta_step, 1.0].
// `discarded` marks ratios below the lower bound: the sample is too far from
// the current policy and contributes no gradient. An upper clip at 1.0 also
// gates the gradient (the value is a constant) but is not a discard.
struct Clipped {
  double value = 1.0;
  bool clipped = false;
  bool discarded = false;
};

inline Clipped stepwise_clip(double s_effective, const ClipConfig& cfg, int m) {
  if (m < 0) throw invalid_input_error("stepwise_clip: negative mini-batch index");
  const double lo = cfg.lower_bound(m);
  if (lo >= 1.0)
    throw config_error("stepwise_clip: lower bound " + std::to_string(lo) + " reached 1.0");
  if (s_effective < lo) return {lo, true, true};
  if (s_effective > 1.0) return {1.0, true, false};
  return {s_effective, false, false};
}

// Symmetric window [1 - delta, 1 + delta] used by the naive rollout-sharing
// baseline for cross samples.
inline Clipped symmetric_clip(double s, double delta) {
  if (s < 1.0 - delta) return {1.0 - delta, true, true};
  if (s > 1.0 + delta) return {1.0 + delta, true, false};
  return {s, false, false};
}

// Pessimistic PPO/GSPO term for an agent's own sample:
// min(s * A, clip(s, 1 - eps_low, 1 + eps_high) * A). The gradient flows
// through s only when the min selects the unclipped branch (ties included).
struct HomoTerm {
  double value = 0.0;
  bool gradient_active = true;
};

inline HomoTerm homo_clip_term(double s, double advantage, const ClipConfig& cfg) {
  const double clipped_s = std::clamp(s, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high);
  const double raw = s * advantage;
  const double clipped = clipped_s * advantage;
  if (raw <= clipped) return {raw, true};
  return {clipped, false};
}

// Bookkeeping for one (learner, sample) ratio evaluation; the per-step ratio
// statistics are aggregated from these.
struct RatioRecord {
  AgentId learner;
  AgentId source;
  double s = 1.0;
  double s_effective = 1.0;  // value path after exponential reweighting
  double grad_weight = 0.0;  // stop-gradient-resolved multiplier; 0 when gated
  bool clipped = false;
  bool discarded = false;
  int minibatch_index = 0;
};

}  // namespace hacpo
