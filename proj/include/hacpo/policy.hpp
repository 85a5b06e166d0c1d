#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hacpo/core.hpp"
#include "hacpo/errors.hpp"
#include "hacpo/rng.hpp"

namespace hacpo {

// Two tabular autoregressive policy families over token sequences of a fixed
// response length:
//
//   PositionalTabular — independent softmax per position, logits [L_max, V].
//   Bigram            — softmax conditioned on the previous token, logits
//                       [V+1, V]; row V is the begin-of-sequence context.
//
// Policies are prompt-unconditioned at this scale; prompts only enter reward
// evaluation. Sequence spaces stay small enough to enumerate exactly, which
// is what the verification suites rely on.
enum class PolicyClass { PositionalTabular, Bigram };

struct PolicyParams {
  PolicyClass cls = PolicyClass::PositionalTabular;
  int vocab = 0;
  int rows = 0;      // L_max for PositionalTabular, V+1 for Bigram
  int resp_len = 0;  // fixed number of tokens emitted per response
  std::vector<double> theta;  // row-major [rows, vocab] logits

  static PolicyParams zeros(PolicyClass cls, int vocab, int rows, int resp_len) {
    PolicyParams p;
    p.cls = cls;
    p.vocab = vocab;
    p.rows = cls == PolicyClass::Bigram ? vocab + 1 : rows;
    p.resp_len = resp_len;
    p.theta.assign(static_cast<std::size_t>(p.rows) * vocab, 0.0);
    p.validate();
    return p;
  }

  double at(int r, int c) const { return theta[static_cast<std::size_t>(r) * vocab + c]; }
  double& at(int r, int c) { return theta[static_cast<std::size_t>(r) * vocab + c]; }
  std::span<const double> row(int r) const {
    return {theta.data() + static_cast<std::size_t>(r) * vocab, static_cast<std::size_t>(vocab)};
  }

  void validate() const {
    if (vocab < 1) throw config_error("policy: vocab must be >= 1");
    if (resp_len < 1) throw config_error("policy: response length must be >= 1");
    if (cls == PolicyClass::Bigram && rows != vocab + 1)
      throw config_error("policy: bigram table must have V+1 rows");
    if (cls == PolicyClass::PositionalTabular && resp_len > rows)
      throw config_error("policy: response length exceeds positional table rows");
    if (theta.size() != static_cast<std::size_t>(rows) * vocab)
      throw config_error("policy: logit table shape mismatch");
    for (double v : theta) {
      if (!std::isfinite(v)) throw config_error("policy: non-finite logit");
    }
  }
};

// Exact sequence log-likelihood, factored per token.
struct SeqLogProb {
  double total = 0.0;
  std::vector<double> per_token;
  int len = 0;
};

namespace detail {

// Which logit row conditions the token at `pos` given the previous token.
inline int context_row(const PolicyParams& p, int pos, int prev) {
  if (p.cls == PolicyClass::PositionalTabular) return pos;
  return prev < 0 ? p.vocab : prev;
}

inline double log_sum_exp(std::span<const double> logits) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : logits) hi = std::max(hi, v);
  double acc = 0.0;
  for (double v : logits) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

inline void softmax_into(std::span<const double> logits, std::span<double> out) {
  const double lse = log_sum_exp(logits);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - lse);
}

}  // namespace detail

// Exact log-likelihood of a token sequence under the autoregressive
// factorization. Accepts any length in [1, rows] for positional policies
// (cross-tokenizer scoring can produce lengths other than resp_len).
inline SeqLogProb score(const PolicyParams& params, std::span<const int> tokens) {
  if (tokens.empty()) throw invalid_input_error("score: empty sequence");
  if (params.cls == PolicyClass::PositionalTabular &&
      static_cast<int>(tokens.size()) > params.rows)
    throw invalid_input_error("score: sequence longer than positional table");
  SeqLogProb out;
  out.len = static_cast<int>(tokens.size());
  out.per_token.reserve(tokens.size());
  int prev = -1;
  for (int pos = 0; pos < out.len; ++pos) {
    const int tok = tokens[pos];
    if (tok < 0 || tok >= params.vocab)
      throw invalid_input_error("score: token id " + std::to_string(tok) + " out of vocab " +
                                std::to_string(params.vocab));
    const auto logits = params.row(detail::context_row(params, pos, prev));
    const double lp = logits[tok] - detail::log_sum_exp(logits);
    out.per_token.push_back(lp);
    out.total += lp;
    prev = tok;
  }
  return out;
}

// Analytic gradient of score(...).total w.r.t. theta, same shape as theta.
// Each visited context row accumulates (one-hot(emitted) - softmax(row));
// unvisited rows stay exactly zero and every row sums to zero.
inline std::vector<double> grad_log_prob(const PolicyParams& params, std::span<const int> tokens) {
  if (tokens.empty()) throw invalid_input_error("grad_log_prob: empty sequence");
  if (params.cls == PolicyClass::PositionalTabular &&
      static_cast<int>(tokens.size()) > params.rows)
    throw invalid_input_error("grad_log_prob: sequence longer than positional table");
  std::vector<double> grad(params.theta.size(), 0.0);
  std::vector<double> probs(params.vocab);
  int prev = -1;
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    const int tok = tokens[pos];
    if (tok < 0 || tok >= params.vocab)
      throw invalid_input_error("grad_log_prob: token id out of vocab");
    const int row = detail::context_row(params, static_cast<int>(pos), prev);
    detail::softmax_into(params.row(row), probs);
    double* g = grad.data() + static_cast<std::size_t>(row) * params.vocab;
    for (int c = 0; c < params.vocab; ++c) g[c] -= probs[c];
    g[tok] += 1.0;
    prev = tok;
  }
  return grad;
}

// Draw one response of exactly resp_len tokens. Deterministic given the seed;
// gen_logprob equals score(params, tokens).total by construction.
inline Rollout sample(const PolicyParams& params, const Tokenizer& tok, AgentId agent,
                      const Prompt& prompt, std::uint64_t rng_seed, int step = 0) {
  params.validate();
  Rng rng(rng_seed);
  std::vector<int> tokens;
  tokens.reserve(params.resp_len);
  std::vector<double> probs(params.vocab);
  double logprob = 0.0;
  int prev = -1;
  for (int pos = 0; pos < params.resp_len; ++pos) {
    const auto logits = params.row(detail::context_row(params, pos, prev));
    detail::softmax_into(logits, probs);
    const double u = rng.next_double();
    double cum = 0.0;
    int chosen = params.vocab - 1;
    for (int c = 0; c < params.vocab; ++c) {
      cum += probs[c];
      if (u < cum) {
        chosen = c;
        break;
      }
    }
    logprob += logits[chosen] - detail::log_sum_exp(logits);
    tokens.push_back(chosen);
    prev = chosen;
  }
  return Rollout::create(agent, prompt.id, std::move(tokens), tok, std::min(logprob, 0.0), step);
}

// Visit every token sequence of length `len` over a vocab of size `vocab`,
// in lexicographic order. The enumeration backbone of the brute-force checks.
template <typename Fn>
void for_each_sequence(int vocab, int len, Fn&& fn) {
  std::vector<int> seq(len, 0);
  while (true) {
    fn(std::span<const int>(seq));
    int pos = len - 1;
    while (pos >= 0 && seq[pos] == vocab - 1) seq[pos--] = 0;
    if (pos < 0) return;
    ++seq[pos];
  }
}

// uniform(-spread, spread) logits, then `bias` added along a target token
// sequence's contexts to tilt the policy toward emitting it. The tilt stands
// in for pretraining: it is how capability gaps between agents are created.
inline PolicyParams init_policy(PolicyClass cls, int vocab, int rows, int resp_len,
                                std::uint64_t seed, double spread, double bias,
                                std::span<const int> bias_target = {}) {
  PolicyParams p = PolicyParams::zeros(cls, vocab, rows, resp_len);
  Rng rng(derive_seed(seed, 0x1217));
  for (double& v : p.theta) v = rng.next_uniform(-spread, spread);
  if (bias != 0.0 && !bias_target.empty()) {
    int prev = -1;
    for (std::size_t pos = 0; pos < bias_target.size() && static_cast<int>(pos) < resp_len;
         ++pos) {
      const int tok = bias_target[pos];
      if (tok < 0 || tok >= vocab) throw config_error("init_policy: bias target out of vocab");
      p.at(detail::context_row(p, static_cast<int>(pos), prev), tok) += bias;
      prev = tok;
    }
  }
  p.validate();
  return p;
}

}  // namespace hacpo
