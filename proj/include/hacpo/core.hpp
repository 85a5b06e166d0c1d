#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hacpo/errors.hpp"

namespace hacpo {

// Index of an agent within a run. Ids are dense in [0, n).
struct AgentId {
  int value = 0;
  auto operator<=>(const AgentId&) const = default;
};

// Degrees of heterogeneity between two agents: same parameter space with
// different values (State), same family with different parameter counts
// (Size), or different tokenization/architecture entirely (Model).
enum class HeterogeneityKind { State, Size, Model };

// A task query. The payload carries task-specific operands as symbol indices
// (e.g. the two digits of a modular-sum instance); policies at this scale do
// not condition on it, only reward functions read it.
struct Prompt {
  int id = 0;
  std::vector<int> payload;
};

enum class TokenScheme { Char, Pair };

// Reversible tokenizers over a small ASCII alphabet.
//
// Char maps each symbol to its alphabet index. Pair maps two consecutive
// symbols to one token; an odd-length text ends in a single-symbol tail
// token, so detokenize(tokenize(text)) == text for every text. Vocab sizes:
// Char |A|, Pair |A|^2 + |A| (full pairs plus tail tokens).
class Tokenizer {
 public:
  Tokenizer(TokenScheme scheme, std::string alphabet)
      : scheme_(scheme), alphabet_(std::move(alphabet)) {
    if (alphabet_.empty()) throw invalid_input_error("tokenizer: empty alphabet");
    for (std::size_t i = 0; i < alphabet_.size(); ++i) {
      for (std::size_t j = i + 1; j < alphabet_.size(); ++j) {
        if (alphabet_[i] == alphabet_[j])
          throw invalid_input_error("tokenizer: duplicate symbol in alphabet");
      }
    }
  }

  TokenScheme scheme() const { return scheme_; }
  const std::string& alphabet() const { return alphabet_; }
  int alphabet_size() const { return static_cast<int>(alphabet_.size()); }

  int vocab_size() const {
    const int n = alphabet_size();
    return scheme_ == TokenScheme::Char ? n : n * n + n;
  }

  // Symbols a single token can expand to (1 for Char, up to 2 for Pair).
  int max_symbols_per_token() const { return scheme_ == TokenScheme::Char ? 1 : 2; }

  int symbol_index(char c) const {
    const auto pos = alphabet_.find(c);
    return pos == std::string::npos ? -1 : static_cast<int>(pos);
  }

  std::vector<int> tokenize(std::string_view text) const {
    std::vector<int> out;
    const int n = alphabet_size();
    if (scheme_ == TokenScheme::Char) {
      out.reserve(text.size());
      for (char c : text) out.push_back(require_symbol(c));
      return out;
    }
    out.reserve(text.size() / 2 + 1);
    std::size_t i = 0;
    for (; i + 1 < text.size(); i += 2) {
      out.push_back(require_symbol(text[i]) * n + require_symbol(text[i + 1]));
    }
    if (i < text.size()) out.push_back(n * n + require_symbol(text[i]));  // tail
    return out;
  }

  std::string detokenize(std::span<const int> tokens) const {
    std::string out;
    for (int id : tokens) out += token_text(id);
    return out;
  }

  std::string token_text(int id) const {
    const int n = alphabet_size();
    if (id < 0 || id >= vocab_size()) throw invalid_input_error("tokenizer: token id out of range");
    if (scheme_ == TokenScheme::Char) return std::string(1, alphabet_[id]);
    if (id < n * n) return {alphabet_[id / n], alphabet_[id % n]};
    return std::string(1, alphabet_[id - n * n]);
  }

  bool operator==(const Tokenizer& o) const {
    return scheme_ == o.scheme_ && alphabet_ == o.alphabet_;
  }

 private:
  int require_symbol(char c) const {
    const int idx = symbol_index(c);
    if (idx < 0)
      throw invalid_input_error(std::string("tokenizer: symbol '") + c + "' not in alphabet \"" +
                                alphabet_ + "\"");
    return idx;
  }

  TokenScheme scheme_;
  std::string alphabet_;
};

inline std::vector<int> tokenize(std::string_view text, const Tokenizer& tok) {
  return tok.tokenize(text);
}

// One sampled response together with everything needed to reuse it:
// generator identity, the generator-side token view, the detokenized text
// (the cross-agent exchange format), and the generation-time log-likelihood.
struct Rollout {
  AgentId agent;
  int prompt_id = 0;
  std::vector<int> tokens;  // under the generator's tokenizer
  std::string text;
  double gen_logprob = 0.0;  // natural log, sum over tokens
  int gen_len = 0;
  double reward = 0.0;  // assigned by the task verifier after sampling
  int step = 0;

  static Rollout create(AgentId agent, int prompt_id, std::vector<int> tokens,
                        const Tokenizer& tok, double gen_logprob, int step) {
    if (tokens.empty()) throw invalid_input_error("rollout: empty token sequence");
    if (!(gen_logprob <= 0.0) || !std::isfinite(gen_logprob))
      throw invalid_input_error("rollout: gen_logprob must be finite and <= 0");
    Rollout r;
    r.agent = agent;
    r.prompt_id = prompt_id;
    r.gen_logprob = gen_logprob;
    r.gen_len = static_cast<int>(tokens.size());
    r.text = tok.detokenize(tokens);
    r.tokens = std::move(tokens);
    r.step = step;
    return r;
  }
};

// Re-express a rollout under another agent's tokenizer. Returns token ids and
// their count (which may differ from gen_len). When the target tokenizer is
// the generator's own, the original ids are returned verbatim: a sampled Pair
// sequence may contain tail tokens mid-sequence, so re-tokenizing the text
// would not be the identity.
struct Retokenized {
  std::vector<int> tokens;
  int len = 0;
};

inline Retokenized retokenize(const Rollout& r, const Tokenizer& source_tok,
                              const Tokenizer& target_tok) {
  if (r.text.empty()) throw invalid_input_error("retokenize: empty text");
  if (source_tok == target_tok) return {r.tokens, r.gen_len};
  for (char c : r.text) {
    if (target_tok.symbol_index(c) < 0)
      throw heterogeneity_error(std::string("retokenize: symbol '") + c +
                                "' of shared rollout not in target alphabet \"" +
                                target_tok.alphabet() + "\"");
  }
  Retokenized out;
  out.tokens = target_tok.tokenize(r.text);
  out.len = static_cast<int>(out.tokens.size());
  return out;
}

// The per-prompt pool of n*G rollouts over which advantages are computed.
struct GroupBatch {
  Prompt prompt;
  std::vector<std::vector<Rollout>> per_agent;  // [agent][i], exactly G each
  std::vector<double> joint_rewards;            // flattened in (agent, i) order

  static GroupBatch assemble(Prompt prompt, std::vector<std::vector<Rollout>> per_agent) {
    if (per_agent.empty() || per_agent.front().empty())
      throw invalid_input_error("group batch: no rollouts");
    const std::size_t g = per_agent.front().size();
    GroupBatch batch;
    batch.prompt = std::move(prompt);
    for (std::size_t a = 0; a < per_agent.size(); ++a) {
      if (per_agent[a].size() != g)
        throw consistency_error("group batch: agent " + std::to_string(a) + " contributed " +
                                std::to_string(per_agent[a].size()) + " rollouts, expected " +
                                std::to_string(g));
      for (const Rollout& r : per_agent[a]) batch.joint_rewards.push_back(r.reward);
    }
    batch.per_agent = std::move(per_agent);
    return batch;
  }

  int group_size() const { return static_cast<int>(per_agent.front().size()); }
  int num_agents() const { return static_cast<int>(per_agent.size()); }
};

// Classify the heterogeneity between two agents given their tokenizers and
// parameter shapes. Identical setups (same space, same values) yield nullopt.
inline std::optional<HeterogeneityKind> heterogeneity_kind(
    const Tokenizer& tok_a, std::span<const double> theta_a, const Tokenizer& tok_b,
    std::span<const double> theta_b, bool same_policy_class = true) {
  if (!(tok_a == tok_b) || !same_policy_class) return HeterogeneityKind::Model;
  if (theta_a.size() != theta_b.size()) return HeterogeneityKind::Size;
  if (!std::equal(theta_a.begin(), theta_a.end(), theta_b.begin()))
    return HeterogeneityKind::State;
  return std::nullopt;
}

}  // namespace hacpo
