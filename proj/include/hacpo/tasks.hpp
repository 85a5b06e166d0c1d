#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hacpo/core.hpp"
#include "hacpo/errors.hpp"
#include "hacpo/policy.hpp"
#include "hacpo/rng.hpp"

namespace hacpo {

// Synthetic verifiable-reward tasks. Both emit binary rewards from a pure
// deterministic check, standing in for the automatic verifiers of RLVR.
//
//   SubstringMatch — reward 1 iff `target` occurs in the response text.
//   ModularSum     — reward 1 iff the first symbol of the response encodes
//                    (d1 + d2) mod m for the prompt digits (d1, d2); symbol
//                    at alphabet index i encodes the value i.
enum class TaskKind { SubstringMatch, ModularSum };

struct TaskSpec {
  TaskKind kind = TaskKind::SubstringMatch;
  std::string alphabet = "abcd";
  int response_len = 3;  // nominal response length in symbols
  std::string target;    // SubstringMatch only
  int modulus = 0;       // ModularSum only

  // Config-level feasibility. Deep operations stay total so tests can probe
  // reward-nowhere constructions directly.
  void validate() const {
    if (alphabet.empty()) throw config_error("task.alphabet: must be nonempty");
    if (response_len < 1) throw config_error("task.response_len: must be >= 1");
    if (kind == TaskKind::SubstringMatch) {
      if (static_cast<int>(target.size()) > response_len)
        throw config_error("task.target: longer than response_len");
      Tokenizer check(TokenScheme::Char, alphabet);
      for (char c : target) {
        if (check.symbol_index(c) < 0)
          throw config_error(std::string("task.target: symbol '") + c + "' not in alphabet");
      }
    } else {
      if (modulus < 1 || modulus > static_cast<int>(alphabet.size()))
        throw config_error("task.modulus: must be in [1, |alphabet|]");
    }
  }
};

inline double verify(const TaskSpec& task, const Prompt& prompt, std::string_view text) {
  const Tokenizer alpha_check(TokenScheme::Char, task.alphabet);
  for (char c : text) {
    if (alpha_check.symbol_index(c) < 0)
      throw invalid_input_error(std::string("verify: symbol '") + c + "' not in task alphabet");
  }
  if (task.kind == TaskKind::SubstringMatch) {
    return text.find(task.target) != std::string_view::npos ? 1.0 : 0.0;
  }
  if (prompt.payload.size() != 2)
    throw invalid_input_error("verify: modular-sum prompt needs two digits");
  if (text.empty()) return 0.0;
  const int want = (prompt.payload[0] + prompt.payload[1]) % task.modulus;
  return alpha_check.symbol_index(text.front()) == want ? 1.0 : 0.0;
}

// Exact expected reward of a policy: sum over all vocab^resp_len sequences of
// pi(y) * R(detokenize(y)). The independent oracle for every unbiasedness
// check, so it deliberately shares nothing with the training path.
inline double expected_reward_bruteforce(const TaskSpec& task, const Prompt& prompt,
                                         const PolicyParams& params, const Tokenizer& tok) {
  double space = 1.0;
  for (int i = 0; i < params.resp_len; ++i) space *= params.vocab;
  if (space > 1e6)
    throw budget_error("expected_reward_bruteforce: V^L = " + std::to_string(space) +
                       " exceeds enumeration budget 1e6");
  double value = 0.0;
  for_each_sequence(params.vocab, params.resp_len, [&](std::span<const int> seq) {
    const double p = std::exp(score(params, seq).total);
    value += p * verify(task, prompt, tok.detokenize(seq));
  });
  return value;
}

// Seeded prompt stream. ModularSum draws digit pairs uniformly from
// [0, m)^2; SubstringMatch prompts carry no payload.
inline Prompt sample_prompt(const TaskSpec& task, int prompt_id, std::uint64_t seed) {
  Prompt p;
  p.id = prompt_id;
  if (task.kind == TaskKind::ModularSum) {
    Rng rng(seed);
    p.payload = {static_cast<int>(rng.next_below(task.modulus)),
                 static_cast<int>(rng.next_below(task.modulus))};
  }
  return p;
}

// The text an ideal agent would emit; init_policy biases toward its tokens to
// simulate pretrained capability. SubstringMatch repeats the target to the
// response length; ModularSum has no prompt-independent answer, so the tilt
// falls back to the first alphabet symbol.
inline std::string canonical_target_text(const TaskSpec& task) {
  std::string out;
  if (task.kind == TaskKind::SubstringMatch && !task.target.empty()) {
    while (static_cast<int>(out.size()) < task.response_len) out += task.target;
    out.resize(task.response_len);
  } else {
    out.assign(task.response_len, task.alphabet.front());
  }
  return out;
}

}  // namespace hacpo
