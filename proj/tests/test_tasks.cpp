#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "hacpo/tasks.hpp"
#include "testing.hpp"

using namespace hacpo;
using Catch::Approx;
using testing_support::random_policy;

namespace {

// Independent counting oracle: enumerate all strings of the given length and
// count the rewarded ones by direct substring search.
long count_rewarded(const std::string& alphabet, int len, const std::string& target) {
  long count = 0;
  std::vector<int> idx(len, 0);
  const int n = static_cast<int>(alphabet.size());
  while (true) {
    std::string text;
    for (int i : idx) text += alphabet[i];
    if (text.find(target) != std::string::npos) ++count;
    int pos = len - 1;
    while (pos >= 0 && idx[pos] == n - 1) idx[pos--] = 0;
    if (pos < 0) break;
    ++idx[pos];
  }
  return count;
}

}  // namespace

TEST_CASE("substring match verification") {
  TaskSpec task;
  task.kind = TaskKind::SubstringMatch;
  task.alphabet = "ab";
  task.response_len = 3;
  task.target = "ab";
  const Prompt prompt{0, {}};
  CHECK(verify(task, prompt, "bab") == 1.0);
  CHECK(verify(task, prompt, "bba") == 0.0);
  CHECK_THROWS_AS(verify(task, prompt, "abz"), invalid_input_error);
}

TEST_CASE("modular sum verification") {
  TaskSpec task;
  task.kind = TaskKind::ModularSum;
  task.alphabet = "0123";
  task.response_len = 3;
  task.modulus = 4;
  const Prompt prompt{0, {3, 2}};  // (3 + 2) mod 4 = 1
  CHECK(verify(task, prompt, "123") == 1.0);
  CHECK(verify(task, prompt, "321") == 0.0);
  CHECK_THROWS_AS(verify(task, Prompt{0, {1}}, "123"), invalid_input_error);
}

TEST_CASE("uniform policy value comes from the enumeration oracle") {
  TaskSpec task;
  task.kind = TaskKind::SubstringMatch;
  task.alphabet = "ab";
  task.response_len = 3;
  task.target = "ab";
  const Tokenizer tok(TokenScheme::Char, task.alphabet);
  const PolicyParams uniform = PolicyParams::zeros(PolicyClass::PositionalTabular, 2, 3, 3);

  const long rewarded = count_rewarded(task.alphabet, 3, task.target);
  CHECK(rewarded == 4);  // aab, aba, abb, bab
  const double value = expected_reward_bruteforce(task, Prompt{0, {}}, uniform, tok);
  CHECK(value == Approx(static_cast<double>(rewarded) / 8.0).epsilon(1e-12));
}

TEST_CASE("expected reward brute force hits the trivial extremes") {
  const Tokenizer tok(TokenScheme::Char, "ab");
  const PolicyParams p = random_policy(PolicyClass::PositionalTabular, 2, 3, 3, 17);
  TaskSpec everywhere;
  everywhere.kind = TaskKind::SubstringMatch;
  everywhere.alphabet = "ab";
  everywhere.response_len = 3;
  everywhere.target = "";  // empty target occurs in every text
  CHECK(expected_reward_bruteforce(everywhere, Prompt{0, {}}, p, tok) == Approx(1.0));

  TaskSpec nowhere = everywhere;
  nowhere.target = "aaaa";  // longer than any response; unreachable by construction
  CHECK(expected_reward_bruteforce(nowhere, Prompt{0, {}}, p, tok) == 0.0);
}

TEST_CASE("brute force is linear in the policy mixture") {
  TaskSpec task;
  task.kind = TaskKind::SubstringMatch;
  task.alphabet = "abc";
  task.response_len = 3;
  task.target = "ca";
  const Tokenizer tok(TokenScheme::Char, task.alphabet);
  const Prompt prompt{0, {}};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PolicyParams p1 = random_policy(PolicyClass::PositionalTabular, 3, 3, 3, seed);
    const PolicyParams p2 = random_policy(PolicyClass::PositionalTabular, 3, 3, 3, seed + 100);
    const double v1 = expected_reward_bruteforce(task, prompt, p1, tok);
    const double v2 = expected_reward_bruteforce(task, prompt, p2, tok);
    const double lambda = 0.25 + 0.05 * static_cast<double>(seed);
    // Mixture value computed by direct enumeration over the mixture law.
    double mix_value = 0.0;
    for_each_sequence(3, 3, [&](std::span<const int> seq) {
      const double prob =
          lambda * std::exp(score(p1, seq).total) + (1 - lambda) * std::exp(score(p2, seq).total);
      mix_value += prob * verify(task, prompt, tok.detokenize(seq));
    });
    CHECK(mix_value == Approx(lambda * v1 + (1 - lambda) * v2).margin(1e-12));
  }
}

TEST_CASE("brute force agrees with Monte Carlo for pair-tokenized policies") {
  // Pair policies can emit tail tokens mid-sequence, so their text lengths
  // vary; the enumeration must integrate over exactly that text distribution.
  TaskSpec task;
  task.kind = TaskKind::SubstringMatch;
  task.alphabet = "ab";
  task.response_len = 4;
  task.target = "ba";
  const Tokenizer tok(TokenScheme::Pair, task.alphabet);
  const PolicyParams p = random_policy(PolicyClass::PositionalTabular, tok.vocab_size(), 2, 2, 77);
  const Prompt prompt{0, {}};
  const double exact = expected_reward_bruteforce(task, prompt, p, tok);

  const long trials = 20000;
  double sum = 0.0, sum_sq = 0.0;
  for (long t = 0; t < trials; ++t) {
    const Rollout r = sample(p, tok, AgentId{0}, prompt, derive_seed(123, t));
    const double reward = verify(task, prompt, r.text);
    sum += reward;
    sum_sq += reward * reward;
  }
  const double mean = sum / trials;
  const double se = std::sqrt(std::max(0.0, (sum_sq / trials - mean * mean) / trials));
  INFO("exact=" << exact << " mc=" << mean << " se=" << se);
  CHECK(std::abs(mean - exact) < 4.0 * se + 1e-12);
}

TEST_CASE("enumeration budget is enforced") {
  const Tokenizer tok(TokenScheme::Char, "abcdef");
  TaskSpec task;
  task.kind = TaskKind::SubstringMatch;
  task.alphabet = "abcdef";
  task.response_len = 9;
  task.target = "a";
  const PolicyParams p = PolicyParams::zeros(PolicyClass::PositionalTabular, 6, 9, 9);
  CHECK_THROWS_AS(expected_reward_bruteforce(task, Prompt{0, {}}, p, tok), budget_error);
}

TEST_CASE("prompt sampling is seeded and in range") {
  TaskSpec task;
  task.kind = TaskKind::ModularSum;
  task.alphabet = "0123";
  task.response_len = 2;
  task.modulus = 4;
  const Prompt a = sample_prompt(task, 5, 999);
  const Prompt b = sample_prompt(task, 5, 999);
  CHECK(a.payload == b.payload);
  for (int seed = 0; seed < 50; ++seed) {
    const Prompt p = sample_prompt(task, seed, seed);
    REQUIRE(p.payload.size() == 2);
    CHECK(p.payload[0] >= 0);
    CHECK(p.payload[0] < 4);
    CHECK(p.payload[1] >= 0);
    CHECK(p.payload[1] < 4);
  }
}

TEST_CASE("task validation guards config-level invariants") {
  TaskSpec task;
  task.kind = TaskKind::SubstringMatch;
  task.alphabet = "ab";
  task.response_len = 2;
  task.target = "aba";
  CHECK_THROWS_AS(task.validate(), config_error);
  task.target = "ba";
  CHECK_NOTHROW(task.validate());

  TaskSpec mod;
  mod.kind = TaskKind::ModularSum;
  mod.alphabet = "01";
  mod.response_len = 2;
  mod.modulus = 3;
  CHECK_THROWS_AS(mod.validate(), config_error);
}
