#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <vector>

#include "hacpo/policy.hpp"
#include "hacpo/rng.hpp"
#include "testing.hpp"

using namespace hacpo;
using Catch::Approx;
using testing_support::fd_gradient;
using testing_support::random_policy;
using testing_support::rel_error;

TEST_CASE("uniform positional policy scores and samples uniformly") {
  const Tokenizer tok(TokenScheme::Char, "abcd");
  const PolicyParams p = PolicyParams::zeros(PolicyClass::PositionalTabular, 4, 3, 3);
  const Prompt prompt{0, {}};

  const SeqLogProb lp = score(p, std::vector<int>{0, 2, 3});
  CHECK(lp.total == Approx(-3.0 * std::log(4.0)).epsilon(1e-12));
  CHECK(lp.len == 3);
  for (double v : lp.per_token) CHECK(v == Approx(-std::log(4.0)).epsilon(1e-12));

  const Rollout r = sample(p, tok, AgentId{0}, prompt, 99);
  CHECK(r.gen_len == 3);
  CHECK(r.gen_logprob == Approx(-3.0 * std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("sampling is deterministic in the seed") {
  const Tokenizer tok(TokenScheme::Char, "abcd");
  const PolicyParams p = random_policy(PolicyClass::PositionalTabular, 4, 3, 3, 5);
  const Prompt prompt{0, {}};
  const Rollout a = sample(p, tok, AgentId{0}, prompt, 1234);
  const Rollout b = sample(p, tok, AgentId{0}, prompt, 1234);
  CHECK(a.tokens == b.tokens);
  CHECK(a.gen_logprob == b.gen_logprob);
  bool any_diff = false;
  for (std::uint64_t s = 0; s < 32 && !any_diff; ++s) {
    any_diff = sample(p, tok, AgentId{0}, prompt, s).tokens != a.tokens;
  }
  CHECK(any_diff);
}

TEST_CASE("one-hot-dominant logits pin the sampled sequence") {
  const Tokenizer tok(TokenScheme::Char, "abcd");
  PolicyParams p = PolicyParams::zeros(PolicyClass::PositionalTabular, 4, 3, 3);
  const std::vector<int> target{2, 0, 1};
  for (int pos = 0; pos < 3; ++pos) p.at(pos, target[pos]) = 20.0;

  // Analytic per-position miss mass: (V-1) * e^-20 / (e^-20*(V-1) + 1) per
  // position, union-bounded over 3 positions.
  const double miss = 3.0 * 3.0 * std::exp(-20.0);
  CHECK(miss < 1e-7);
  const Prompt prompt{0, {}};
  for (int trial = 0; trial < 10000; ++trial) {
    const Rollout r = sample(p, tok, AgentId{0}, prompt, 1000 + trial);
    REQUIRE(r.tokens == target);
  }
}

TEST_CASE("score of a sampled rollout equals its stored gen_logprob") {
  const Tokenizer tok(TokenScheme::Char, "abcd");
  const Prompt prompt{0, {}};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const PolicyParams p = random_policy(seed % 2 == 0 ? PolicyClass::PositionalTabular
                                                       : PolicyClass::Bigram,
                                         4, 3, 3, seed + 10);
    const Rollout r = sample(p, tok, AgentId{0}, prompt, seed * 7 + 1);
    CHECK(std::abs(score(p, r.tokens).total - r.gen_logprob) < 1e-12);
  }
}

TEST_CASE("bigram policy factorizes over previous-token contexts") {
  PolicyParams p = PolicyParams::zeros(PolicyClass::Bigram, 2, 0, 2);
  // Rows: 0 and 1 condition on the previous token, row 2 is begin-of-sequence.
  p.at(2, 0) = 0.3;
  p.at(2, 1) = -0.2;
  p.at(0, 0) = 1.0;
  p.at(0, 1) = -1.0;
  p.at(1, 0) = 0.0;
  p.at(1, 1) = 2.0;

  auto log_softmax = [&](int row, int col) {
    const double lse = std::log(std::exp(p.at(row, 0)) + std::exp(p.at(row, 1)));
    return p.at(row, col) - lse;
  };
  const SeqLogProb lp = score(p, std::vector<int>{0, 1});
  CHECK(lp.total == Approx(log_softmax(2, 0) + log_softmax(0, 1)).epsilon(1e-12));

  double total_mass = 0.0;
  for_each_sequence(2, 2, [&](std::span<const int> seq) {
    total_mass += std::exp(score(p, seq).total);
  });
  CHECK(total_mass == Approx(1.0).margin(1e-10));
}

TEST_CASE("policies normalize over the full sequence space") {
  for (const auto cls : {PolicyClass::PositionalTabular, PolicyClass::Bigram}) {
    for (int vocab : {2, 4, 6}) {
      for (int len : {1, 3, 4}) {
        const PolicyParams p = random_policy(cls, vocab, len, len,
                                             static_cast<std::uint64_t>(vocab * 10 + len));
        double mass = 0.0;
        for_each_sequence(vocab, len, [&](std::span<const int> seq) {
          mass += std::exp(score(p, seq).total);
        });
        CHECK(mass == Approx(1.0).margin(1e-10));
      }
    }
  }
}

TEST_CASE("grad_log_prob matches the worked uniform example") {
  const PolicyParams p = PolicyParams::zeros(PolicyClass::PositionalTabular, 4, 3, 3);
  const std::vector<int> tokens{0, 1, 2};
  const auto grad = grad_log_prob(p, tokens);

  // Frozen from the finite-difference oracle: uniform softmax over 4 gives
  // one-hot minus 1/4 on every visited row, exact in floating point.
  const auto fd = fd_gradient(p, [&](const PolicyParams& q) { return score(q, tokens).total; });
  CHECK(rel_error(grad, fd) < 1e-6);
  CHECK(grad[0] == 0.75);
  CHECK(grad[1] == -0.25);
  CHECK(grad[2] == -0.25);
  CHECK(grad[3] == -0.25);
}

TEST_CASE("gradient rows are zero off the visited contexts and sum to zero") {
  const PolicyParams p = random_policy(PolicyClass::PositionalTabular, 4, 5, 3, 42);
  const std::vector<int> tokens{1, 3, 0};
  const auto grad = grad_log_prob(p, tokens);
  for (int row = 3; row < 5; ++row) {
    for (int c = 0; c < 4; ++c) CHECK(grad[row * 4 + c] == 0.0);
  }
  for (int row = 0; row < 5; ++row) {
    double sum = 0.0;
    for (int c = 0; c < 4; ++c) sum += grad[row * 4 + c];
    CHECK(std::abs(sum) < 1e-12);
  }
}

TEST_CASE("analytic gradients match finite differences on random instances") {
  Rng rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto cls = trial % 2 == 0 ? PolicyClass::PositionalTabular : PolicyClass::Bigram;
    const int vocab = 2 + static_cast<int>(rng.next_below(4));
    const int len = 1 + static_cast<int>(rng.next_below(4));
    const PolicyParams p = random_policy(cls, vocab, len, len, 1000 + trial, 1.5);
    std::vector<int> tokens(len);
    for (int& t : tokens) t = static_cast<int>(rng.next_below(vocab));
    const auto analytic = grad_log_prob(p, tokens);
    const auto fd = fd_gradient(p, [&](const PolicyParams& q) { return score(q, tokens).total; });
    worst = std::max(worst, rel_error(analytic, fd));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("score-function identity: expected grad log prob vanishes") {
  for (const auto cls : {PolicyClass::PositionalTabular, PolicyClass::Bigram}) {
    const PolicyParams p = random_policy(cls, 3, 3, 3, 2024);
    std::vector<double> acc(p.theta.size(), 0.0);
    for_each_sequence(3, 3, [&](std::span<const int> seq) {
      const double prob = std::exp(score(p, seq).total);
      const auto grad = grad_log_prob(p, seq);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += prob * grad[i];
    });
    for (double v : acc) CHECK(std::abs(v) < 1e-10);
  }
}

TEST_CASE("score rejects bad inputs") {
  const PolicyParams p = PolicyParams::zeros(PolicyClass::PositionalTabular, 4, 3, 3);
  CHECK_THROWS_AS(score(p, std::vector<int>{0, 1, 4}), invalid_input_error);
  CHECK_THROWS_AS(score(p, std::vector<int>{0, 1, 2, 3}), invalid_input_error);
  CHECK_THROWS_AS(score(p, std::vector<int>{}), invalid_input_error);
}

TEST_CASE("init_policy tilts toward the bias target") {
  const std::vector<int> target{0, 1};
  const PolicyParams weak = init_policy(PolicyClass::PositionalTabular, 4, 2, 2, 9, 0.5, 0.0, target);
  const PolicyParams strong =
      init_policy(PolicyClass::PositionalTabular, 4, 2, 2, 9, 0.5, 3.0, target);
  CHECK(std::exp(score(strong, target).total) > std::exp(score(weak, target).total));
}
