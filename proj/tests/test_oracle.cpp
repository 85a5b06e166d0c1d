#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <iostream>
#include <vector>

#include "hacpo/oracle.hpp"

using namespace hacpo;
using Catch::Approx;

namespace {

// Two byte-identical agents: the symmetric sanity case for the Monte Carlo
// estimator checks.
EstimatorFixture identical_policies_fixture(std::uint64_t seed) {
  EstimatorFixture fx = default_estimator_fixture(seed);
  fx.policies[1] = fx.policies[0];
  fx.true_values[1] = fx.true_values[0];
  return fx;
}

}  // namespace

TEST_CASE("unbiasedness holds for identical policies at small trial counts") {
  const EstimatorFixture fx = identical_policies_fixture(3);
  for (int k = 0; k < 2; ++k) {
    const VerificationReport r = check_unbiasedness(fx, k, 4000, 90 + k);
    INFO(r.suite << " statistic=" << r.statistic << " bound=" << r.bound);
    CHECK(r.passed);
  }
}

TEST_CASE("unbiasedness holds under the ideal capability ratios") {
  const EstimatorFixture fx = default_estimator_fixture(11);
  CHECK(fx.true_values[1] > fx.true_values[0]);  // weak + strong pair
  for (int k = 0; k < 2; ++k) {
    const VerificationReport r = check_unbiasedness(fx, k, 20000, 7 + k);
    INFO(r.suite << " statistic=" << r.statistic << " bound=" << r.bound);
    CHECK(r.passed);
  }
}

TEST_CASE("perturbed capability ratios are detected") {
  const EstimatorFixture fx = default_estimator_fixture(11);
  const CapabilityTracker ideal = fx.make_tracker();
  for (int k = 0; k < 2; ++k) {
    const VerificationReport r = check_unbiasedness(fx, k, 20000, 40 + k, true);
    CHECK_FALSE(r.passed);
    // Analytic bias from the baseline's linearity: doubling omega(k,j) adds
    // omega(k,j) * E[R_j] / n for the perturbed peer.
    const int j = 1 - k;
    const double predicted =
        ideal.capability_ratio(AgentId{k}, AgentId{j}) * fx.true_values[j] / 2.0;
    CHECK(r.statistic == Approx(predicted).margin(4.0 * r.bound));
    CHECK(r.statistic > 10.0 * r.bound);
  }
}

TEST_CASE("corollary: raw advantages center on zero") {
  const EstimatorFixture fx = default_estimator_fixture(13);
  for (int k = 0; k < 2; ++k) {
    const VerificationReport r = check_corollary(fx, k, 20000, 100 + k);
    INFO(r.suite << " statistic=" << r.statistic << " bound=" << r.bound);
    CHECK(r.passed);
  }
  const VerificationReport bad = check_corollary(fx, 0, 20000, 200, true);
  CHECK_FALSE(bad.passed);
}

TEST_CASE("self-alignment inner product is the homogeneous gradient norm") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const AlignmentInstance inst = random_alignment_instance(CollaboratorKind::Self, seed);
    const AlignmentResult res = alignment_inner_product(inst);
    CHECK(res.inner_product == Approx(res.homo_norm_sq).epsilon(1e-9));
    CHECK(res.inner_product > 0.0);
  }
}

TEST_CASE("competent collaborators align in at least 95% of instances") {
  const VerificationReport self = check_alignment(CollaboratorKind::Self, 60, 4);
  CHECK(self.passed);
  CHECK(self.statistic == 1.0);

  const VerificationReport competent = check_alignment(CollaboratorKind::Competent, 60, 4);
  INFO("competent fraction=" << competent.statistic);
  CHECK(competent.passed);

  const VerificationReport adversarial = check_alignment(CollaboratorKind::Adversarial, 60, 4);
  INFO("adversarial fraction=" << adversarial.statistic);
  CHECK(adversarial.passed);  // informational: always recorded, never failed
  CHECK(adversarial.statistic <= 1.0);
  // The violated assumption should show up as weaker alignment; log it for
  // the record either way.
  std::cout << "[oracle] alignment fractions: competent=" << competent.statistic
            << " adversarial=" << adversarial.statistic << "\n";
}

TEST_CASE("gradient checks pass on all three surfaces") {
  for (GradSurface surface :
       {GradSurface::Score, GradSurface::HomoSurrogate, GradSurface::HeteSurrogate}) {
    const VerificationReport r = check_gradients(surface, 40, 9);
    INFO(r.suite << " max rel error=" << r.statistic);
    CHECK(r.passed);
  }
}

TEST_CASE("finite-difference error is V-shaped in the step size") {
  // Truncation dominates at h = 1e-4, roundoff at 1e-6; the 1e-5 sweet spot
  // must win on aggregate and stay below the acceptance tolerance.
  double err4 = 0.0, err5 = 0.0, err6 = 0.0;
  const int trials = 40;
  for (int t = 0; t < trials; ++t) {
    err4 += check_gradients(GradSurface::Score, 1, 1000 + t, 1e-4).statistic;
    err5 += check_gradients(GradSurface::Score, 1, 1000 + t, 1e-5).statistic;
    err6 += check_gradients(GradSurface::Score, 1, 1000 + t, 1e-6).statistic;
  }
  err4 /= trials;
  err5 /= trials;
  err6 /= trials;
  std::cout << "[oracle] fd error sweep: h=1e-4 -> " << err4 << ", 1e-5 -> " << err5
            << ", 1e-6 -> " << err6 << "\n";
  CHECK(err5 < 1e-5);
  CHECK(err5 <= err4);
  CHECK(err5 <= err6);
}

TEST_CASE("gated samples contribute exactly zero gradient, analytic and numeric") {
  // Build a shared-only instance and pin the learner far above the upper
  // clip on every shared rollout.
  SurrogateInstance inst = random_hete_instance(77);
  for (auto& row : inst.adv.a) std::fill(row.begin(), row.end(), 0.0);
  for (int i = 0; i < inst.group.group_size(); ++i) inst.adv.a[1][i] = 1.0;
  for (double& t : inst.learner.theta) t = 0.0;
  for (int i = 0; i < inst.group.group_size(); ++i) {
    const auto view = retokenize(inst.group.per_agent[1][i], inst.toks[1], inst.tok);
    for (std::size_t pos = 0; pos < view.tokens.size(); ++pos)
      inst.learner.at(static_cast<int>(pos), view.tokens[pos]) += 9.0;
  }
  const ObjectiveTerms forward = objective_terms(inst.learner, inst.tok, inst.learner_id,
                                                 inst.group, inst.adv, inst.toks, inst.clip,
                                                 inst.minibatch_index, inst.mode);
  bool all_shared_gated = true;
  bool any_upper_clip = false;
  for (const RatioRecord& rec : forward.records) {
    if (rec.learner == rec.source) continue;
    if (!rec.clipped) all_shared_gated = false;
    if (rec.clipped && !rec.discarded) any_upper_clip = true;
    if (rec.clipped) CHECK(rec.grad_weight == 0.0);
  }
  REQUIRE(any_upper_clip);
  REQUIRE(all_shared_gated);
  for (double g : forward.grad) CHECK(g == 0.0);
  const auto numeric = fd_gradient(inst.learner, [&](const PolicyParams& q) {
    return frozen_surrogate_value(inst, q, forward.records);
  });
  for (double g : numeric) CHECK(g == 0.0);
}

TEST_CASE("verification reports are byte-reproducible given a seed") {
  SuiteOptions opt;
  opt.seed = 21;
  opt.mc_trials = 2000;
  opt.alignment_trials = 20;
  opt.gradient_trials = 10;
  const auto a = run_verification_suite("all", opt);
  const auto b = run_verification_suite("all", opt);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].suite == b[i].suite);
    CHECK(a[i].statistic == b[i].statistic);
    CHECK(a[i].bound == b[i].bound);
    CHECK(a[i].passed == b[i].passed);
  }
  CHECK_THROWS_AS(run_verification_suite("nonsense", opt), invalid_input_error);
}
