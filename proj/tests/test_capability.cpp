#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "hacpo/capability.hpp"
#include "hacpo/rng.hpp"

using namespace hacpo;
using Catch::Approx;

TEST_CASE("record_batch stores per-batch means with ring-buffer eviction") {
  CapabilityTracker tracker(1, 2);
  tracker.record_batch(AgentId{0}, std::vector<double>{1, 0, 1, 0});
  CHECK(tracker.capability(AgentId{0}) == Approx(0.5));

  CapabilityTracker k2(1, 2);
  k2.record_batch(AgentId{0}, std::vector<double>{0.2});
  k2.record_batch(AgentId{0}, std::vector<double>{0.4});
  k2.record_batch(AgentId{0}, std::vector<double>{0.6});
  CHECK(k2.capability(AgentId{0}) == Approx(0.5));  // window holds [0.4, 0.6]

  CapabilityTracker g8(1, 5);
  g8.record_batch(AgentId{0}, std::vector<double>{1, 1, 1, 1, 1, 1, 0, 0});
  CHECK(g8.capability(AgentId{0}) == Approx(0.75));

  CHECK_THROWS_AS(tracker.record_batch(AgentId{0}, std::vector<double>{}), invalid_input_error);
}

TEST_CASE("capability averages the partial window and clamps at the floor") {
  CapabilityTracker tracker(1, 5, 1e-3);
  tracker.record_batch(AgentId{0}, std::vector<double>{0.5});
  tracker.record_batch(AgentId{0}, std::vector<double>{0.6});
  tracker.record_batch(AgentId{0}, std::vector<double>{0.7});
  CHECK(tracker.capability(AgentId{0}) == Approx(0.6));

  CapabilityTracker zeros(1, 5, 1e-3);
  zeros.record_batch(AgentId{0}, std::vector<double>{0, 0});
  zeros.record_batch(AgentId{0}, std::vector<double>{0});
  zeros.record_batch(AgentId{0}, std::vector<double>{0});
  CHECK(zeros.capability(AgentId{0}) == Approx(1e-3));

  CapabilityTracker single(1, 5);
  single.record_batch(AgentId{0}, std::vector<double>{0.37});
  CHECK(single.capability(AgentId{0}) == Approx(0.37));
}

TEST_CASE("cold start raises before any batch is recorded") {
  CapabilityTracker tracker(2, 5);
  CHECK_THROWS_AS(tracker.capability(AgentId{0}), cold_start_error);
  tracker.record_batch(AgentId{0}, std::vector<double>{0.5});
  CHECK_THROWS_AS(tracker.capability_ratio(AgentId{0}, AgentId{1}), cold_start_error);
}

TEST_CASE("capability ratios follow the worked example") {
  CapabilityTracker tracker(2, 5);
  tracker.record_batch(AgentId{0}, std::vector<double>{0.5});
  tracker.record_batch(AgentId{1}, std::vector<double>{1.0});
  CHECK(tracker.capability_ratio(AgentId{0}, AgentId{1}) == Approx(0.5));
  CHECK(tracker.capability_ratio(AgentId{1}, AgentId{0}) == Approx(2.0));
  CHECK(tracker.capability_ratio(AgentId{0}, AgentId{0}) == 1.0);

  CapabilityTracker equal(2, 5);
  equal.record_batch(AgentId{0}, std::vector<double>{0.4});
  equal.record_batch(AgentId{1}, std::vector<double>{0.4});
  CHECK(equal.capability_ratio(AgentId{0}, AgentId{1}) == Approx(1.0));
}

TEST_CASE("ratio reciprocity and scale invariance") {
  Rng rng(31337);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(3));
    CapabilityTracker tracker(n, 5);
    CapabilityTracker scaled(n, 5);
    const double c = 0.25 + 3.0 * rng.next_double();
    for (int a = 0; a < n; ++a) {
      const int batches = 1 + static_cast<int>(rng.next_below(7));
      for (int t = 0; t < batches; ++t) {
        std::vector<double> rewards(4);
        for (double& r : rewards) r = 0.05 + 0.9 * rng.next_double();
        tracker.record_batch(AgentId{a}, rewards);
        for (double& r : rewards) r *= c;
        scaled.record_batch(AgentId{a}, rewards);
      }
    }
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < n; ++j) {
        const double w = tracker.capability_ratio(AgentId{k}, AgentId{j});
        const double wr = tracker.capability_ratio(AgentId{j}, AgentId{k});
        CHECK(std::abs(w * wr - 1.0) < 1e-12);
        CHECK(std::abs(scaled.capability_ratio(AgentId{k}, AgentId{j}) - w) < 1e-12);
      }
    }
  }
}

TEST_CASE("constant per-batch means are a fixed point") {
  CapabilityTracker tracker(1, 3);
  for (int t = 0; t < 10; ++t)
    tracker.record_batch(AgentId{0}, std::vector<double>{0.42, 0.42});
  CHECK(tracker.capability(AgentId{0}) == Approx(0.42));
}
