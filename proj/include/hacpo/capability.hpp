#pragma once

#include <cmath>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "hacpo/core.hpp"
#include "hacpo/errors.hpp"

namespace hacpo {

// Whether the capability window used for a step's advantages includes that
// step's own batch. IncludeCurrent follows the training loop's natural order
// (accuracy is recorded before advantages are computed); ExcludeCurrent keeps
// the estimate statistically independent of the batch under evaluation, which
// is what the unbiasedness analysis assumes.
enum class WindowMode { IncludeCurrent, ExcludeCurrent };

// Sliding-window estimate of each agent's recent performance. P-hat is the
// mean of the last K per-batch mean rewards (fewer while warming up), clamped
// below by a small floor so capability ratios stay finite.
class CapabilityTracker {
 public:
  CapabilityTracker(int num_agents, int window, double floor = 1e-3)
      : window_(window), floor_(floor), hist_(static_cast<std::size_t>(num_agents)) {
    if (num_agents < 1) throw config_error("capability: need at least one agent");
    if (window < 1) throw config_error("capability: window must be >= 1");
    if (!(floor > 0.0)) throw config_error("capability: floor must be > 0");
  }

  int num_agents() const { return static_cast<int>(hist_.size()); }
  int window() const { return window_; }
  double floor() const { return floor_; }

  // Append the batch mean reward, evicting the oldest entry when full.
  // Note: no upper clamp on the stored mean; the scale-invariance property of
  // the ratios relies on being able to record uniformly rescaled rewards.
  void record_batch(AgentId agent, std::span<const double> rewards) {
    auto& h = hist_.at(check(agent));
    if (rewards.empty()) throw invalid_input_error("capability: empty reward batch");
    double sum = 0.0;
    for (double r : rewards) {
      if (!std::isfinite(r) || r < 0.0)
        throw invalid_input_error("capability: rewards must be finite and >= 0");
      sum += r;
    }
    h.push_back(sum / static_cast<double>(rewards.size()));
    if (static_cast<int>(h.size()) > window_) h.pop_front();
  }

  bool has_history(AgentId agent) const { return !hist_.at(check(agent)).empty(); }

  // P-hat: mean over the available window, clamped below by the floor.
  double capability(AgentId agent) const {
    const auto& h = hist_.at(check(agent));
    if (h.empty())
      throw cold_start_error("capability: agent " + std::to_string(agent.value) +
                             " has no recorded batches");
    double sum = 0.0;
    for (double v : h) sum += v;
    const double mean = sum / static_cast<double>(h.size());
    return mean < floor_ ? floor_ : mean;
  }

  // Capability ratio: P-hat(k) / P-hat(j). Strictly positive and finite.
  double capability_ratio(AgentId k, AgentId j) const {
    if (k == j) return 1.0;
    return capability(k) / capability(j);
  }

 private:
  std::size_t check(AgentId agent) const {
    if (agent.value < 0 || agent.value >= num_agents())
      throw invalid_input_error("capability: unknown agent id " + std::to_string(agent.value));
    return static_cast<std::size_t>(agent.value);
  }

  int window_;
  double floor_;
  std::vector<std::deque<double>> hist_;
};

}  // namespace hacpo
