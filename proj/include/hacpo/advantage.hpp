#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "hacpo/capability.hpp"
#include "hacpo/core.hpp"
#include "hacpo/errors.hpp"

namespace hacpo {

// A group's standard deviation below this is treated as no learning signal at
// all: advantages are zeroed rather than inflated by numerical noise.
inline constexpr double kDegenerateSigma = 1e-8;

namespace detail {

inline double mean_of(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

// Population standard deviation (GRPO-lineage convention).
inline double population_std(std::span<const double> xs, double mean) {
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

}  // namespace detail

// Standard group-relative advantages for one agent's G rewards:
// (R_i - mean) / population std, all zeros when the group is degenerate.
inline std::vector<double> single_agent_advantage(std::span<const double> rewards) {
  if (rewards.size() < 2)
    throw invalid_input_error("single_agent_advantage: need a group of at least 2");
  const double mean = detail::mean_of(rewards);
  const double sigma = detail::population_std(rewards, mean);
  std::vector<double> out(rewards.size(), 0.0);
  if (sigma < kDegenerateSigma) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sigma;
  return out;
}

// Capability-adjusted baseline for learner k over the joint pool:
// (1/(nG)) * sum_j sum_i omega(k,j) * R(y_i^j), with omega(k,k) = 1.
// With a single agent this collapses to the plain group mean.
inline double capability_baseline(const GroupBatch& group, const CapabilityTracker& tracker,
                                  AgentId k) {
  const int n = group.num_agents();
  const int g = group.group_size();
  double acc = 0.0;
  for (int j = 0; j < n; ++j) {
    const double w = tracker.capability_ratio(k, AgentId{j});
    for (const Rollout& r : group.per_agent[j]) acc += w * r.reward;
  }
  return acc / static_cast<double>(n * g);
}

// Advantages for every rollout in a group, plus everything needed to reuse
// them across learners.
//
// a[j][i] is the source-side advantage (R - baseline(j)) / sigma_joint; the
// effective advantage consumed by learner k is a[j][i] itself for k == j and
// omega(j,k) * a[j][i] for shared samples. sigma_joint is the population std
// of the full n*G reward pool. Note the index orders: the baseline uses
// omega(k,j) (learner over source) while the effective advantage uses
// omega(j,k) (source over learner). That asymmetry is intentional.
struct AdvantageSet {
  std::vector<std::vector<double>> a;      // [source][i]
  std::vector<double> baseline;            // per source agent
  std::vector<std::vector<double>> omega;  // [k][j]
  double sigma_joint = 0.0;
  bool degenerate = false;

  double advantage(AgentId source, int i) const {
    return a.at(static_cast<std::size_t>(source.value)).at(static_cast<std::size_t>(i));
  }

  double effective(AgentId learner, AgentId source, int i) const {
    const double base = advantage(source, i);
    if (learner == source) return base;
    return omega.at(static_cast<std::size_t>(source.value))
               .at(static_cast<std::size_t>(learner.value)) *
           base;
  }

  int num_agents() const { return static_cast<int>(a.size()); }
};

inline AdvantageSet hacpo_advantages(const GroupBatch& group, const CapabilityTracker& tracker) {
  const int n = group.num_agents();
  const double joint_mean = detail::mean_of(group.joint_rewards);
  AdvantageSet out;
  out.sigma_joint = detail::population_std(group.joint_rewards, joint_mean);
  out.degenerate = out.sigma_joint < kDegenerateSigma;
  out.omega.assign(n, std::vector<double>(n, 1.0));
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      out.omega[k][j] = tracker.capability_ratio(AgentId{k}, AgentId{j});
    }
  }
  out.baseline.reserve(n);
  for (int k = 0; k < n; ++k)
    out.baseline.push_back(capability_baseline(group, tracker, AgentId{k}));
  out.a.assign(n, {});
  for (int j = 0; j < n; ++j) {
    out.a[j].reserve(group.per_agent[j].size());
    for (const Rollout& r : group.per_agent[j]) {
      out.a[j].push_back(out.degenerate ? 0.0 : (r.reward - out.baseline[j]) / out.sigma_joint);
    }
  }
  return out;
}

// Naive pooled variant: every agent shares the plain joint mean as baseline
// and no capability rescaling (omega identically 1).
inline AdvantageSet joint_mean_advantages(const GroupBatch& group) {
  const int n = group.num_agents();
  const double joint_mean = detail::mean_of(group.joint_rewards);
  AdvantageSet out;
  out.sigma_joint = detail::population_std(group.joint_rewards, joint_mean);
  out.degenerate = out.sigma_joint < kDegenerateSigma;
  out.omega.assign(n, std::vector<double>(n, 1.0));
  out.baseline.assign(n, joint_mean);
  out.a.assign(n, {});
  for (int j = 0; j < n; ++j) {
    out.a[j].reserve(group.per_agent[j].size());
    for (const Rollout& r : group.per_agent[j]) {
      out.a[j].push_back(out.degenerate ? 0.0 : (r.reward - joint_mean) / out.sigma_joint);
    }
  }
  return out;
}

}  // namespace hacpo
