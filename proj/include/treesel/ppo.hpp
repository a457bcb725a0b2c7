/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "treesel/bnb.hpp"
#include "treesel/features.hpp"
#include "treesel/instances.hpp"
#include "treesel/nn.hpp"
#include "treesel/selectors.hpp"
#include "treesel/tree_policy.hpp"

namespace treesel {

// -(gap_selector / gap_baseline - 1) clipped to [-1, 1]. 0/0 counts as ratio
// 0 (reward 1), x/0 as +inf (reward -1). Two infinite gaps tie at 0.
double compute_reward(double gap_selector, double gap_baseline);

// hybrid_plunge gaps keyed by (instance name, node budget). Concurrent
// readers, serialized insertion.
class BaselineCache {
 public:
  struct Entry {
    double gap = 0.0;
    int nodes = 0;
  };
  Entry get(const NamedProgram& inst, const Budget& budget);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::pair<std::string, std::int64_t>, Entry> cache_;
};

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatch_size = 64;
  // Steps used per epoch, drawn without replacement; 0 uses every step.
  int max_steps_per_epoch = 0;
  // Instances rolled out per iteration; 0 means the whole pool.
  int rollouts_per_iteration = 0;
  double entropy_bonus = 0.01;
  double value_loss_weight = 0.5;
  double max_grad_norm = 0.5;
  int iterations = 100;
  Budget budget{300};
  ScheduleConfig schedule;
  nn::AdamWConfig optimizer{1e-3};
  std::uint64_t seed = 0;
};

struct Trajectory {
  std::string instance;
  std::vector<PolicyStep> steps;
  double reward = 0.0;
  double gap = 0.0;
  double baseline_gap = 0.0;
  int nodes = 0;
};

// One episode with the policy behind the schedule; hybrid_plunge fills the
// selections the schedule leaves out. Reward is terminal only.
Trajectory rollout(const NamedProgram& inst, const TreePolicy& policy,
                   const FeatureStats& stats, const TrainConfig& cfg, double baseline_gap,
                   std::uint64_t seed);

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};
Advantages gae_advantages(const Trajectory& traj, double gamma, double lambda);
// In place to mean 0, std 1; a constant vector becomes all zeros.
void normalize(std::vector<double>& v);

struct PpoLoss {
  nn::Var total;
  nn::Var policy;   // -min(r A, clip(r) A)
  nn::Var value;    // (V - R)^2
  nn::Var entropy;  // over the candidate distribution
  double ratio = 1.0;
};

// Per-sample composite loss on a tape bound to policy.params():
// policy + value_loss_weight * value - entropy_bonus * entropy.
PpoLoss ppo_loss(nn::Tape& tape, const TreePolicy& policy, const PolicyStep& step,
                 double advantage, double ret, const TrainConfig& cfg);

struct UpdateReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  int samples = 0;
};

// Clipped-surrogate update over every step of `batch`. Advantages are
// normalized across the batch. Throws NonFiniteLoss with the policy and
// optimizer left as they were.
UpdateReport ppo_update(std::span<const Trajectory> batch, TreePolicy& policy, nn::AdamW& opt,
                        const TrainConfig& cfg, std::uint64_t seed);

// Standardization statistics over every node of a best_first warm-up run on
// each pool instance.
FeatureStats fit_feature_stats(std::span<const NamedProgram> pool, const Budget& budget);

struct CurveRow {
  int iteration = 0;
  double mean_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};
std::string curve_to_csv(std::span<const CurveRow> curve);

struct TrainResult {
  TreePolicy policy;  // after the last update
  TreePolicy best;    // parameters with the highest mean rollout reward
  FeatureStats stats;
  std::vector<CurveRow> curve;
  int best_iteration = -1;
  int dropped_episodes = 0;
};

// Row i of the curve is the mean reward of rollouts with the parameters in
// force at the start of iteration i, followed by one update, so row 0
// evaluates the initial policy. Stats are fitted on the pool when not given.
TrainResult train(std::span<const NamedProgram> pool, const PolicyConfig& policy_cfg,
                  const TrainConfig& cfg, const FeatureStats* stats = nullptr,
                  const std::function<void(const CurveRow&)>& progress = {});

}  // namespace treesel
