/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <memory>
#include <string>

#include "treesel/bnb.hpp"

namespace treesel {

// Chooses the next open leaf to process. Implementations must be a pure
// function of the tree plus their own private state.
class NodeSelector {
 public:
  virtual ~NodeSelector() = default;
  // Precondition: tree.open_leaves() is non-empty. Must return an open leaf.
  virtual NodeId select(const BnbTree& tree) = 0;
  virtual std::string name() const = 0;
};

// Minimum lp_bound; ties to the deepest node, then the lowest id.
NodeId best_first(const BnbTree& tree);
// Most recently created open leaf.
NodeId depth_first(const BnbTree& tree);
// Minimum estimate; ties as in best_first.
NodeId best_estimate(const BnbTree& tree);
// An open child of the last processed node (lower estimate, then lower id),
// otherwise the best_estimate choice.
NodeId hybrid_plunge(const BnbTree& tree);

class BestFirstSelector final : public NodeSelector {
 public:
  NodeId select(const BnbTree& tree) override { return best_first(tree); }
  std::string name() const override { return "bestfirst"; }
};

class DepthFirstSelector final : public NodeSelector {
 public:
  NodeId select(const BnbTree& tree) override { return depth_first(tree); }
  std::string name() const override { return "dfs"; }
};

class BestEstimateSelector final : public NodeSelector {
 public:
  NodeId select(const BnbTree& tree) override { return best_estimate(tree); }
  std::string name() const override { return "estimate"; }
};

class HybridPlungeSelector final : public NodeSelector {
 public:
  NodeId select(const BnbTree& tree) override { return hybrid_plunge(tree); }
  std::string name() const override { return "hybrid"; }
};

// One of "bestfirst", "dfs", "estimate", "hybrid". Throws std::invalid_argument
// for anything else.
std::unique_ptr<NodeSelector> make_classical_selector(const std::string& name);

struct ScheduleConfig {
  int dense_limit = 250;
  int sparse_limit = 1000;
  int sparse_stride = 10;
};

// True when the learned selector should make selection number
// `selections_so_far` (0-based): every selection below dense_limit, then every
// sparse_stride-th selection below sparse_limit.
bool policy_schedule(int selections_so_far, const ScheduleConfig& cfg = {});

// Routes each selection either to a learned selector or to hybrid_plunge
// according to policy_schedule.
class ScheduledSelector final : public NodeSelector {
 public:
  ScheduledSelector(NodeSelector& learned, ScheduleConfig cfg)
      : learned_(learned), cfg_(cfg) {}

  NodeId select(const BnbTree& tree) override;
  std::string name() const override { return "scheduled-" + learned_.name(); }

  int policy_calls() const { return policy_calls_; }

 private:
  NodeSelector& learned_;
  ScheduleConfig cfg_;
  int policy_calls_ = 0;
};

}  // namespace treesel
