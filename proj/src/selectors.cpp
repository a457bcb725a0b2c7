/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "treesel/selectors.hpp"

#include <stdexcept>

#include "treesel/errors.hpp"

namespace treesel {

namespace {

void require_open(const BnbTree& tree) {
  if (tree.open_leaves().empty()) throw EmptyCandidates("no open leaves");
}

// Smallest key; ties to the deeper node, then the lower id (set order).
template <typename Key>
NodeId argmin_open(const BnbTree& tree, Key key) {
  require_open(tree);
  NodeId best = kNoNode;
  double best_key = 0.0;
  int best_depth = -1;
  for (NodeId id : tree.open_leaves()) {
    const BnbNode& n = tree.node(id);
    const double k = key(n);
    if (best == kNoNode || k < best_key ||
        (k == best_key && n.depth > best_depth)) {
      best = id;
      best_key = k;
      best_depth = n.depth;
    }
  }
  return best;
}

}  // namespace

NodeId best_first(const BnbTree& tree) {
  return argmin_open(tree, [](const BnbNode& n) { return n.lp_bound; });
}

NodeId depth_first(const BnbTree& tree) {
  require_open(tree);
  return *tree.open_leaves().rbegin();
}

NodeId best_estimate(const BnbTree& tree) {
  return argmin_open(tree, [](const BnbNode& n) { return n.estimate; });
}

NodeId hybrid_plunge(const BnbTree& tree) {
  require_open(tree);
  if (const auto last = tree.last_processed()) {
    NodeId pick = kNoNode;
    for (NodeId c : tree.children(*last)) {
      if (c == kNoNode || tree.node(c).status != NodeStatus::kOpen) continue;
      if (pick == kNoNode || tree.node(c).estimate < tree.node(pick).estimate)
        pick = c;
    }
    if (pick != kNoNode) return pick;
  }
  return best_estimate(tree);
}

std::unique_ptr<NodeSelector> make_classical_selector(const std::string& name) {
  if (name == "bestfirst") return std::make_unique<BestFirstSelector>();
  if (name == "dfs") return std::make_unique<DepthFirstSelector>();
  if (name == "estimate") return std::make_unique<BestEstimateSelector>();
  if (name == "hybrid") return std::make_unique<HybridPlungeSelector>();
  throw std::invalid_argument("unknown selector '" + name + "'");
}

bool policy_schedule(int selections_so_far, const ScheduleConfig& cfg) {
  if (selections_so_far < 0) return false;
  if (selections_so_far < cfg.dense_limit) return true;
  if (selections_so_far >= cfg.sparse_limit || cfg.sparse_stride <= 0) return false;
  return (selections_so_far - cfg.dense_limit) % cfg.sparse_stride == 0;
}

NodeId ScheduledSelector::select(const BnbTree& tree) {
  if (policy_schedule(tree.selections(), cfg_)) {
    ++policy_calls_;
    return learned_.select(tree);
  }
  return hybrid_plunge(tree);
}

}  // namespace treesel
