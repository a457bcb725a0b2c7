/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "treesel/lp.hpp"

namespace treesel {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

enum class NodeStatus {
  kOpen,
  kBranched,
  kPrunedByBound,
  kInfeasible,
  kIntegral,
  // The node LP hit a numerical failure and the node was dropped.
  kDiscarded,
};

const char* to_string(NodeStatus s);

struct BoundChange {
  int var = 0;
  BoundSide side = BoundSide::kUpper;
  double value = 0.0;
};

// Per-node summary of an LP solution, the inputs of the "model" features.
struct LpSummary {
  std::array<double, 10> frac_hist{};
  double mean_integrality_gap = 0.0;
  double pct_integral = 0.0;
  int lp_iterations = 0;
};

struct BnbNode {
  NodeId id = kNoNode;
  NodeId parent = kNoNode;
  int depth = 0;
  std::optional<BoundChange> local_bound;
  // Relaxation value. Open nodes carry their parent's value (the root starts
  // at -inf) until they are processed.
  double lp_bound = -kInf;
  double estimate = -kInf;
  NodeStatus status = NodeStatus::kOpen;
  bool lp_solved = false;
  // Own LP summary once solved; the parent's while still open.
  LpSummary lp_summary;
  // Down branch (upper bound) first, up branch second.
  std::array<NodeId, 2> children{kNoNode, kNoNode};
};

struct Incumbent {
  std::vector<double> solution;
  double objective = kInf;
};

// 0 when the bounds meet, +inf without an incumbent, otherwise
// (primal - dual) / max(|primal|, |dual|, 1e-9).
double compute_gap(double primal, double dual);

// Copy of `p` with every integrality flag cleared.
LinearProgram relax(const LinearProgram& p);

// Most fractional integer variable, ties to the lowest index; nullopt when all
// integer variables are within kIntegralityTol of an integer.
std::optional<int> select_branch_variable(std::span<const double> solution,
                                          const std::vector<bool>& is_integer);

// Live branch-and-bound search tree for one minimization problem. Nodes are
// append-only and ids are dense indices in creation order.
class BnbTree {
 public:
  explicit BnbTree(LinearProgram problem);

  const LinearProgram& problem() const { return problem_; }
  NodeId root() const { return 0; }
  std::size_t size() const { return nodes_.size(); }
  const BnbNode& node(NodeId id) const { return nodes_.at(id); }
  std::span<const BnbNode> nodes() const { return nodes_; }
  const std::array<NodeId, 2>& children(NodeId id) const {
    return nodes_.at(id).children;
  }

  // The candidate set: exactly the nodes with status kOpen.
  const std::set<NodeId>& open_leaves() const { return open_; }

  const std::optional<Incumbent>& incumbent() const { return incumbent_; }
  double primal_bound() const {
    return incumbent_ ? incumbent_->objective : kInf;
  }
  // Minimum inherited bound over open leaves, or the primal bound once the
  // open set is empty.
  double dual_bound() const;
  double gap() const { return compute_gap(primal_bound(), dual_bound()); }

  std::optional<NodeId> last_processed() const { return last_processed_; }
  // Number of process_node calls so far.
  int selections() const { return selections_; }
  int discarded() const { return discarded_; }

  // Splits an open node on `var` at fractional `value`: left child gets
  // var <= floor(value), right child var >= ceil(value). The node becomes
  // kBranched and both children join the open set.
  std::pair<NodeId, NodeId> branch(NodeId node, int var, double value);

  // Solves the node relaxation and fathoms, records an incumbent, or branches.
  NodeStatus process_node(NodeId node);

  // Variable bounds of a node: root bounds with every ancestor's bound change
  // applied.
  void node_bounds(NodeId node, std::vector<double>& lower,
                   std::vector<double>& upper) const;

 private:
  void close(NodeId id, NodeStatus status);
  void prune_open_leaves();
  bool prunable(double bound) const;
  void share_basis(NodeId parent, Basis basis);

  LinearProgram problem_;
  PreparedLp prepared_;
  std::vector<BnbNode> nodes_;
  // Warm-start basis inherited from the parent, dropped once the node is
  // processed.
  std::vector<std::shared_ptr<const Basis>> warm_;
  std::deque<NodeId> snapshot_owners_;
  std::size_t max_snapshots_ = 0;
  std::set<NodeId> open_;
  std::optional<Incumbent> incumbent_;
  std::optional<NodeId> last_processed_;
  int selections_ = 0;
  int discarded_ = 0;
};

class NodeSelector;

struct Budget {
  std::int64_t max_nodes = 400;
  double max_seconds = kInf;
};

// kInfeasible: the search finished without finding any integral point.
enum class Termination { kOptimal, kInfeasible, kNodeBudget, kTimeBudget };

const char* to_string(Termination t);

struct TraceRecord {
  NodeId selected = kNoNode;
  int candidates = 0;
  double gap_after = kInf;
  bool discarded = false;
};

struct SolveResult {
  double final_gap = kInf;
  int nodes_processed = 0;
  int tree_size = 0;
  int discarded_nodes = 0;
  double primal_bound = kInf;
  double dual_bound = -kInf;
  std::optional<Incumbent> incumbent;
  std::vector<TraceRecord> trace;
  Termination terminated_by = Termination::kOptimal;
};

// Branch-and-bound loop: the selector picks an open leaf, the node is
// processed, until the open set is empty or the budget runs out. Throws
// UnboundedProblem if a relaxation is unbounded. `on_finish`, when set, sees
// the final tree before it is destroyed.
SolveResult solve(const LinearProgram& p, NodeSelector& selector, const Budget& budget,
                  const std::function<void(const BnbTree&)>& on_finish = {});

}  // namespace treesel
