/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "treesel/bnb.hpp"
#include "treesel/features.hpp"
#include "treesel/nn.hpp"
#include "treesel/selectors.hpp"

namespace treesel {

enum class ValueMode {
  // Q(n) is the mean of per-node values along the root-to-n path.
  kPathMean,
  // Bottom-up subtree sums; for open leaves this is q(n) / (depth + 1).
  kSubtree,
};

struct PolicyConfig {
  int d_model = 128;
  int k_steps = 3;
  double temperature = 1.0;
  // Std of the weight-head initialization; 0 gives exactly uniform
  // selection at start.
  double head_init_scale = 0.0;
  ValueMode value_mode = ValueMode::kPathMean;
};

// Structure of a tree as seen by the policy: node-id aligned parents,
// depths and the children that carry messages. Children that were pruned,
// proven infeasible or discarded are dropped (they send the zero vector).
struct TreeShape {
  std::vector<NodeId> parent;
  std::vector<int> depth;
  std::vector<std::array<NodeId, 2>> children;

  int size() const { return static_cast<int>(parent.size()); }
  // With `kept` set, nodes that can neither be selected nor send messages
  // (pruned, infeasible, discarded) are dropped and the remaining ones
  // renumbered; kept[i] is the tree id of shape node i.
  static TreeShape from_tree(const BnbTree& tree, std::vector<NodeId>* kept = nullptr);
  // Adds a node under `parent` (kNoNode for the root) and returns its id.
  NodeId add_node(NodeId parent_id);
};

// Probability vector aligned with `nodes`.
struct Distribution {
  std::vector<NodeId> nodes;
  Eigen::VectorXd probs;
  Eigen::VectorXd log_probs;
};

// Softmax of path weights divided by the temperature.
Distribution policy_distribution(const Eigen::VectorXd& path_weights,
                                 std::vector<NodeId> nodes, double temperature = 1.0);
NodeId sample_action(const Distribution& dist, std::mt19937_64& rng);
// Throws NotACandidate when `node` is not in the distribution.
double log_prob(const Distribution& dist, NodeId node);

// Per-candidate path averaging: row i holds 1 / (depth + 1) on every node of
// the root-to-candidate path.
nn::SparseMatrix path_mean_matrix(const TreeShape& shape, std::span<const NodeId> candidates);

class TreePolicy {
 public:
  static TreePolicy init(const PolicyConfig& cfg, std::uint64_t seed);
  // Checks that `params` holds every named array with the right shape.
  TreePolicy(PolicyConfig cfg, nn::ParameterSet params);

  const PolicyConfig& config() const { return cfg_; }
  void set_temperature(double t) { cfg_.temperature = t; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  struct Graph {
    nn::Var h0;            // N x d
    nn::Var hk;            // N x d
    nn::Var node_weight;   // N x 1, weight head per node
    nn::Var path_weight;   // |C| x 1, W'
    nn::Var log_probs;     // |C| x 1
    nn::Var node_value;    // N x 1, value head on detached h_K
    nn::Var q;             // |C| x 1
    nn::Var value;         // 1 x 1, max over q
  };

  // Records the full forward pass on `tape`, which must be bound to params().
  // `features` is N x 19 standardized, rows aligned with `shape`.
  Graph forward(nn::Tape& tape, const Eigen::MatrixXd& features, const TreeShape& shape,
                std::span<const NodeId> candidates) const;

  struct Evaluation {
    Distribution dist;
    Eigen::VectorXd path_weight;
    Eigen::VectorXd q;
    double value = 0.0;
  };
  Evaluation evaluate(const Eigen::MatrixXd& features, const TreeShape& shape,
                      std::span<const NodeId> candidates) const;

  // Stage-wise views for inspection and tests.
  Eigen::MatrixXd embed_nodes(const Eigen::MatrixXd& features) const;
  Eigen::MatrixXd message_pass(const Eigen::MatrixXd& h0, const TreeShape& shape) const;

 private:
  nn::Var embed(nn::Tape& tape, nn::Var x) const;
  nn::Var propagate(nn::Tape& tape, nn::Var h, const TreeShape& shape) const;

  PolicyConfig cfg_;
  nn::ParameterSet params_;
};

// What a rollout needs to replay one policy decision during the update.
struct PolicyStep {
  Eigen::MatrixXd features;
  TreeShape shape;
  std::vector<NodeId> candidates;
  int action = 0;  // index into candidates
  double log_prob = 0.0;
  double value = 0.0;
};

// Node selector backed by a TreePolicy: samples from the distribution (or
// takes its argmax when greedy), optionally recording each decision.
class PolicySelector final : public NodeSelector {
 public:
  PolicySelector(const TreePolicy& policy, const FeatureStats& stats, std::uint64_t seed,
                 bool greedy = false)
      : policy_(policy), stats_(stats), rng_(seed), greedy_(greedy) {}

  NodeId select(const BnbTree& tree) override;
  std::string name() const override { return "policy"; }

  void set_recorder(std::function<void(PolicyStep&&)> rec) { recorder_ = std::move(rec); }

 private:
  const TreePolicy& policy_;
  const FeatureStats& stats_;
  std::mt19937_64 rng_;
  bool greedy_;
  std::function<void(PolicyStep&&)> recorder_;
};

}  // namespace treesel
