/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "treesel/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "treesel/errors.hpp"
#include "treesel/lp_io.hpp"
#include "treesel/ppo.hpp"

namespace treesel {

namespace {

// (base - sel) / max(sel, base) for nonnegative scores that may be infinite.
double relative_advantage(double sel, double base) {
  if (std::isinf(sel) && std::isinf(base)) return 0.0;
  if (std::isinf(sel)) return -1.0;
  if (std::isinf(base)) return 1.0;
  const double m = std::max(sel, base);
  if (m == 0.0) return 0.0;
  return std::clamp((base - sel) / m, -1.0, 1.0);
}

struct Timed {
  SolveResult result;
  double seconds = 0.0;
};

Timed timed_solve(const LinearProgram& p, NodeSelector& sel, const Budget& budget) {
  const auto start = std::chrono::steady_clock::now();
  Timed t{solve(p, sel, budget), 0.0};
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return t;
}

std::vector<BenchRow> bench_with(std::span<const NamedProgram> instances, const BenchConfig& cfg,
                                 const std::function<std::unique_ptr<NodeSelector>(std::size_t)>&
                                     make_policy) {
  std::vector<BenchRow> rows;
  rows.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    try {
      HybridPlungeSelector base;
      const Timed b = timed_solve(inst.program, base, cfg.budget);
      auto learned = make_policy(i);
      ScheduledSelector sel(*learned, cfg.schedule);
      const Timed p = timed_solve(inst.program, sel, cfg.budget);
      BenchRow row = make_row(inst.name, p.result.final_gap, b.result.final_gap,
                              p.result.nodes_processed, b.result.nodes_processed);
      row.seconds_policy = p.seconds;
      row.seconds_baseline = b.seconds;
      rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      BenchRow row;
      row.instance = inst.name;
      row.skipped = true;
      row.error = e.what();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// Forwards to a selector owned elsewhere.
class BorrowedSelector final : public NodeSelector {
 public:
  explicit BorrowedSelector(NodeSelector& s) : s_(s) {}
  NodeId select(const BnbTree& tree) override { return s_.select(tree); }
  std::string name() const override { return s_.name(); }

 private:
  NodeSelector& s_;
};

std::uint64_t instance_seed(std::uint64_t seed, std::size_t i) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

double utility(double gap_sel, double gap_base) { return relative_advantage(gap_sel, gap_base); }

double utility_per_node(double gap_sel, long nodes_sel, double gap_base, long nodes_base) {
  return relative_advantage(gap_sel * static_cast<double>(nodes_sel),
                            gap_base * static_cast<double>(nodes_base));
}

double shifted_geo_mean(std::span<const double> xs, double shift) {
  if (xs.empty()) throw std::invalid_argument("shifted_geo_mean of nothing");
  double acc = 0.0;
  for (double x : xs) acc += std::log(x + shift);
  return std::exp(acc / static_cast<double>(xs.size())) - shift;
}

BenchRow make_row(std::string instance, double gap_policy, double gap_baseline,
                  long nodes_policy, long nodes_baseline) {
  BenchRow r;
  r.instance = std::move(instance);
  r.gap_policy = gap_policy;
  r.gap_baseline = gap_baseline;
  r.nodes_policy = nodes_policy;
  r.nodes_baseline = nodes_baseline;
  r.reward = compute_reward(gap_policy, gap_baseline);
  r.utility = utility(gap_policy, gap_baseline);
  r.utility_per_node = utility_per_node(gap_policy, nodes_policy, gap_baseline, nodes_baseline);
  return r;
}

BenchSummary aggregate(std::span<const BenchRow> rows, double gap_shift, double time_shift,
                       long min_baseline_nodes) {
  std::vector<const BenchRow*> kept;
  for (const auto& r : rows)
    if (!r.skipped && r.nodes_baseline >= min_baseline_nodes) kept.push_back(&r);
  if (kept.empty()) throw EmptyAfterFilter("no rows left after filtering");
  BenchSummary s;
  s.rows = static_cast<int>(kept.size());
  s.filtered = static_cast<int>(rows.size() - kept.size());
  std::vector<double> gp, gb, tp, tb;
  int wins = 0;
  for (const BenchRow* r : kept) {
    s.mean_reward += r->reward;
    s.mean_utility += r->utility;
    s.mean_utility_per_node += r->utility_per_node;
    wins += r->reward >= 0.0;
    gp.push_back(r->gap_policy);
    gb.push_back(r->gap_baseline);
    tp.push_back(r->seconds_policy);
    tb.push_back(r->seconds_baseline);
  }
  const double n = static_cast<double>(kept.size());
  s.mean_reward /= n;
  s.mean_utility /= n;
  s.mean_utility_per_node /= n;
  s.win_rate = wins / n;
  s.geo_mean_policy = shifted_geo_mean(gp, gap_shift);
  s.geo_mean_baseline = shifted_geo_mean(gb, gap_shift);
  s.geo_mean_seconds_policy = shifted_geo_mean(tp, time_shift);
  s.geo_mean_seconds_baseline = shifted_geo_mean(tb, time_shift);
  return s;
}

std::string rows_to_csv(std::span<const BenchRow> rows) {
  std::ostringstream os;
  os.precision(17);
  os << kBenchCsvHeader << '\n';
  for (const auto& r : rows) {
    if (r.skipped) {
      os << r.instance << ",,,,,,,\n";
      continue;
    }
    os << r.instance << ',' << r.gap_policy << ',' << r.gap_baseline << ',' << r.nodes_policy
       << ',' << r.nodes_baseline << ',' << r.reward << ',' << r.utility << ','
       << r.utility_per_node << '\n';
  }
  return os.str();
}

nlohmann::json summary_to_json(const BenchSummary& s) {
  return {{"rows", s.rows},
          {"filtered", s.filtered},
          {"mean_reward", s.mean_reward},
          {"mean_utility", s.mean_utility},
          {"mean_utility_per_node", s.mean_utility_per_node},
          {"win_rate", s.win_rate},
          {"geo_mean_gap_policy", s.geo_mean_policy},
          {"geo_mean_gap_baseline", s.geo_mean_baseline},
          {"geo_mean_seconds_policy", s.geo_mean_seconds_policy},
          {"geo_mean_seconds_baseline", s.geo_mean_seconds_baseline}};
}

std::vector<BenchRow> run_bench(std::span<const NamedProgram> instances, const TreePolicy& policy,
                                const FeatureStats& stats, const BenchConfig& cfg) {
  return bench_with(instances, cfg, [&](std::size_t i) -> std::unique_ptr<NodeSelector> {
    return std::make_unique<PolicySelector>(policy, stats, instance_seed(cfg.seed, i),
                                            cfg.greedy);
  });
}

std::vector<BenchRow> run_bench(std::span<const NamedProgram> instances, NodeSelector& policy,
                                const BenchConfig& cfg) {
  return bench_with(instances, cfg, [&](std::size_t) -> std::unique_ptr<NodeSelector> {
    return std::make_unique<BorrowedSelector>(policy);
  });
}

nlohmann::json model_to_json(const TreePolicy& policy, const FeatureStats& stats,
                             const nlohmann::json& meta) {
  const auto& cfg = policy.config();
  nlohmann::json params = nlohmann::json::array();
  for (const auto& e : policy.params().entries()) {
    std::vector<double> data(e.value.data(), e.value.data() + e.value.size());
    params.push_back({{"name", e.name},
                      {"rows", e.value.rows()},
                      {"cols", e.value.cols()},
                      {"trainable", e.trainable},
                      {"decay", e.decay},
                      {"data", data}});
  }
  return {{"format", "treesel-model"},
          {"version", kModelVersion},
          {"d_model", cfg.d_model},
          {"k_steps", cfg.k_steps},
          {"temperature", cfg.temperature},
          {"head_init_scale", cfg.head_init_scale},
          {"value_mode", cfg.value_mode == ValueMode::kPathMean ? "path_mean" : "subtree"},
          {"feature_dim", kNumFeatures},
          {"stats", {{"mean", stats.mean}, {"std", stats.std}}},
          {"params", params},
          {"meta", meta}};
}

Model model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "treesel-model")
    throw CorruptModel("not a treesel model document");
  if (!j.contains("version") || !j["version"].is_number_integer())
    throw CorruptModel("model version missing");
  const int version = j["version"].get<int>();
  if (version != kModelVersion)
    throw VersionMismatch("model version " + std::to_string(version) + ", expected " +
                          std::to_string(kModelVersion));
  try {
    if (j.at("feature_dim").get<int>() != kNumFeatures)
      throw CorruptModel("feature dimension mismatch");
    PolicyConfig cfg;
    cfg.d_model = j.at("d_model").get<int>();
    cfg.k_steps = j.at("k_steps").get<int>();
    cfg.temperature = j.at("temperature").get<double>();
    cfg.head_init_scale = j.value("head_init_scale", 0.0);
    const std::string mode = j.at("value_mode").get<std::string>();
    if (mode == "path_mean")
      cfg.value_mode = ValueMode::kPathMean;
    else if (mode == "subtree")
      cfg.value_mode = ValueMode::kSubtree;
    else
      throw CorruptModel("unknown value mode " + mode);

    FeatureStats stats;
    stats.mean = j.at("stats").at("mean").get<FeatureVector>();
    stats.std = j.at("stats").at("std").get<FeatureVector>();

    nn::ParameterSet ps;
    for (const auto& p : j.at("params")) {
      const auto rows = p.at("rows").get<Eigen::Index>();
      const auto cols = p.at("cols").get<Eigen::Index>();
      const auto data = p.at("data").get<std::vector<double>>();
      if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw CorruptModel("parameter " + p.at("name").get<std::string>() + " has bad size");
      nn::Matrix m = Eigen::Map<const nn::Matrix>(data.data(), rows, cols);
      ps.add(p.at("name").get<std::string>(), std::move(m), p.at("trainable").get<bool>(),
             p.at("decay").get<bool>());
    }
    return Model{TreePolicy(cfg, std::move(ps)), stats, j.value("meta", nlohmann::json::object())};
  } catch (const nlohmann::json::exception& e) {
    throw CorruptModel(std::string("malformed model: ") + e.what());
  } catch (const ShapeMismatch& e) {
    throw CorruptModel(e.what());
  } catch (const std::invalid_argument& e) {
    throw CorruptModel(e.what());
  }
}

void save_model(const std::string& path, const TreePolicy& policy, const FeatureStats& stats,
                const nlohmann::json& meta) {
  write_text_file(path, model_to_json(policy, stats, meta).dump() + "\n");
}

Model load_model(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const ParseError& e) {
    throw CorruptModel(e.what());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptModel(std::string("model is not valid JSON: ") + e.what());
  }
  return model_from_json(j);
}

nlohmann::json solve_result_to_json(const SolveResult& r, bool with_trace) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : "-inf";
  };
  nlohmann::json j{{"final_gap", num(r.final_gap)},
                   {"nodes_processed", r.nodes_processed},
                   {"tree_size", r.tree_size},
                   {"discarded_nodes", r.discarded_nodes},
                   {"primal_bound", num(r.primal_bound)},
                   {"dual_bound", num(r.dual_bound)},
                   {"terminated_by", to_string(r.terminated_by)}};
  if (r.incumbent) j["solution"] = r.incumbent->solution;
  if (with_trace) {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& rec : r.trace)
      t.push_back({{"selected", rec.selected},
                   {"candidates", rec.candidates},
                   {"gap_after", num(rec.gap_after)},
                   {"discarded", rec.discarded}});
    j["trace"] = std::move(t);
  }
  return j;
}

}  // namespace treesel
