// Acceptance checks AC1..AC10. With no arguments every check runs; otherwise
// only the named ones (e.g. `acceptance AC3 AC5`). One PASS/FAIL line each.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "treesel/bench.hpp"
#include "treesel/errors.hpp"
#include "treesel/instances.hpp"
#include "treesel/lp_io.hpp"
#include "treesel/ppo.hpp"
#include "treesel/selectors.hpp"
#include "treesel/tree_policy.hpp"

using namespace treesel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

TreeShape random_shape(int n, std::mt19937_64& rng) {
  TreeShape s;
  s.add_node(kNoNode);
  while (s.size() < n) {
    std::vector<NodeId> free;
    for (NodeId i = 0; i < s.size(); ++i)
      if (s.children[i][1] == kNoNode) free.push_back(i);
    std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
    s.add_node(free[pick(rng)]);
  }
  return s;
}

std::vector<NodeId> leaves(const TreeShape& s) {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < s.size(); ++i)
    if (s.children[i][0] == kNoNode) out.push_back(i);
  return out;
}

Eigen::MatrixXd random_features(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd f(n, kNumFeatures);
  for (Eigen::Index k = 0; k < f.size(); ++k) f(k) = g(rng);
  return f;
}

std::vector<std::vector<double>> as_rows(const TspInstance& t) {
  std::vector<std::vector<double>> d(t.n, std::vector<double>(t.n));
  for (int i = 0; i < t.n; ++i)
    for (int j = 0; j < t.n; ++j) d[i][j] = t.at(i, j);
  return d;
}

// 1. Every selector agrees with enumeration on small binary programs.
Outcome ac1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<int> nv(2, 12), nr(1, 10);
  const auto policy = TreePolicy::init(PolicyConfig{.d_model = 16, .k_steps = 2}, 1);
  const auto stats = FeatureStats::identity();
  int matched = 0;
  std::string first_miss;
  for (int i = 0; i < 50; ++i) {
    const LinearProgram lp = oracle::random_binary_program(rng, nv(rng), nr(rng));
    const auto truth = oracle::integer_enumeration(lp);
    bool ok = true;
    std::vector<std::unique_ptr<NodeSelector>> sels;
    for (const char* n : {"bestfirst", "dfs", "estimate", "hybrid"})
      sels.push_back(make_classical_selector(n));
    sels.push_back(std::make_unique<PolicySelector>(policy, stats, i));
    for (auto& sel : sels) {
      const auto res = solve(lp, *sel, Budget{1'000'000});
      const bool agree =
          truth.feasible
              ? res.terminated_by == Termination::kOptimal && res.primal_bound == truth.objective
              : res.terminated_by == Termination::kInfeasible;
      if (!agree) {
        ok = false;
        if (first_miss.empty()) first_miss = " first miss #" + std::to_string(i) + " " + sel->name();
      }
    }
    matched += ok;
  }
  const double t = seconds_since(t0);
  return {matched == 50 && t < 30.0,
          std::to_string(matched) + "/50 programs, 5 selectors, " + fmt(t, 3) + " s" + first_miss};
}

// 2. MTZ optimum equals the best permutation.
Outcome ac2() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  int matched = 0;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int n = 5 + i % 3;
    const TspInstance inst = gen_tsp(n, rng);
    BestFirstSelector sel;
    const auto res = solve(encode_mtz(inst), sel, Budget{1'000'000});
    const double best = oracle::best_tour(as_rows(inst));
    const double err = std::abs(res.primal_bound - best);
    worst = std::max(worst, err);
    const auto tour = res.incumbent ? decode_tour(n, res.incumbent->solution) : std::nullopt;
    matched += res.final_gap == 0.0 && err <= 1e-6 && tour.has_value();
  }
  const double t = seconds_since(t0);
  return {matched == 20 && t < 60.0, std::to_string(matched) + "/20 tours, worst |diff| " +
                                         fmt(worst, 3) + ", " + fmt(t, 3) + " s"};
}

// 3. Metric arithmetic on the published TSPLIB comparison.
Outcome ac3(const fs::path& data_dir) {
  const auto t0 = Clock::now();
  std::ifstream in(data_dir / "tsplib_reference.csv");
  if (!in) return {false, "reference table missing"};
  std::string line;
  std::getline(in, line);
  struct Published {
    double reward, utility, per_node;
  };
  std::vector<BenchRow> rows;
  std::map<std::string, Published> published;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string f[8];
    for (auto& x : f) std::getline(ls, x, ',');
    rows.push_back(make_row(f[0], std::stod(f[1]), std::stod(f[2]), std::stol(f[3]),
                            std::stol(f[4])));
    published[f[0]] = {std::stod(f[5]), std::stod(f[6]), std::stod(f[7])};
  }
  bool ok = rows.size() == 46;
  double worst = 0.0;
  for (const auto& r : rows) {
    if (!std::set<std::string>{"att48", "brazil58", "st70", "bays29", "kroE100"}.count(r.instance))
      continue;
    const auto& p = published[r.instance];
    worst = std::max({worst, std::abs(r.reward - p.reward), std::abs(r.utility - p.utility),
                      std::abs(r.utility_per_node - p.per_node)});
  }
  ok = ok && worst <= 0.02;
  const BenchSummary s = aggregate(rows);
  ok = ok && s.rows == 46 && std::abs(s.mean_reward - 0.184) <= 0.005;
  const double t = seconds_since(t0);
  ok = ok && t < 1.0;
  return {ok, "anchor rows worst |diff| " + fmt(worst, 3) + ", mean reward " +
                  fmt(s.mean_reward, 5) + " over " + std::to_string(s.rows) + " rows, win rate " +
                  fmt(s.win_rate, 3)};
}

// 4. Zero weight head gives the uniform distribution.
Outcome ac4() {
  std::mt19937_64 rng(404);
  double worst_prob = 0.0, worst_z = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<int> want(3, 40);
    const int k = want(rng);
    // Split random leaves until there are k of them.
    TreeShape shape;
    shape.add_node(kNoNode);
    std::vector<NodeId> cands{0};
    while (static_cast<int>(cands.size()) < k) {
      std::uniform_int_distribution<std::size_t> pick(0, cands.size() - 1);
      const std::size_t at = pick(rng);
      const NodeId parent = cands[at];
      cands[at] = shape.add_node(parent);
      cands.push_back(shape.add_node(parent));
    }
    const auto policy = TreePolicy::init(PolicyConfig{.d_model = 32, .k_steps = 3}, trial);
    const auto f = random_features(shape.size(), rng);
    const auto ev = policy.evaluate(f, shape, cands);
    const double c = static_cast<double>(cands.size());
    for (Eigen::Index i = 0; i < ev.dist.probs.size(); ++i)
      worst_prob = std::max(worst_prob, std::abs(ev.dist.probs(i) - 1.0 / c));
    // Pearson chi-square over 10^4 draws, as a z-score against its own spread.
    const int draws = 10000;
    std::map<NodeId, int> counts;
    for (int d = 0; d < draws; ++d) ++counts[sample_action(ev.dist, rng)];
    double chi2 = 0.0;
    const double expected = draws / c;
    for (NodeId n : cands) chi2 += std::pow(counts[n] - expected, 2) / expected;
    const double z = (chi2 - (c - 1)) / std::sqrt(2 * (c - 1));
    worst_z = std::max(worst_z, z);
  }
  return {worst_prob <= 1e-9 && worst_z <= 3.0,
          "max |p - 1/|C|| " + fmt(worst_prob, 3) + ", worst chi-square z " + fmt(worst_z, 3)};
}

// 5. Finite differences on the composite PPO loss.
Outcome ac5() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(55);
  auto policy =
      TreePolicy::init(PolicyConfig{.d_model = 16, .k_steps = 2, .head_init_scale = 0.5}, 5);
  policy.params()["gnn.alpha"](0, 0) = 0.6;
  PolicyStep step;
  step.shape.add_node(kNoNode);
  step.shape.add_node(0);
  step.shape.add_node(0);
  step.candidates = {1, 2};
  step.action = 1;
  step.log_prob = std::log(0.55);
  step.features = random_features(3, rng);
  TrainConfig cfg;
  const auto rep = nn::grad_check(policy.params(), [&](nn::Tape& t) {
    return ppo_loss(t, policy, step, -0.9, 0.4, cfg).total;
  });
  nn::Tape tape(&policy.params());
  const auto loss = ppo_loss(tape, policy, step, -0.9, 0.4, cfg);
  auto grads = nn::zero_gradients(policy.params());
  tape.backward(loss.value, grads);
  double leak = 0.0;
  for (const auto& e : policy.params().entries())
    if (e.name.rfind("value.", 0) != 0)
      leak = std::max(leak, grads[policy.params().index(e.name)].cwiseAbs().maxCoeff());
  const double t = seconds_since(t0);
  return {rep.passed && rep.worst_error < 1e-4 && leak == 0.0 && t < 30.0,
          "worst relative error " + fmt(rep.worst_error, 3) + " (" + rep.worst_name +
              "), value gradient outside the value head " + fmt(leak, 3) + ", " + fmt(t, 3) +
              " s"};
}

// 6. Nodes beyond K levels below a candidate's path never reach its W'.
Outcome ac6() {
  std::mt19937_64 rng(606);
  const int k = 2;
  int violations = 0, far_checked = 0, near_checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    auto policy = TreePolicy::init(PolicyConfig{.d_model = 16, .k_steps = k}, 100 + trial);
    std::normal_distribution<double> g(0.0, 0.3);
    for (std::size_t i = 0; i < policy.params().size(); ++i) {
      auto& m = policy.params().entry(static_cast<int>(i)).value;
      for (Eigen::Index j = 0; j < m.size(); ++j) m(j) = g(rng);
    }
    policy.params()["gnn.alpha"](0, 0) = 0.8;
    const auto shape = random_shape(30, rng);
    const auto cands = leaves(shape);
    const auto f = random_features(shape.size(), rng);
    const auto base = policy.evaluate(f, shape, cands);
    for (std::size_t ci = 0; ci < cands.size(); ++ci) {
      std::vector<bool> on_path(shape.size(), false);
      for (NodeId u = cands[ci]; u != kNoNode; u = shape.parent[u]) on_path[u] = true;
      for (NodeId x = 0; x < shape.size(); ++x) {
        NodeId anc = x;
        while (!on_path[anc]) anc = shape.parent[anc];
        const int dist = shape.depth[x] - shape.depth[anc];
        auto pf = f;
        pf.row(x).array() += 0.5;
        const auto pert = policy.evaluate(pf, shape, cands);
        const double delta = std::abs(pert.path_weight(ci) - base.path_weight(ci));
        if (dist > k) {
          ++far_checked;
          violations += delta != 0.0;
        } else {
          ++near_checked;
          violations += !(delta > 0.0);
        }
      }
    }
  }
  return {violations == 0 && far_checked > 0,
          std::to_string(near_checked) + " near and " + std::to_string(far_checked) +
              " far perturbations, " + std::to_string(violations) + " violations"};
}

// 7. PPO improves on the initial uniform policy.
Outcome ac7() {
  const auto t0 = Clock::now();
  const Budget budget{100};
  CurationConfig cc;
  cc.budget = budget;
  cc.min_nodes = 30;
  cc.target_count = 20;
  TspStreamConfig stream;  // 8-10 cities
  const auto pool = curate_tsp(stream, cc, 7).pool;
  const auto stats = fit_feature_stats(pool, budget);

  TrainConfig cfg;
  cfg.budget = budget;
  cfg.iterations = 100;
  cfg.max_steps_per_epoch = 128;
  cfg.optimizer.lr = 3e-3;
  const PolicyConfig pc{.d_model = 64, .k_steps = 2};
  const int eval_passes = 10;

  int improved = 0;
  std::string detail;
  BaselineCache baselines;
  for (std::uint64_t seed : {1, 2, 3}) {
    cfg.seed = seed;
    const TreePolicy init = TreePolicy::init(pc, seed);
    double before = 0.0;
    int episodes = 0;
    for (int pass = 0; pass < eval_passes; ++pass)
      for (std::size_t i = 0; i < pool.size(); ++i) {
        const double base = baselines.get(pool[i], budget).gap;
        before += rollout(pool[i], init, stats, cfg, base, 1'000'003ULL * seed + 7919 * pass + i)
                      .reward;
        ++episodes;
      }
    before /= episodes;
    const auto res = train(pool, pc, cfg, &stats);
    double after = 0.0;
    const std::size_t n = res.curve.size();
    for (std::size_t i = n - 10; i < n; ++i) after += res.curve[i].mean_reward;
    after /= 10;
    const bool ok = after - before >= 0.05;
    improved += ok;
    detail += " seed" + std::to_string(seed) + ": " + fmt(before, 3) + " -> " + fmt(after, 3) +
              (ok ? "" : " (no)") + ";";
  }
  const double t = seconds_since(t0);
  return {improved >= 2 && t < 1800.0,
          std::to_string(improved) + "/3 seeds improved by >= 0.05;" + detail + " " +
              fmt(t, 4) + " s"};
}

// 8. Curation keeps only instances that pass every filter.
Outcome ac8() {
  CurationConfig cfg;
  cfg.budget = Budget{300};
  cfg.min_nodes = 100;
  cfg.target_count = 5;
  TspStreamConfig stream;
  stream.min_cities = 5;
  stream.max_cities = 10;
  const auto res = curate_tsp(stream, cfg, 11);
  int zero = 0, wide = 0, few = 0;
  bool rejected_selected = false;
  for (const auto& c : res.report.candidates) {
    zero += c.gap == 0.0;
    wide += c.gap > 1.0;
    few += c.nodes < cfg.min_nodes;
    rejected_selected = rejected_selected || (c.selected && !c.accepted);
  }
  int verified = 0;
  for (const auto& p : res.pool) {
    HybridPlungeSelector sel;
    const auto r = solve(p.program, sel, cfg.budget);
    verified += r.final_gap > 0.0 && r.final_gap <= 1.0 && r.nodes_processed >= cfg.min_nodes;
  }
  const bool ok = zero > 0 && wide > 0 && few > 0 && !rejected_selected &&
                  verified == static_cast<int>(res.pool.size()) && !res.pool.empty();
  return {ok, std::to_string(res.report.candidates.size()) + " candidates (" +
                  std::to_string(zero) + " gap 0, " + std::to_string(wide) + " gap > 1, " +
                  std::to_string(few) + " under min_nodes), " + std::to_string(verified) + "/" +
                  std::to_string(res.pool.size()) + " pool members re-verified"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// 9. The CLI's bench and train write identical CSVs for identical seeds.
Outcome ac9(const std::string& cli) {
  if (cli.empty()) return {false, "CLI path not given"};
  const fs::path dir = fs::temp_directory_path() / "treesel_ac9";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto run = [&](const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " 2>/dev/null";
    return std::system(cmd.c_str());
  };
  const std::string inst = (dir / "inst").string();
  int rc = run("gen-tsp --cities 6 --count 4 --seed 3 --out \"" + inst + "\"");
  const std::string common = " --seed 9 --node-budget 40 --d-model 16 --k-steps 2 ";
  for (int k = 0; k < 2; ++k) {
    const std::string tag = std::to_string(k);
    rc |= run("bench \"" + inst + "\"" + common + "--out \"" + (dir / ("bench" + tag + ".csv")).string() +
              "\" --summary \"" + (dir / ("summary" + tag + ".json")).string() + "\"");
    rc |= run("train --pool \"" + inst + "\"" + common + "--iterations 3 --steps-per-epoch 32 --out \"" +
              (dir / ("model" + tag + ".json")).string() + "\" --curve \"" +
              (dir / ("curve" + tag + ".csv")).string() + "\"");
  }
  const std::string b0 = slurp(dir / "bench0.csv"), b1 = slurp(dir / "bench1.csv");
  const std::string c0 = slurp(dir / "curve0.csv"), c1 = slurp(dir / "curve1.csv");
  const std::string m0 = slurp(dir / "model0.json"), m1 = slurp(dir / "model1.json");
  const bool ok = rc == 0 && !b0.empty() && !c0.empty() && b0 == b1 && c0 == c1 && m0 == m1;
  fs::remove_all(dir);
  return {ok, "exit codes " + std::string(rc == 0 ? "ok" : "nonzero") + ", bench CSV " +
                  (b0 == b1 && !b0.empty() ? "identical" : "differs") + ", curve CSV " +
                  (c0 == c1 && !c0.empty() ? "identical" : "differs") + ", model " +
                  (m0 == m1 ? "identical" : "differs")};
}

// Counts when the learned selector is consulted.
class Probe final : public NodeSelector {
 public:
  explicit Probe(NodeSelector& inner) : inner_(inner) {}
  NodeId select(const BnbTree& tree) override {
    calls.push_back(tree.selections());
    return inner_.select(tree);
  }
  std::string name() const override { return inner_.name(); }
  std::vector<int> calls;

 private:
  NodeSelector& inner_;
};

// 10. Dense then strided schedule over a long trace.
Outcome ac10() {
  // Jeroslow: 2 * sum(x) = n with n odd has no integer point, and branch and
  // bound needs exponentially many nodes to find that out.
  const int n = 25;
  auto lp = LinearProgram::with_vars(n);
  std::vector<SparseEntry> row;
  for (int j = 0; j < n; ++j) {
    lp.upper[j] = 1.0;
    lp.is_integer[j] = true;
    lp.objective[j] = 1.0;
    row.push_back({j, 2.0});
  }
  lp.add_row(row, Relation::kEq, n);
  const auto policy = TreePolicy::init(PolicyConfig{.d_model = 16, .k_steps = 1}, 3);
  PolicySelector learned(policy, FeatureStats::identity(), 5);
  Probe probe(learned);
  ScheduledSelector sel(probe, ScheduleConfig{});
  const auto res = solve(lp, sel, Budget{1200});
  bool schedule_ok = true;
  for (int c : probe.calls) schedule_ok = schedule_ok && policy_schedule(c) && c < 1000;
  const int calls = static_cast<int>(probe.calls.size());
  const bool ok = res.nodes_processed == 1200 && calls == 325 && sel.policy_calls() == 325 &&
                  schedule_ok;
  return {ok, std::to_string(res.nodes_processed) + " selections, policy consulted " +
                  std::to_string(calls) + " times, last at selection " +
                  (probe.calls.empty() ? std::string("-") : std::to_string(probe.calls.back()))};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  fs::path data_dir = TREESEL_TEST_DATA_DIR;
  std::set<std::string> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a.rfind("--cli=", 0) == 0)
      cli = a.substr(6);
    else if (a.rfind("--data=", 0) == 0)
      data_dir = a.substr(7);
    else
      wanted.insert(a);
  }
  if (cli.empty()) cli = TREESEL_CLI_PATH;

  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"AC1", ac1},
      {"AC2", ac2},
      {"AC3", [&] { return ac3(data_dir); }},
      {"AC4", ac4},
      {"AC5", ac5},
      {"AC6", ac6},
      {"AC7", ac7},
      {"AC8", ac8},
      {"AC9", [&] { return ac9(cli); }},
      {"AC10", ac10},
  };
  int failed = 0;
  for (const auto& [name, fn] : checks) {
    if (!wanted.empty() && !wanted.count(name)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << name << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
