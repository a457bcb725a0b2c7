/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "treesel/bench.hpp"
#include "treesel/errors.hpp"
#include "treesel/instances.hpp"
#include "treesel/lp_io.hpp"
#include "treesel/ppo.hpp"
#include "treesel/selectors.hpp"

namespace fs = std::filesystem;
using namespace treesel;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::int64_t node_budget = 300;
  double time_budget = 0.0;  // 0: none
  std::string model;
  std::string selector = "policy";
  int k_steps = 3;
  int d_model = 128;
  double temperature = 1.0;
  std::string out;

  Budget budget() const {
    Budget b{node_budget};
    if (time_budget > 0) b.max_seconds = time_budget;
    return b;
  }
  PolicyConfig policy_config() const {
    PolicyConfig c;
    c.d_model = d_model;
    c.k_steps = k_steps;
    c.temperature = temperature;
    return c;
  }
};

void add_common(CLI::App* app, Common& c, const std::string& out_help) {
  app->add_option("--seed", c.seed, "random seed")->capture_default_str();
  app->add_option("--node-budget", c.node_budget, "nodes per solve")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--time-budget", c.time_budget, "seconds per solve, 0 for none")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--model", c.model, "model file");
  app->add_option("--selector", c.selector, "node selector")
      ->check(CLI::IsMember({"policy", "bestfirst", "dfs", "estimate", "hybrid"}))
      ->capture_default_str();
  app->add_option("--k-steps", c.k_steps, "message passing steps")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--d-model", c.d_model, "embedding width")
      ->check(CLI::Range(2, 4096))
      ->capture_default_str();
  app->add_option("--temperature", c.temperature, "softmax temperature")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--out", c.out, out_help);
}

// Instance documents in `dir`, sorted by file name; the stem is the name.
std::vector<NamedProgram> load_instances(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::is_regular_file(dir)) {
    files.push_back(dir);
  } else {
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (e.is_regular_file() && e.path().extension() == ".json" &&
          name.find(".tsp.json") == std::string::npos)
        files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  }
  std::vector<NamedProgram> out;
  for (const auto& f : files) out.push_back({f.stem().string(), read_program(f)});
  return out;
}

// Model from --model, or a freshly initialized (uniform) one.
Model model_or_init(const Common& c) {
  if (!c.model.empty()) {
    Model m = load_model(c.model);
    m.policy.set_temperature(c.temperature);
    return m;
  }
  return Model{TreePolicy::init(c.policy_config(), c.seed), FeatureStats::identity(), {}};
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_text_file(out, text);
}

int cmd_gen_tsp(const Common& c, int cities, int count, int mutations, double sigma) {
  const fs::path dir = c.out.empty() ? "." : c.out;
  fs::create_directories(dir);
  std::mt19937_64 rng(c.seed);
  for (int i = 0; i < count; ++i) {
    const TspInstance base = gen_tsp(cities, rng);
    for (int m = 0; m <= mutations; ++m) {
      const TspInstance inst = m == 0 ? base : mutate(base, sigma, rng);
      std::string stem = "tsp" + std::to_string(i);
      if (mutations > 0) stem += "_m" + std::to_string(m);
      write_text_file(dir / (stem + ".tsp.json"), tsp_to_json(inst).dump() + "\n");
      write_program(dir / (stem + ".json"), encode_mtz(inst));
    }
  }
  return 0;
}

int cmd_gen_uflp(const Common& c, int facilities, int clients, int count) {
  const fs::path dir = c.out.empty() ? "." : c.out;
  fs::create_directories(dir);
  std::mt19937_64 rng(c.seed);
  for (int i = 0; i < count; ++i)
    write_program(dir / ("uflp" + std::to_string(i) + ".json"),
                  gen_uflp_kochetov(facilities, clients, rng));
  return 0;
}

int cmd_curate(const Common& c, const CurationConfig& base_cfg, const TspStreamConfig& stream) {
  CurationConfig cfg = base_cfg;
  cfg.budget = c.budget();
  const fs::path dir = c.out.empty() ? "pool" : c.out;
  CurationResult res;
  try {
    res = curate_tsp(stream, cfg, c.seed);
  } catch (const PoolExhausted& e) {
    std::cerr << "curate: " << e.what() << "\n";
    return 3;
  }
  fs::create_directories(dir);
  for (const auto& p : res.pool) write_program(dir / (p.name + ".json"), p.program);
  write_text_file(dir / "curation.csv", res.report.to_csv());
  std::cerr << "curated " << res.pool.size() << " instances from "
            << res.report.candidates.size() << " candidates\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& pool_dir, TrainConfig cfg,
              const std::string& curve_path) {
  const auto pool = load_instances(pool_dir);
  if (pool.empty()) {
    std::cerr << "train: no instances in " << pool_dir << "\n";
    return 2;
  }
  cfg.budget = Budget{c.node_budget};  // wall-clock budgets would break determinism
  cfg.seed = c.seed;
  const auto res = train(pool, c.policy_config(), cfg, nullptr, [](const CurveRow& r) {
    std::cerr << "iter " << r.iteration << " reward " << r.mean_reward << "\n";
  });
  nlohmann::json meta{{"seed", c.seed},
                      {"iterations", cfg.iterations},
                      {"node_budget", c.node_budget},
                      {"best_iteration", res.best_iteration},
                      {"lr", cfg.optimizer.lr},
                      {"epochs", cfg.epochs},
                      {"pool_size", pool.size()}};
  save_model(c.out.empty() ? "model.json" : c.out, res.best, res.stats, meta);
  write_text_file(curve_path, curve_to_csv(res.curve));
  return 0;
}

int cmd_solve(const Common& c, const std::string& instance, bool trace) {
  const LinearProgram lp = read_program(instance);
  SolveResult r;
  if (c.selector == "policy") {
    const Model m = model_or_init(c);
    PolicySelector learned(m.policy, m.stats, c.seed);
    ScheduledSelector sel(learned, ScheduleConfig{});
    r = solve(lp, sel, c.budget());
  } else {
    auto sel = make_classical_selector(c.selector);
    r = solve(lp, *sel, c.budget());
  }
  emit(c.out, solve_result_to_json(r, trace).dump(2) + "\n");
  return 0;
}

int cmd_bench(const Common& c, const std::string& dir, const std::string& summary_path,
              bool greedy) {
  const auto insts = load_instances(dir);
  BenchConfig cfg;
  cfg.budget = c.budget();
  cfg.seed = c.seed;
  cfg.greedy = greedy;
  std::vector<BenchRow> rows;
  if (c.selector == "policy") {
    const Model m = model_or_init(c);
    rows = run_bench(insts, m.policy, m.stats, cfg);
  } else {
    auto sel = make_classical_selector(c.selector);
    rows = run_bench(insts, *sel, cfg);
  }
  emit(c.out, rows_to_csv(rows));
  for (const auto& r : rows)
    if (r.skipped) std::cerr << "skipped " << r.instance << ": " << r.error << "\n";
  const BenchSummary s = aggregate(rows);
  const std::string js = summary_to_json(s).dump(2) + "\n";
  if (summary_path.empty())
    std::cerr << js;
  else
    write_text_file(summary_path, js);
  return 0;
}

int cmd_grad_check(const Common& c) {
  std::mt19937_64 rng(c.seed);
  PolicyConfig pc = c.policy_config();
  pc.head_init_scale = 0.5;
  TreePolicy policy = TreePolicy::init(pc, c.seed);
  policy.params()["gnn.alpha"](0, 0) = 0.5;
  PolicyStep step;
  step.shape.add_node(kNoNode);
  step.shape.add_node(0);
  step.shape.add_node(0);
  step.candidates = {1, 2};
  step.action = 0;
  step.log_prob = std::log(0.4);
  std::normal_distribution<double> g;
  step.features.resize(3, kNumFeatures);
  for (Eigen::Index k = 0; k < step.features.size(); ++k) step.features(k) = g(rng);
  TrainConfig tc;
  const auto rep = nn::grad_check(policy.params(), [&](nn::Tape& t) {
    return ppo_loss(t, policy, step, 0.7, 0.3, tc).total;
  });
  for (const auto& e : rep.entries)
    std::cout << e.name << " rel_error " << e.rel_error << "\n";
  std::cout << "worst " << rep.worst_name << " " << rep.worst_error
            << (rep.passed ? " PASS" : " FAIL") << "\n";
  return rep.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"treesel: learned node selection for branch and bound"};
  app.require_subcommand(1);

  auto* gen_tsp_cmd = app.add_subcommand("gen-tsp", "write MTZ-encoded random TSP instances");
  int cities = 8, count = 1, mutations = 0;
  double sigma = 0.2;
  Common gen_tsp_c;
  add_common(gen_tsp_cmd, gen_tsp_c, "output directory");
  gen_tsp_cmd->add_option("--cities", cities, "city count")->check(CLI::Range(4, 1000));
  gen_tsp_cmd->add_option("--count", count, "base instances")->check(CLI::PositiveNumber);
  gen_tsp_cmd->add_option("--mutations", mutations, "mutated copies per base instance")
      ->check(CLI::NonNegativeNumber);
  gen_tsp_cmd->add_option("--sigma", sigma, "mutation strength")->check(CLI::PositiveNumber);

  auto* gen_uflp_cmd = app.add_subcommand("gen-uflp", "write facility location instances");
  int facilities = 100, clients = 100, uflp_count = 1;
  Common gen_uflp_c;
  add_common(gen_uflp_cmd, gen_uflp_c, "output directory");
  gen_uflp_cmd->add_option("--facilities", facilities)->check(CLI::PositiveNumber);
  gen_uflp_cmd->add_option("--clients", clients)->check(CLI::PositiveNumber);
  gen_uflp_cmd->add_option("--count", uflp_count)->check(CLI::PositiveNumber);

  auto* curate_cmd = app.add_subcommand("curate", "build a training pool from TSP batches");
  CurationConfig cur_cfg;
  TspStreamConfig stream;
  Common curate_c;
  add_common(curate_cmd, curate_c, "pool directory");
  curate_cmd->add_option("--min-nodes", cur_cfg.min_nodes)->capture_default_str();
  curate_cmd->add_option("--target", cur_cfg.target_count)->capture_default_str();
  curate_cmd->add_option("--max-gap", cur_cfg.max_gap)->capture_default_str();
  curate_cmd->add_option("--min-cities", stream.min_cities)->capture_default_str();
  curate_cmd->add_option("--max-cities", stream.max_cities)->capture_default_str();
  curate_cmd->add_option("--batch-size", stream.batch_size)->capture_default_str();
  curate_cmd->add_option("--sigma", stream.sigma)->capture_default_str();
  curate_cmd->add_option("--max-batches", stream.max_batches)->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "train a policy with PPO");
  TrainConfig train_cfg;
  std::string pool_dir, curve_path = "curve.csv";
  Common train_c;
  add_common(train_cmd, train_c, "model file");
  train_cmd->add_option("--pool", pool_dir, "directory of instances")->required();
  train_cmd->add_option("--iterations", train_cfg.iterations)->capture_default_str();
  train_cmd->add_option("--epochs", train_cfg.epochs)->capture_default_str();
  train_cmd->add_option("--minibatch", train_cfg.minibatch_size)->capture_default_str();
  train_cmd->add_option("--steps-per-epoch", train_cfg.max_steps_per_epoch,
                        "0 uses every step")
      ->capture_default_str();
  train_cmd->add_option("--rollouts", train_cfg.rollouts_per_iteration, "0 uses the whole pool")
      ->capture_default_str();
  train_cmd->add_option("--lr", train_cfg.optimizer.lr)->capture_default_str();
  train_cmd->add_option("--curve", curve_path, "learning curve CSV")->capture_default_str();

  auto* solve_cmd = app.add_subcommand("solve", "solve one instance");
  std::string instance;
  bool trace = false;
  Common solve_c;
  add_common(solve_cmd, solve_c, "result JSON (stdout when empty)");
  solve_cmd->add_option("instance", instance, "instance JSON")->required();
  solve_cmd->add_flag("--trace", trace, "include the selection trace");

  auto* bench_cmd = app.add_subcommand("bench", "compare a selector with hybrid plunging");
  std::string bench_dir, summary_path;
  bool greedy = false;
  Common bench_c;
  add_common(bench_cmd, bench_c, "rows CSV (stdout when empty)");
  bench_cmd->add_option("instances", bench_dir, "instance directory or file")->required();
  bench_cmd->add_option("--summary", summary_path, "summary JSON (stderr when empty)");
  bench_cmd->add_flag("--greedy", greedy, "take the most likely node instead of sampling");

  auto* grad_cmd = app.add_subcommand("grad-check", "finite-difference check of the PPO loss");
  Common grad_c;
  grad_c.d_model = 16;
  grad_c.k_steps = 2;
  add_common(grad_cmd, grad_c, "unused");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_tsp_cmd) return cmd_gen_tsp(gen_tsp_c, cities, count, mutations, sigma);
    if (*gen_uflp_cmd) return cmd_gen_uflp(gen_uflp_c, facilities, clients, uflp_count);
    if (*curate_cmd) return cmd_curate(curate_c, cur_cfg, stream);
    if (*train_cmd) return cmd_train(train_c, pool_dir, train_cfg, curve_path);
    if (*solve_cmd) return cmd_solve(solve_c, instance, trace);
    if (*bench_cmd) return cmd_bench(bench_c, bench_dir, summary_path, greedy);
    if (*grad_cmd) return cmd_grad_check(grad_c);
  } catch (const EmptyAfterFilter& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const CorruptModel& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const VersionMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
