/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "treesel/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>

#include "treesel/errors.hpp"

namespace treesel {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  // splitmix64 over the combined words
  std::uint64_t z = a ^ (b * 0x9E3779B97F4A7C15ULL) ^ (c * 0xC2B2AE3D27D4EB4FULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

bool all_finite(const nn::Gradients& g) {
  for (const auto& m : g)
    if (!m.allFinite()) return false;
  return true;
}

}  // namespace

double compute_reward(double gap_selector, double gap_baseline) {
  if (gap_selector == 0.0 && gap_baseline == 0.0) return 1.0;
  if (std::isinf(gap_selector) && std::isinf(gap_baseline)) return 0.0;
  const double ratio = gap_baseline == 0.0 ? kInf : gap_selector / gap_baseline;
  return std::clamp(1.0 - ratio, -1.0, 1.0);
}

BaselineCache::Entry BaselineCache::get(const NamedProgram& inst, const Budget& budget) {
  const auto key = std::make_pair(inst.name, budget.max_nodes);
  {
    std::shared_lock lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  HybridPlungeSelector sel;
  const auto res = solve(inst.program, sel, budget);
  std::unique_lock lock(mu_);
  // A concurrent writer may have won; keep its value so readers agree.
  const auto [it, inserted] = cache_.emplace(key, Entry{res.final_gap, res.nodes_processed});
  return it->second;
}

std::size_t BaselineCache::size() const {
  std::shared_lock lock(mu_);
  return cache_.size();
}

Trajectory rollout(const NamedProgram& inst, const TreePolicy& policy,
                   const FeatureStats& stats, const TrainConfig& cfg, double baseline_gap,
                   std::uint64_t seed) {
  Trajectory traj;
  traj.instance = inst.name;
  traj.baseline_gap = baseline_gap;
  PolicySelector learned(policy, stats, seed);
  learned.set_recorder([&traj](PolicyStep&& s) { traj.steps.push_back(std::move(s)); });
  ScheduledSelector sel(learned, cfg.schedule);
  const auto res = solve(inst.program, sel, cfg.budget);
  traj.gap = res.final_gap;
  traj.nodes = res.nodes_processed;
  traj.reward = compute_reward(traj.gap, baseline_gap);
  return traj;
}

Advantages gae_advantages(const Trajectory& traj, double gamma, double lambda) {
  const std::size_t n = traj.steps.size();
  Advantages out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double acc = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const bool last = t + 1 == n;
    const double next_value = last ? 0.0 : traj.steps[t + 1].value;
    const double reward = last ? traj.reward : 0.0;
    const double delta = reward + gamma * next_value - traj.steps[t].value;
    acc = delta + gamma * lambda * acc;
    out.advantages[t] = acc;
    out.returns[t] = acc + traj.steps[t].value;
  }
  return out;
}

void normalize(std::vector<double>& v) {
  if (v.empty()) return;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / v.size());
  for (double& x : v) x = sd > 1e-12 ? (x - mean) / sd : 0.0;
}

PpoLoss ppo_loss(nn::Tape& tape, const TreePolicy& policy, const PolicyStep& step,
                 double advantage, double ret, const TrainConfig& cfg) {
  const auto g = policy.forward(tape, step.features, step.shape, step.candidates);
  PpoLoss out;
  const nn::Var lp = tape.entry(g.log_probs, step.action);
  const nn::Var ratio = tape.exp(tape.add_scalar(lp, -step.log_prob));
  out.ratio = tape.scalar(ratio);
  const nn::Var surr = tape.scale(ratio, advantage);
  const nn::Var clipped = tape.scale(tape.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), advantage);
  out.policy = tape.scale(tape.min(surr, clipped), -1.0);
  out.value = tape.square(tape.add_scalar(g.value, -ret));
  const nn::Var plogp = tape.mul(tape.exp(g.log_probs), g.log_probs);
  out.entropy = tape.scale(tape.sum(plogp), -1.0);
  out.total = tape.add(out.policy, tape.scale(out.value, cfg.value_loss_weight));
  out.total = tape.sub(out.total, tape.scale(out.entropy, cfg.entropy_bonus));
  return out;
}

UpdateReport ppo_update(std::span<const Trajectory> batch, TreePolicy& policy, nn::AdamW& opt,
                        const TrainConfig& cfg, std::uint64_t seed) {
  struct Sample {
    const PolicyStep* step;
    double advantage;
    double ret;
  };
  std::vector<Sample> samples;
  std::vector<double> adv;
  for (const auto& traj : batch) {
    const auto a = gae_advantages(traj, cfg.gamma, cfg.gae_lambda);
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      samples.push_back({&traj.steps[t], 0.0, a.returns[t]});
      adv.push_back(a.advantages[t]);
    }
  }
  if (samples.empty()) throw std::invalid_argument("ppo_update: empty batch");
  normalize(adv);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].advantage = adv[i];

  const nn::ParameterSet saved = policy.params();
  const nn::AdamW saved_opt = opt;
  auto fail = [&](const std::string& what) {
    policy.params() = saved;
    opt = saved_opt;
    throw NonFiniteLoss(what);
  };

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t per_epoch =
      cfg.max_steps_per_epoch > 0
          ? std::min(samples.size(), static_cast<std::size_t>(cfg.max_steps_per_epoch))
          : samples.size();
  const std::size_t mb = std::max(1, cfg.minibatch_size);

  UpdateReport rep;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < per_epoch; start += mb) {
      const std::size_t end = std::min(per_epoch, start + mb);
      const double w = 1.0 / static_cast<double>(end - start);
      nn::Gradients grads = nn::zero_gradients(policy.params());
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = samples[order[k]];
        nn::Tape tape(&policy.params());
        const auto loss = ppo_loss(tape, policy, *s.step, s.advantage, s.ret, cfg);
        const double total = tape.scalar(loss.total);
        if (!std::isfinite(total)) fail("non-finite PPO loss");
        tape.backward(tape.scale(loss.total, w), grads);
        rep.policy_loss += tape.scalar(loss.policy);
        rep.value_loss += tape.scalar(loss.value);
        rep.entropy += tape.scalar(loss.entropy);
        rep.clip_fraction += std::abs(loss.ratio - 1.0) > cfg.clip ? 1.0 : 0.0;
        ++rep.samples;
      }
      if (!all_finite(grads)) fail("non-finite gradient");
      const double norm = nn::global_norm(grads);
      if (cfg.max_grad_norm > 0 && norm > cfg.max_grad_norm)
        nn::scale_gradients(grads, cfg.max_grad_norm / norm);
      opt.step(policy.params(), grads);
    }
  }
  if (rep.samples > 0) {
    rep.policy_loss /= rep.samples;
    rep.value_loss /= rep.samples;
    rep.entropy /= rep.samples;
    rep.clip_fraction /= rep.samples;
  }
  return rep;
}

FeatureStats fit_feature_stats(std::span<const NamedProgram> pool, const Budget& budget) {
  FeatureStatsAccumulator acc;
  for (const auto& inst : pool) {
    BestFirstSelector sel;
    solve(inst.program, sel, budget, [&acc](const BnbTree& tree) { acc.add_tree(tree); });
  }
  return acc.finish();
}

std::string curve_to_csv(std::span<const CurveRow> curve) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,mean_reward,policy_loss,value_loss,entropy,clip_fraction\n";
  for (const auto& r : curve)
    os << r.iteration << ',' << r.mean_reward << ',' << r.policy_loss << ',' << r.value_loss
       << ',' << r.entropy << ',' << r.clip_fraction << '\n';
  return os.str();
}

TrainResult train(std::span<const NamedProgram> pool, const PolicyConfig& policy_cfg,
                  const TrainConfig& cfg, const FeatureStats* stats,
                  const std::function<void(const CurveRow&)>& progress) {
  if (pool.empty()) throw std::invalid_argument("train: empty pool");
  if (!(cfg.gamma > 0 && cfg.gamma <= 1)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (!(cfg.clip > 0)) throw std::invalid_argument("clip must be positive");

  const FeatureStats st = stats ? *stats : fit_feature_stats(pool, cfg.budget);
  TreePolicy policy = TreePolicy::init(policy_cfg, cfg.seed);
  TrainResult out{policy, policy, st, {}, -1, 0};
  nn::AdamW opt(cfg.optimizer);
  BaselineCache baselines;
  std::mt19937_64 pick_rng(mix_seed(cfg.seed, 0x5eed, 0));

  std::vector<std::size_t> all(pool.size());
  std::iota(all.begin(), all.end(), 0);
  double best_reward = -kInf;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<std::size_t> chosen = all;
    const auto want = static_cast<std::size_t>(cfg.rollouts_per_iteration);
    if (want > 0 && want < all.size()) {
      std::shuffle(chosen.begin(), chosen.end(), pick_rng);
      chosen.resize(want);
      std::sort(chosen.begin(), chosen.end());
    }

    std::vector<Trajectory> batch;
    for (std::size_t idx : chosen) {
      try {
        const double base = baselines.get(pool[idx], cfg.budget).gap;
        batch.push_back(rollout(pool[idx], policy, st, cfg, base, mix_seed(cfg.seed, it + 1, idx)));
      } catch (const Error&) {
        ++out.dropped_episodes;
      }
    }

    CurveRow row;
    row.iteration = it;
    for (const auto& t : batch) row.mean_reward += t.reward;
    row.mean_reward = batch.empty() ? 0.0 : row.mean_reward / batch.size();
    if (!batch.empty() && row.mean_reward > best_reward) {
      best_reward = row.mean_reward;
      out.best = policy;
      out.best_iteration = it;
    }

    std::size_t steps = 0;
    for (const auto& t : batch) steps += t.steps.size();
    if (steps > 0) {
      try {
        const auto rep = ppo_update(batch, policy, opt, cfg, mix_seed(cfg.seed, it + 1, 0xabc));
        row.policy_loss = rep.policy_loss;
        row.value_loss = rep.value_loss;
        row.entropy = rep.entropy;
        row.clip_fraction = rep.clip_fraction;
      } catch (const NonFiniteLoss&) {
        row.policy_loss = row.value_loss = row.entropy = row.clip_fraction = std::nan("");
      }
    }
    out.curve.push_back(row);
    if (progress) progress(row);
  }
  out.policy = std::move(policy);
  return out;
}

}  // namespace treesel
