/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "treesel/instances.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "treesel/errors.hpp"
#include "treesel/selectors.hpp"

namespace treesel {

TspInstance gen_tsp(int n, std::mt19937_64& rng) {
  if (n < 4) throw std::invalid_argument("gen_tsp needs at least 4 cities");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::array<double, 2>> pts;
  while (static_cast<int>(pts.size()) < n) {
    const std::array<double, 2> p{u(rng), u(rng)};
    bool clash = false;
    for (const auto& q : pts)
      if (std::hypot(p[0] - q[0], p[1] - q[1]) < 1e-9) clash = true;
    if (!clash) pts.push_back(p);
  }
  TspInstance inst;
  inst.n = n;
  inst.dist.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) inst.at(i, j) = std::hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]);
  return inst;
}

TspInstance mutate(const TspInstance& inst, double sigma, std::mt19937_64& rng) {
  if (!(sigma > 0)) throw std::invalid_argument("mutation strength must be positive");
  std::normal_distribution<double> g(0.0, 1.0);
  TspInstance scaled = inst;
  for (int i = 0; i < inst.n; ++i)
    for (int j = 0; j < inst.n; ++j)
      if (i != j) scaled.at(i, j) = inst.at(i, j) * std::exp(sigma * g(rng));
  TspInstance out = scaled;
  for (int i = 0; i < inst.n; ++i)
    for (int j = 0; j < inst.n; ++j)
      out.at(i, j) = i == j ? 0.0 : 0.5 * (scaled.at(i, j) + scaled.at(j, i));
  return out;
}

int mtz_x_index(int n, int i, int j) { return i * (n - 1) + (j < i ? j : j - 1); }

int mtz_u_index(int n, int city) { return n * (n - 1) + city - 1; }

LinearProgram encode_mtz(const TspInstance& inst) {
  const int n = inst.n;
  if (n < 3) throw std::invalid_argument("encode_mtz needs at least 3 cities");
  auto lp = LinearProgram::with_vars(n * (n - 1) + n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const int x = mtz_x_index(n, i, j);
      lp.objective[x] = inst.at(i, j);
      lp.upper[x] = 1.0;
      lp.is_integer[x] = true;
    }
  for (int c = 1; c < n; ++c) {
    const int u = mtz_u_index(n, c);
    lp.lower[u] = 2.0;
    lp.upper[u] = n;
    lp.is_integer[u] = true;
  }
  for (int i = 0; i < n; ++i) {
    std::vector<SparseEntry> out;
    for (int j = 0; j < n; ++j)
      if (j != i) out.push_back({mtz_x_index(n, i, j), 1.0});
    lp.add_row(std::move(out), Relation::kEq, 1.0);
  }
  for (int j = 0; j < n; ++j) {
    std::vector<SparseEntry> in;
    for (int i = 0; i < n; ++i)
      if (i != j) in.push_back({mtz_x_index(n, i, j), 1.0});
    lp.add_row(std::move(in), Relation::kEq, 1.0);
  }
  for (int i = 1; i < n; ++i)
    for (int j = 1; j < n; ++j) {
      if (i == j) continue;
      lp.add_row({{mtz_u_index(n, i), 1.0},
                  {mtz_u_index(n, j), -1.0},
                  {mtz_x_index(n, i, j), static_cast<double>(n - 1)}},
                 Relation::kLe, n - 2.0);
    }
  return lp;
}

std::optional<std::vector<int>> decode_tour(int n, std::span<const double> solution) {
  if (static_cast<int>(solution.size()) < n * (n - 1)) return std::nullopt;
  std::vector<int> next(n, -1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || solution[mtz_x_index(n, i, j)] < 0.5) continue;
      if (next[i] != -1) return std::nullopt;
      next[i] = j;
    }
  std::vector<int> tour{0};
  std::vector<bool> seen(n, false);
  seen[0] = true;
  for (int c = next[0]; c != 0; c = next[c]) {
    if (c < 0 || seen[c]) return std::nullopt;
    seen[c] = true;
    tour.push_back(c);
  }
  if (static_cast<int>(tour.size()) != n) return std::nullopt;
  return tour;
}

double tour_length(const TspInstance& inst, std::span<const int> tour) {
  double len = 0.0;
  for (std::size_t k = 0; k < tour.size(); ++k)
    len += inst.at(tour[k], tour[(k + 1) % tour.size()]);
  return len;
}

LinearProgram gen_uflp_kochetov(int n, int m, std::mt19937_64& rng) {
  if (n < 1 || m < 1) throw std::invalid_argument("UFLP needs a facility and a client");
  auto lp = LinearProgram::with_vars(n * m + n);
  for (int v = 0; v < lp.num_vars; ++v) {
    lp.upper[v] = 1.0;
    lp.is_integer[v] = true;
  }
  std::uniform_int_distribution<int> cheap(0, 4);
  std::vector<int> facilities(n);
  for (int j = 0; j < m; ++j) {
    std::iota(facilities.begin(), facilities.end(), 0);
    const int degree = std::min(kUflpCheapDegree, n);
    // Partial Fisher-Yates: the first `degree` entries are a uniform sample.
    for (int k = 0; k < degree; ++k) {
      std::uniform_int_distribution<int> pick(k, n - 1);
      std::swap(facilities[k], facilities[pick(rng)]);
    }
    for (int i = 0; i < n; ++i) lp.objective[i * m + j] = kUflpExpensive;
    for (int k = 0; k < degree; ++k) lp.objective[facilities[k] * m + j] = cheap(rng);
  }
  for (int i = 0; i < n; ++i) lp.objective[n * m + i] = kUflpOpenCost;
  for (int j = 0; j < m; ++j) {
    std::vector<SparseEntry> assign;
    for (int i = 0; i < n; ++i) assign.push_back({i * m + j, 1.0});
    lp.add_row(std::move(assign), Relation::kEq, 1.0);
  }
  for (int i = 0; i < n; ++i) {
    std::vector<SparseEntry> link;
    for (int j = 0; j < m; ++j) link.push_back({i * m + j, 1.0});
    link.push_back({n * m + i, -static_cast<double>(m)});
    lp.add_row(std::move(link), Relation::kLe, 0.0);
  }
  return lp;
}

nlohmann::json tsp_to_json(const TspInstance& inst) {
  return {{"n", inst.n}, {"dist", inst.dist}};
}

TspInstance tsp_from_json(const nlohmann::json& j) {
  try {
    TspInstance inst;
    inst.n = j.at("n").get<int>();
    inst.dist = j.at("dist").get<std::vector<double>>();
    if (inst.n < 1 || inst.dist.size() != static_cast<std::size_t>(inst.n) * inst.n)
      throw ParseError("TSP distance matrix has the wrong size");
    for (int i = 0; i < inst.n; ++i)
      for (int k = 0; k < inst.n; ++k)
        if (std::abs(inst.at(i, k) - inst.at(k, i)) > 1e-12 || inst.at(i, k) < 0)
          throw ParseError("TSP distance matrix must be symmetric and nonnegative");
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad TSP instance: ") + e.what());
  }
}

std::string CurationReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "batch,candidate,gap,nodes,accepted,reason,selected\n";
  for (const auto& c : candidates)
    os << c.batch << ',' << c.name << ',' << c.gap << ',' << c.nodes << ','
       << (c.accepted ? 1 : 0) << ',' << c.reason << ',' << (c.selected ? 1 : 0) << '\n';
  return os.str();
}

std::string rejection_reason(double gap, int nodes, const CurationConfig& cfg) {
  if (gap == 0.0) return "zero_gap";
  if (!(gap <= cfg.max_gap)) return "gap_above_limit";
  if (nodes < cfg.min_nodes) return "too_few_nodes";
  return {};
}

int median_survivor(std::span<const CurationCandidate> rows) {
  std::vector<int> survivors;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].accepted) survivors.push_back(static_cast<int>(i));
  if (survivors.empty()) return -1;
  std::stable_sort(survivors.begin(), survivors.end(),
                   [&](int a, int b) { return rows[a].gap < rows[b].gap; });
  return survivors[(survivors.size() - 1) / 2];
}

namespace {

// Evaluates one batch; returns the index (into report.candidates) of the
// median survivor, or -1.
int evaluate_batch(const std::vector<NamedProgram>& batch, int batch_index,
                   const CurationConfig& cfg, CurationReport& report) {
  const std::size_t first = report.candidates.size();
  for (const auto& cand : batch) {
    HybridPlungeSelector sel;
    CurationCandidate row;
    row.batch = batch_index;
    row.name = cand.name;
    try {
      const auto res = solve(cand.program, sel, cfg.budget);
      row.gap = res.final_gap;
      row.nodes = res.nodes_processed;
      row.reason = rejection_reason(row.gap, row.nodes, cfg);
    } catch (const Error& e) {
      row.gap = kInf;
      row.reason = "solver_error";
    }
    row.accepted = row.reason.empty();
    report.candidates.push_back(std::move(row));
  }
  const int pick = median_survivor(std::span(report.candidates).subspan(first));
  return pick < 0 ? -1 : static_cast<int>(first) + pick;
}

}  // namespace

CurationResult curate(std::span<const std::vector<NamedProgram>> batches,
                      const CurationConfig& cfg) {
  if (batches.empty()) throw PoolExhausted("no candidate batches");
  CurationResult out;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    if (static_cast<int>(out.pool.size()) >= cfg.target_count) break;
    const std::size_t first = out.report.candidates.size();
    const int pick = evaluate_batch(batches[b], static_cast<int>(b), cfg, out.report);
    if (pick < 0) continue;
    out.report.candidates[pick].selected = true;
    out.report.selected.push_back(out.report.candidates[pick].name);
    out.pool.push_back(batches[b][pick - first]);
  }
  if (static_cast<int>(out.pool.size()) < cfg.target_count)
    throw PoolExhausted("only " + std::to_string(out.pool.size()) + " of " +
                        std::to_string(cfg.target_count) + " instances survived curation");
  return out;
}

namespace {

std::vector<NamedProgram> make_tsp_batch(const TspStreamConfig& s, std::mt19937_64& rng,
                                         int index) {
  std::uniform_int_distribution<int> cities(s.min_cities, s.max_cities);
  const TspInstance base = gen_tsp(cities(rng), rng);
  std::vector<NamedProgram> batch;
  const std::string stem = "tsp" + std::to_string(index);
  batch.push_back({stem + "_m0", encode_mtz(base)});
  for (int k = 1; k < s.batch_size; ++k)
    batch.push_back({stem + "_m" + std::to_string(k), encode_mtz(mutate(base, s.sigma, rng))});
  return batch;
}

}  // namespace

std::vector<std::vector<NamedProgram>> tsp_batches(const TspStreamConfig& stream,
                                                   std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<NamedProgram>> out;
  for (int b = 0; b < count; ++b) out.push_back(make_tsp_batch(stream, rng, b));
  return out;
}

CurationResult curate_tsp(const TspStreamConfig& stream, const CurationConfig& cfg,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CurationResult out;
  for (int b = 0; b < stream.max_batches; ++b) {
    if (static_cast<int>(out.pool.size()) >= cfg.target_count) return out;
    const auto batch = make_tsp_batch(stream, rng, b);
    const std::size_t first = out.report.candidates.size();
    const int pick = evaluate_batch(batch, b, cfg, out.report);
    if (pick < 0) continue;
    out.report.candidates[pick].selected = true;
    out.report.selected.push_back(out.report.candidates[pick].name);
    out.pool.push_back(batch[pick - first]);
  }
  if (static_cast<int>(out.pool.size()) < cfg.target_count)
    throw PoolExhausted("only " + std::to_string(out.pool.size()) + " of " +
                        std::to_string(cfg.target_count) +
                        " instances survived curation");
  return out;
}

}  // namespace treesel
