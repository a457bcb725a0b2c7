#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "treesel/errors.hpp"
#include "treesel/lp.hpp"
#include "treesel/lp_io.hpp"

using namespace treesel;

namespace {

LinearProgram two_var_example() {
  // min -2x - 3y  s.t.  x + y <= 4,  x <= 2,  x, y >= 0
  auto lp = LinearProgram::with_vars(2);
  lp.objective = {-2.0, -3.0};
  lp.add_row({{0, 1.0}, {1, 1.0}}, Relation::kLe, 4.0);
  lp.add_row({{0, 1.0}}, Relation::kLe, 2.0);
  return lp;
}

LinearProgram random_bounded_lp(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nv(1, 4), nr(0, 4), rel(0, 2);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  const int n = nv(rng);
  auto lp = LinearProgram::with_vars(n);
  for (int j = 0; j < n; ++j) {
    lp.objective[j] = u(rng);
    const double a = u(rng), b = u(rng);
    lp.lower[j] = std::min(a, b);
    lp.upper[j] = std::max(a, b) + 0.5;
  }
  const int m = nr(rng);
  for (int i = 0; i < m; ++i) {
    std::vector<SparseEntry> coeffs;
    for (int j = 0; j < n; ++j) coeffs.push_back({j, u(rng)});
    const auto r = static_cast<Relation>(rel(rng));
    lp.add_row(std::move(coeffs), r, u(rng));
  }
  return lp;
}

}  // namespace

TEST_CASE("two-variable example reaches vertex (0, 4)") {
  const auto lp = two_var_example();
  const auto oracle_result = oracle::vertex_enumeration(lp);
  REQUIRE(oracle_result.feasible);
  CHECK(oracle_result.objective == doctest::Approx(-12.0));

  const auto out = solve_lp(lp);
  REQUIRE(out.status == LpStatus::kOptimal);
  CHECK(out.solution[0] == doctest::Approx(0.0));
  CHECK(out.solution[1] == doctest::Approx(4.0));
  CHECK(out.objective_value == doctest::Approx(oracle_result.objective));
}

TEST_CASE("contradicting rows are infeasible") {
  auto lp = LinearProgram::with_vars(1);
  lp.lower[0] = -kInf;
  lp.add_row({{0, 1.0}}, Relation::kGe, 1.0);
  lp.add_row({{0, 1.0}}, Relation::kLe, 0.0);
  const auto out = solve_lp(lp);
  CHECK(out.status == LpStatus::kInfeasible);
  CHECK(out.solution.empty());
  CHECK(std::isnan(out.objective_value));
}

TEST_CASE("unbounded ray is reported") {
  auto lp = LinearProgram::with_vars(1);
  lp.objective = {-1.0};
  CHECK(solve_lp(lp).status == LpStatus::kUnbounded);

  lp.add_row({{0, 1.0}}, Relation::kGe, 3.0);
  CHECK(solve_lp(lp).status == LpStatus::kUnbounded);
}

TEST_CASE("zero-row programs sit at the cost-minimizing bound") {
  auto lp = LinearProgram::with_vars(3);
  lp.objective = {1.0, -2.0, 0.0};
  lp.lower = {-1.0, 0.0, -kInf};
  lp.upper = {4.0, 3.0, kInf};
  auto out = solve_lp(lp);
  REQUIRE(out.status == LpStatus::kOptimal);
  CHECK(out.solution[0] == -1.0);
  CHECK(out.solution[1] == 3.0);
  CHECK(out.objective_value == doctest::Approx(-7.0));

  lp.objective[2] = 0.5;  // free variable with a nonzero cost
  CHECK(solve_lp(lp).status == LpStatus::kUnbounded);
}

TEST_CASE("with_bound tightens one side and leaves the input untouched") {
  auto lp = LinearProgram::with_vars(1);
  lp.upper[0] = 10.0;

  auto up = with_bound(lp, 0, BoundSide::kUpper, 3.0);
  CHECK(up.lower[0] == 0.0);
  CHECK(up.upper[0] == 3.0);
  auto lo = with_bound(lp, 0, BoundSide::kLower, 4.0);
  CHECK(lo.lower[0] == 4.0);
  CHECK(lo.upper[0] == 10.0);
  CHECK(lp.upper[0] == 10.0);
  // Loosening is a no-op.
  CHECK(with_bound(up, 0, BoundSide::kUpper, 7.0).upper[0] == 3.0);

  auto box = LinearProgram::with_vars(1);
  box.upper[0] = 2.0;
  auto crossed = with_bound(box, 0, BoundSide::kLower, 5.0);
  CHECK(crossed.lower[0] == 5.0);
  CHECK(crossed.upper[0] == 2.0);
  CHECK(solve_lp(crossed).status == LpStatus::kInfeasible);

  CHECK_THROWS_AS(with_bound(lp, 1, BoundSide::kUpper, 0.0), InvalidProgram);
}

TEST_CASE("validate rejects malformed programs") {
  auto lp = LinearProgram::with_vars(2);
  lp.add_row({{2, 1.0}}, Relation::kLe, 1.0);
  CHECK_THROWS_AS(lp.validate(), InvalidProgram);

  auto bad_bounds = LinearProgram::with_vars(1);
  bad_bounds.lower[0] = 3.0;
  bad_bounds.upper[0] = 1.0;
  CHECK_THROWS_AS(bad_bounds.validate(), InvalidProgram);

  auto bad_len = LinearProgram::with_vars(2);
  bad_len.objective.pop_back();
  CHECK_THROWS_AS(bad_len.validate(), InvalidProgram);
}

TEST_CASE("random bounded programs agree with vertex enumeration") {
  std::mt19937_64 rng(7);
  int optimal = 0, infeasible = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const auto lp = random_bounded_lp(rng);
    const auto expected = oracle::vertex_enumeration(lp);
    const auto out = solve_lp(lp);
    CAPTURE(trial);
    if (!expected.feasible) {
      CHECK(out.status == LpStatus::kInfeasible);
      ++infeasible;
      continue;
    }
    ++optimal;
    REQUIRE(out.status == LpStatus::kOptimal);
    CHECK(oracle::feasible(lp, out.solution, kFeasibilityTol));
    const double recomputed = oracle::objective(lp, out.solution);
    CHECK(std::abs(recomputed - out.objective_value) <=
          1e-8 * std::max(1.0, std::abs(recomputed)));
    // Any feasible point bounds the optimum from above.
    CHECK(out.objective_value <= expected.objective + 1e-8);
    CHECK(std::abs(out.objective_value - expected.objective) <=
          1e-7 * std::max(1.0, std::abs(expected.objective)));
  }
  CHECK(optimal > 50);
  CHECK(infeasible > 5);
}

TEST_CASE("identical inputs give bit-identical outcomes") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto lp = random_bounded_lp(rng);
    const auto a = solve_lp(lp);
    const auto b = solve_lp(lp);
    CHECK(a.status == b.status);
    CHECK(a.solution == b.solution);
    CHECK(a.iterations == b.iterations);
  }
}

TEST_CASE("warm start after a bound change matches a cold solve") {
  std::mt19937_64 rng(3);
  int warm_used = 0;
  for (int trial = 0; trial < 60; ++trial) {
    auto lp = oracle::random_binary_program(rng, 8, 5);
    const auto root = solve_lp(lp);
    if (root.status != LpStatus::kOptimal) continue;
    for (int j = 0; j < lp.num_vars; ++j) {
      const double v = root.solution[j];
      if (std::abs(v - std::round(v)) < 1e-6) continue;
      for (auto side : {BoundSide::kUpper, BoundSide::kLower}) {
        const auto child = with_bound(lp, j, side,
                                      side == BoundSide::kUpper ? std::floor(v)
                                                                : std::ceil(v));
        const auto cold = solve_lp(child);
        const auto warm = solve_lp(child, &*root.basis);
        ++warm_used;
        REQUIRE(cold.status == warm.status);
        if (cold.status == LpStatus::kOptimal) {
          CHECK(warm.objective_value == doctest::Approx(cold.objective_value).epsilon(1e-9));
          CHECK(oracle::feasible(child, warm.solution, kFeasibilityTol));
        }
        // A basis without the cached tableau takes the refactorization path.
        const Basis states_only(std::vector<VarState>(root.basis->states().begin(),
                                                      root.basis->states().end()));
        const auto refactored = solve_lp(child, &states_only);
        REQUIRE(refactored.status == cold.status);
        if (cold.status == LpStatus::kOptimal)
          CHECK(refactored.objective_value ==
                doctest::Approx(cold.objective_value).epsilon(1e-9));
      }
      break;
    }
  }
  CHECK(warm_used > 20);
}

TEST_CASE("equality rows and free variables") {
  // min x + y  s.t. x - y = 1, x + y >= 3, x, y free  ->  (2, 1), 3
  auto lp = LinearProgram::with_vars(2);
  lp.objective = {1.0, 1.0};
  lp.lower = {-kInf, -kInf};
  lp.add_row({{0, 1.0}, {1, -1.0}}, Relation::kEq, 1.0);
  lp.add_row({{0, 1.0}, {1, 1.0}}, Relation::kGe, 3.0);
  const auto out = solve_lp(lp);
  REQUIRE(out.status == LpStatus::kOptimal);
  CHECK(out.objective_value == doctest::Approx(3.0));
  CHECK(out.solution[0] - out.solution[1] == doctest::Approx(1.0));
}

TEST_CASE("instance JSON round-trip preserves values") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto lp = random_bounded_lp(rng);
    lp.upper[0] = kInf;
    lp.lower[0] = -kInf;
    lp.is_integer[0] = true;
    const auto back = read_program_string(write_program_string(lp));
    REQUIRE(back.num_vars == lp.num_vars);
    REQUIRE(back.rows.size() == lp.rows.size());
    CHECK(back.is_integer == lp.is_integer);
    CHECK(std::isinf(back.upper[0]));
    CHECK(std::isinf(back.lower[0]));
    for (int j = 0; j < lp.num_vars; ++j)
      CHECK(std::abs(back.objective[j] - lp.objective[j]) <= 1e-12);
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
      CHECK(back.rows[i].rel == lp.rows[i].rel);
      CHECK(std::abs(back.rows[i].rhs - lp.rows[i].rhs) <= 1e-12);
    }
  }
  CHECK_THROWS_AS(read_program_string("{\"num_vars\": 1}"), ParseError);
  CHECK_THROWS_AS(read_program_string("not json"), ParseError);
}
