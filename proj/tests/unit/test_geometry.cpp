#include <algorithm>
#include <cmath>
#include <random>

#include "common.hpp"
#include "dualprice/geometry.hpp"
#include "dualprice/linprog.hpp"
#include "support.hpp"

using namespace dualprice;

namespace {

bool contains(const std::vector<MeasureVector>& vs, const MeasureVector& q, double tol = 1e-12) {
  return std::any_of(vs.begin(), vs.end(), [&](const MeasureVector& v) {
    return (v - q).cwiseAbs().maxCoeff() <= tol;
  });
}

// Per-node re-check of the martingale property straight from the tree.
double direct_drift(const MarketTree& tree, const MeasureVector& q) {
  double worst = 0.0;
  for (std::size_t n : tree.inner_nodes()) {
    const double m = subtree_mass(tree, q, n);
    if (m <= 1e-12) continue;
    for (std::size_t j = 0; j < tree.num_assets(); ++j) {
      double acc = 0.0;
      for (std::size_t c : tree.node(n).children) acc += subtree_mass(tree, q, c) * tree.node(c).prices[j];
      worst = std::max(worst, std::abs(acc / m - tree.node(n).prices[j]));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("constraint rows") {
  const auto bin1 = build_constraints(builtin_scenario("bin1").tree);
  REQUIRE(bin1.rows.rows() == 1);
  CHECK(bin1.rows(0, 0) == 1.0);
  CHECK(bin1.rows(0, 1) == -0.5);

  const auto tri1 = build_constraints(builtin_scenario("tri1").tree);
  REQUIRE(tri1.rows.rows() == 1);
  CHECK(tri1.rows(0, 0) == 1.0);
  CHECK(tri1.rows(0, 1) == 0.0);
  CHECK(tri1.rows(0, 2) == -0.5);
  CHECK(tri1.violation(vec({0.5, 0.0, 1.0})) == 0.0);
  // The solution family (a/2, 1 - 3a/2, a).
  for (double a : {0.0, 0.1, 0.4, 2.0 / 3}) {
    CHECK(is_martingale_measure(builtin_scenario("tri1").tree, vec({a / 2, 1 - 1.5 * a, a})));
  }
}

TEST_CASE("equivalent measures") {
  const MarketTree bin1 = builtin_scenario("bin1").tree;
  const auto q = find_equivalent_mm(bin1);
  REQUIRE(q.has_value());
  CHECK((*q - vec({1.0 / 3, 2.0 / 3})).cwiseAbs().maxCoeff() < 1e-12);

  const MarketTree two({"S"}, {NodeSpec::from_values("root", std::nullopt, 0, {1.0}, 1.0),
                              NodeSpec::from_values("u", "root", 1, {2.0}, 0.5),
                              NodeSpec::from_values("d", "root", 1, {0.5}, 0.5)});
  CHECK(analyze_market(two).equivalent);

  CHECK_CODE(analyze_market(builtin_scenario("arbitrage").tree), ErrorCode::NoMartingaleMeasure);
  CHECK_CODE(find_equivalent_mm(builtin_scenario("arbitrage").tree), ErrorCode::NoMartingaleMeasure);

  const MarketTree dead = builtin_scenario("deadleaf").tree;
  CHECK_FALSE(find_equivalent_mm(dead).has_value());
  const auto g = analyze_market(dead);
  CHECK_FALSE(g.equivalent);
  CHECK(g.support_size() == dead.num_leaves() - 1);
}

TEST_CASE("vertex enumeration") {
  const auto tri1 = build_constraints(builtin_scenario("tri1").tree);
  const auto v = vertex_enumerate(tri1);
  CHECK(v.size() == 2);
  CHECK(contains(v, vec({0, 1, 0})));
  CHECK(contains(v, vec({1.0 / 3, 0, 2.0 / 3})));

  const auto b = vertex_enumerate(build_constraints(builtin_scenario("bin1").tree));
  REQUIRE(b.size() == 1);
  CHECK(contains(b, vec({1.0 / 3, 2.0 / 3})));

  const MarketTree tri2 = builtin_scenario("tri2").tree;
  const auto v2 = vertex_enumerate(build_constraints(tri2));
  CHECK(v2.size() > 2);
  for (const auto& q : v2) {
    CHECK(q.sum() == doctest::Approx(1.0));
    CHECK(q.minCoeff() >= 0.0);
    CHECK(direct_drift(tri2, q) <= 1e-9);
  }
  CHECK_CODE(vertex_enumerate(build_constraints(tri2), 2), ErrorCode::CapExceeded);
  bool exhaustive = true;
  const auto s = vertices_or_samples(build_constraints(tri2), 2, 50, 7, &exhaustive);
  CHECK_FALSE(exhaustive);
  for (const auto& q : s) {
    CHECK(direct_drift(tri2, q) <= 1e-9);
    CHECK(contains(v2, q, 1e-9));
  }
}

TEST_CASE("vertices of random trees re-check") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const MarketTree tree = random_scenario(seed, {1, 2, 3, 2, 1.0}).tree;
    const auto c = build_constraints(tree);
    for (const auto& q : vertices_or_samples(c, 5000, 100, seed)) CHECK(direct_drift(tree, q) <= 1e-9);
  }
}

TEST_CASE("cone property") {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const MarketTree tree = random_scenario(seed).tree;
    const auto g = analyze_market(tree);
    const Eigen::VectorXd r0 = g.constraints.rows * g.interior;
    for (double y : {0.0, 0.5, 3.0, 1e3}) {
      const Eigen::VectorXd r = g.constraints.rows * (y * g.interior);
      CHECK((r - y * r0).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + y));
    }
    CHECK(g.constraints.violation(g.interior) <= 1e-12);
    CHECK(martingale_drift(tree, g.interior) <= 1e-10);
  }
}

TEST_CASE("relative entropy") {
  const MarketTree tri1 = builtin_scenario("tri1").tree;
  const auto e0 = UtilityPair::exponential(1.0, 0.0);
  const Eigen::VectorXd p = tri1.leaf_probabilities();
  CHECK(relative_entropy(tri1, e0, p) == doctest::Approx(-1.0).epsilon(1e-14));
  // density (1, 0, 2)
  const double expected = (1.0 / 3) * (-1.0) + (1.0 / 3) * (2 * std::log(2.0) - 2);
  CHECK(relative_entropy(tri1, e0, vec({1.0 / 3, 0, 2.0 / 3})) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(relative_entropy(tri1, UtilityPair::two_power(0.5, 1, 1), Eigen::VectorXd::Zero(3)) == kInf);
  CHECK(relative_entropy(tri1, e0, Eigen::VectorXd::Zero(3)) == doctest::Approx(0.0));
}

TEST_CASE("entropy is convex along segments") {
  std::mt19937_64 rng(9);
  const MarketTree tri2 = builtin_scenario("tri2").tree;
  const auto v = vertex_enumerate(build_constraints(tri2));
  const auto u = UtilityPair::two_power(0.5, 1.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
  const MeasureVector mid = analyze_market(tri2).interior;
  for (int k = 0; k < 20; ++k) {
    const MeasureVector a = 0.5 * (v[pick(rng)] + mid), b = 0.5 * (v[pick(rng)] + mid);
    for (double lam : {0.25, 0.5, 0.75}) {
      const double lhs = relative_entropy(tri2, u, lam * a + (1 - lam) * b);
      const double rhs = lam * relative_entropy(tri2, u, a) + (1 - lam) * relative_entropy(tri2, u, b);
      CHECK(lhs <= rhs + 1e-12);
    }
  }
}

TEST_CASE("expectation range and LP") {
  const auto tri1 = build_constraints(builtin_scenario("tri1").tree);
  const auto [lo, hi] = expectation_range(tri1, vec({1, 0, 0}));
  CHECK(lo == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(hi == doctest::Approx(1.0 / 3).epsilon(1e-12));

  LinearProgram lp;
  lp.A = Eigen::MatrixXd(2, 2);
  lp.A << 1, 1, 1, -1;
  lp.b = vec({4, 1});
  lp.sense = {RowSense::LessEqual, RowSense::GreaterEqual};
  lp.c = vec({-1, -2});
  const LpResult r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.objective == doctest::Approx(-5.5));
  CHECK(r.x[0] == doctest::Approx(2.5));

  lp.b = vec({-1, 1});
  CHECK(solve_lp(lp).status == LpStatus::Infeasible);

  LinearProgram un;
  un.A = Eigen::MatrixXd(1, 2);
  un.A << 1, -1;
  un.b = vec({0});
  un.sense = {RowSense::Equal};
  un.c = vec({-1, 0});
  CHECK(solve_lp(un).status == LpStatus::Unbounded);
  un.upper = vec({3, kInf});
  CHECK(solve_lp(un).objective == doctest::Approx(-3.0));
}
