#include <cmath>
#include <random>

#include "common.hpp"
#include "dualprice/dual.hpp"
#include "dualprice/geometry.hpp"
#include "dualprice/pricing.hpp"
#include "support.hpp"

using namespace dualprice;
namespace ts = testing_support;

namespace {

const RandomVariable kCallTri = vec({1, 0, 0});

std::vector<UtilityPair> utilities() {
  return {UtilityPair::exponential(1.0, 0.0), UtilityPair::exponential(2.0, 1.0),
          UtilityPair::two_power(0.5, 1.0, 1.0)};
}

}  // namespace

TEST_CASE("complete BIN1 prices the call at 1/3") {
  const Scenario s = builtin_scenario("bin1");
  const DualContext ctx(s.tree);
  std::mt19937_64 rng(1);
  for (const auto& u : utilities()) {
    const RandomVariable e = ts::uniform_vector(2, -1, 1, rng);
    CHECK(indifference_price(ctx, u, e, vec({1, 0})) == doctest::Approx(1.0 / 3).epsilon(1e-9));
    CHECK(price_via_penalty(ctx, u, e, vec({1, 0})) == doctest::Approx(1.0 / 3).epsilon(1e-8));
  }
  const auto [lo, hi] = price_bounds(s.tree, vec({1, 0}));
  CHECK(lo == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(hi == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("constant and replicable claims") {
  std::mt19937_64 rng(2);
  for (const char* name : {"tri1", "tri2"}) {
    const Scenario s = builtin_scenario(name);
    const DualContext ctx(s.tree);
    const auto n = static_cast<Eigen::Index>(s.tree.num_leaves());
    for (const auto& u : utilities()) {
      const RandomVariable e = ts::uniform_vector(n, -1, 1, rng);
      const RandomVariable c = RandomVariable::Constant(n, 0.37);
      CHECK(indifference_price(ctx, u, e, c) == doctest::Approx(0.37).epsilon(1e-9));
      const RandomVariable g = ts::gains_of(s.tree, ts::random_holdings(s.tree, rng));
      CHECK(std::abs(indifference_price(ctx, u, e, g)) <= 1e-8);
    }
    const auto [lo, hi] = price_bounds(s.tree, RandomVariable::Constant(n, -2.0));
    CHECK(lo == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(hi == doctest::Approx(-2.0).epsilon(1e-12));
  }
}

TEST_CASE("TRI1 bounds and report") {
  const Scenario s = builtin_scenario("tri1");
  const DualContext ctx(s.tree);
  const auto [lo, hi] = price_bounds(ctx, kCallTri);
  CHECK(std::abs(lo) <= 1e-12);
  CHECK(hi == doctest::Approx(1.0 / 3).epsilon(1e-12));
  for (const auto& u : utilities()) {
    const PriceReport r = price_report(ctx, u, s.endowment, kCallTri);
    CHECK(r.range_ok());
    CHECK(r.bid_offer_ok());
    CHECK(r.agreement <= 1e-6);
    CHECK(r.bid < r.davis);
    CHECK(r.offer > r.davis);
    const DualSolution sol = solve_dual(ctx, u, s.endowment);
    CHECK(r.davis == doctest::Approx(sol.q.dot(kCallTri)).epsilon(1e-12));
    CHECK(r.offer == doctest::Approx(-indifference_price(ctx, u, s.endowment, -kCallTri)).epsilon(1e-12));
    // Certainty equivalent: u(E + c) = u(E + B).
    const RandomVariable shifted = (s.endowment.array() + r.certainty_equivalent).matrix();
    CHECK(optimal_value(ctx, u, shifted) ==
          doctest::Approx(optimal_value(ctx, u, s.endowment + kCallTri)).epsilon(1e-9));
  }
}

TEST_CASE("entropic penalty") {
  const Scenario s = builtin_scenario("tri1");
  const DualContext ctx(s.tree);
  const auto u = UtilityPair::exponential(1.0, 0.0);
  const DualSolution sol = solve_dual(ctx, u, s.endowment);
  CHECK(std::abs(entropic_penalty(ctx, u, s.endowment, sol.q)) <= 1e-8);

  // Vertex (0, 1, 0) by golden section over ln y.
  const MeasureVector q = vec({0, 1, 0});
  const Eigen::VectorXd p = s.tree.leaf_probabilities();
  auto gap = [&](double ly) {
    const double y = std::exp(ly);
    double v = 0.0;
    for (Eigen::Index l = 0; l < 3; ++l) v += p[l] * u.V(y * q[l] / p[l]);
    return (v - sol.value) / y;
  };
  const double oracle = ts::golden_min(gap, -10.0, 10.0, 1e-14);
  const double alpha = entropic_penalty(ctx, u, s.endowment, q);
  CHECK(std::isfinite(alpha));
  CHECK(alpha == doctest::Approx(oracle).epsilon(1e-9));

  std::mt19937_64 rng(3);
  const auto verts = vertex_enumerate(build_constraints(s.tree));
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (int k = 0; k < 10; ++k) {
    const double t = w(rng);
    CHECK(entropic_penalty(ctx, u, s.endowment, t * verts[0] + (1 - t) * verts[1], sol.value) >= -1e-10);
  }
  CHECK_CODE(entropic_penalty(ctx, UtilityPair::two_power(0.5, 1, 1), s.endowment, q), ErrorCode::Infinite);
}

TEST_CASE("volume asymptotics on TRI1") {
  const Scenario s = builtin_scenario("tri1");
  const DualContext ctx(s.tree);
  const auto u = UtilityPair::exponential(1.0, 0.0);
  const VolumeCurve c = average_price_curve(ctx, u, s.endowment, kCallTri, {1e-4, 1.0, 1e4});
  REQUIRE(c.points.size() == 3);
  CHECK(c.points[1].price == doctest::Approx(indifference_price(ctx, u, s.endowment, kCallTri)).epsilon(1e-12));
  CHECK(std::abs(c.points[2].price - c.lp_lower) <= 1e-3);
  CHECK(std::abs(c.points[0].price - c.davis) <= 1e-4 * (1 + std::abs(c.davis)));
  CHECK(c.non_increasing());
  const auto grid = default_volume_grid();
  CHECK(grid.size() == 25);
  CHECK(grid.front() == doctest::Approx(1e-4));
  CHECK(grid.back() == doctest::Approx(1e4));
}

TEST_CASE("MUBPP verdicts on TRI1") {
  const Scenario s = builtin_scenario("tri1");
  const DualContext ctx(s.tree);
  const auto u = UtilityPair::exponential(1.0, 0.0);
  const DualSolution sol = solve_dual(ctx, u, s.endowment);
  const auto N = static_cast<Eigen::Index>(s.tree.num_nodes());

  StrategyProcess opt(N, 1);
  opt.col(0) = conditional_process(s.tree, kCallTri, sol.q);
  const MubppReport a = check_mubpp(ctx, u, s.endowment, opt);
  CHECK(a.is_mubpp);
  CHECK(a.agree());

  const MubppReport c = check_mubpp(ctx, u, s.endowment, StrategyProcess::Constant(N, 1, 0.7));
  CHECK(c.is_mubpp);
  CHECK(c.agree());

  // Priced by the vertex (1/3, 0, 2/3) instead of the optimal measure.
  StrategyProcess other(N, 1);
  other.col(0) = conditional_process(s.tree, kCallTri, vec({1.0 / 3, 0, 2.0 / 3}));
  const MubppReport b = check_mubpp(ctx, u, s.endowment, other);
  CHECK_FALSE(b.is_mubpp);
  CHECK_FALSE(b.drift_verdict);
  CHECK(b.agree());
  CHECK(b.u_augmented > b.u_base + 1e-7);
}

TEST_CASE("augmented market") {
  const MarketTree tri1 = builtin_scenario("tri1").tree;
  StrategyProcess extra(4, 1);
  extra << 1.0, 1.5, 0.5, 1.0;
  const MarketTree aug = augment_market(tri1, extra, {"X"});
  CHECK(aug.num_assets() == 2);
  CHECK(aug.assets()[1] == "X");
  CHECK(aug.node(0).prices[1] == 1.0);
  CHECK(aug.leaf_probabilities() == tri1.leaf_probabilities());
}

TEST_CASE("endowment sensitivity") {
  const Scenario s = builtin_scenario("tri1");
  const DualContext ctx(s.tree);
  std::mt19937_64 rng(10);
  for (const auto& u : utilities()) {
    const RandomVariable e1 = ts::uniform_vector(3, -1, 1, rng), e2 = ts::uniform_vector(3, -1, 1, rng);
    CHECK(optimal_value(ctx, u, (e1.array() + 0.1).matrix()) > optimal_value(ctx, u, e1));
    const double mix = optimal_value(ctx, u, 0.5 * (e1 + e2));
    CHECK(mix >= 0.5 * optimal_value(ctx, u, e1) + 0.5 * optimal_value(ctx, u, e2) - 1e-9);

    SensitivityOptions o;
    o.claims = {kCallTri};
    const SensitivityReport r = endowment_sensitivity(ctx, u, {e1, e2, (e1.array() + 0.1).matrix()}, o);
    CHECK(r.ok());
    CHECK(r.values.size() == 3);
    const double base = r.values[0];
    double prev = kInf;
    for (int n = 1; n <= 16; n *= 2) {
      const double d = std::abs(optimal_value(ctx, u, (e1.array() + 1.0 / n).matrix()) - base);
      CHECK(d < prev);
      prev = d;
    }
  }
}

TEST_CASE("pricing refuses arbitrage") {
  const Scenario arb = builtin_scenario("arbitrage");
  CHECK_CODE(price_bounds(arb.tree, arb.claims.at("call")), ErrorCode::NoMartingaleMeasure);
}
