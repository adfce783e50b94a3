#include <cmath>
#include <random>

#include "common.hpp"
#include "dualprice/dual.hpp"
#include "dualprice/oracle.hpp"
#include "dualprice/recovery.hpp"
#include "support.hpp"

using namespace dualprice;
namespace ts = testing_support;

TEST_CASE("TRI1 grid oracle matches the solver") {
  const Scenario s = builtin_scenario("tri1");
  const auto u = UtilityPair::exponential(1.0, 0.0);
  const DualSolution sol = solve_dual(s.tree, u, s.endowment);
  DualOracleOptions o;
  o.mode = OracleMode::Grid;
  o.resolution = 1e-4;
  o.refine = false;
  const DualOracleResult r = brute_force_dual(s.tree, u, s.endowment, o);
  CHECK(r.dimension == 1);
  CHECK(r.mode_used == OracleMode::Grid);
  CHECK(r.value >= sol.value - 1e-12);
  CHECK(std::abs(r.value - sol.value) <= 1e-6);
}

TEST_CASE("BIN1 reduces to a search over y") {
  const Scenario s = builtin_scenario("bin1");
  for (const auto& u : {UtilityPair::exponential(1.0, 2.0), UtilityPair::two_power(0.5, 1.0, 1.0)}) {
    const DualSolution sol = solve_dual(s.tree, u, s.endowment);
    const DualOracleResult r = brute_force_dual(s.tree, u, s.endowment);
    CHECK(r.dimension == 0);
    CHECK(r.value == doctest::Approx(sol.value).epsilon(1e-9));
    CHECK(r.y == doctest::Approx(sol.mass).epsilon(1e-4));
  }
}

TEST_CASE("refining the grid never moves away") {
  const Scenario s = builtin_scenario("tri1");
  std::mt19937_64 rng(5);
  const RandomVariable e = ts::uniform_vector(3, -1, 1, rng);
  for (const auto& u : {UtilityPair::exponential(1.0, 0.0), UtilityPair::two_power(0.5, 1.0, 1.0)}) {
    const double v = solve_dual(s.tree, u, e).value;
    DualOracleOptions o;
    o.mode = OracleMode::Grid;
    o.refine = false;
    double prev = kInf;
    for (double h : {0.02, 0.01, 0.005}) {
      o.resolution = h;
      const double b = brute_force_dual(s.tree, u, e, o).value;
      CHECK(b <= prev + 1e-13);
      CHECK(b >= v - 1e-10);
      prev = b;
    }
  }
}

TEST_CASE("primal oracle") {
  for (const char* name : {"bin1", "tri1"}) {
    const Scenario s = builtin_scenario(name);
    for (const auto& u : {UtilityPair::exponential(1.0, 0.0), UtilityPair::two_power(0.5, 1.0, 1.0)}) {
      const DualSolution sol = solve_dual(s.tree, u, s.endowment);
      const PrimalSolution ps = recover_primal(s.tree, u, s.endowment, sol);
      const PrimalOracleResult r = brute_force_primal(s.tree, u, s.endowment);
      CHECK(r.dimension == 1);
      CHECK(r.value == doctest::Approx(ps.value).epsilon(1e-7));
      CHECK(r.strategy(0, 0) == doctest::Approx(ps.strategy(0, 0)).epsilon(1e-5));
      const DualOracleResult d = brute_force_dual(s.tree, u, s.endowment);
      CHECK(r.value <= d.value + 1e-9);
    }
  }
}

TEST_CASE("weak duality on random trees") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Scenario s = random_scenario(seed, {1, 2, 2, 1, 1.0});
    std::mt19937_64 rng(seed);
    const auto u = ts::random_utility(seed % 2 == 0, rng);
    DualOracleOptions o;
    o.mode = OracleMode::Sample;
    o.samples = 300;
    o.refine = false;
    const double d = brute_force_dual(s.tree, u, s.endowment, o).value;
    PrimalOracleOptions po;
    po.starts = 4;
    try {
      const double p = brute_force_primal(s.tree, u, s.endowment, po).value;
      CHECK(p <= d + 1e-9);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Dimension);
    }
  }
}

TEST_CASE("closed form complete market") {
  const Scenario s = builtin_scenario("bin1");
  const double gamma = 1.5;
  const auto u = UtilityPair::exponential(gamma, 0.0);
  const Eigen::VectorXd q = vec({1.0 / 3, 2.0 / 3}), p = vec({0.5, 0.5});
  const double ly = -(q.array() * (q.array() / p.array()).log()).sum();
  const double analytic = -std::exp(ly) / gamma;
  const OracleReport r = check_duality_gap(s.tree, u, s.endowment);
  CHECK(r.regime == OracleRegime::Equivalent);
  for (double v : {r.brute_dual, r.brute_primal, r.solver_dual, r.solver_primal}) {
    CHECK(v == doctest::Approx(analytic).epsilon(1e-7));
  }
  CHECK(r.worst <= 1e-7);
}

TEST_CASE("oracle regimes and limits") {
  const auto u = UtilityPair::exponential(1.0, 0.0);
  const Scenario arb = builtin_scenario("arbitrage");
  const OracleReport a = check_duality_gap(arb.tree, u, arb.endowment);
  CHECK(a.regime == OracleRegime::Arbitrage);
  CHECK(a.solver_dual == u.U_sup());
  CHECK(to_string(a.regime) == "ARBITRAGE");

  const Scenario dead = builtin_scenario("deadleaf");
  CHECK(check_duality_gap(dead.tree, u, dead.endowment).regime == OracleRegime::Degenerate);

  const Scenario tri2 = builtin_scenario("tri2");
  DualOracleOptions o;
  o.mode = OracleMode::Grid;
  CHECK_CODE(brute_force_dual(tri2.tree, u, tri2.endowment, o), ErrorCode::Dimension);
  o.mode = OracleMode::Auto;
  o.samples = 200;
  CHECK(brute_force_dual(tri2.tree, u, tri2.endowment, o).mode_used == OracleMode::Sample);
  PrimalOracleOptions po;
  po.max_dim = 3;
  CHECK_CODE(brute_force_primal(tri2.tree, u, tri2.endowment, po), ErrorCode::Dimension);
}
