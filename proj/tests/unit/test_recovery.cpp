#include <cmath>
#include <random>

#include "common.hpp"
#include "dualprice/dual.hpp"
#include "dualprice/geometry.hpp"
#include "dualprice/recovery.hpp"
#include "support.hpp"

using namespace dualprice;
namespace ts = testing_support;

namespace {

// TRI1 at the root, then a binomial step (2s, s/2) under every child.
MarketTree tri_bin() {
  std::vector<NodeSpec> specs{NodeSpec::from_values("root", std::nullopt, 0, {1.0}, 1.0)};
  const double third = 1.0 / 3;
  const std::vector<std::pair<std::string, double>> top{{"u", 2.0}, {"m", 1.0}, {"d", 0.5}};
  for (const auto& [id, s] : top) specs.push_back(NodeSpec::from_values(id, "root", 1, {s}, third));
  for (const auto& [id, s] : top) {
    specs.push_back(NodeSpec::from_values(id + "u", id, 2, {2 * s}, 0.5));
    specs.push_back(NodeSpec::from_values(id + "d", id, 2, {0.5 * s}, 0.5));
  }
  return MarketTree({"S"}, specs);
}

}  // namespace

TEST_CASE("BIN1 exponential closed form") {
  const Scenario s = builtin_scenario("bin1");
  const auto u = UtilityPair::exponential(1.0, 0.0);
  const DualSolution sol = solve_dual(s.tree, u, s.endowment);
  const Eigen::VectorXd q = vec({1.0 / 3, 2.0 / 3}), p = vec({0.5, 0.5});
  // E_Q[X] = 0 with X = -ln(y q/p) pins ln y = -sum q ln(q/p).
  const double ly = -(q.array() * (q.array() / p.array()).log()).sum();
  CHECK(std::log(sol.mass) == doctest::Approx(ly).epsilon(1e-12));
  const RandomVariable x = recover_terminal_wealth(s.tree, u, s.endowment, sol);
  for (Eigen::Index l = 0; l < 2; ++l) CHECK(x[l] == doctest::Approx(-(ly + std::log(q[l] / p[l]))).epsilon(1e-12));
  CHECK(q.dot(x) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(first_order_residual(s.tree, u, s.endowment, sol, x) <= 1e-12);

  const PrimalSolution ps = recover_primal(s.tree, u, s.endowment, sol);
  CHECK(ps.strategy(0, 0) == doctest::Approx((ps.wealth[1] - ps.wealth[2]) / 1.5).epsilon(1e-14));
  CHECK(ps.wealth[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(ps.replication_residual <= 1e-12);
  double direct = 0.0;
  for (Eigen::Index l = 0; l < 2; ++l) direct += p[l] * u.U(x[l]);
  CHECK(ps.value == doctest::Approx(direct).epsilon(1e-14));
  CHECK(ps.value == doctest::Approx(sol.value).epsilon(1e-12));
}

TEST_CASE("complete market: inverse marginal at the state-price density") {
  const Scenario s = builtin_scenario("bin2");
  std::mt19937_64 rng(4);
  const RandomVariable e = ts::uniform_vector(4, -1, 1, rng);
  const auto u = UtilityPair::two_power(0.4, 1.5, 1.0);
  const DualSolution sol = solve_dual(s.tree, u, e);
  const auto verts = vertex_enumerate(build_constraints(s.tree));
  REQUIRE(verts.size() == 1);
  CHECK((sol.q - verts[0]).cwiseAbs().maxCoeff() < 1e-12);
  const RandomVariable x = recover_terminal_wealth(s.tree, u, e, sol);
  const Eigen::VectorXd p = s.tree.leaf_probabilities();
  for (Eigen::Index l = 0; l < 4; ++l) {
    CHECK(u.dU(x[l] + e[l]) == doctest::Approx(sol.mass * verts[0][l] / p[l]).epsilon(1e-9));
  }
}

TEST_CASE("replicable endowment shifts the hedge") {
  const Scenario s = builtin_scenario("bin2");
  const auto u = UtilityPair::exponential(0.8, 0.0);
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd H = ts::random_holdings(s.tree, rng);
  const RandomVariable g = ts::gains_of(s.tree, H);
  const RandomVariable zero = RandomVariable::Zero(4);
  const PrimalSolution p0 = recover_primal(s.tree, u, zero, solve_dual(s.tree, u, zero));
  const PrimalSolution pg = recover_primal(s.tree, u, g, solve_dual(s.tree, u, g));
  // Holding E = (H.S)_T, the optimum sells exactly H on top of the zero-endowment hedge.
  for (std::size_t n : s.tree.inner_nodes()) {
    const auto i = static_cast<Eigen::Index>(n);
    CHECK(pg.strategy(i, 0) == doctest::Approx(p0.strategy(i, 0) - H(i, 0)).epsilon(1e-9));
  }
  CHECK((pg.terminal - (p0.terminal - g)).cwiseAbs().maxCoeff() < 1e-9);
  // With the zero endowment the optimum under E = -(H.S)_T is X = (H.S)_T.
  const PrimalSolution pm = recover_primal(s.tree, u, (-g).eval(), solve_dual(s.tree, u, (-g).eval()));
  CHECK((pm.terminal - (p0.terminal + g)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("TRI1 replication is exact") {
  const Scenario s = builtin_scenario("tri1");
  for (const auto& u : {UtilityPair::exponential(1.0, 0.0), UtilityPair::two_power(0.5, 1.0, 1.0)}) {
    const DualSolution sol = solve_dual(s.tree, u, s.endowment);
    const PrimalSolution ps = recover_primal(s.tree, u, s.endowment, sol);
    CHECK(ps.replication_residual <= 1e-8);
    CHECK((ps.gains - ps.terminal).cwiseAbs().maxCoeff() <= 1e-10);
    for (bool r : ps.reached) CHECK(r);
  }
}

TEST_CASE("degenerate measure has no primal optimizer") {
  const Scenario dead = builtin_scenario("deadleaf");
  const auto u = UtilityPair::exponential(1.0, 0.0);
  const DualSolution sol = solve_dual(dead.tree, u, dead.endowment);
  CHECK_CODE(recover_terminal_wealth(dead.tree, u, dead.endowment, sol), ErrorCode::NoPrimalOptimizer);
  CHECK_CODE(recover_primal(dead.tree, u, dead.endowment, sol), ErrorCode::NoPrimalOptimizer);
}

TEST_CASE("extract_strategy flags a non-replicable target") {
  const Scenario s = builtin_scenario("tri1");
  const auto u = UtilityPair::exponential(1.0, 0.0);
  const DualSolution sol = solve_dual(s.tree, u, s.endowment);
  CHECK_CODE(extract_strategy(s.tree, u, s.endowment, sol, vec({0, 1, 0})), ErrorCode::ReplicationGap);
}

TEST_CASE("supermartingale under TRI1 vertices") {
  const Scenario s = builtin_scenario("tri1");
  const auto u = UtilityPair::exponential(1.0, 0.0);
  const DualSolution sol = solve_dual(s.tree, u, s.endowment);
  const PrimalSolution ps = recover_primal(s.tree, u, s.endowment, sol);
  const std::vector<MeasureVector> verts{vec({0, 1, 0}), vec({1.0 / 3, 0, 2.0 / 3})};
  for (const auto& q : verts) {
    const auto d = node_drifts(s.tree, ps.wealth, q);
    CHECK(d[0] <= 1e-8);
  }
  const auto rep = verify_supermartingale(s.tree, ps.wealth, verts, u, sol.q);
  CHECK(rep.ok());
  CHECK(rep.measures_checked == 2);
  CHECK(rep.martingale_drift <= 1e-8);

  // A Q-martingale for the second vertex that drifts up under the first.
  AdaptedProcess w(4);
  w[0] = -1.0;
  const double leaf_w[3] = {-1.0, 1.0, -1.0};
  for (std::size_t l = 0; l < 3; ++l) w[static_cast<Eigen::Index>(s.tree.leaf_node(l))] = leaf_w[l];
  const auto bad = verify_supermartingale(s.tree, w, verts, u, std::nullopt);
  CHECK_FALSE(bad.ok());
  REQUIRE(bad.violations.size() == 1);
  CHECK(bad.violations[0].measure == 0);
  CHECK(bad.violations[0].drift == doctest::Approx(2.0));

  // Random gains processes are martingales under every vertex.
  std::mt19937_64 rng(2);
  const MarketTree tri2 = builtin_scenario("tri2").tree;
  const Eigen::MatrixXd H = ts::random_holdings(tri2, rng);
  AdaptedProcess gw = AdaptedProcess::Zero(static_cast<Eigen::Index>(tri2.num_nodes()));
  for (std::size_t n = 1; n < tri2.num_nodes(); ++n) {
    const std::size_t par = tri2.node(n).parent;
    gw[static_cast<Eigen::Index>(n)] = gw[static_cast<Eigen::Index>(par)] +
        H(static_cast<Eigen::Index>(par), 0) * (tri2.node(n).prices[0] - tri2.node(par).prices[0]);
  }
  const auto v2 = vertex_enumerate(build_constraints(tri2));
  CHECK(verify_supermartingale(tri2, gw, v2, u, std::nullopt).ok());
}

TEST_CASE("two-power skips infinite-entropy vertices") {
  const Scenario s = builtin_scenario("tri1");
  const auto u = UtilityPair::two_power(0.5, 1.0, 1.0);
  const DualSolution sol = solve_dual(s.tree, u, s.endowment);
  const PrimalSolution ps = recover_primal(s.tree, u, s.endowment, sol);
  const auto rep = verify_supermartingale(s.tree, ps.wealth, {vec({0, 1, 0}), vec({1.0 / 3, 0, 2.0 / 3})}, u, sol.q);
  CHECK(rep.measures_infinite == 2);
  CHECK(rep.ok());
}

TEST_CASE("dynamic dual") {
  const MarketTree tree = tri_bin();
  std::mt19937_64 rng(12);
  const RandomVariable e = ts::uniform_vector(static_cast<Eigen::Index>(tree.num_leaves()), -0.5, 0.5, rng);
  for (const auto& u : {UtilityPair::exponential(1.0, 0.0), UtilityPair::two_power(0.5, 1.0, 1.0)}) {
    const DualSolution sol = solve_dual(tree, u, e);
    const PrimalSolution ps = recover_primal(tree, u, e, sol);

    const auto root = dynamic_dual(tree, u, e, sol, ps.wealth, 0);
    REQUIRE(root.size() == 1);
    CHECK(std::abs(root[0].derivative) <= 1e-7);
    CHECK(std::abs(root[0].wealth) <= 1e-9);

    const auto mid = dynamic_dual(tree, u, e, sol, ps.wealth, 1, 2);
    CHECK(mid.size() == 3);
    for (const auto& n : mid) {
      CHECK(n.derivative == doctest::Approx(-ps.wealth[static_cast<Eigen::Index>(n.node)]).epsilon(1e-7));
      CHECK(n.residual <= 1e-7);
    }

    const auto leaves = dynamic_dual(tree, u, e, sol, ps.wealth, 2);
    CHECK(leaves.size() == tree.num_leaves());
    for (const auto& n : leaves) {
      const auto l = *tree.find_leaf(tree.node(n.node).id);
      CHECK(n.derivative == doctest::Approx(-ps.terminal[static_cast<Eigen::Index>(l)]).epsilon(1e-9));
    }
  }
}

TEST_CASE("exponential Snell envelope") {
  const MarketTree tree = tri_bin();
  const auto u = UtilityPair::exponential(1.5, 0.0);
  std::mt19937_64 rng(6);
  const RandomVariable e = ts::uniform_vector(static_cast<Eigen::Index>(tree.num_leaves()), -0.5, 0.5, rng);
  const DualSolution sol = solve_dual(tree, u, e);
  const PrimalSolution ps = recover_primal(tree, u, e, sol);
  const auto verts = vertex_enumerate(build_constraints(tree));
  const SnellReport rep = snell_envelope_exponential(tree, u, e, sol, ps.wealth, verts);
  CHECK(rep.ok());
  CHECK(rep.envelope[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  for (std::size_t l = 0; l < tree.num_leaves(); ++l) {
    CHECK(rep.envelope[static_cast<Eigen::Index>(tree.leaf_node(l))] ==
          doctest::Approx(ps.terminal[static_cast<Eigen::Index>(l)]).epsilon(1e-9));
  }
  CHECK(rep.max_excess <= 1e-7);
  CHECK_CODE(snell_envelope_exponential(tree, UtilityPair::two_power(0.5, 1, 1), e, sol, ps.wealth, verts),
             ErrorCode::NotExponential);
}
