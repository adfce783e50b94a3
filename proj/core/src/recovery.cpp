#include "dualprice/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/QR>

#include "dualprice/error.hpp"
#include "dualprice/geometry.hpp"
#include "dualprice/numerics.hpp"

namespace dualprice {

RandomVariable recover_terminal_wealth(const MarketTree& tree, const UtilityPair& u,
                                       const RandomVariable& endow, const DualSolution& sol) {
  if (sol.support != SupportFlag::Equivalent) {
    throw Error(ErrorCode::NoPrimalOptimizer,
                "the optimal dual measure is not equivalent to P (no equivalent martingale "
                "measure exists), so the optimal terminal wealth is not attained");
  }
  const Eigen::VectorXd& p = tree.leaf_probabilities();
  RandomVariable x(p.size());
  for (Eigen::Index l = 0; l < p.size(); ++l) {
    const double slope = u.dV(sol.mu[l] / p[l]);
    if (!std::isfinite(slope)) {
      throw Error(ErrorCode::NoPrimalOptimizer,
                  "leaf '" + tree.leaf_id(static_cast<std::size_t>(l)) +
                      "' has zero optimal dual mass, V'(0) = -inf");
    }
    x[l] = -slope - endow[l];
  }
  return x;
}

double first_order_residual(const MarketTree& tree, const UtilityPair& u,
                            const RandomVariable& endow, const DualSolution& sol,
                            const RandomVariable& terminal) {
  const Eigen::VectorXd& p = tree.leaf_probabilities();
  double worst = 0.0;
  for (Eigen::Index l = 0; l < p.size(); ++l) {
    const double y = sol.mu[l] / p[l];
    worst = std::max(worst, std::abs(u.dU(terminal[l] + endow[l]) - y) / (1.0 + y));
  }
  return worst;
}

PrimalSolution extract_strategy(const MarketTree& tree, const UtilityPair& u,
                                const RandomVariable& endow, const DualSolution& sol,
                                const RandomVariable& terminal, double tol) {
  const std::size_t N = tree.num_nodes();
  const auto d = static_cast<Eigen::Index>(tree.num_assets());
  PrimalSolution ps;
  ps.terminal = terminal;
  ps.wealth = AdaptedProcess::Zero(static_cast<Eigen::Index>(N));
  ps.strategy = StrategyProcess::Zero(static_cast<Eigen::Index>(N), d);
  ps.reached.assign(N, true);

  for (std::size_t l = 0; l < tree.num_leaves(); ++l) {
    const std::size_t k = tree.leaf_node(l);
    ps.wealth[static_cast<Eigen::Index>(k)] = terminal[static_cast<Eigen::Index>(l)];
    ps.reached[k] = sol.q[static_cast<Eigen::Index>(l)] > 0.0;
  }

  // Preorder: children follow their parent, so a reverse sweep sees every
  // child before the parent.
  double worst = 0.0;
  for (std::size_t k = N; k-- > 0;) {
    const Node& n = tree.node(k);
    if (n.is_leaf()) continue;
    const auto m = static_cast<Eigen::Index>(n.children.size());
    Eigen::MatrixXd dS(m, d);
    Eigen::VectorXd wc(m);
    for (Eigen::Index c = 0; c < m; ++c) {
      dS.row(c) = tree.increment(n.children[static_cast<std::size_t>(c)]).transpose();
      wc[c] = ps.wealth[static_cast<Eigen::Index>(n.children[static_cast<std::size_t>(c)])];
    }
    const double mass = subtree_mass(tree, sol.q, k);
    Eigen::Index ki = static_cast<Eigen::Index>(k);
    if (mass > 0.0) {
      double w = 0.0;
      for (Eigen::Index c = 0; c < m; ++c) {
        w += subtree_mass(tree, sol.q, n.children[static_cast<std::size_t>(c)]) * wc[c];
      }
      ps.wealth[ki] = w / mass;
      const Eigen::VectorXd rhs = wc.array() - ps.wealth[ki];
      ps.strategy.row(ki) = dS.completeOrthogonalDecomposition().solve(rhs).transpose();
    } else {
      // Zero-mass node: least squares over [W_n, H_n] jointly.
      ps.reached[k] = false;
      Eigen::MatrixXd J(m, d + 1);
      J.col(0).setOnes();
      J.rightCols(d) = dS;
      const Eigen::VectorXd z = J.completeOrthogonalDecomposition().solve(wc);
      ps.wealth[ki] = z[0];
      ps.strategy.row(ki) = z.tail(d).transpose();
    }
  }

  const double scale = 1.0 + ps.wealth.cwiseAbs().maxCoeff();
  for (std::size_t k = 0; k < N; ++k) {
    const Node& n = tree.node(k);
    if (n.is_leaf() || !ps.reached[k]) continue;
    for (std::size_t c : n.children) {
      if (!ps.reached[c]) continue;
      const double r = std::abs(ps.wealth[static_cast<Eigen::Index>(c)] -
                                ps.wealth[static_cast<Eigen::Index>(k)] -
                                ps.strategy.row(static_cast<Eigen::Index>(k)).dot(tree.increment(c))) /
                       scale;
      if (r > worst) {
        worst = r;
        ps.worst_node = k;
      }
    }
  }
  ps.replication_residual = worst;

  // Gains along each path from the extracted holdings.
  AdaptedProcess g = AdaptedProcess::Zero(static_cast<Eigen::Index>(N));
  for (std::size_t k = 1; k < N; ++k) {
    const std::size_t par = tree.node(k).parent;
    g[static_cast<Eigen::Index>(k)] =
        g[static_cast<Eigen::Index>(par)] +
        ps.strategy.row(static_cast<Eigen::Index>(par)).dot(tree.increment(k));
  }
  ps.gains.resize(static_cast<Eigen::Index>(tree.num_leaves()));
  const Eigen::VectorXd& p = tree.leaf_probabilities();
  ps.value = 0.0;
  for (std::size_t l = 0; l < tree.num_leaves(); ++l) {
    const auto li = static_cast<Eigen::Index>(l);
    ps.gains[li] = g[static_cast<Eigen::Index>(tree.leaf_node(l))];
    ps.value += p[li] * u.U(ps.gains[li] + endow[li]);
  }

  if (worst > tol) {
    throw Error(ErrorCode::ReplicationGap,
                "one-step replication residual " + format_decimal(worst) + " at node '" +
                    tree.node(ps.worst_node).id + "' exceeds " + format_decimal(tol));
  }
  return ps;
}

PrimalSolution recover_primal(const MarketTree& tree, const UtilityPair& u,
                              const RandomVariable& endow, const DualSolution& sol, double tol) {
  return extract_strategy(tree, u, endow, sol, recover_terminal_wealth(tree, u, endow, sol), tol);
}

std::vector<double> node_drifts(const MarketTree& tree, const AdaptedProcess& w,
                                const MeasureVector& q) {
  std::vector<double> out(tree.num_nodes(), 0.0);
  for (std::size_t k : tree.inner_nodes()) {
    const double mass = subtree_mass(tree, q, k);
    if (!(mass > 0.0)) continue;
    double e = 0.0;
    for (std::size_t c : tree.node(k).children) {
      e += subtree_mass(tree, q, c) * w[static_cast<Eigen::Index>(c)];
    }
    out[k] = e / mass - w[static_cast<Eigen::Index>(k)];
  }
  return out;
}

SupermartingaleReport verify_supermartingale(const MarketTree& tree, const AdaptedProcess& w,
                                             const std::vector<MeasureVector>& measures,
                                             const UtilityPair& u,
                                             const std::optional<MeasureVector>& reference,
                                             double tol) {
  SupermartingaleReport rep;
  const double bound = tol * (1.0 + w.cwiseAbs().maxCoeff());
  for (std::size_t i = 0; i < measures.size(); ++i) {
    if (relative_entropy(tree, u, measures[i]) == kInf) {
      ++rep.measures_infinite;
      continue;
    }
    ++rep.measures_checked;
    const auto drift = node_drifts(tree, w, measures[i]);
    for (std::size_t k = 0; k < drift.size(); ++k) {
      rep.max_drift = std::max(rep.max_drift, drift[k]);
      if (drift[k] > bound) rep.violations.push_back({i, k, drift[k]});
    }
  }
  if (reference) {
    for (double d : node_drifts(tree, w, *reference)) {
      rep.martingale_drift = std::max(rep.martingale_drift, std::abs(d));
    }
    rep.martingale_ok = rep.martingale_drift <= bound;
  }
  return rep;
}

std::vector<DynamicDualNode> dynamic_dual(const MarketTree& tree, const UtilityPair& u,
                                          const RandomVariable& endow, const DualSolution& sol,
                                          const AdaptedProcess& wealth, int t,
                                          std::size_t workers) {
  if (t < 0 || t > tree.horizon()) throw Error(ErrorCode::Domain, "time outside 0..T");
  std::vector<std::size_t> nodes;
  for (std::size_t k : tree.nodes_at(t)) {
    if (subtree_mass(tree, sol.mu, k) > 0.0) nodes.push_back(k);
  }
  std::vector<DynamicDualNode> out(nodes.size());
  parallel_for(nodes.size(), workers, [&](std::size_t i) {
    const std::size_t k = nodes[i];
    const Node& n = tree.node(k);
    const MarketTree sub = subtree_market(tree, k);
    const auto b = static_cast<Eigen::Index>(n.leaf_begin);
    const auto len = static_cast<Eigen::Index>(n.leaf_end - n.leaf_begin);
    const RandomVariable e = endow.segment(b, len);
    const double mass = sol.mu.segment(b, len).sum();
    // Conditional probabilities rescale the measure by 1/P(n).
    DualOptions o;
    o.mass = mass / n.prob;
    const DualSolution s = solve_dual(sub, u, e, o);
    DynamicDualNode r;
    r.node = k;
    r.mass = mass;
    r.value = n.prob * s.value;
    r.derivative = curve_slope(sub, u, e, s);
    r.wealth = wealth[static_cast<Eigen::Index>(k)];
    r.residual = std::abs(r.wealth + r.derivative) / (1.0 + std::abs(r.wealth));
    out[i] = r;
  });
  return out;
}

SnellReport snell_envelope_exponential(const MarketTree& tree, const UtilityPair& u,
                                       const RandomVariable& endow, const DualSolution& sol,
                                       const AdaptedProcess& wealth,
                                       const std::vector<MeasureVector>& vertices,
                                       double epsilon) {
  if (u.family() != UtilityPair::Family::Exponential) {
    throw Error(ErrorCode::NotExponential, "the Snell envelope form needs exponential utility");
  }
  const auto qe = find_equivalent_mm(tree);
  if (!qe) {
    throw Error(ErrorCode::NoPrimalOptimizer, "no equivalent martingale measure exists");
  }
  const Eigen::VectorXd& p = tree.leaf_probabilities();
  RandomVariable z(p.size());
  for (Eigen::Index l = 0; l < p.size(); ++l) {
    z[l] = std::log(p[l] / sol.mu[l]) / u.gamma() - endow[l];
  }

  std::vector<MeasureVector> tested;
  tested.reserve(vertices.size() + 1);
  for (const auto& v : vertices) tested.push_back((1.0 - epsilon) * v + epsilon * *qe);
  tested.push_back(sol.q);

  SnellReport rep;
  rep.measures = tested.size();
  const auto N = static_cast<Eigen::Index>(tree.num_nodes());
  rep.envelope = AdaptedProcess::Constant(N, -kInf);
  for (const auto& q : tested) {
    for (Eigen::Index k = 0; k < N; ++k) {
      const double c = condition(tree, z, q, static_cast<std::size_t>(k));
      rep.envelope[k] = std::max(rep.envelope[k], c);
      rep.max_excess = std::max(rep.max_excess, c - wealth[k]);
    }
  }
  rep.max_equality_gap = (rep.envelope - wealth).cwiseAbs().maxCoeff();
  return rep;
}

}  // namespace dualprice
