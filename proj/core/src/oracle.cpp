#include "dualprice/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dualprice/dual.hpp"
#include "dualprice/error.hpp"
#include "dualprice/geometry.hpp"
#include "dualprice/numerics.hpp"
#include "dualprice/recovery.hpp"

namespace dualprice {

std::string to_string(OracleRegime r) {
  switch (r) {
    case OracleRegime::Equivalent: return "EQUIVALENT";
    case OracleRegime::Degenerate: return "DEGENERATE";
    case OracleRegime::Arbitrage: return "ARBITRAGE";
  }
  return "?";
}

namespace {

struct MassMin {
  double value;
  double y;
};

// inf_y E[V(y q/p)] + y E_q[E] for a fixed probability vector q.
MassMin minimize_over_mass(const Eigen::VectorXd& p, const UtilityPair& u,
                           const RandomVariable& endow, const MeasureVector& q) {
  const double eq = q.dot(endow);
  auto h = [&](double s) {
    const double y = std::exp(s);
    double total = y * eq;
    for (Eigen::Index l = 0; l < p.size(); ++l) {
      const double v = u.V(y * q[l] / p[l]);
      if (v == kInf) return kInf;
      total += p[l] * v;
    }
    return total;
  };
  const Minimum1D m = scan_then_golden(h, -40.0, 40.0, 41, 1e-13);
  return {m.value, std::exp(m.x)};
}

}  // namespace

DualOracleResult brute_force_dual(const MarketTree& tree, const UtilityPair& u,
                                  const RandomVariable& endow, const DualOracleOptions& opts) {
  const MartingaleConstraints mc = build_constraints(tree);
  const MarketGeometry geo = analyze_market(tree);
  const Eigen::VectorXd& p = tree.leaf_probabilities();
  const auto L = static_cast<Eigen::Index>(tree.num_leaves());

  Eigen::MatrixXd Aeq(mc.rows.rows() + 1, L);
  Aeq.topRows(mc.rows.rows()) = mc.rows;
  Aeq.row(mc.rows.rows()).setOnes();
  const Eigen::MatrixXd N = null_space(Aeq);
  const auto k = static_cast<int>(N.cols());
  const MeasureVector q0 = geo.interior;

  DualOracleResult res;
  res.dimension = k;
  OracleMode mode = opts.mode;
  if (mode == OracleMode::Auto) mode = k <= opts.max_grid_dim ? OracleMode::Grid : OracleMode::Sample;
  if (mode == OracleMode::Grid && k > opts.max_grid_dim) {
    throw Error(ErrorCode::Dimension, "martingale polytope has dimension " + std::to_string(k) +
                                          ", grid mode allows at most " +
                                          std::to_string(opts.max_grid_dim));
  }
  res.mode_used = mode;

  auto objective = [&](const Eigen::VectorXd& z, MeasureVector* qout, double* yout) {
    MeasureVector q = q0 + N * z;
    if (q.minCoeff() < -1e-13) return kInf;
    q = q.cwiseMax(0.0);
    q /= q.sum();
    const MassMin m = minimize_over_mass(p, u, endow, q);
    if (qout) *qout = q;
    if (yout) *yout = m.y;
    return m.value;
  };

  std::vector<Eigen::VectorXd> points;
  if (mode == OracleMode::Grid) {
    std::vector<double> lo(static_cast<std::size_t>(k));
    std::vector<std::size_t> count(static_cast<std::size_t>(k));
    std::size_t total = 1;
    for (int i = 0; i < k; ++i) {
      const auto [a, b] = expectation_range(mc, N.col(i));
      const double base = N.col(i).dot(q0);
      lo[static_cast<std::size_t>(i)] = a - base;
      count[static_cast<std::size_t>(i)] =
          static_cast<std::size_t>(std::floor((b - a) / opts.resolution + 1e-9)) + 1;
      total *= count[static_cast<std::size_t>(i)];
    }
    points.reserve(total);
    for (std::size_t idx = 0; idx < total; ++idx) {
      Eigen::VectorXd z(k);
      std::size_t r = idx;
      for (int i = 0; i < k; ++i) {
        const std::size_t c = count[static_cast<std::size_t>(i)];
        z[i] = lo[static_cast<std::size_t>(i)] + static_cast<double>(r % c) * opts.resolution;
        r /= c;
      }
      points.push_back(z);
    }
    res.resolution = opts.resolution;
  } else {
    bool exhaustive = false;
    const auto verts = vertices_or_samples(mc, 5000, 400, opts.seed, &exhaustive);
    std::mt19937_64 rng(opts.seed);
    std::gamma_distribution<double> gamma1(1.0, 1.0);
    points.push_back(Eigen::VectorXd::Zero(k));
    for (std::size_t s = 0; s < opts.samples; ++s) {
      MeasureVector q = MeasureVector::Zero(L);
      double wsum = 0.0;
      for (const auto& v : verts) {
        const double w = gamma1(rng);
        q += w * v;
        wsum += w;
      }
      q /= wsum;
      points.push_back(N.transpose() * (q - q0));
    }
    res.resolution = 0.1;
  }

  std::vector<double> vals(points.size());
  parallel_for(points.size(), opts.workers, [&](std::size_t i) {
    vals[i] = objective(points[i], nullptr, nullptr);
  });
  res.points = points.size();
  // Lowest index wins ties.
  std::size_t best = 0;
  for (std::size_t i = 1; i < vals.size(); ++i) {
    if (vals[i] < vals[best]) best = i;
  }
  Eigen::VectorXd z = points[best];
  double fz = vals[best];

  if (opts.refine && k > 0) {
    double step = res.resolution;
    while (step > opts.refine_tol) {
      bool moved = false;
      for (int i = 0; i < k && !moved; ++i) {
        for (double sgn : {1.0, -1.0}) {
          Eigen::VectorXd t = z;
          t[i] += sgn * step;
          const double ft = objective(t, nullptr, nullptr);
          ++res.points;
          if (ft < fz) {
            z = t;
            fz = ft;
            moved = true;
            break;
          }
        }
      }
      if (!moved) step *= 0.5;
    }
    res.resolution = step;
  }
  res.value = objective(z, &res.q, &res.y);
  return res;
}

PrimalOracleResult brute_force_primal(const MarketTree& tree, const UtilityPair& u,
                                      const RandomVariable& endow,
                                      const PrimalOracleOptions& opts) {
  const auto& inner = tree.inner_nodes();
  const auto d = static_cast<Eigen::Index>(tree.num_assets());
  const auto D = static_cast<Eigen::Index>(inner.size()) * d;
  if (D > opts.max_dim) {
    throw Error(ErrorCode::Dimension, "strategy dimension " + std::to_string(D) +
                                          " exceeds the primal oracle limit " +
                                          std::to_string(opts.max_dim));
  }
  const auto L = static_cast<Eigen::Index>(tree.num_leaves());
  const Eigen::VectorXd& p = tree.leaf_probabilities();

  // Terminal gains are linear in the holdings: gains = G h.
  std::vector<Eigen::Index> slot(tree.num_nodes(), -1);
  for (std::size_t i = 0; i < inner.size(); ++i) slot[inner[i]] = static_cast<Eigen::Index>(i) * d;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(L, D);
  for (Eigen::Index l = 0; l < L; ++l) {
    for (std::size_t c = tree.leaf_node(static_cast<std::size_t>(l)); c != MarketTree::root();
         c = tree.node(c).parent) {
      G.row(l).segment(slot[tree.node(c).parent], d) += tree.increment(c).transpose();
    }
  }

  auto f = [&](const Eigen::VectorXd& h, Eigen::VectorXd* g) {
    const Eigen::VectorXd x = G * h + endow;
    double total = 0.0;
    Eigen::VectorXd w(L);
    for (Eigen::Index l = 0; l < L; ++l) {
      total += p[l] * u.U(x[l]);
      w[l] = p[l] * u.dU(x[l]);
    }
    if (g) *g = -(G.transpose() * w);
    return -total;
  };

  PrimalOracleResult best;
  best.dimension = static_cast<int>(D);
  best.value = -kInf;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, opts.start_scale);

  for (int s = 0; s < opts.starts; ++s) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(D);
    if (s > 0) {
      for (Eigen::Index i = 0; i < D; ++i) h[i] = normal(rng);
    }
    Eigen::VectorXd g;
    double fx = f(h, &g);
    if (!std::isfinite(fx)) continue;
    Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(D, D);
    for (int it = 0; it < opts.max_iter; ++it) {
      if (g.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + std::abs(fx))) break;
      Eigen::VectorXd dir = -Hinv * g;
      if (g.dot(dir) >= 0.0) {
        Hinv.setIdentity();
        dir = -g;
      }
      double alpha = 1.0;
      Eigen::VectorXd hn, gn;
      double fn = kInf;
      bool accepted = false;
      for (int ls = 0; ls < 80; ++ls) {
        hn = h + alpha * dir;
        fn = f(hn, &gn);
        if (std::isfinite(fn) && fn <= fx + 1e-4 * alpha * g.dot(dir)) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) break;
      const Eigen::VectorXd sv = hn - h;
      const Eigen::VectorXd yv = gn - g;
      const double sy = sv.dot(yv);
      const bool stalled = std::abs(fx - fn) <= 1e-16 * (1.0 + std::abs(fx)) &&
                           sv.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + h.lpNorm<Eigen::Infinity>());
      h = hn;
      g = gn;
      fx = fn;
      if (stalled) break;
      if (sy > 1e-300) {
        const double rho = 1.0 / sy;
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(D, D);
        Hinv = (I - rho * sv * yv.transpose()) * Hinv * (I - rho * yv * sv.transpose()) +
               rho * sv * sv.transpose();
      }
    }
    ++best.starts;
    if (-fx > best.value) {
      best.value = -fx;
      best.grad_norm = g.lpNorm<Eigen::Infinity>();
      best.strategy = StrategyProcess::Zero(static_cast<Eigen::Index>(tree.num_nodes()), d);
      for (std::size_t i = 0; i < inner.size(); ++i) {
        best.strategy.row(static_cast<Eigen::Index>(inner[i])) =
            h.segment(static_cast<Eigen::Index>(i) * d, d).transpose();
      }
    }
  }
  if (best.starts == 0) throw Error(ErrorCode::NonConverged, "no primal start had a finite value");
  return best;
}

OracleReport check_duality_gap(const MarketTree& tree, const UtilityPair& u,
                               const RandomVariable& endow, const OracleOptions& opts) {
  OracleReport rep;
  rep.primal_dimension = static_cast<int>(tree.inner_nodes().size() * tree.num_assets());
  try {
    (void)analyze_market(tree);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoMartingaleMeasure) throw;
    rep.regime = OracleRegime::Arbitrage;
    rep.brute_dual = rep.brute_primal = rep.solver_dual = rep.solver_primal = u.U_sup();
    rep.note = "no martingale measure: the primal supremum is U(inf) along an arbitrage";
    return rep;
  }

  DualSolution sol;
  try {
    sol = solve_dual(tree, u, endow);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InfeasibleEntropy) throw;
    rep.regime = OracleRegime::Degenerate;
    rep.brute_dual = rep.brute_primal = rep.solver_dual = rep.solver_primal = u.U_sup();
    rep.note = "every martingale measure has infinite entropy: u = v = U(inf)";
    return rep;
  }
  rep.solver_dual = sol.value;
  rep.regime = sol.support == SupportFlag::Equivalent ? OracleRegime::Equivalent
                                                      : OracleRegime::Degenerate;
  const double scale = 1.0 + std::abs(sol.value);
  if (rep.regime == OracleRegime::Equivalent) {
    rep.solver_primal = recover_primal(tree, u, endow, sol).value;
    rep.gap_solver = std::abs(rep.solver_primal - rep.solver_dual) / scale;
  } else {
    rep.solver_primal = std::numeric_limits<double>::quiet_NaN();
    rep.note = "no equivalent martingale measure: the primal supremum is not attained";
  }

  const DualOracleResult bd = brute_force_dual(tree, u, endow, opts.dual);
  rep.brute_dual = bd.value;
  rep.resolution = bd.resolution;
  rep.dual_points = bd.points;
  rep.dual_dimension = bd.dimension;
  rep.gap_dual = std::abs(bd.value - sol.value) / scale;

  const PrimalOracleResult bp = brute_force_primal(tree, u, endow, opts.primal);
  rep.brute_primal = bp.value;
  rep.primal_starts = bp.starts;
  rep.weak_duality = bp.value - bd.value;
  rep.gap_primal = rep.regime == OracleRegime::Equivalent
                       ? std::abs(bp.value - sol.value) / scale
                       : std::max(0.0, bp.value - sol.value) / scale;

  rep.worst = std::max({rep.gap_solver, rep.gap_dual, rep.gap_primal,
                        std::max(0.0, rep.weak_duality) / scale});
  if (rep.worst > opts.tol) {
    throw Error(ErrorCode::GapDetected,
                "regime " + to_string(rep.regime) + ": solver dual " + format_decimal(rep.solver_dual) +
                    ", solver primal " + format_decimal(rep.solver_primal) + ", brute dual " +
                    format_decimal(rep.brute_dual) + " (resolution " +
                    format_decimal(rep.resolution) + ", " + std::to_string(rep.dual_points) +
                    " points), brute primal " + format_decimal(rep.brute_primal) + " (" +
                    std::to_string(rep.primal_starts) + " starts); worst relative gap " +
                    format_decimal(rep.worst));
  }
  return rep;
}

}  // namespace dualprice
