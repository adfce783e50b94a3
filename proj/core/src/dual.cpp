#include "dualprice/dual.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "dualprice/error.hpp"
#include "dualprice/numerics.hpp"

namespace dualprice {

std::string_view to_string(SupportFlag flag) {
  return flag == SupportFlag::Equivalent ? "EQUIVALENT" : "DEGENERATE";
}

DualContext::DualContext(const MarketTree& tree)
    : tree_(std::make_shared<const MarketTree>(tree)) {
  auto data = std::make_shared<Data>();
  data->geometry = analyze_market(*tree_);
  for (std::size_t l = 0; l < tree_->num_leaves(); ++l) {
    if (data->geometry.support[l]) data->support_index.push_back(static_cast<Eigen::Index>(l));
  }
  const auto k = static_cast<Eigen::Index>(data->support_index.size());
  const Eigen::MatrixXd& A = data->geometry.constraints.rows;
  Eigen::MatrixXd As(A.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) As.col(j) = A.col(data->support_index[static_cast<std::size_t>(j)]);

  Eigen::VectorXd unused;
  orthonormalize_rows(As, Eigen::VectorXd::Zero(As.rows()), data->rows, unused);

  Eigen::MatrixXd Am(As.rows() + 1, k);
  Am.topRows(As.rows()) = As;
  Am.row(As.rows()).setOnes();
  Eigen::VectorXd e = Eigen::VectorXd::Zero(Am.rows());
  e[As.rows()] = 1.0;
  orthonormalize_rows(Am, e, data->rows_mass, data->mass_rhs);
  data_ = std::move(data);
}

double dual_objective(const MarketTree& tree, const UtilityPair& u, const RandomVariable& endow,
                      const MeasureVector& mu) {
  const Eigen::VectorXd& p = tree.leaf_probabilities();
  double total = 0.0;
  for (Eigen::Index l = 0; l < p.size(); ++l) {
    const double v = u.V(mu[l] / p[l]);
    if (v == kInf) return kInf;
    total += p[l] * v + (mu[l] == 0.0 ? 0.0 : mu[l] * endow[l]);
  }
  return total;
}

namespace {

// Barrier objective on the support coordinates.
SeparableEval make_objective(const MarketTree& tree, const UtilityPair& u,
                             const RandomVariable& endow, const std::vector<Eigen::Index>& idx) {
  const Eigen::VectorXd& p = tree.leaf_probabilities();
  return [&u, &p, &endow, &idx](const Eigen::VectorXd& x, Eigen::VectorXd* g,
                                Eigen::VectorXd* h) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const Eigen::Index l = idx[static_cast<std::size_t>(j)];
      const ConjugatePoint c = u.conjugate(x[j] / p[l]);
      total += p[l] * c.value + x[j] * endow[l];
      if (g) (*g)[j] = c.slope + endow[l];
      if (h) (*h)[j] = c.curvature / p[l];
    }
    return total;
  };
}

// Exponential utility: mu = y q with q the entropic projection of p tilted by
// exp(-gamma E) onto the martingale rows. q is found in the log domain from
// min_lambda log sum_j p_j exp(-gamma E_j - (C' lambda)_j), which stays
// well scaled when some q_j are far below the double range.
struct Projection {
  Eigen::VectorXd logq;  // ln q_j on the support
  double phi = 0.0;      // optimal log-sum-exp value
  double residual = 0.0; // |C q|_inf
  int steps = 0;
  bool converged = false;
  std::vector<BarrierStep> trace;
};

Projection entropic_projection(const Eigen::MatrixXd& C, const Eigen::VectorXd& a, int max_steps,
                               bool keep_trace) {
  const Eigen::Index m = C.rows();
  Projection pr;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  auto eval = [&](const Eigen::VectorXd& lam, Eigen::VectorXd& logq) {
    logq = a - C.transpose() * lam;
    const double top = logq.maxCoeff();
    const double lse = top + std::log((logq.array() - top).exp().sum());
    logq.array() -= lse;
    return lse;
  };
  auto residual = [&](const Eigen::VectorXd& lq) {
    return m > 0 ? (C * lq.array().exp().matrix()).cwiseAbs().maxCoeff() : 0.0;
  };
  Eigen::VectorXd logq;
  double phi = eval(lambda, logq);
  pr.residual = residual(logq);
  for (;;) {
    if (pr.residual <= 1e-14) {
      pr.converged = true;
      break;
    }
    if (pr.steps >= max_steps) break;
    const Eigen::VectorXd q = logq.array().exp();
    const Eigen::VectorXd grad = -C * q;
    Eigen::MatrixXd H = C * q.asDiagonal() * C.transpose() - grad * grad.transpose();
    H.diagonal().array() += 1e-14 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
    const Eigen::VectorXd d = -H.ldlt().solve(grad);
    const double slope = grad.dot(d);
    // Once the decrement is below what the value resolves, judge steps by
    // the residual instead.
    const bool fine = -slope <= 1e-13 * (1.0 + std::abs(phi));
    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial_logq;
    for (int k = 0; k < 60 && slope < 0.0; ++k) {
      const double trial = eval(lambda + alpha * d, trial_logq);
      const double res = fine ? residual(trial_logq) : 0.0;
      if (fine ? res < 0.5 * pr.residual : trial <= phi + 1e-4 * alpha * slope) {
        accepted = true;
        lambda += alpha * d;
        phi = trial;
        logq = trial_logq;
        pr.residual = fine ? res : residual(logq);
        break;
      }
      if (fine && k == 4) break;
      alpha *= 0.5;
    }
    ++pr.steps;
    if (keep_trace) pr.trace.push_back({pr.steps, 0.0, phi, std::sqrt(std::max(-slope, 0.0)), accepted ? alpha : 0.0});
    if (!accepted) {
      // No further progress at round-off.
      pr.converged = pr.residual <= 1e-11;
      break;
    }
  }
  pr.logq = logq;
  pr.phi = phi;
  return pr;
}

DualSolution solve_exponential(const DualContext& ctx, const UtilityPair& u,
                               const RandomVariable& endow, const DualOptions& opts) {
  const MarketTree& tree = ctx.tree();
  const MarketGeometry& geo = ctx.geometry();
  const Eigen::VectorXd& p = tree.leaf_probabilities();
  const auto L = static_cast<Eigen::Index>(tree.num_leaves());
  const auto& idx = ctx.support_index();
  const auto k = static_cast<Eigen::Index>(idx.size());
  const double gamma = u.gamma();

  Eigen::VectorXd a(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index l = idx[static_cast<std::size_t>(j)];
    a[j] = std::log(p[l]) - gamma * endow[l];
  }
  const Projection pr = entropic_projection(ctx.rows(false), a, opts.max_newton, opts.keep_log);
  if (!pr.converged) {
    throw Error(ErrorCode::NonConverged,
                "entropic projection stopped after " + std::to_string(pr.steps) +
                    " Newton steps with martingale residual " + format_decimal(pr.residual));
  }
  // phi = ln sum p exp(-gamma E - C'lambda) = -(H(q|p) + gamma E_q[E]).
  const double log_mass = opts.mass ? std::log(*opts.mass) : pr.phi;
  const double mass = std::exp(log_mass);
  if (!std::isfinite(mass) || !(mass > 0.0)) {
    throw Error(ErrorCode::NonConverged, "optimal mass is not representable (log mass " +
                                             format_decimal(log_mass) + ")");
  }

  DualSolution sol;
  sol.mu = MeasureVector::Zero(L);
  sol.q = MeasureVector::Zero(L);
  Eigen::VectorXd g(k), x(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index l = idx[static_cast<std::size_t>(j)];
    sol.q[l] = std::exp(pr.logq[j]);
    sol.mu[l] = std::exp(log_mass + pr.logq[j]);
    x[j] = sol.mu[l];
    g[j] = (log_mass + pr.logq[j] - std::log(p[l])) / gamma + endow[l];
  }
  sol.mass = mass;
  sol.value = dual_objective(tree, u, endow, sol.mu);
  const Eigen::MatrixXd& B = ctx.rows(opts.mass.has_value());
  const Eigen::VectorXd r = B.rows() > 0 ? Eigen::VectorXd(g - B.transpose() * (B * g)) : g;
  sol.stationarity = r.cwiseAbs().maxCoeff() / (1.0 + g.cwiseAbs().maxCoeff());
  if (sol.stationarity > opts.tol) {
    throw Error(ErrorCode::NonConverged, "stationarity residual " + format_decimal(sol.stationarity) +
                                             " above the requested " + format_decimal(opts.tol));
  }
  sol.complementarity = 0.0;
  sol.feasibility = geo.constraints.violation(sol.mu);
  sol.support = geo.equivalent ? SupportFlag::Equivalent : SupportFlag::Degenerate;
  sol.support_mask = geo.support;
  sol.newton_steps = pr.steps;
  sol.log = pr.trace;
  return sol;
}

DualSolution solve_impl(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow,
                        const DualOptions& opts) {
  const MarketTree& tree = ctx.tree();
  const MarketGeometry& geo = ctx.geometry();
  const auto L = static_cast<Eigen::Index>(tree.num_leaves());
  if (endow.size() != L) throw Error(ErrorCode::InvalidArgument, "endowment size differs from leaf count");
  if (!endow.allFinite()) throw Error(ErrorCode::InvalidArgument, "endowment is not finite");
  if (u.U_sup() == kInf && !geo.equivalent) {
    throw Error(ErrorCode::InfeasibleEntropy,
                "V(0) is infinite and no equivalent martingale measure exists, so every "
                "dual candidate has infinite entropy");
  }
  const auto& idx = ctx.support_index();
  const auto k = static_cast<Eigen::Index>(idx.size());
  const bool fixed = opts.mass.has_value();
  if (fixed && !(*opts.mass > 0.0)) throw Error(ErrorCode::Domain, "mass must be positive");
  if (u.family() == UtilityPair::Family::Exponential) return solve_exponential(ctx, u, endow, opts);

  Eigen::VectorXd x0(k);
  if (opts.start) {
    for (Eigen::Index j = 0; j < k; ++j) x0[j] = (*opts.start)[idx[static_cast<std::size_t>(j)]];
    if (fixed) x0 *= *opts.mass / x0.sum();
  } else {
    for (Eigen::Index j = 0; j < k; ++j) x0[j] = geo.interior[idx[static_cast<std::size_t>(j)]];
    if (fixed) x0 *= *opts.mass;
  }
  if (!(x0.minCoeff() > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "start must be strictly positive on the support");
  }

  const Eigen::MatrixXd& B = ctx.rows(fixed);
  const Eigen::VectorXd b = fixed ? Eigen::VectorXd(*opts.mass * ctx.mass_rhs())
                                  : Eigen::VectorXd(Eigen::VectorXd::Zero(B.rows()));

  BarrierOptions bo;
  bo.max_newton = opts.max_newton;
  bo.keep_trace = opts.keep_log;
  const BarrierResult br = barrier_minimize(make_objective(tree, u, endow, idx), B, b, x0, bo);
  if (!br.converged) {
    throw Error(ErrorCode::NonConverged,
                "dual barrier method hit the Newton cap of " + std::to_string(opts.max_newton) +
                    " steps; best stationarity residual " + format_decimal(br.stationarity));
  }
  if (br.stationarity > opts.tol) {
    throw Error(ErrorCode::NonConverged, "stationarity residual " + format_decimal(br.stationarity) +
                                             " above the requested " + format_decimal(opts.tol));
  }

  DualSolution sol;
  sol.mu = MeasureVector::Zero(L);
  for (Eigen::Index j = 0; j < k; ++j) sol.mu[idx[static_cast<std::size_t>(j)]] = br.x[j];
  sol.mass = sol.mu.sum();
  sol.q = sol.mu / sol.mass;
  if (!std::isfinite(sol.mass) || !(sol.mass > 0.0)) {
    throw Error(ErrorCode::NonConverged, "optimal mass is not representable (mass " +
                                             format_decimal(sol.mass) + ")");
  }
  sol.value = dual_objective(tree, u, endow, sol.mu);
  sol.stationarity = br.stationarity;
  sol.complementarity = br.complementarity;
  sol.feasibility = geo.constraints.violation(sol.mu);
  sol.support = geo.equivalent ? SupportFlag::Equivalent : SupportFlag::Degenerate;
  sol.support_mask = geo.support;
  sol.newton_steps = br.newton_steps;
  sol.log = br.trace;
  return sol;
}

}  // namespace

DualSolution solve_dual(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow,
                        const DualOptions& opts) {
  return solve_impl(ctx, u, endow, opts);
}

DualSolution solve_dual(const MarketTree& tree, const UtilityPair& u, const RandomVariable& endow,
                        const DualOptions& opts) {
  return solve_impl(DualContext(tree), u, endow, opts);
}

double curve_slope(const MarketTree& tree, const UtilityPair& u, const RandomVariable& endow,
                   const DualSolution& sol) {
  const Eigen::VectorXd& p = tree.leaf_probabilities();
  double s = 0.0;
  for (Eigen::Index l = 0; l < p.size(); ++l) {
    if (sol.q[l] > 0.0) s += sol.q[l] * (u.dV(sol.mu[l] / p[l]) + endow[l]);
  }
  return s;
}

std::vector<CurvePoint> dual_value_curve(const DualContext& ctx, const UtilityPair& u,
                                         const RandomVariable& endow, const std::vector<double>& ys,
                                         std::size_t workers) {
  std::vector<CurvePoint> out(ys.size());
  parallel_for(ys.size(), workers, [&](std::size_t i) {
    if (!(ys[i] > 0.0)) throw Error(ErrorCode::Domain, "curve masses must be positive");
    DualOptions o;
    o.mass = ys[i];
    const DualSolution s = solve_dual(ctx, u, endow, o);
    out[i] = {ys[i], s.value, curve_slope(ctx.tree(), u, endow, s), s.q};
  });
  return out;
}

double dual_derivative(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow,
                       double y) {
  DualOptions o;
  o.mass = y;
  return curve_slope(ctx.tree(), u, endow, solve_dual(ctx, u, endow, o));
}

SupportReport check_maximal_support(const MarketTree& tree, const UtilityPair& u,
                                    const DualSolution& sol,
                                    const std::vector<MeasureVector>& vertices) {
  SupportReport rep;
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    if (relative_entropy(tree, u, vertices[v]) == kInf) continue;
    ++rep.vertices_checked;
    for (Eigen::Index l = 0; l < vertices[v].size(); ++l) {
      if (vertices[v][l] > kEquivalenceThreshold && !(sol.mu[l] > 0.0)) {
        rep.violations.emplace_back(v, static_cast<std::size_t>(l));
      }
    }
  }
  return rep;
}

}  // namespace dualprice
