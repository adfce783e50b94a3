#include "dualprice/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace dualprice {

void orthonormalize_rows(const Eigen::MatrixXd& M, const Eigen::VectorXd& rhs,
                         Eigen::MatrixXd& rows, Eigen::VectorXd& mapped, double rel_tol) {
  const Eigen::Index n = M.cols();
  if (M.rows() == 0) {
    rows.resize(0, n);
    mapped.resize(0);
    return;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s[i] > rel_tol * s[0];
  // M = U S V', so the rows of V' span the row space and U'rhs/S maps rhs.
  rows = svd.matrixV().leftCols(r).transpose();
  mapped = (svd.matrixU().leftCols(r).transpose() * rhs).cwiseQuotient(s.head(r));
}

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

double barrier_value(const SeparableEval& f, const Eigen::VectorXd& x, double t) {
  const double v = f(x, nullptr, nullptr);
  if (!std::isfinite(v)) return v;
  return v - t * x.array().log().sum();
}

}  // namespace

BarrierResult barrier_minimize(const SeparableEval& f, const Eigen::MatrixXd& B,
                               const Eigen::VectorXd& b, Eigen::VectorXd x,
                               const BarrierOptions& opts) {
  const Eigen::Index n = x.size();
  BarrierResult res;
  Eigen::VectorXd g(n), h(n);
  double fx = f(x, &g, &h);
  double t = opts.t0 * (1.0 + std::abs(fx)) / static_cast<double>(std::max<Eigen::Index>(n, 1));
  int steps = 0;
  bool final_stage = false;
  bool capped = false;

  while (!capped) {
    if (static_cast<double>(n) * t <= opts.gap * (1.0 + std::abs(fx))) final_stage = true;
    double prev_dec2 = kInfinity;
    for (;;) {
      if (B.rows() > 0) {
        // Rows are orthonormal, so this is the exact projection onto B x = b.
        const Eigen::VectorXd fixed = x + B.transpose() * (b - B * x);
        if ((fixed.array() > 0.0).all()) x = fixed;
      }
      fx = f(x, &g, &h);
      const Eigen::VectorXd rd = g - t * x.cwiseInverse();
      const Eigen::VectorXd D = h + t * x.cwiseAbs2().cwiseInverse();
      const Eigen::VectorXd Dinv = D.cwiseInverse();
      const Eigen::VectorXd rp = b - B * x;
      Eigen::VectorXd dx;
      if (B.rows() > 0) {
        const Eigen::MatrixXd M = B * Dinv.asDiagonal() * B.transpose();
        const Eigen::VectorXd rhs = -B * Dinv.cwiseProduct(rd) - rp;
        const Eigen::VectorXd lambda = M.ldlt().solve(rhs);
        dx = Dinv.cwiseProduct(-rd - B.transpose() * lambda);
      } else {
        dx = -Dinv.cwiseProduct(rd);
      }
      const double dec2 = dx.dot(D.cwiseProduct(dx));
      const double phi = fx - t * x.array().log().sum();

      const bool primal_ok = rp.cwiseAbs().maxCoeff() <= 1e-13 * (1.0 + b.cwiseAbs().sum());
      if (final_stage) {
        // Newton until the decrement hits round-off: tiny, or no longer
        // shrinking quadratically.
        const double scale = 1.0 + std::abs(phi);
        const bool floor = dec2 <= 1e-28 * scale || (dec2 <= 1e-18 * scale && dec2 > 0.25 * prev_dec2);
        if (floor && primal_ok) break;
      } else if (!(dec2 > 2e-2) && primal_ok) {
        break;
      }
      prev_dec2 = dec2;
      if (steps >= opts.max_newton) {
        capped = true;
        break;
      }

      double amax = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (dx[j] < 0.0) amax = std::min(amax, -opts.fraction * x[j] / dx[j]);
      }
      const double slope = rd.dot(dx);
      // Resolution of phi: its terms can be much larger than phi itself.
      const double noise = 1e-14 * (1.0 + std::abs(phi) + x.cwiseAbs().dot(g.cwiseAbs()));
      double alpha = amax;
      bool accepted = false;
      Eigen::VectorXd trial(n);
      for (int k = 0; k < 60; ++k) {
        trial = x + alpha * dx;
        if ((trial.array() > 0.0).all()) {
          const double pt = barrier_value(f, trial, t);
          if (std::isfinite(pt) && pt <= phi + 1e-4 * alpha * std::min(slope, 0.0)) {
            accepted = true;
            break;
          }
          // Below that resolution Armijo is noise; take the full step.
          if (std::isfinite(pt) && -slope <= noise && pt <= phi + noise && alpha == amax) {
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      ++steps;
      if (opts.keep_trace) res.trace.push_back({steps, t, fx, std::sqrt(std::max(dec2, 0.0)), accepted ? alpha : 0.0});
      if (!accepted) break;
      x = trial;
    }
    if (final_stage || capped) break;
    t *= opts.shrink;
  }
  res.converged = !capped;
  res.newton_steps = steps;

  fx = f(x, &g, &h);
  res.x = x;
  res.t = t;
  res.value = fx;
  res.slack = t * x.cwiseInverse();
  const Eigen::VectorXd r = g - res.slack;
  const Eigen::VectorXd pr = B.rows() > 0 ? Eigen::VectorXd(r - B.transpose() * (B * r)) : r;
  res.stationarity = pr.cwiseAbs().maxCoeff() / (1.0 + g.cwiseAbs().maxCoeff());
  res.complementarity = static_cast<double>(n) * t;
  res.feasibility = B.rows() > 0 ? (B * x - b).cwiseAbs().maxCoeff() : 0.0;
  return res;
}

}  // namespace dualprice
