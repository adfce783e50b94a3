#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace dualprice {

/// A separable convex function f(x) = sum_j f_j(x_j) on x > 0. `eval` returns
/// the value and fills the gradient and the diagonal of the Hessian when the
/// pointers are non-null.
using SeparableEval =
    std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad, Eigen::VectorXd* hess)>;

struct BarrierOptions {
  double t0 = 0.1;        // initial barrier weight, relative to 1 + |f(x0)|
  double shrink = 0.2;
  double gap = 1e-14;     // stop once n t <= gap (1 + |f|)
  double fraction = 0.99; // fraction-to-boundary rule
  int max_newton = 200;
  bool keep_trace = false;
};

struct BarrierStep {
  int step = 0;
  double t = 0.0;
  double objective = 0.0;
  double decrement = 0.0;
  double alpha = 0.0;
};

struct BarrierResult {
  Eigen::VectorXd x;
  Eigen::VectorXd slack;  // t / x, the multipliers of x >= 0
  double value = 0.0;     // f(x)
  double t = 0.0;
  int newton_steps = 0;
  bool converged = false;
  double stationarity = 0.0;    // |P(grad f - slack)|_inf / (1 + |grad f|_inf)
  double complementarity = 0.0; // n t
  double feasibility = 0.0;     // |B x - b|_inf
  std::vector<BarrierStep> trace;
};

/// Rows spanning the row space of M, orthonormalized; `rhs` is mapped alongside
/// so that {x : M x = rhs} is unchanged for consistent systems.
void orthonormalize_rows(const Eigen::MatrixXd& M, const Eigen::VectorXd& rhs,
                         Eigen::MatrixXd& rows, Eigen::VectorXd& mapped, double rel_tol = 1e-11);

/// Log-barrier Newton method for  min f(x)  s.t.  B x = b, x > 0.
/// B must have orthonormal rows (see orthonormalize_rows); x0 must be
/// strictly positive and feasible.
BarrierResult barrier_minimize(const SeparableEval& f, const Eigen::MatrixXd& B,
                               const Eigen::VectorXd& b, Eigen::VectorXd x0,
                               const BarrierOptions& opts = {});

}  // namespace dualprice
