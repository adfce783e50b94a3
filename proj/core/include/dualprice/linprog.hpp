#pragma once

#include <vector>

#include <Eigen/Core>

namespace dualprice {

enum class RowSense { Equal, LessEqual, GreaterEqual };

/// minimize c'x  subject to  rows(A x, sense, b)  and  0 <= x <= upper.
/// Entries of `upper` may be +inf; an empty `upper` means all +inf.
struct LinearProgram {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  std::vector<RowSense> sense;
  Eigen::VectorXd c;
  Eigen::VectorXd upper;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  int pivots = 0;
};

/// Two-phase bounded-variable primal simplex on a dense tableau. Entering
/// and leaving variables follow Bland's smallest-index rule, so the pivot
/// sequence is deterministic and cannot cycle.
LpResult solve_lp(const LinearProgram& lp, int max_pivots = 100000);

}  // namespace dualprice
