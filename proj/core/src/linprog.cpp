#include "dualprice/linprog.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/LU>

#include "dualprice/error.hpp"

namespace dualprice {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-10;
constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Dense tableau for  min c'x, Ax = b, 0 <= x <= u  with an explicit basis.
class Tableau {
 public:
  Tableau(Eigen::MatrixXd A, Eigen::VectorXd b, Eigen::VectorXd u)
      : A0_(A), b0_(b), T_(std::move(A)), u_(std::move(u)),
        x_(Eigen::VectorXd::Zero(T_.cols())), at_upper_(T_.cols(), false),
        basis_(T_.rows()), is_basic_(T_.cols(), false) {}

  void set_basis(const std::vector<Eigen::Index>& basis) {
    basis_ = basis;
    for (Eigen::Index j : basis_) is_basic_[j] = true;
    // The initial basis is the identity block, so the tableau is A itself.
    for (Eigen::Index i = 0; i < T_.rows(); ++i) x_[basis_[i]] = b0_[i];
  }

  // Returns Optimal, Unbounded or IterationLimit.
  LpStatus optimize(const Eigen::VectorXd& c, const std::vector<bool>& frozen, int& pivots,
                    int max_pivots) {
    const Eigen::Index m = T_.rows(), n = T_.cols();
    for (;;) {
      if (pivots >= max_pivots) return LpStatus::IterationLimit;
      Eigen::VectorXd cb(m);
      for (Eigen::Index i = 0; i < m; ++i) cb[i] = c[basis_[i]];
      const double scale = 1.0 + c.cwiseAbs().maxCoeff();

      Eigen::Index enter = -1;
      double dir = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (is_basic_[j] || frozen[j]) continue;
        const double d = c[j] - cb.dot(T_.col(j));
        if (!at_upper_[j] && d < -kCostTol * scale && u_[j] > 0.0) {
          enter = j;
          dir = 1.0;
          break;
        }
        if (at_upper_[j] && d > kCostTol * scale) {
          enter = j;
          dir = -1.0;
          break;
        }
      }
      if (enter < 0) return LpStatus::Optimal;

      double theta = u_[enter];
      Eigen::Index leave = -1;
      bool leave_to_upper = false;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double alpha = dir * T_(i, enter);
        const Eigen::Index bi = basis_[i];
        double limit = kInfinity;
        bool to_upper = false;
        if (alpha > kPivotTol) {
          limit = std::max(x_[bi], 0.0) / alpha;
        } else if (alpha < -kPivotTol && std::isfinite(u_[bi])) {
          limit = std::max(u_[bi] - x_[bi], 0.0) / -alpha;
          to_upper = true;
        } else {
          continue;
        }
        if (limit < theta || (limit == theta && leave >= 0 && bi < basis_[leave])) {
          theta = limit;
          leave = i;
          leave_to_upper = to_upper;
        }
      }
      if (!std::isfinite(theta)) return LpStatus::Unbounded;

      for (Eigen::Index i = 0; i < m; ++i) x_[basis_[i]] -= theta * dir * T_(i, enter);
      x_[enter] += theta * dir;
      ++pivots;

      if (leave < 0) {
        at_upper_[enter] = !at_upper_[enter];
        x_[enter] = at_upper_[enter] ? u_[enter] : 0.0;
        continue;
      }
      const Eigen::Index out = basis_[leave];
      x_[out] = leave_to_upper ? u_[out] : 0.0;
      at_upper_[out] = leave_to_upper;
      is_basic_[out] = false;
      pivot(leave, enter);
      basis_[leave] = enter;
      is_basic_[enter] = true;
      at_upper_[enter] = false;
    }
  }

  // After phase 1, drive artificial columns [first, n) out of the basis where a
  // structural column can replace them.
  void expel(Eigen::Index first) {
    for (Eigen::Index i = 0; i < T_.rows(); ++i) {
      if (basis_[i] < first) continue;
      Eigen::Index best = -1;
      for (Eigen::Index j = 0; j < first; ++j) {
        if (!is_basic_[j] && std::abs(T_(i, j)) > 1e-9) {
          best = j;
          break;
        }
      }
      if (best < 0) continue;
      const Eigen::Index out = basis_[i];
      is_basic_[out] = false;
      at_upper_[out] = false;
      x_[out] = 0.0;
      pivot(i, best);
      basis_[i] = best;
      is_basic_[best] = true;
    }
  }

  void set_upper(Eigen::Index j, double u) { u_[j] = u; }

  // Recomputes basic values from the original system to shed accumulated
  // round-off.
  void polish() {
    const Eigen::Index m = T_.rows();
    if (m == 0) return;
    Eigen::VectorXd rhs = b0_;
    for (Eigen::Index j = 0; j < A0_.cols(); ++j) {
      if (!is_basic_[j]) {
        x_[j] = at_upper_[j] ? u_[j] : 0.0;
        if (x_[j] != 0.0) rhs -= A0_.col(j) * x_[j];
      }
    }
    Eigen::MatrixXd B(m, m);
    for (Eigen::Index i = 0; i < m; ++i) B.col(i) = A0_.col(basis_[i]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
    if (!lu.isInvertible()) return;
    const Eigen::VectorXd xb = lu.solve(rhs);
    if (!xb.allFinite()) return;
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index j = basis_[i];
      x_[j] = std::clamp(xb[i], 0.0, u_[j]);
    }
  }

  const Eigen::VectorXd& x() const { return x_; }

 private:
  void pivot(Eigen::Index r, Eigen::Index col) {
    const double piv = T_(r, col);
    T_.row(r) /= piv;
    for (Eigen::Index i = 0; i < T_.rows(); ++i) {
      if (i == r) continue;
      const double f = T_(i, col);
      if (f != 0.0) T_.row(i) -= f * T_.row(r);
    }
  }

  Eigen::MatrixXd A0_;
  Eigen::VectorXd b0_;
  Eigen::MatrixXd T_;
  Eigen::VectorXd u_;
  Eigen::VectorXd x_;
  std::vector<bool> at_upper_;
  std::vector<Eigen::Index> basis_;
  std::vector<bool> is_basic_;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, int max_pivots) {
  const Eigen::Index m = lp.A.rows();
  const Eigen::Index n = lp.A.cols();
  if (lp.b.size() != m || static_cast<Eigen::Index>(lp.sense.size()) != m || lp.c.size() != n ||
      (lp.upper.size() != 0 && lp.upper.size() != n)) {
    throw Error(ErrorCode::InvalidArgument, "linear program dimensions are inconsistent");
  }

  Eigen::Index slacks = 0;
  for (RowSense s : lp.sense) slacks += s != RowSense::Equal;
  const Eigen::Index ns = n + slacks;
  const Eigen::Index total = ns + m;

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, total);
  Eigen::VectorXd b(m);
  Eigen::VectorXd u = Eigen::VectorXd::Constant(total, kInfinity);
  if (lp.upper.size() == n) u.head(n) = lp.upper;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (u[j] < 0.0) {
      LpResult r;
      r.status = LpStatus::Infeasible;
      return r;
    }
  }

  Eigen::Index s = n;
  for (Eigen::Index i = 0; i < m; ++i) {
    A.row(i).head(n) = lp.A.row(i);
    b[i] = lp.b[i];
    if (lp.sense[i] == RowSense::LessEqual) A(i, s++) = 1.0;
    if (lp.sense[i] == RowSense::GreaterEqual) A(i, s++) = -1.0;
    const double norm = std::max(A.row(i).head(ns).cwiseAbs().maxCoeff(), std::abs(b[i]));
    if (norm > 0.0) {
      A.row(i) /= norm;
      b[i] /= norm;
    }
    if (b[i] < 0.0) {
      A.row(i) *= -1.0;
      b[i] = -b[i];
    }
    A(i, ns + i) = 1.0;
  }

  Tableau tab(A, b, u);
  std::vector<Eigen::Index> basis(m);
  for (Eigen::Index i = 0; i < m; ++i) basis[i] = ns + i;
  tab.set_basis(basis);

  LpResult result;
  std::vector<bool> frozen(total, false);
  Eigen::VectorXd c1 = Eigen::VectorXd::Zero(total);
  c1.tail(m).setOnes();
  LpStatus st = tab.optimize(c1, frozen, result.pivots, max_pivots);
  if (st == LpStatus::IterationLimit) {
    result.status = st;
    return result;
  }
  const double infeas = tab.x().tail(m).sum();
  if (infeas > 1e-9 * (1.0 + b.cwiseAbs().sum())) {
    result.status = LpStatus::Infeasible;
    return result;
  }

  tab.expel(ns);
  for (Eigen::Index j = ns; j < total; ++j) {
    frozen[j] = true;
    tab.set_upper(j, 0.0);
  }
  Eigen::VectorXd c2 = Eigen::VectorXd::Zero(total);
  c2.head(n) = lp.c;
  st = tab.optimize(c2, frozen, result.pivots, max_pivots);
  tab.polish();
  result.status = st;
  result.x = tab.x().head(n);
  result.objective = lp.c.dot(result.x);
  return result;
}

}  // namespace dualprice
