#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace dualprice {

struct Minimum1D {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

/// Golden-section search for a unimodal f on [lo, hi].
Minimum1D golden_section(const std::function<double(double)>& f, double lo, double hi,
                         double xtol = 1e-10, int max_iter = 200);

/// Scans `points` equally spaced abscissae for the smallest value, then
/// refines by golden section between the neighbours of the best point.
Minimum1D scan_then_golden(const std::function<double(double)>& f, double lo, double hi,
                           int points, double xtol = 1e-10);

struct Root1D {
  double x = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool bracketed = false;
};

/// Root of a strictly decreasing h with derivative dh, by bracket expansion
/// from [x0 - 1, x0 + 1] followed by Newton steps safeguarded by bisection.
Root1D decreasing_root(const std::function<double(double)>& h,
                       const std::function<double(double)>& dh, double x0 = 0.0,
                       double limit = 1e300);

std::vector<double> logspace(double lo, double hi, std::size_t n);

/// Orthonormal basis (columns) of the null space of B. The rank cut-off is
/// relative to the largest singular value.
Eigen::MatrixXd null_space(const Eigen::MatrixXd& B, double rel_tol = 1e-11);

/// Numerical rank with the same cut-off convention as null_space.
Eigen::Index numerical_rank(const Eigen::MatrixXd& B, double rel_tol = 1e-11);

/// Worker count from DUALPRICE_WORKERS, else hardware concurrency (>= 1).
std::size_t default_workers();

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index runs
/// exactly once; the caller writes results into per-index slots, so output
/// order never depends on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace dualprice
