#include "dualprice/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include <Eigen/SVD>

namespace dualprice {

Minimum1D golden_section(const std::function<double(double)>& f, double lo, double hi,
                         double xtol, int max_iter) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  int evals = 2;
  for (int it = 0; it < max_iter && (b - a) > xtol * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
    ++evals;
  }
  Minimum1D m;
  if (fc <= fd) {
    m.x = c;
    m.value = fc;
  } else {
    m.x = d;
    m.value = fd;
  }
  // The endpoints are never evaluated by the interior recursion.
  const double fa = f(lo), fb = f(hi);
  evals += 2;
  if (fa < m.value) { m.x = lo; m.value = fa; }
  if (fb < m.value) { m.x = hi; m.value = fb; }
  m.evaluations = evals;
  return m;
}

Minimum1D scan_then_golden(const std::function<double(double)>& f, double lo, double hi,
                           int points, double xtol) {
  points = std::max(points, 3);
  const double h = (hi - lo) / (points - 1);
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < points; ++i) {
    double v = f(lo + i * h);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  const double a = lo + std::max(best - 1, 0) * h;
  const double b = lo + std::min(best + 1, points - 1) * h;
  Minimum1D m = golden_section(f, a, b, xtol);
  m.evaluations += points;
  if (best_val < m.value) {
    m.x = lo + best * h;
    m.value = best_val;
  }
  return m;
}

Root1D decreasing_root(const std::function<double(double)>& h,
                       const std::function<double(double)>& dh, double x0, double limit) {
  Root1D r;
  double lo = x0 - 1.0, hi = x0 + 1.0;
  double hlo = h(lo), hhi = h(hi);
  double step = 1.0;
  while (hlo < 0.0 && lo > -limit) {
    hi = lo;
    hhi = hlo;
    step *= 2.0;
    lo = x0 - step;
    hlo = h(lo);
  }
  step = 1.0;
  while (hhi > 0.0 && hi < limit) {
    lo = hi;
    hlo = hhi;
    step *= 2.0;
    hi = x0 + step;
    hhi = h(hi);
  }
  if (!(hlo >= 0.0 && hhi <= 0.0)) {
    r.x = hlo < 0.0 ? -std::numeric_limits<double>::infinity()
                     : std::numeric_limits<double>::infinity();
    r.residual = std::numeric_limits<double>::infinity();
    return r;
  }
  r.bracketed = true;
  if (hlo == 0.0) { r.x = lo; return r; }
  if (hhi == 0.0) { r.x = hi; return r; }

  double x = std::clamp(x0, lo, hi);
  double hx = h(x);
  for (int it = 0; it < 200; ++it) {
    r.iterations = it + 1;
    if (hx == 0.0) break;
    if (hx > 0.0) lo = x; else hi = x;
    const double slope = dh(x);
    double next = slope < 0.0 && std::isfinite(slope) ? x - hx / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double delta = std::abs(next - x);
    x = next;
    hx = h(x);
    if (delta <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(x))) break;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(x))) break;
  }
  r.x = x;
  r.residual = hx;
  return r;
}

std::vector<double> logspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

namespace {

Eigen::Index rank_of(const Eigen::JacobiSVD<Eigen::MatrixXd>& svd, double rel_tol) {
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > rel_tol * s[0]) ++r;
  }
  return r;
}

}  // namespace

Eigen::MatrixXd null_space(const Eigen::MatrixXd& B, double rel_tol) {
  const Eigen::Index n = B.cols();
  if (B.rows() == 0) return Eigen::MatrixXd::Identity(n, n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeFullV);
  const Eigen::Index r = rank_of(svd, rel_tol);
  return svd.matrixV().rightCols(n - r);
}

Eigen::Index numerical_rank(const Eigen::MatrixXd& B, double rel_tol) {
  if (B.rows() == 0 || B.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B);
  return rank_of(svd, rel_tol);
}

std::size_t default_workers() {
  if (const char* env = std::getenv("DUALPRICE_WORKERS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex err_mu;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace dualprice
