#pragma once

// Test-side helpers. Everything here is written independently of the
// library's numerics so that it can serve as an oracle.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "dualprice/market.hpp"
#include "dualprice/utility.hpp"

namespace testing_support {

using dualprice::MarketTree;

/// Terminal gains (H.S)_T for holdings H (one row per node).
inline Eigen::VectorXd gains_of(const MarketTree& tree, const Eigen::MatrixXd& H) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(tree.num_leaves()));
  for (std::size_t l = 0; l < tree.num_leaves(); ++l) {
    double acc = 0.0;
    for (std::size_t c = tree.leaf_node(l); c != MarketTree::root(); c = tree.node(c).parent) {
      const std::size_t p = tree.node(c).parent;
      for (std::size_t j = 0; j < tree.num_assets(); ++j) {
        acc += H(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) *
               (tree.node(c).prices[j] - tree.node(p).prices[j]);
      }
    }
    g[static_cast<Eigen::Index>(l)] = acc;
  }
  return g;
}

inline Eigen::MatrixXd random_holdings(const MarketTree& tree, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tree.num_nodes()),
                                            static_cast<Eigen::Index>(tree.num_assets()));
  for (std::size_t k : tree.inner_nodes()) {
    for (Eigen::Index j = 0; j < H.cols(); ++j) H(static_cast<Eigen::Index>(k), j) = n(rng);
  }
  return H;
}

/// Exponential utility: inf_y E[V(y q/p)] + y E_q[E] in closed form,
/// ln y* = -sum q ln(q/p) - gamma E_q[E] and the value is C - y*/gamma.
inline double exp_inner_min(const Eigen::VectorXd& p, double gamma, double C,
                            const Eigen::VectorXd& endow, const Eigen::VectorXd& q) {
  double ent = 0.0;
  for (Eigen::Index l = 0; l < p.size(); ++l) {
    if (q[l] > 0.0) ent += q[l] * std::log(q[l] / p[l]);
  }
  const double ly = -ent - gamma * q.dot(endow);
  return C - std::exp(ly) / gamma;
}

/// Plain golden-section minimizer.
inline double golden_min(const std::function<double(double)>& f, double a, double b,
                         double tol = 1e-12, double* argmin = nullptr) {
  const double r = 0.6180339887498949;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d; d = c; fd = fc; c = b - r * (b - a); fc = f(c);
    } else {
      a = c; c = d; fc = fd; d = a + r * (b - a); fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  if (argmin) *argmin = x;
  return f(x);
}

inline Eigen::VectorXd uniform_vector(Eigen::Index n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline dualprice::UtilityPair random_utility(bool exponential, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (exponential) return dualprice::UtilityPair::exponential(0.5 + 1.5 * u(rng), 1.0);
  return dualprice::UtilityPair::two_power(0.3 + 0.4 * u(rng), 0.5 + u(rng), 1.0);
}

}  // namespace testing_support
