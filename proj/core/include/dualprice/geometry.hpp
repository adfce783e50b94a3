#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dualprice/market.hpp"
#include "dualprice/utility.hpp"

namespace dualprice {

/// Homogeneous linear system whose nonnegative solutions are exactly the
/// martingale measures scaled by their mass. Row k belongs to
/// (inner node, asset) = labels[k].
struct MartingaleConstraints {
  Eigen::MatrixXd rows;
  std::vector<std::pair<std::size_t, std::size_t>> labels;

  std::size_t num_leaves() const { return static_cast<std::size_t>(rows.cols()); }
  /// max |A mu|, scaled by the mass of mu.
  double violation(const MeasureVector& mu) const;
};

MartingaleConstraints build_constraints(const MarketTree& tree);

/// Largest one-step drift |E_q[S_c | n] - S_n| over inner nodes of positive
/// q-mass, computed directly from the tree rather than from the rows.
double martingale_drift(const MarketTree& tree, const MeasureVector& q);
bool is_martingale_measure(const MarketTree& tree, const MeasureVector& q, double tol = 1e-9);

/// Leaf masses at or above this count as strictly positive.
inline constexpr double kEquivalenceThreshold = 1e-10;

/// Probability vector in M^a maximizing its smallest coordinate, or nullopt
/// when that coordinate falls below kEquivalenceThreshold (M^e empty).
/// Throws NO_MM when M^a itself is empty.
std::optional<MeasureVector> find_equivalent_mm(const MarketTree& tree);

/// Structural picture of M^a used by the solvers.
struct MarketGeometry {
  MartingaleConstraints constraints;
  /// Leaves charged by at least one martingale measure. Every measure in
  /// M^a is supported here, and some measure charges all of it.
  std::vector<bool> support;
  bool equivalent = false;  // support covers every leaf
  /// A probability vector in M^a maximizing its smallest coordinate on the
  /// support (zero off the support).
  MeasureVector interior;
  double interior_min = 0.0;

  std::size_t support_size() const;
};

/// Throws NO_MM when M^a is empty.
MarketGeometry analyze_market(const MarketTree& tree);

/// All extreme points of M^a by the double-description method on the cone
/// {mu >= 0, A mu = 0}, each normalized to unit mass. Throws CAP_EXCEEDED when
/// more than `cap` rays would be carried.
std::vector<MeasureVector> vertex_enumerate(const MartingaleConstraints& constraints,
                                            std::size_t cap = 10000);

/// Distinct vertices reached by simplex runs with random objectives. Weaker
/// evidence than the full list; used when enumeration is capped.
std::vector<MeasureVector> sample_vertices(const MartingaleConstraints& constraints,
                                           std::size_t samples, std::uint64_t seed);

/// Vertices by enumeration, falling back to sampling on CAP_EXCEEDED.
/// `exhaustive` reports which path was taken.
std::vector<MeasureVector> vertices_or_samples(const MartingaleConstraints& constraints,
                                               std::size_t cap, std::size_t samples,
                                               std::uint64_t seed, bool* exhaustive = nullptr);

/// sum_l p_l V(mu_l / p_l) with V(0) = U(inf); +inf when any term is.
double relative_entropy(const MarketTree& tree, const UtilityPair& u, const MeasureVector& mu);

/// min and max of E_q[x] over q in M^a. Throws NO_MM when M^a is empty.
std::pair<double, double> expectation_range(const MartingaleConstraints& constraints,
                                            const RandomVariable& x);

}  // namespace dualprice
