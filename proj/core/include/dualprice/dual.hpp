#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dualprice/barrier.hpp"
#include "dualprice/geometry.hpp"
#include "dualprice/market.hpp"
#include "dualprice/utility.hpp"

namespace dualprice {

enum class SupportFlag { Equivalent, Degenerate };
std::string_view to_string(SupportFlag flag);

struct DualOptions {
  double tol = 1e-9;  // relative stationarity target
  int max_newton = 200;
  /// Fix the total mass, i.e. solve for v(y) instead of v.
  std::optional<double> mass;
  /// Strictly positive on the support and feasible; defaults to the interior
  /// measure of the market scaled to the right mass.
  std::optional<MeasureVector> start;
  bool keep_log = false;
};

struct DualSolution {
  MeasureVector mu;        // optimal measure, per leaf
  double mass = 0.0;       // y = sum mu
  MeasureVector q;         // mu / mass
  double value = 0.0;      // F(mu)
  double stationarity = 0.0;
  double complementarity = 0.0;
  double feasibility = 0.0;  // martingale constraint violation, scaled by mass
  SupportFlag support = SupportFlag::Equivalent;
  std::vector<bool> support_mask;
  int newton_steps = 0;
  std::vector<BarrierStep> log;
};

/// A market prepared for repeated dual solves: the tree, its martingale
/// geometry and the orthonormalized constraint rows on the support.
/// Immutable and cheap to copy.
class DualContext {
 public:
  explicit DualContext(const MarketTree& tree);

  const MarketTree& tree() const { return *tree_; }
  const MarketGeometry& geometry() const { return data_->geometry; }
  const std::vector<Eigen::Index>& support_index() const { return data_->support_index; }

  /// Orthonormal rows for A restricted to the support, with or without the
  /// mass row. For the mass variant the right-hand side is mass * mass_rhs().
  const Eigen::MatrixXd& rows(bool with_mass) const {
    return with_mass ? data_->rows_mass : data_->rows;
  }
  const Eigen::VectorXd& mass_rhs() const { return data_->mass_rhs; }

 private:
  struct Data {
    MarketGeometry geometry;
    std::vector<Eigen::Index> support_index;
    Eigen::MatrixXd rows;
    Eigen::MatrixXd rows_mass;
    Eigen::VectorXd mass_rhs;
  };
  std::shared_ptr<const MarketTree> tree_;
  std::shared_ptr<const Data> data_;
};

/// F(mu) = sum_l p_l V(mu_l / p_l) + mu_l E_l, with V(0) = U(inf).
double dual_objective(const MarketTree& tree, const UtilityPair& u, const RandomVariable& endow,
                      const MeasureVector& mu);

/// Throws NO_MM, INFEASIBLE_ENTROPY or NONCONVERGED.
DualSolution solve_dual(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow,
                        const DualOptions& opts = {});
DualSolution solve_dual(const MarketTree& tree, const UtilityPair& u, const RandomVariable& endow,
                        const DualOptions& opts = {});

struct CurvePoint {
  double y = 0.0;
  double value = 0.0;
  double derivative = 0.0;
  MeasureVector q;
};

/// v(y) on the given masses, solved independently (and concurrently when
/// workers > 1); the output order follows `ys`.
std::vector<CurvePoint> dual_value_curve(const DualContext& ctx, const UtilityPair& u,
                                         const RandomVariable& endow, const std::vector<double>& ys,
                                         std::size_t workers = 1);

/// E_{Q_y}[V'(mu_y / p) + E] for a mass-fixed solution mu_y.
double curve_slope(const MarketTree& tree, const UtilityPair& u, const RandomVariable& endow,
                   const DualSolution& fixed_mass);

/// v'(y), from the mass-y solution.
double dual_derivative(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow,
                       double y);

struct SupportReport {
  std::size_t vertices_checked = 0;  // with finite entropy
  std::vector<std::pair<std::size_t, std::size_t>> violations;  // (vertex, leaf)
  bool ok() const { return violations.empty(); }
};

/// Every leaf charged by a finite-entropy vertex must be charged by mu.
SupportReport check_maximal_support(const MarketTree& tree, const UtilityPair& u,
                                    const DualSolution& sol,
                                    const std::vector<MeasureVector>& vertices);

}  // namespace dualprice
