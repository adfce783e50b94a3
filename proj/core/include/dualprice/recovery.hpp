#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "dualprice/dual.hpp"
#include "dualprice/market.hpp"
#include "dualprice/utility.hpp"

namespace dualprice {

/// X = -V'(mu / p) - E, the optimal terminal gain. Throws NO_PRIMAL_OPTIMIZER
/// unless the dual solution has full support.
RandomVariable recover_terminal_wealth(const MarketTree& tree, const UtilityPair& u,
                                       const RandomVariable& endow, const DualSolution& sol);

/// max_l |U'(X_l + E_l) - mu_l/p_l| / (1 + mu_l/p_l).
double first_order_residual(const MarketTree& tree, const UtilityPair& u,
                            const RandomVariable& endow, const DualSolution& sol,
                            const RandomVariable& terminal);

struct PrimalSolution {
  RandomVariable terminal;   // X
  AdaptedProcess wealth;     // W_n = E_Q[X | n]
  StrategyProcess strategy;  // row n: holdings H_n over (n, n+1]; zero on leaves
  std::vector<bool> reached; // false on nodes of zero Q-mass (UNREACHED)
  RandomVariable gains;      // (H.S)_T rebuilt from the strategy
  double replication_residual = 0.0;  // max |W_c - W_n - H_n (S_c - S_n)| / (1 + max|W|)
  std::size_t worst_node = 0;
  double value = 0.0;        // E_P[U((H.S)_T + E)]
};

/// Wealth by backward induction under Q and holdings by one-step least
/// squares. Throws REPLICATION_GAP when the residual exceeds `tol`.
PrimalSolution extract_strategy(const MarketTree& tree, const UtilityPair& u,
                                const RandomVariable& endow, const DualSolution& sol,
                                const RandomVariable& terminal, double tol = 1e-8);

/// recover_terminal_wealth followed by extract_strategy.
PrimalSolution recover_primal(const MarketTree& tree, const UtilityPair& u,
                              const RandomVariable& endow, const DualSolution& sol,
                              double tol = 1e-8);

struct DriftViolation {
  std::size_t measure = 0;
  std::size_t node = 0;
  double drift = 0.0;
};

struct SupermartingaleReport {
  std::size_t measures_checked = 0;
  std::size_t measures_infinite = 0;  // skipped: infinite entropy
  double max_drift = 0.0;             // largest upward drift over checked measures
  double martingale_drift = 0.0;      // largest |drift| under the reference measure
  std::vector<DriftViolation> violations;
  bool martingale_ok = true;
  bool ok() const { return violations.empty() && martingale_ok; }
};

/// One-step drift E_q[W_c | n] - W_n at every inner node of positive q-mass.
std::vector<double> node_drifts(const MarketTree& tree, const AdaptedProcess& w,
                                const MeasureVector& q);

/// Checks drift <= tol (1 + max|W|) under each finite-entropy measure, and
/// |drift| <= the same bound under `reference` when given.
SupermartingaleReport verify_supermartingale(const MarketTree& tree, const AdaptedProcess& w,
                                             const std::vector<MeasureVector>& measures,
                                             const UtilityPair& u,
                                             const std::optional<MeasureVector>& reference,
                                             double tol = 1e-8);

struct DynamicDualNode {
  std::size_t node = 0;
  double mass = 0.0;       // mu(n)
  double value = 0.0;      // v_t at the node
  double derivative = 0.0; // Dv_t(n)
  double wealth = 0.0;     // W_n
  double residual = 0.0;   // |W_n + Dv_t(n)| / (1 + |W_n|)
};

/// Solves the conditional dual problem on every time-t subtree of positive
/// mass, with the mass fixed at mu(n).
std::vector<DynamicDualNode> dynamic_dual(const MarketTree& tree, const UtilityPair& u,
                                          const RandomVariable& endow, const DualSolution& sol,
                                          const AdaptedProcess& wealth, int t,
                                          std::size_t workers = 1);

struct SnellReport {
  AdaptedProcess envelope;       // max over tested measures at each node
  double max_equality_gap = 0.0; // max |envelope - W|
  double max_excess = 0.0;       // max over measures of E_Q[Z | n] - W_n
  std::size_t measures = 0;
  bool ok(double eq_tol = 1e-5, double lb_tol = 1e-7) const {
    return max_equality_gap <= eq_tol && max_excess <= lb_tol;
  }
};

/// Exponential utility only (NOT_EXPONENTIAL otherwise): evaluates
/// E_Q[(1/gamma) ln(p / mu) - E | n] over vertices mollified towards an
/// equivalent measure, plus Q itself.
SnellReport snell_envelope_exponential(const MarketTree& tree, const UtilityPair& u,
                                       const RandomVariable& endow, const DualSolution& sol,
                                       const AdaptedProcess& wealth,
                                       const std::vector<MeasureVector>& vertices,
                                       double epsilon = 1e-6);

}  // namespace dualprice
