#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "dualprice/market.hpp"
#include "dualprice/utility.hpp"

namespace dualprice {

enum class OracleMode { Auto, Grid, Sample };

struct DualOracleOptions {
  OracleMode mode = OracleMode::Auto;
  double resolution = 0.02;  // grid step in polytope coordinates
  std::size_t samples = 2000;  // sample mode
  bool refine = true;          // compass search from the best grid/sample point
  double refine_tol = 1e-10;
  std::uint64_t seed = 1;
  int max_grid_dim = 3;
  std::size_t workers = 1;
};

struct DualOracleResult {
  double value = 0.0;
  MeasureVector q;      // best probability vector found
  double y = 0.0;       // its mass
  int dimension = 0;    // dimension of the martingale polytope
  std::size_t points = 0;  // grid or sample points evaluated
  double resolution = 0.0; // final step (grid step, or compass step when refined)
  OracleMode mode_used = OracleMode::Grid;
};

/// Minimizes E[V(y q/p)] + y E_q[E] over a discretized martingale polytope,
/// with the inner minimization over y done by 1-D search on ln y.
/// Grid mode throws DIMENSION above max_grid_dim.
DualOracleResult brute_force_dual(const MarketTree& tree, const UtilityPair& u,
                                  const RandomVariable& endow, const DualOracleOptions& opts = {});

struct PrimalOracleOptions {
  int starts = 32;
  std::uint64_t seed = 1;
  int max_dim = 12;
  int max_iter = 2000;
  double start_scale = 1.0;
};

struct PrimalOracleResult {
  double value = 0.0;
  StrategyProcess strategy;  // best holdings, one row per node
  int dimension = 0;
  int starts = 0;
  double grad_norm = 0.0;    // at the best start
};

/// Maximizes E[U((H.S)_T + E)] over unconstrained holdings by multi-start
/// BFGS. Throws DIMENSION when assets times inner nodes exceeds max_dim.
PrimalOracleResult brute_force_primal(const MarketTree& tree, const UtilityPair& u,
                                      const RandomVariable& endow,
                                      const PrimalOracleOptions& opts = {});

enum class OracleRegime { Equivalent, Degenerate, Arbitrage };
std::string to_string(OracleRegime r);

struct OracleReport {
  OracleRegime regime = OracleRegime::Equivalent;
  double brute_dual = 0.0;
  double brute_primal = 0.0;
  double solver_dual = 0.0;
  double solver_primal = 0.0;  // NaN without a primal optimizer
  double gap_solver = 0.0;     // |solver primal - solver dual| / (1 + |v|)
  double gap_dual = 0.0;       // |brute dual - solver dual| / (1 + |v|)
  double gap_primal = 0.0;     // |brute primal - solver dual| / (1 + |v|)
  double weak_duality = 0.0;   // brute primal - brute dual, should be <= 0 up to resolution
  double worst = 0.0;
  double resolution = 0.0;
  std::size_t dual_points = 0;
  int primal_starts = 0;
  int dual_dimension = 0;
  int primal_dimension = 0;
  std::string note;
};

struct OracleOptions {
  DualOracleOptions dual;
  PrimalOracleOptions primal;
  double tol = 1e-5;
};

/// Runs both brute-force programs and the main solver. Throws GAP_DETECTED
/// when any relative gap exceeds tol. Arbitrage markets are reported with
/// regime Arbitrage and every value set to U(inf).
OracleReport check_duality_gap(const MarketTree& tree, const UtilityPair& u,
                               const RandomVariable& endow, const OracleOptions& opts = {});

}  // namespace dualprice
