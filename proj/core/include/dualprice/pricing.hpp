#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dualprice/dual.hpp"
#include "dualprice/market.hpp"
#include "dualprice/utility.hpp"

namespace dualprice {

/// u(E) as the optimal dual value.
double optimal_value(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow);

/// [inf_Q E_Q[B], sup_Q E_Q[B]] over the martingale polytope. Throws NO_MM.
std::pair<double, double> price_bounds(const MarketTree& tree, const RandomVariable& claim);
std::pair<double, double> price_bounds(const DualContext& ctx, const RandomVariable& claim);

/// Bid price p with u(E + B - p) = u(E).
double indifference_price(const DualContext& ctx, const UtilityPair& u,
                          const RandomVariable& endow, const RandomVariable& claim);
/// Offer price -p(-B).
double offer_price(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow,
                   const RandomVariable& claim);
/// c with u(E + c) = u(E + B).
double certainty_equivalent(const DualContext& ctx, const UtilityPair& u,
                            const RandomVariable& endow, const RandomVariable& claim);

/// alpha(q) = inf_y (1/y) {E[V(y q/p) + y (q/p) E] - v_E}. Throws INFINITE when
/// q has infinite entropy. Pass v_E when known to skip its solve.
double entropic_penalty(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow,
                        const MeasureVector& q, std::optional<double> v_endow = std::nullopt);

/// inf_{y > 0} (v_{E+B}(y) - v_E) / y, the bid price written as a penalized
/// worst-case expectation; computed without the bisection of
/// indifference_price.
double price_via_penalty(const DualContext& ctx, const UtilityPair& u,
                         const RandomVariable& endow, const RandomVariable& claim);

struct PriceReport {
  double bid = 0.0;
  double offer = 0.0;
  double certainty_equivalent = 0.0;
  double davis = 0.0;  // E_Q[B] under the endowment-only optimal measure
  double lp_lower = 0.0;
  double lp_upper = 0.0;
  double penalty_bid = 0.0;
  double agreement = 0.0;  // |penalty_bid - bid| / (1 + |bid|)

  bool range_ok(double tol = 1e-9) const {
    return lp_lower <= bid + tol && bid <= davis + tol && davis <= lp_upper + tol;
  }
  bool bid_offer_ok(double tol = 1e-9) const { return bid <= offer + tol; }
};

PriceReport price_report(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow,
                         const RandomVariable& claim, bool with_penalty = true);

struct VolumePoint {
  double beta = 0.0;
  double price = 0.0;  // p(beta B) / beta
};

struct VolumeCurve {
  std::vector<VolumePoint> points;
  double lp_lower = 0.0;
  double davis = 0.0;
  double max_increase = 0.0;  // largest p(beta_{i+1}) - p(beta_i)
  bool non_increasing(double tol = 1e-9) const { return max_increase <= tol; }
};

VolumeCurve average_price_curve(const DualContext& ctx, const UtilityPair& u,
                                const RandomVariable& endow, const RandomVariable& claim,
                                const std::vector<double>& betas, std::size_t workers = 1);

/// Default volume grid 1e-4 ... 1e4, three points per decade.
std::vector<double> default_volume_grid();

/// The market with extra assets whose node prices are the columns of
/// `extra` (one row per node, in node order).
MarketTree augment_market(const MarketTree& tree, const StrategyProcess& extra,
                          const std::vector<std::string>& names = {});

struct MubppReport {
  bool is_mubpp = false;       // drift verdict
  double max_drift = 0.0;      // largest |E_Q[S'_c | n] - S'_n| over nodes of positive mass
  std::vector<double> drifts;  // per node, first extra asset
  bool drift_verdict = false;
  double u_base = 0.0;
  double u_augmented = 0.0;
  bool augment_infeasible = false;
  std::string augment_note;
  bool utility_verdict = false;
  bool agree() const { return drift_verdict == utility_verdict; }
};

/// Drift of S' under the optimal measure versus utility in the augmented
/// market. Drift tolerance and utility tolerance are both scaled.
MubppReport check_mubpp(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow,
                        const StrategyProcess& sprime, double drift_tol = 1e-8,
                        double utility_tol = 1e-7);

struct Certificate {
  std::string name;
  double margin = 0.0;  // >= -tolerance passes
  double tolerance = 0.0;
  bool passed() const { return margin >= -tolerance; }
};

struct SensitivityReport {
  std::vector<double> values;  // u(E_i)
  std::vector<Certificate> checks;
  bool ok() const {
    for (const auto& c : checks) {
      if (!c.passed()) return false;
    }
    return true;
  }
};

struct SensitivityOptions {
  std::vector<double> lambdas{0.25, 0.5, 0.75};
  int continuity_terms = 8;    // E + 1/n for n = 1..terms, around the first endowment
  double tol = 1e-9;
  std::vector<RandomVariable> claims;  // sandwich checks around the first endowment
};

/// Monotonicity, concavity, continuity and sandwich certificates for a list
/// of endowments on one market.
SensitivityReport endowment_sensitivity(const DualContext& ctx, const UtilityPair& u,
                                        const std::vector<RandomVariable>& endowments,
                                        const SensitivityOptions& opts = {});

}  // namespace dualprice
