#include "dualprice/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "dualprice/error.hpp"
#include "dualprice/geometry.hpp"
#include "dualprice/numerics.hpp"

namespace dualprice {

double optimal_value(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow) {
  return solve_dual(ctx, u, endow).value;
}

std::pair<double, double> price_bounds(const MarketTree& tree, const RandomVariable& claim) {
  return expectation_range(build_constraints(tree), claim);
}

std::pair<double, double> price_bounds(const DualContext& ctx, const RandomVariable& claim) {
  return expectation_range(ctx.geometry().constraints, claim);
}

namespace {

// Finds p with v(base - p) = target. v(base - p) is concave and strictly
// decreasing in p with slope -mass, so Newton from the right of the root
// converges monotonically; bisection guards each step.
//
// `lo` must satisfy v(base - lo) >= target. The upper end is searched from
// lo in doubling steps, never further than `cap` unless the value at cap is
// still above target.
double solve_cash_shift(const DualContext& ctx, const UtilityPair& u, const RandomVariable& base,
                        double target, double lo, double cap) {
  struct Eval {
    double g;
    double mass;
  };
  auto eval = [&](double p) {
    const DualSolution s = solve_dual(ctx, u, (base.array() - p).matrix());
    return Eval{s.value - target, s.mass};
  };
  const double ftol = 1e-12 * (1.0 + std::abs(target));

  Eval flo = eval(lo);
  for (int k = 0; flo.g < 0.0; ++k) {
    if (k == 60) throw Error(ErrorCode::BracketFail, "no lower bracket for the cash shift");
    lo -= std::ldexp(1.0, k);
    flo = eval(lo);
  }
  if (flo.g <= ftol) return lo;

  double step = 1.0;
  double hi = std::min(lo + step, std::max(cap, lo + step));
  Eval fhi = eval(hi);
  for (int k = 0; fhi.g > 0.0; ++k) {
    if (k == 80) throw Error(ErrorCode::BracketFail, "no upper bracket for the cash shift");
    lo = hi;
    flo = fhi;
    step *= 2.0;
    hi = hi < cap ? std::min(hi + step, cap) : hi + step;
    fhi = eval(hi);
  }
  if (-fhi.g <= ftol) return hi;

  for (int it = 0; it < 200; ++it) {
    double p = hi + fhi.g / fhi.mass;
    if (!(p > lo && p < hi)) p = 0.5 * (lo + hi);
    const Eval fp = eval(p);
    if (fp.g > 0.0) {
      lo = p;
      flo = fp;
      // Newton stalls only near round-off; bisect to force the bracket closed.
      const double mid = 0.5 * (lo + hi);
      const Eval fm = eval(mid);
      if (fm.g > 0.0) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
        fhi = fm;
      }
    } else {
      hi = p;
      fhi = fp;
    }
    if (std::abs(fhi.g) <= ftol) return hi;
    if (std::abs(flo.g) <= ftol) return lo;
    if (hi - lo <= 4e-16 * (1.0 + std::abs(hi))) break;
  }
  return std::abs(flo.g) < std::abs(fhi.g) ? lo : hi;
}

}  // namespace

double indifference_price(const DualContext& ctx, const UtilityPair& u,
                          const RandomVariable& endow, const RandomVariable& claim) {
  const DualSolution base = solve_dual(ctx, u, endow);
  const auto [lp_lo, lp_hi] = price_bounds(ctx, claim);
  const double davis = base.q.dot(claim);
  return solve_cash_shift(ctx, u, endow + claim, base.value, lp_lo - 1.0,
                          std::min(davis, lp_hi) + 1.0);
}

double offer_price(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow,
                   const RandomVariable& claim) {
  return -indifference_price(ctx, u, endow, -claim);
}

double certainty_equivalent(const DualContext& ctx, const UtilityPair& u,
                            const RandomVariable& endow, const RandomVariable& claim) {
  const DualSolution with = solve_dual(ctx, u, endow + claim);
  const auto [lp_lo, lp_hi] = price_bounds(ctx, claim);
  (void)lp_lo;
  const double davis = with.q.dot(claim);
  // u(E - p) = u(E + B) at p = -c.
  return -solve_cash_shift(ctx, u, endow, with.value, -lp_hi - 1.0, -davis + 1.0);
}

namespace {

// Minimizes a quasi-convex function of s = ln y: scan a window of width 16
// centred at s0, slide it while the minimum sits on its edge, then refine
// between the neighbours of the best point by golden section.
Minimum1D minimize_log_mass(const std::function<double(double)>& h, double s0) {
  constexpr int kPoints = 17;
  constexpr double kHalf = 8.0;
  double centre = s0;
  std::vector<double> vals(kPoints);
  int best = 0;
  for (int slide = 0; slide < 40; ++slide) {
    const double a = centre - kHalf;
    const double step = 2.0 * kHalf / (kPoints - 1);
    for (int i = 0; i < kPoints; ++i) vals[i] = h(a + i * step);
    best = static_cast<int>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    if (best != 0 && best != kPoints - 1) {
      const double lo = a + (best - 1) * step;
      const double hi = a + (best + 1) * step;
      Minimum1D m = golden_section(h, lo, hi, 1e-9);
      if (vals[best] < m.value) {
        m.x = a + best * step;
        m.value = vals[best];
      }
      return m;
    }
    centre += best == 0 ? -kHalf : kHalf;
  }
  throw Error(ErrorCode::BracketFail, "no interior minimum over the mass");
}

}  // namespace

double entropic_penalty(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow,
                        const MeasureVector& q, std::optional<double> v_endow) {
  const MarketTree& tree = ctx.tree();
  if (relative_entropy(tree, u, q) == kInf) {
    throw Error(ErrorCode::Infinite, "the measure has infinite relative entropy");
  }
  double v = 0.0;
  double s0 = 0.0;
  if (v_endow) {
    v = *v_endow;
  } else {
    const DualSolution base = solve_dual(ctx, u, endow);
    v = base.value;
    s0 = std::log(base.mass);
  }
  auto h = [&](double s) {
    const double y = std::exp(s);
    return (dual_objective(tree, u, endow, y * q) - v) / y;
  };
  return minimize_log_mass(h, s0).value;
}

double price_via_penalty(const DualContext& ctx, const UtilityPair& u,
                         const RandomVariable& endow, const RandomVariable& claim) {
  const DualSolution base = solve_dual(ctx, u, endow);
  const RandomVariable shifted = endow + claim;
  auto h = [&](double s) {
    const double y = std::exp(s);
    DualOptions o;
    o.mass = y;
    return (solve_dual(ctx, u, shifted, o).value - base.value) / y;
  };
  return minimize_log_mass(h, std::log(base.mass)).value;
}

PriceReport price_report(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow,
                         const RandomVariable& claim, bool with_penalty) {
  PriceReport r;
  const DualSolution base = solve_dual(ctx, u, endow);
  std::tie(r.lp_lower, r.lp_upper) = price_bounds(ctx, claim);
  r.davis = base.q.dot(claim);
  r.bid = indifference_price(ctx, u, endow, claim);
  r.offer = offer_price(ctx, u, endow, claim);
  r.certainty_equivalent = certainty_equivalent(ctx, u, endow, claim);
  if (with_penalty) {
    r.penalty_bid = price_via_penalty(ctx, u, endow, claim);
    r.agreement = std::abs(r.penalty_bid - r.bid) / (1.0 + std::abs(r.bid));
  } else {
    r.penalty_bid = r.bid;
  }
  return r;
}

std::vector<double> default_volume_grid() { return logspace(1e-4, 1e4, 25); }

VolumeCurve average_price_curve(const DualContext& ctx, const UtilityPair& u,
                                const RandomVariable& endow, const RandomVariable& claim,
                                const std::vector<double>& betas, std::size_t workers) {
  VolumeCurve curve;
  curve.lp_lower = price_bounds(ctx, claim).first;
  curve.davis = solve_dual(ctx, u, endow).q.dot(claim);
  curve.points.resize(betas.size());
  parallel_for(betas.size(), workers, [&](std::size_t i) {
    if (!(betas[i] > 0.0)) throw Error(ErrorCode::Domain, "volumes must be positive");
    curve.points[i] = {betas[i], indifference_price(ctx, u, endow, betas[i] * claim) / betas[i]};
  });
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    curve.max_increase =
        std::max(curve.max_increase, curve.points[i].price - curve.points[i - 1].price);
  }
  return curve;
}

MarketTree augment_market(const MarketTree& tree, const StrategyProcess& extra,
                          const std::vector<std::string>& names) {
  if (extra.rows() != static_cast<Eigen::Index>(tree.num_nodes())) {
    throw Error(ErrorCode::InvalidArgument, "extra price process needs one row per node");
  }
  std::vector<std::string> assets = tree.assets();
  for (Eigen::Index j = 0; j < extra.cols(); ++j) {
    const auto sj = static_cast<std::size_t>(j);
    assets.push_back(sj < names.size() ? names[sj] : "extra" + std::to_string(j + 1));
  }
  // Increments at round-off level (a constant pushed through conditional
  // expectations, say) are snapped to zero; their signs are noise and would
  // otherwise read as arbitrage.
  StrategyProcess snapped = extra;
  for (int t = 1; t <= tree.horizon(); ++t) {
    for (std::size_t k : tree.nodes_at(t)) {
      const auto r = static_cast<Eigen::Index>(k);
      const auto pr = static_cast<Eigen::Index>(tree.node(k).parent);
      for (Eigen::Index j = 0; j < extra.cols(); ++j) {
        if (std::abs(snapped(r, j) - snapped(pr, j)) <= 1e-13 * (1.0 + std::abs(snapped(pr, j)))) {
          snapped(r, j) = snapped(pr, j);
        }
      }
    }
  }
  std::vector<NodeSpec> specs = tree.specs();
  for (std::size_t k = 0; k < specs.size(); ++k) {
    for (Eigen::Index j = 0; j < extra.cols(); ++j) {
      specs[k].prices.push_back(format_decimal(snapped(static_cast<Eigen::Index>(k), j)));
    }
  }
  return MarketTree(std::move(assets), std::move(specs));
}

MubppReport check_mubpp(const DualContext& ctx, const UtilityPair& u, const RandomVariable& endow,
                        const StrategyProcess& sprime, double drift_tol, double utility_tol) {
  const MarketTree& tree = ctx.tree();
  MubppReport rep;
  const DualSolution base = solve_dual(ctx, u, endow);
  rep.u_base = base.value;

  rep.drifts.assign(tree.num_nodes(), 0.0);
  for (std::size_t k : tree.inner_nodes()) {
    const double mass = subtree_mass(tree, base.q, k);
    if (!(mass > 0.0)) continue;
    for (Eigen::Index j = 0; j < sprime.cols(); ++j) {
      double e = 0.0;
      for (std::size_t c : tree.node(k).children) {
        e += subtree_mass(tree, base.q, c) * sprime(static_cast<Eigen::Index>(c), j);
      }
      const double d = e / mass - sprime(static_cast<Eigen::Index>(k), j);
      if (j == 0) rep.drifts[k] = d;
      rep.max_drift = std::max(rep.max_drift, std::abs(d));
    }
  }
  const double scale = 1.0 + (sprime.size() > 0 ? sprime.cwiseAbs().maxCoeff() : 0.0);
  rep.drift_verdict = rep.max_drift <= drift_tol * scale;
  rep.is_mubpp = rep.drift_verdict;

  try {
    const DualContext aug(augment_market(tree, sprime));
    rep.u_augmented = solve_dual(aug, u, endow).value;
    rep.utility_verdict = rep.u_augmented <= rep.u_base + utility_tol * (1.0 + std::abs(rep.u_base));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoMartingaleMeasure && e.code() != ErrorCode::InfeasibleEntropy) {
      throw;
    }
    rep.augment_infeasible = true;
    rep.augment_note = e.what();
    rep.u_augmented = u.U_sup();
    rep.utility_verdict = false;
  }
  return rep;
}

SensitivityReport endowment_sensitivity(const DualContext& ctx, const UtilityPair& u,
                                        const std::vector<RandomVariable>& endowments,
                                        const SensitivityOptions& opts) {
  SensitivityReport rep;
  const double tol = opts.tol;
  const bool equivalent = ctx.geometry().equivalent;
  std::vector<DualSolution> sols;
  for (const auto& e : endowments) sols.push_back(solve_dual(ctx, u, e));
  for (const auto& s : sols) rep.values.push_back(s.value);

  const std::size_t n = endowments.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!((endowments[i].array() <= endowments[j].array()).all())) continue;
      const std::string tag = "(" + std::to_string(i) + "," + std::to_string(j) + ")";
      rep.checks.push_back({"monotone" + tag, rep.values[j] - rep.values[i], tol});
      if (equivalent && endowments[i] != endowments[j]) {
        // Strict: the gap must be positive; a zero tolerance on a shifted
        // margin encodes "> 0".
        const double gap = rep.values[j] - rep.values[i];
        rep.checks.push_back({"monotone_strict" + tag, gap > 0.0 ? gap : -1.0, 0.0});
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (double lam : opts.lambdas) {
        const RandomVariable mix = lam * endowments[i] + (1.0 - lam) * endowments[j];
        const double um = solve_dual(ctx, u, mix).value;
        rep.checks.push_back({"concave(" + std::to_string(i) + "," + std::to_string(j) + "," +
                                  format_decimal(lam) + ")",
                              um - (lam * rep.values[i] + (1.0 - lam) * rep.values[j]), tol});
      }
    }
  }

  if (n > 0) {
    const RandomVariable& e0 = endowments[0];
    double prev = kInf;
    for (int k = 1; k <= opts.continuity_terms; ++k) {
      const double eps = 1.0 / k;
      const DualSolution s = solve_dual(ctx, u, (e0.array() + eps).matrix());
      const double r = std::max(sols[0].mass, s.mass);
      const double gap = std::abs(s.value - rep.values[0]);
      rep.checks.push_back({"continuity(1/" + std::to_string(k) + ")", r * eps - gap, tol});
      if (k > 1) rep.checks.push_back({"continuity_decay(" + std::to_string(k) + ")", prev - gap, tol});
      prev = gap;
    }

    for (std::size_t c = 0; c < opts.claims.size(); ++c) {
      const RandomVariable& B = opts.claims[c];
      const auto [lo, hi] = price_bounds(ctx, B);
      (void)hi;
      const double davis = sols[0].q.dot(B);
      const double below = solve_dual(ctx, u, (e0 + B).array() - davis).value;
      const double above = solve_dual(ctx, u, (e0 + B).array() - lo).value;
      const std::string tag = "(" + std::to_string(c) + ")";
      rep.checks.push_back({"sandwich_lower" + tag, rep.values[0] - below, tol});
      rep.checks.push_back({"sandwich_upper" + tag, above - rep.values[0], tol});

      // Price continuity: |p(B_k) - p(B)| <= sup_Q |E_Q[B_k - B]| for B_k = B (1 + 1/k).
      const double p0 = indifference_price(ctx, u, e0, B);
      const double sup = std::max(std::abs(lo), std::abs(hi));
      for (int k = 1; k <= 3; ++k) {
        const double pk = indifference_price(ctx, u, e0, B * (1.0 + 1.0 / k));
        rep.checks.push_back({"price_lipschitz" + tag + "(" + std::to_string(k) + ")",
                              sup / k - std::abs(pk - p0), 1e-8});
      }
    }
  }
  return rep;
}

}  // namespace dualprice
