#include "dualprice/utility.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "dualprice/error.hpp"
#include "dualprice/market.hpp"
#include "dualprice/numerics.hpp"

namespace dualprice {

UtilityPair UtilityPair::exponential(double gamma, double shift) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw Error(ErrorCode::InvalidArgument, "exponential utility needs gamma > 0");
  }
  return UtilityPair(Family::Exponential, gamma, 0.0, shift);
}

UtilityPair UtilityPair::two_power(double a, double b, double shift) {
  if (!(a > 0.0 && a < 1.0)) throw Error(ErrorCode::InvalidArgument, "two-power needs a in (0,1)");
  if (!(b > 0.0) || !std::isfinite(b)) throw Error(ErrorCode::InvalidArgument, "two-power needs b > 0");
  return UtilityPair(Family::TwoPower, a, b, shift);
}

UtilityPair UtilityPair::custom(CustomSpec spec) {
  if (!spec.u || !spec.du) throw Error(ErrorCode::InvalidArgument, "custom utility needs U and U'");
  UtilityPair p(Family::Custom, 0.0, 0.0, 0.0);
  p.custom_ = std::make_shared<const CustomSpec>(std::move(spec));
  return p;
}

UtilityPair UtilityPair::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string family(spec.substr(0, colon));
  std::map<std::string, double> params;
  if (colon != std::string_view::npos) {
    std::string rest(spec.substr(colon + 1));
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::ParseError, "utility parameter '" + item + "' is not key=value");
      }
      params[item.substr(0, eq)] = parse_decimal(item.substr(eq + 1));
    }
  }
  auto take = [&](const std::string& key, double fallback) {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    double v = it->second;
    params.erase(it);
    return v;
  };
  UtilityPair out = [&] {
    if (family == "exp" || family == "exponential") {
      const double g = take("gamma", 1.0);
      return exponential(g, take("C", 0.0));
    }
    if (family == "twopower" || family == "two_power") {
      const double a = take("a", 0.5);
      const double b = take("b", 1.0);
      return two_power(a, b, take("C", 0.0));
    }
    throw Error(ErrorCode::ParseError, "unknown utility family '" + family + "'");
  }();
  if (!params.empty()) {
    throw Error(ErrorCode::ParseError, "unknown utility parameter '" + params.begin()->first + "'");
  }
  return out;
}

std::string UtilityPair::describe() const {
  std::ostringstream os;
  os.precision(12);
  switch (family_) {
    case Family::Exponential: os << "exp:gamma=" << p1_ << ",C=" << shift_; break;
    case Family::TwoPower: os << "twopower:a=" << p1_ << ",b=" << p2_ << ",C=" << shift_; break;
    case Family::Custom: os << "custom:" << custom_->name; break;
  }
  return os.str();
}

double UtilityPair::U(double x) const {
  switch (family_) {
    case Family::Exponential:
      if (x == kInf) return shift_;
      return shift_ - std::exp(-p1_ * x) / p1_;
    case Family::TwoPower:
      if (x == kInf) return kInf;
      if (x >= 0.0) return shift_ + (std::pow(1.0 + x, 1.0 - p1_) - 1.0) / (1.0 - p1_);
      return shift_ - (std::pow(1.0 - x, 1.0 + p2_) - 1.0) / (1.0 + p2_);
    case Family::Custom:
      if (x == kInf) return custom_->u_sup;
      return custom_->u(x);
  }
  return 0.0;
}

double UtilityPair::dU(double x) const {
  switch (family_) {
    case Family::Exponential: return std::exp(-p1_ * x);
    case Family::TwoPower:
      if (x >= 0.0) return std::pow(1.0 + x, -p1_);
      return std::pow(1.0 - x, p2_);
    case Family::Custom: return custom_->du(x);
  }
  return 0.0;
}

double UtilityPair::d2U(double x) const {
  switch (family_) {
    case Family::Exponential: return -p1_ * std::exp(-p1_ * x);
    case Family::TwoPower:
      if (x >= 0.0) return -p1_ * std::pow(1.0 + x, -p1_ - 1.0);
      return -p2_ * std::pow(1.0 - x, p2_ - 1.0);
    case Family::Custom:
      if (custom_->d2u) return custom_->d2u(x);
      {
        const double h = 1e-6 * (1.0 + std::abs(x));
        return (custom_->du(x + h) - custom_->du(x - h)) / (2.0 * h);
      }
  }
  return 0.0;
}

double UtilityPair::U_sup() const { return U(kInf); }

ConjugatePoint UtilityPair::conjugate(double y) const {
  if (!(y >= 0.0)) throw Error(ErrorCode::Domain, "conjugate evaluated at negative argument");
  if (y == 0.0) return {kInf, U_sup(), -kInf, kInf};
  if (y == kInf) return {-kInf, kInf, kInf, 0.0};
  if (family_ == Family::Exponential) {
    const double ly = std::log(y);
    return {-ly / p1_, shift_ + (y / p1_) * (ly - 1.0), ly / p1_, 1.0 / (p1_ * y)};
  }
  return conjugate_by_root(y);
}

ConjugatePoint UtilityPair::conjugate_by_root(double y) const {
  const double ly = std::log(y);
  auto h = [&](double x) { return std::log(dU(x)) - ly; };
  auto dh = [&](double x) { return d2U(x) / dU(x); };
  const Root1D r = decreasing_root(h, dh, 0.0);
  if (!r.bracketed) {
    // U' stays above y: U(x) - xy grows without bound. U' stays below y:
    // the supremum sits at -inf and is also unbounded for concave U with
    // U'(-inf) < y only if U is unbounded above there; report +inf in both.
    return {r.x, kInf, r.x == kInf ? -kInf : kInf, kInf};
  }
  const double x = r.x;
  return {x, U(x) - x * y, -x, -1.0 / d2U(x)};
}

double UtilityPair::eval(Evaluator which, double arg) const {
  switch (which) {
    case Evaluator::U: return U(arg);
    case Evaluator::dU: return dU(arg);
    case Evaluator::V: return conjugate(arg).value;
    case Evaluator::dV: return conjugate(arg).slope;
  }
  return 0.0;
}

double UtilityPair::elasticity(double x) const {
  if (family_ == Family::Exponential) {
    // x e^{-gx} / (C - e^{-gx}/g) = x / (C e^{gx} - 1/g)
    const double denom = shift_ * std::exp(p1_ * x) - 1.0 / p1_;
    if (std::isinf(denom)) return 0.0;
    return x / denom;
  }
  return x * dU(x) / U(x);
}

double UtilityPair::ae_minus_claimed() const {
  switch (family_) {
    case Family::Exponential: return kInf;
    case Family::TwoPower: return 1.0 + p2_;
    case Family::Custom: return custom_->ae_minus;
  }
  return 0.0;
}

double UtilityPair::ae_plus_claimed() const {
  switch (family_) {
    case Family::Exponential: return 0.0;
    case Family::TwoPower: return 1.0 - p1_;
    case Family::Custom: return custom_->ae_plus;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Certification

namespace {

std::vector<double> symmetric_grid(const CertifyGrid& g) {
  const auto decades = std::log10(g.x_max / g.x_min_abs);
  const auto n = static_cast<std::size_t>(std::ceil(decades * g.points_per_decade)) + 1;
  std::vector<double> pos = logspace(g.x_min_abs, g.x_max, n);
  std::vector<double> out;
  out.reserve(2 * n + 1);
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) out.push_back(-*it);
  out.push_back(0.0);
  out.insert(out.end(), pos.begin(), pos.end());
  return out;
}

// inf_y {V(y) + xy}, searched over s = ln y.
double biconjugate(const UtilityPair& u, double x) {
  auto f = [&](double s) {
    const double y = std::exp(s);
    return u.V(y) + x * y;
  };
  return scan_then_golden(f, -60.0, 60.0, 241, 1e-12).value;
}

}  // namespace

CertificationReport inspect_assumptions(const UtilityPair& u, const CertifyGrid& grid) {
  CertificationReport rep;
  const std::vector<double> xs = symmetric_grid(grid);
  const auto decades_y = std::log10(grid.y_max / grid.y_min);
  const std::vector<double> ys = logspace(
      grid.y_min, grid.y_max,
      static_cast<std::size_t>(std::ceil(decades_y * grid.points_per_decade)) + 1);

  // Monotonicity and strict concavity through the marginal utility. Strict
  // decrease is only demanded where U' is representable and positive.
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double d = u.dU(xs[k]);
    if (!(d >= 0.0)) rep.increasing = false;
    if (k + 1 < xs.size()) {
      const double dn = u.dU(xs[k + 1]);
      const bool representable = std::isfinite(d) && std::isfinite(dn) && dn > 1e-300;
      if (representable && !(dn < d)) rep.concave = false;
      if (dn > d) rep.concave = false;
      const double uk = u.U(xs[k]), un = u.U(xs[k + 1]);
      if (std::isfinite(uk) && std::isfinite(un) && un < uk) rep.increasing = false;
    }
  }
  // U' must match the derivative of U where both are moderate.
  for (double x = -grid.moderate_x; x <= grid.moderate_x; x += 0.25) {
    const double h = 1e-5 * (1.0 + std::abs(x));
    const double fd = (u.U(x + h) - u.U(x - h)) / (2.0 * h);
    const double d = u.dU(x);
    if (std::isfinite(d) && std::abs(fd - d) > 1e-4 * (1.0 + std::abs(d))) rep.concave = false;
  }

  // Inada along the expanding grid.
  const double d0 = u.dU(0.0);
  const double d_left = u.dU(-grid.x_max);
  const double d_right = u.dU(grid.x_max);
  rep.inada = d_left > 1e2 * d0 && d_right < 1e-2 * d0;

  rep.normalized = u.U(0.0) > 0.0;

  // Asymptotic elasticity over the outermost decade.
  rep.ae_minus_estimate = kInf;
  rep.ae_plus_estimate = 0.0;
  for (double x : xs) {
    if (std::abs(x) < grid.x_max / 10.0) continue;
    const double e = u.elasticity(x);
    if (x < 0.0) rep.ae_minus_estimate = std::min(rep.ae_minus_estimate, e);
    else rep.ae_plus_estimate = std::max(rep.ae_plus_estimate, e);
  }
  rep.rae = rep.ae_minus_estimate > 1.0 && rep.ae_plus_estimate < 1.0;

  // Growth constant, conjugate residuals, convexity of V.
  rep.growth_constant = 0.0;
  rep.min_second_difference_V = kInf;
  const bool root_found = u.family() != UtilityPair::Family::Exponential;
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const double y = ys[k];
    const ConjugatePoint c = u.conjugate(y);
    if (c.value > 0.0 && std::isfinite(c.value)) {
      rep.growth_constant = std::max(rep.growth_constant, y * std::abs(c.slope) / c.value);
    }
    const double back = u.dU(-c.slope);
    if (std::isfinite(back)) {
      rep.inversion_residual = std::max(rep.inversion_residual, std::abs(back - y) / (1.0 + y));
      if (root_found) rep.root_residual = std::max(rep.root_residual, std::abs(u.dU(c.x) - y) / (1.0 + y));
    }
    if (k > 0 && k + 1 < ys.size()) {
      // Second divided difference on the non-uniform grid.
      const double y0 = ys[k - 1], y2 = ys[k + 1];
      const double s1 = (c.value - u.V(y0)) / (y - y0);
      const double s2 = (u.V(y2) - c.value) / (y2 - y);
      rep.min_second_difference_V = std::min(rep.min_second_difference_V, (s2 - s1) / (y2 - y0));
    }
  }
  rep.growth = std::isfinite(rep.growth_constant) && rep.growth_constant > 0.0;

  rep.fenchel_gap = kInf;
  for (double x : xs) {
    const double ux = u.U(x);
    const double ud = u.dU(x);
    if (!std::isfinite(ux) || !(ud > 1e-25 && ud < 1e25)) {
      ++rep.skipped_points;
      continue;
    }
    const double bic = biconjugate(u, x);
    const double diff = std::abs(ux - bic);
    rep.conjugacy_residual = std::max(rep.conjugacy_residual, diff / (1.0 + std::abs(ux)));
    if (std::abs(x) <= grid.moderate_x) rep.biconjugacy_abs = std::max(rep.biconjugacy_abs, diff);
    for (std::size_t k = 0; k < ys.size(); k += 4) {
      rep.fenchel_gap = std::min(rep.fenchel_gap,
                                 (u.V(ys[k]) + x * ys[k] - ux) / (1.0 + std::abs(ux)));
    }
  }
  rep.conjugacy = rep.conjugacy_residual <= 1e-7 && rep.biconjugacy_abs <= 1e-7 &&
                  rep.inversion_residual <= 1e-8 && rep.fenchel_gap >= -1e-10 &&
                  rep.min_second_difference_V > 0.0 &&
                  (!root_found || rep.root_residual <= 1e-12);

  if (!rep.increasing) rep.violations.push_back("increasing");
  if (!rep.concave) rep.violations.push_back("concavity");
  if (!rep.inada) rep.violations.push_back("inada");
  if (!rep.normalized) rep.violations.push_back("normalization U(0) > 0");
  if (!rep.rae) rep.violations.push_back("reasonable asymptotic elasticity");
  if (!rep.growth) rep.violations.push_back("growth condition");
  if (!rep.conjugacy) rep.violations.push_back("conjugacy");
  return rep;
}

CertificationReport certify_assumptions(const UtilityPair& u, const CertifyGrid& grid) {
  CertificationReport rep = inspect_assumptions(u, grid);
  if (!rep.passed()) {
    throw Error(ErrorCode::AssumptionFail, u.describe() + " violates " + rep.violations.front());
  }
  return rep;
}

}  // namespace dualprice
