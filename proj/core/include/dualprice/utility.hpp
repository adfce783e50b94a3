#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace dualprice {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Conjugate data at one dual point y: the maximizer x* = -V'(y) of
/// U(x) - xy together with V and its first two derivatives.
struct ConjugatePoint {
  double x = 0.0;
  double value = 0.0;   // V(y)
  double slope = 0.0;   // V'(y)
  double curvature = 0.0;  // V''(y)
};

enum class Evaluator { U, dU, V, dV };

/// A utility on the whole real line together with its convex conjugate
/// V(y) = sup_x {U(x) - xy}.
///
/// Built-in families:
///   - exponential: U(x) = C - exp(-gamma x)/gamma, V(y) = C + (y/gamma)(ln y - 1).
///   - two-power:   U(x) = C + ((1+x)^(1-a) - 1)/(1-a) for x >= 0 and
///                  U(x) = C - ((1-x)^(1+b) - 1)/(1+b) for x < 0.
///     V has no closed form in the code; it is evaluated by root-finding
///     U'(x) = y on the strictly decreasing marginal utility.
///   - custom: caller-supplied U, U' (and optionally U''); same root-finding
///     path as two-power. Used for certification tests.
///
/// Boundary conventions: V(0) = U(inf), V'(0) = -inf, V(inf) = V'(inf) = inf,
/// all as explicit infinities.
class UtilityPair {
 public:
  enum class Family { Exponential, TwoPower, Custom };

  struct CustomSpec {
    std::string name;
    std::function<double(double)> u;
    std::function<double(double)> du;
    std::function<double(double)> d2u;  // optional
    double u_sup = kInf;                 // U(inf)
    double ae_minus = kInf;              // claimed AE at -inf
    double ae_plus = 0.0;                // claimed AE at +inf
  };

  static UtilityPair exponential(double gamma, double shift = 0.0);
  static UtilityPair two_power(double a, double b, double shift = 0.0);
  static UtilityPair custom(CustomSpec spec);

  /// Parses "exp:gamma=1,C=2" or "twopower:a=0.5,b=1,C=1".
  static UtilityPair parse(std::string_view spec);

  Family family() const { return family_; }
  std::string describe() const;

  double gamma() const { return p1_; }
  double tail_a() const { return p1_; }
  double tail_b() const { return p2_; }
  double shift() const { return shift_; }

  double U(double x) const;
  double dU(double x) const;
  double d2U(double x) const;

  ConjugatePoint conjugate(double y) const;
  double V(double y) const { return conjugate(y).value; }
  double dV(double y) const { return conjugate(y).slope; }
  double d2V(double y) const { return conjugate(y).curvature; }

  double eval(Evaluator which, double arg) const;

  /// U(inf) = V(0); +inf for the two-power family.
  double U_sup() const;
  /// x U'(x) / U(x), evaluated in a form that survives large |x|.
  double elasticity(double x) const;
  double ae_minus_claimed() const;
  double ae_plus_claimed() const;

 private:
  UtilityPair(Family f, double p1, double p2, double shift)
      : family_(f), p1_(p1), p2_(p2), shift_(shift) {}

  ConjugatePoint conjugate_by_root(double y) const;

  Family family_;
  double p1_;
  double p2_;
  double shift_;
  std::shared_ptr<const CustomSpec> custom_;
};

struct CertifyGrid {
  double x_max = 1e6;            // grid spans [-x_max, x_max]
  double x_min_abs = 1e-3;       // smallest nonzero |x|
  int points_per_decade = 8;
  double y_min = 1e-8;
  double y_max = 1e8;
  double moderate_x = 20.0;      // absolute biconjugacy band
};

struct CertificationReport {
  bool increasing = true;
  bool concave = true;
  bool inada = true;
  bool normalized = true;     // U(0) > 0
  bool rae = true;
  bool growth = true;
  bool conjugacy = true;
  double ae_minus_estimate = 0.0;
  double ae_plus_estimate = 0.0;
  double growth_constant = 0.0;      // max y|V'(y)|/V(y) where V > 0
  double conjugacy_residual = 0.0;   // max |U - inf_y{V + xy}| / (1 + |U|)
  double biconjugacy_abs = 0.0;      // same, absolute, for |x| <= moderate_x
  double fenchel_gap = 0.0;          // min over grid pairs of (V(y) + xy - U(x)) / (1 + |U(x)|)
  double inversion_residual = 0.0;   // max |U'(-V'(y)) - y| / (1 + y)
  double root_residual = 0.0;        // max |U'(x*) - y| / (1 + y), root-found families
  double min_second_difference_V = 0.0;
  std::size_t skipped_points = 0;
  std::vector<std::string> violations;

  bool passed() const { return violations.empty(); }
};

/// Runs every check and returns the report without throwing.
CertificationReport inspect_assumptions(const UtilityPair& u, const CertifyGrid& grid = {});
/// Same as inspect_assumptions, but throws ASSUMPTION_FAIL naming the first
/// violated assumption.
CertificationReport certify_assumptions(const UtilityPair& u, const CertifyGrid& grid = {});

}  // namespace dualprice
