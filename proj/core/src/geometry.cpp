#include "dualprice/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/SVD>

#include "dualprice/error.hpp"
#include "dualprice/linprog.hpp"

namespace dualprice {

double MartingaleConstraints::violation(const MeasureVector& mu) const {
  if (rows.rows() == 0) return 0.0;
  const double mass = std::max(mu.cwiseAbs().sum(), 1e-300);
  return (rows * mu).cwiseAbs().maxCoeff() / mass;
}

MartingaleConstraints build_constraints(const MarketTree& tree) {
  MartingaleConstraints mc;
  const auto L = static_cast<Eigen::Index>(tree.num_leaves());
  const std::size_t d = tree.num_assets();
  mc.rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tree.inner_nodes().size() * d), L);
  Eigen::Index r = 0;
  for (std::size_t n : tree.inner_nodes()) {
    const Node& node = tree.node(n);
    for (std::size_t i = 0; i < d; ++i, ++r) {
      for (std::size_t c : node.children) {
        const Node& child = tree.node(c);
        const double coef = child.prices[i] - node.prices[i];
        for (std::size_t l = child.leaf_begin; l < child.leaf_end; ++l) {
          mc.rows(r, static_cast<Eigen::Index>(l)) = coef;
        }
      }
      mc.labels.emplace_back(n, i);
    }
  }
  return mc;
}

double martingale_drift(const MarketTree& tree, const MeasureVector& q) {
  double worst = 0.0;
  for (std::size_t n : tree.inner_nodes()) {
    const Node& node = tree.node(n);
    const double mass = subtree_mass(tree, q, n);
    if (!(mass > 0.0)) continue;
    for (std::size_t i = 0; i < tree.num_assets(); ++i) {
      double e = 0.0;
      for (std::size_t c : node.children) e += subtree_mass(tree, q, c) * tree.node(c).prices[i];
      worst = std::max(worst, std::abs(e / mass - node.prices[i]));
    }
  }
  return worst;
}

bool is_martingale_measure(const MarketTree& tree, const MeasureVector& q, double tol) {
  if (q.size() != static_cast<Eigen::Index>(tree.num_leaves())) return false;
  if (q.minCoeff() < -tol || std::abs(q.sum() - 1.0) > tol) return false;
  return martingale_drift(tree, q) <= tol;
}

namespace {

struct MaxMin {
  bool feasible = false;
  MeasureVector q;
  double min_coordinate = 0.0;
};

// max t  s.t.  A q = 0, sum q = 1, q_l >= t on the selected leaves, q = 0 elsewhere.
MaxMin max_min_measure(const MartingaleConstraints& mc, const std::vector<bool>& keep) {
  std::vector<Eigen::Index> cols;
  for (std::size_t l = 0; l < keep.size(); ++l) {
    if (keep[l]) cols.push_back(static_cast<Eigen::Index>(l));
  }
  const auto k = static_cast<Eigen::Index>(cols.size());
  const Eigen::Index R = mc.rows.rows();
  LinearProgram lp;
  lp.A = Eigen::MatrixXd::Zero(R + 1 + k, k + 1);
  lp.b = Eigen::VectorXd::Zero(R + 1 + k);
  for (Eigen::Index j = 0; j < k; ++j) lp.A.col(j).head(R) = mc.rows.col(cols[j]);
  lp.sense.assign(R, RowSense::Equal);
  lp.A.row(R).head(k).setOnes();
  lp.b[R] = 1.0;
  lp.sense.push_back(RowSense::Equal);
  for (Eigen::Index j = 0; j < k; ++j) {
    lp.A(R + 1 + j, j) = -1.0;
    lp.A(R + 1 + j, k) = 1.0;
    lp.sense.push_back(RowSense::LessEqual);
  }
  lp.c = Eigen::VectorXd::Zero(k + 1);
  lp.c[k] = -1.0;
  lp.upper = Eigen::VectorXd::Constant(k + 1, kInf);
  lp.upper[k] = 1.0;
  const LpResult res = solve_lp(lp);
  MaxMin out;
  if (res.status != LpStatus::Optimal) return out;
  out.feasible = true;
  out.q = MeasureVector::Zero(static_cast<Eigen::Index>(keep.size()));
  for (Eigen::Index j = 0; j < k; ++j) out.q[cols[j]] = std::max(res.x[j], 0.0);
  out.q /= out.q.sum();
  double mn = kInf;
  for (Eigen::Index j = 0; j < k; ++j) mn = std::min(mn, out.q[cols[j]]);
  out.min_coordinate = k > 0 ? mn : 0.0;
  return out;
}

// Leaves charged by some element of the cone: max sum t, t_l <= mu_l, t <= 1.
std::vector<bool> cone_support(const MartingaleConstraints& mc) {
  const auto L = static_cast<Eigen::Index>(mc.num_leaves());
  const Eigen::Index R = mc.rows.rows();
  LinearProgram lp;
  lp.A = Eigen::MatrixXd::Zero(R + L, 2 * L);
  lp.b = Eigen::VectorXd::Zero(R + L);
  lp.A.topLeftCorner(R, L) = mc.rows;
  lp.sense.assign(R, RowSense::Equal);
  for (Eigen::Index l = 0; l < L; ++l) {
    lp.A(R + l, l) = -1.0;
    lp.A(R + l, L + l) = 1.0;
    lp.sense.push_back(RowSense::LessEqual);
  }
  lp.c = Eigen::VectorXd::Zero(2 * L);
  lp.c.tail(L).setConstant(-1.0);
  lp.upper = Eigen::VectorXd::Constant(2 * L, kInf);
  lp.upper.tail(L).setOnes();
  const LpResult res = solve_lp(lp);
  std::vector<bool> support(static_cast<std::size_t>(L), false);
  if (res.status != LpStatus::Optimal) return support;
  for (Eigen::Index l = 0; l < L; ++l) support[static_cast<std::size_t>(l)] = res.x[L + l] > 0.5;
  return support;
}

}  // namespace

std::optional<MeasureVector> find_equivalent_mm(const MarketTree& tree) {
  const MartingaleConstraints mc = build_constraints(tree);
  const MaxMin mm = max_min_measure(mc, std::vector<bool>(tree.num_leaves(), true));
  if (!mm.feasible) {
    throw Error(ErrorCode::NoMartingaleMeasure,
                "the martingale constraints admit no probability measure (arbitrage)");
  }
  if (mm.min_coordinate < kEquivalenceThreshold) return std::nullopt;
  return mm.q;
}

std::size_t MarketGeometry::support_size() const {
  return static_cast<std::size_t>(std::count(support.begin(), support.end(), true));
}

MarketGeometry analyze_market(const MarketTree& tree) {
  MarketGeometry g;
  g.constraints = build_constraints(tree);
  const std::size_t L = tree.num_leaves();
  MaxMin mm = max_min_measure(g.constraints, std::vector<bool>(L, true));
  if (!mm.feasible) {
    throw Error(ErrorCode::NoMartingaleMeasure,
                "the martingale constraints admit no probability measure (arbitrage)");
  }
  if (mm.min_coordinate >= kEquivalenceThreshold) {
    g.support.assign(L, true);
    g.equivalent = true;
  } else {
    g.support = cone_support(g.constraints);
    if (std::none_of(g.support.begin(), g.support.end(), [](bool b) { return b; })) {
      throw Error(ErrorCode::NoMartingaleMeasure, "no nonzero martingale measure exists");
    }
    mm = max_min_measure(g.constraints, g.support);
    if (!mm.feasible || mm.min_coordinate < kEquivalenceThreshold) {
      throw Error(ErrorCode::NonConverged, "could not find a measure charging the support");
    }
  }
  g.interior = mm.q;
  g.interior_min = mm.min_coordinate;
  return g;
}

namespace {

class Bits {
 public:
  explicit Bits(std::size_t n = 0) : w_((n + 63) / 64, 0) {}
  void set(std::size_t i) { w_[i / 64] |= std::uint64_t{1} << (i % 64); }
  Bits operator&(const Bits& o) const {
    Bits r;
    r.w_.resize(w_.size());
    for (std::size_t k = 0; k < w_.size(); ++k) r.w_[k] = w_[k] & o.w_[k];
    return r;
  }
  bool contains(const Bits& o) const {
    for (std::size_t k = 0; k < w_.size(); ++k) {
      if ((o.w_[k] & ~w_[k]) != 0) return false;
    }
    return true;
  }
  int count() const {
    int c = 0;
    for (auto x : w_) c += std::popcount(x);
    return c;
  }

 private:
  std::vector<std::uint64_t> w_;
};

struct Ray {
  Eigen::VectorXd v;
  Bits zeros;
};

Bits zero_set(const Eigen::VectorXd& v) {
  Bits z(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] == 0.0) z.set(static_cast<std::size_t>(i));
  }
  return z;
}

}  // namespace

std::vector<MeasureVector> vertex_enumerate(const MartingaleConstraints& mc, std::size_t cap) {
  const auto L = static_cast<Eigen::Index>(mc.num_leaves());
  std::vector<Ray> rays;
  for (Eigen::Index l = 0; l < L; ++l) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(L);
    e[l] = 1.0;
    rays.push_back({e, zero_set(e)});
  }

  // Rows of deeper nodes involve fewer leaves; processing them first keeps
  // the intermediate cones small.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(mc.rows.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return (mc.rows.row(a).array() != 0.0).count() < (mc.rows.row(b).array() != 0.0).count();
  });

  Eigen::MatrixXd processed(0, L);
  Eigen::Index prev_rank = 0;
  for (Eigen::Index r : order) {
    Eigen::VectorXd a = mc.rows.row(r).transpose();
    const double an = a.cwiseAbs().maxCoeff();
    if (an == 0.0) continue;
    a /= an;

    processed.conservativeResize(processed.rows() + 1, Eigen::NoChange);
    processed.row(processed.rows() - 1) = a.transpose();
    Eigen::Index rank = 0;
    {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(processed);
      const auto& s = svd.singularValues();
      for (Eigen::Index i = 0; i < s.size(); ++i) rank += s[i] > 1e-11 * s[0];
    }
    // An adjacent pair spans a two-dimensional face of the current cone,
    // whose linear hull has dimension at most L - prev_rank.
    const int need = static_cast<int>(L - prev_rank) - 2;
    prev_rank = rank;

    std::vector<std::size_t> pos, neg;
    std::vector<Ray> next;
    std::vector<double> val(rays.size());
    for (std::size_t k = 0; k < rays.size(); ++k) {
      const double v = a.dot(rays[k].v);
      const double scale = a.cwiseAbs().dot(rays[k].v);
      if (std::abs(v) <= 1e-12 * scale) {
        next.push_back(rays[k]);
      } else if (v > 0.0) {
        pos.push_back(k);
      } else {
        neg.push_back(k);
      }
      val[k] = v;
    }
    for (std::size_t p : pos) {
      for (std::size_t n : neg) {
        const Bits common = rays[p].zeros & rays[n].zeros;
        if (common.count() < need) continue;
        bool adjacent = true;
        for (std::size_t k = 0; k < rays.size() && adjacent; ++k) {
          if (k != p && k != n && rays[k].zeros.contains(common)) adjacent = false;
        }
        if (!adjacent) continue;
        Eigen::VectorXd v = val[p] * rays[n].v - val[n] * rays[p].v;
        for (Eigen::Index i = 0; i < L; ++i) {
          if (rays[p].v[i] == 0.0 && rays[n].v[i] == 0.0) v[i] = 0.0;
        }
        v /= v.sum();
        next.push_back({v, zero_set(v)});
        if (next.size() > cap) {
          throw Error(ErrorCode::CapExceeded,
                      "vertex enumeration exceeded the cap of " + std::to_string(cap));
        }
      }
    }
    rays = std::move(next);
    if (rays.empty()) break;
  }

  std::vector<MeasureVector> out;
  out.reserve(rays.size());
  for (auto& r : rays) out.push_back(r.v / r.v.sum());
  std::sort(out.begin(), out.end(), [](const MeasureVector& x, const MeasureVector& y) {
    return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
  });
  return out;
}

std::vector<MeasureVector> sample_vertices(const MartingaleConstraints& mc, std::size_t samples,
                                           std::uint64_t seed) {
  const auto L = static_cast<Eigen::Index>(mc.num_leaves());
  const Eigen::Index R = mc.rows.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  LinearProgram lp;
  lp.A = Eigen::MatrixXd::Zero(R + 1, L);
  lp.A.topRows(R) = mc.rows;
  lp.A.row(R).setOnes();
  lp.b = Eigen::VectorXd::Zero(R + 1);
  lp.b[R] = 1.0;
  lp.sense.assign(R + 1, RowSense::Equal);
  std::vector<MeasureVector> out;
  for (std::size_t s = 0; s < samples; ++s) {
    lp.c.resize(L);
    for (Eigen::Index l = 0; l < L; ++l) lp.c[l] = normal(rng);
    const LpResult res = solve_lp(lp);
    if (res.status == LpStatus::Infeasible) {
      throw Error(ErrorCode::NoMartingaleMeasure, "the martingale polytope is empty");
    }
    if (res.status != LpStatus::Optimal) continue;
    MeasureVector q = res.x.cwiseMax(0.0);
    q /= q.sum();
    const bool seen = std::any_of(out.begin(), out.end(), [&](const MeasureVector& o) {
      return (o - q).cwiseAbs().maxCoeff() <= 1e-9;
    });
    if (!seen) out.push_back(q);
  }
  return out;
}

std::vector<MeasureVector> vertices_or_samples(const MartingaleConstraints& mc, std::size_t cap,
                                               std::size_t samples, std::uint64_t seed,
                                               bool* exhaustive) {
  try {
    auto v = vertex_enumerate(mc, cap);
    if (exhaustive) *exhaustive = true;
    return v;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::CapExceeded) throw;
  }
  if (exhaustive) *exhaustive = false;
  return sample_vertices(mc, samples, seed);
}

double relative_entropy(const MarketTree& tree, const UtilityPair& u, const MeasureVector& mu) {
  const Eigen::VectorXd& p = tree.leaf_probabilities();
  double total = 0.0;
  for (Eigen::Index l = 0; l < p.size(); ++l) {
    if (mu[l] < 0.0) throw Error(ErrorCode::Domain, "negative leaf mass");
    const double v = u.V(mu[l] / p[l]);
    if (v == kInf) return kInf;
    total += p[l] * v;
  }
  return total;
}

std::pair<double, double> expectation_range(const MartingaleConstraints& mc,
                                            const RandomVariable& x) {
  const auto L = static_cast<Eigen::Index>(mc.num_leaves());
  const Eigen::Index R = mc.rows.rows();
  LinearProgram lp;
  lp.A = Eigen::MatrixXd::Zero(R + 1, L);
  lp.A.topRows(R) = mc.rows;
  lp.A.row(R).setOnes();
  lp.b = Eigen::VectorXd::Zero(R + 1);
  lp.b[R] = 1.0;
  lp.sense.assign(R + 1, RowSense::Equal);
  lp.c = x;
  const LpResult lo = solve_lp(lp);
  lp.c = -x;
  const LpResult hi = solve_lp(lp);
  if (lo.status == LpStatus::Infeasible || hi.status == LpStatus::Infeasible) {
    throw Error(ErrorCode::NoMartingaleMeasure, "the martingale polytope is empty");
  }
  if (lo.status != LpStatus::Optimal || hi.status != LpStatus::Optimal) {
    throw Error(ErrorCode::NonConverged, "price-bound linear program did not converge");
  }
  return {lo.objective, -hi.objective};
}

}  // namespace dualprice
