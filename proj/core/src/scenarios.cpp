#include "dualprice/scenarios.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "dualprice/error.hpp"

namespace dualprice {

namespace {

struct Branch {
  std::string suffix;
  double factor;
  double prob;
};

// Recombining-free lattice: every node splits by the same multiplicative
// branches for `periods` steps.
MarketTree lattice(const std::vector<Branch>& branches, int periods) {
  std::vector<NodeSpec> specs;
  std::function<void(const std::string&, std::optional<std::string>, int, double, double)> grow =
      [&](const std::string& id, std::optional<std::string> parent, int t, double s, double p) {
        specs.push_back(NodeSpec::from_values(id, std::move(parent), t, {s}, p));
        if (t == periods) return;
        for (const auto& b : branches) {
          grow(t == 0 ? b.suffix : id + "." + b.suffix, id, t + 1, s * b.factor, b.prob);
        }
      };
  grow("root", std::nullopt, 0, 1.0, 1.0);
  return MarketTree({"S"}, std::move(specs));
}

void attach_standard_claims(Scenario& sc) {
  const MarketTree& t = sc.tree;
  const auto L = static_cast<Eigen::Index>(t.num_leaves());
  RandomVariable s(L), call(L), put(L), digital(L);
  for (Eigen::Index l = 0; l < L; ++l) {
    const double x = t.node(t.leaf_node(static_cast<std::size_t>(l))).prices[0];
    s[l] = x;
    call[l] = std::max(x - 1.0, 0.0);
    put[l] = std::max(1.0 - x, 0.0);
    digital[l] = x > 1.0 ? 1.0 : 0.0;
  }
  sc.claims["stock"] = s;
  sc.claims["call"] = call;
  sc.claims["put"] = put;
  sc.claims["digital"] = digital;
}

Scenario with_zero_endowment(MarketTree tree) {
  Scenario sc{std::move(tree), {}, {}};
  sc.endowment = RandomVariable::Zero(static_cast<Eigen::Index>(sc.tree.num_leaves()));
  attach_standard_claims(sc);
  return sc;
}

}  // namespace

const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"bin1", "tri1", "bin2", "tri2", "arbitrage",
                                              "deadleaf"};
  return names;
}

bool is_builtin(std::string_view name) {
  const auto& n = builtin_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

Scenario builtin_scenario(std::string_view name) {
  const std::vector<Branch> bin{{"up", 2.0, 0.5}, {"down", 0.5, 0.5}};
  const std::vector<Branch> tri{{"u", 2.0, 1.0 / 3}, {"m", 1.0, 1.0 / 3}, {"d", 0.5, 1.0 / 3}};
  if (name == "bin1") return with_zero_endowment(lattice(bin, 1));
  if (name == "bin2") return with_zero_endowment(lattice(bin, 2));
  if (name == "tri1") return with_zero_endowment(lattice(tri, 1));
  if (name == "tri2") return with_zero_endowment(lattice(tri, 2));
  if (name == "arbitrage") {
    return with_zero_endowment(MarketTree(
        {"S"}, {NodeSpec::from_values("root", std::nullopt, 0, {1.0}, 1.0),
                NodeSpec::from_values("up", "root", 1, {2.0}, 0.5),
                NodeSpec::from_values("down", "root", 1, {1.5}, 0.5)}));
  }
  if (name == "deadleaf") {
    return with_zero_endowment(MarketTree(
        {"S"}, {NodeSpec::from_values("root", std::nullopt, 0, {1.0}, 1.0),
                NodeSpec::from_values("A", "root", 1, {1.0}, 0.5),
                NodeSpec::from_values("A.up", "A", 2, {2.0}, 0.5),
                NodeSpec::from_values("A.down", "A", 2, {0.5}, 0.5),
                NodeSpec::from_values("B", "root", 1, {1.0}, 0.5),
                NodeSpec::from_values("B.flat", "B", 2, {1.0}, 0.5),
                NodeSpec::from_values("B.up", "B", 2, {1.5}, 0.5)}));
  }
  throw Error(ErrorCode::InvalidArgument, "unknown built-in market '" + std::string(name) + "'");
}

Scenario random_scenario(std::uint64_t seed, const RandomTreeSpec& spec) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto pick = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };

  const int d = pick(1, std::max(1, spec.max_assets));
  const int periods = pick(spec.min_periods, std::max(spec.min_periods, spec.max_periods));
  std::vector<std::string> assets;
  for (int j = 0; j < d; ++j) assets.push_back("S" + std::to_string(j + 1));

  std::vector<NodeSpec> specs;

  auto add = [&](const std::string& id, std::optional<std::string> parent, int t,
                 const std::vector<double>& s, double prob) {
    specs.push_back(NodeSpec::from_values(id, std::move(parent), t, s, prob));
  };
  struct Pending {
    std::string id;
    int t;
    std::vector<double> s;
  };
  std::vector<Pending> queue;
  std::vector<double> s0(static_cast<std::size_t>(d));
  for (auto& x : s0) x = uniform(0.5, 2.0);
  add("root", std::nullopt, 0, s0, 1.0);
  queue.push_back({"root", 0, s0});

  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    const Pending cur = queue[qi];
    if (cur.t == periods) continue;
    const int lo_branch = d == 1 ? 2 : std::min(3, spec.max_branches);
    const int m = pick(std::min(lo_branch, spec.max_branches), std::max(2, spec.max_branches));
    std::vector<double> w(static_cast<std::size_t>(m)), prob(static_cast<std::size_t>(m));
    double wsum = 0.0, psum = 0.0;
    for (int c = 0; c < m; ++c) {
      w[static_cast<std::size_t>(c)] = uniform(0.2, 1.0);
      prob[static_cast<std::size_t>(c)] = uniform(0.2, 1.0);
      wsum += w[static_cast<std::size_t>(c)];
      psum += prob[static_cast<std::size_t>(c)];
    }
    std::vector<std::vector<double>> inc(static_cast<std::size_t>(m),
                                         std::vector<double>(static_cast<std::size_t>(d)));
    for (int j = 0; j < d; ++j) {
      double acc = 0.0;
      for (int c = 0; c + 1 < m; ++c) {
        const double x = uniform(-0.5, 0.5) * cur.s[static_cast<std::size_t>(j)];
        inc[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] = x;
        acc += w[static_cast<std::size_t>(c)] * x;
      }
      inc[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(j)] =
          -acc / w[static_cast<std::size_t>(m - 1)];
    }
    for (int c = 0; c < m; ++c) {
      std::vector<double> s = cur.s;
      for (int j = 0; j < d; ++j) {
        s[static_cast<std::size_t>(j)] += inc[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
      }
      const std::string id = (cur.id == "root" ? std::string("n") : cur.id + ".") + std::to_string(c);
      add(id, cur.id, cur.t + 1, s, prob[static_cast<std::size_t>(c)] / psum);
      queue.push_back({id, cur.t + 1, s});
    }
  }
  Scenario sc{MarketTree(assets, std::move(specs)), {}, {}};
  const auto L = static_cast<Eigen::Index>(sc.tree.num_leaves());
  sc.endowment.resize(L);
  RandomVariable call(L), payoff(L);
  for (Eigen::Index l = 0; l < L; ++l) {
    sc.endowment[l] = spec.endowment_scale * uniform(-1.0, 1.0);
    const auto& leaf = sc.tree.node(sc.tree.leaf_node(static_cast<std::size_t>(l)));
    call[l] = std::max(leaf.prices[0] - s0[0], 0.0);
    payoff[l] = uniform(0.0, 1.0);
  }
  sc.claims["call"] = call;
  sc.claims["payoff"] = payoff;
  return sc;
}

}  // namespace dualprice
