#include "dualprice/market.hpp"

#include <charconv>
#include <cmath>
#include <unordered_map>

#include "dualprice/error.hpp"

namespace dualprice {

namespace {

// Child probabilities of a node must add up to one within this slack before
// they are renormalized.
constexpr double kProbSumSlack = 1e-9;

[[noreturn]] void invalid(const std::string& node, const std::string& what) {
  throw Error(ErrorCode::InvalidTree, "node '" + node + "': " + what);
}

}  // namespace

double parse_decimal(std::string_view text) {
  std::string_view s = text;
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError, "not a decimal number: '" + std::string(text) + "'");
  }
  return value;
}

std::string format_decimal(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

NodeSpec NodeSpec::from_values(std::string id, std::optional<std::string> parent, int time,
                               const std::vector<double>& prices, double prob) {
  NodeSpec spec;
  spec.id = std::move(id);
  spec.parent = std::move(parent);
  spec.time = time;
  for (double p : prices) spec.prices.push_back(format_decimal(p));
  spec.prob = format_decimal(prob);
  return spec;
}

MarketTree::MarketTree(std::vector<std::string> assets, std::vector<NodeSpec> specs,
                       TreeLimits limits)
    : assets_(std::move(assets)) {
  if (assets_.empty()) throw Error(ErrorCode::InvalidTree, "market has no assets");
  if (specs.empty()) throw Error(ErrorCode::InvalidTree, "market has no nodes");
  const std::size_t d = assets_.size();

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!index.emplace(specs[i].id, i).second) invalid(specs[i].id, "duplicate node id");
  }

  std::size_t root = kNoNode;
  std::vector<std::vector<std::size_t>> kids(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const NodeSpec& s = specs[i];
    if (!s.parent) {
      if (root != kNoNode) invalid(s.id, "second root (only one node may have a null parent)");
      root = i;
      continue;
    }
    auto it = index.find(*s.parent);
    if (it == index.end()) invalid(s.id, "unknown parent '" + *s.parent + "'");
    kids[it->second].push_back(i);
  }
  if (root == kNoNode) throw Error(ErrorCode::InvalidTree, "no root node (parent null)");
  if (specs[root].time != 0) invalid(specs[root].id, "root must have time 0");

  // Depth-first preorder; explicit stack keeps deep trees off the call stack.
  std::vector<std::size_t> order;
  order.reserve(specs.size());
  std::vector<std::size_t> stack{root};
  while (!stack.empty()) {
    std::size_t i = stack.back();
    stack.pop_back();
    order.push_back(i);
    for (auto it = kids[i].rbegin(); it != kids[i].rend(); ++it) {
      if (specs[*it].time != specs[i].time + 1) {
        invalid(specs[*it].id, "time must be one more than its parent's time");
      }
      stack.push_back(*it);
    }
  }
  if (order.size() != specs.size()) {
    throw Error(ErrorCode::InvalidTree, "nodes not reachable from the root");
  }

  std::vector<std::size_t> pos(specs.size());
  for (std::size_t k = 0; k < order.size(); ++k) pos[order[k]] = k;

  nodes_.resize(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const NodeSpec& s = specs[order[k]];
    Node& n = nodes_[k];
    n.id = s.id;
    n.time = s.time;
    n.parent = s.parent ? pos[index.at(*s.parent)] : kNoNode;
    if (s.prices.size() != d) {
      invalid(s.id, "expected " + std::to_string(d) + " prices, got " +
                        std::to_string(s.prices.size()));
    }
    n.price_text = s.prices;
    n.prob_text = s.prob;
    for (const auto& txt : s.prices) {
      double v = parse_decimal(txt);
      if (!std::isfinite(v)) invalid(s.id, "price is not finite");
      n.prices.push_back(v);
    }
    n.branch_prob = parse_decimal(s.prob);
    if (!(n.branch_prob > 0.0 && n.branch_prob <= 1.0)) {
      invalid(s.id, "branch probability must lie in (0,1]");
    }
    for (std::size_t c : kids[order[k]]) n.children.push_back(pos[c]);
  }
  if (std::abs(nodes_[0].branch_prob - 1.0) > 0.0) {
    invalid(nodes_[0].id, "root probability must be 1");
  }

  for (const Node& n : nodes_) horizon_ = std::max(horizon_, n.time);

  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    Node& n = nodes_[k];
    if (n.is_leaf()) {
      if (n.time != horizon_) {
        invalid(n.id, "leaf at time " + std::to_string(n.time) + " but horizon is " +
                          std::to_string(horizon_));
      }
      continue;
    }
    double sum = 0.0;
    for (std::size_t c : n.children) sum += nodes_[c].branch_prob;
    if (std::abs(sum - 1.0) > kProbSumSlack) {
      invalid(n.id, "child probabilities sum to " + format_decimal(sum) + " (probabilities sum != 1)");
    }
    for (std::size_t c : n.children) nodes_[c].branch_prob /= sum;
  }

  // Preorder: parents precede children, so unconditional probabilities and
  // leaf ranges can be filled by a forward and a backward sweep.
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    Node& n = nodes_[k];
    n.prob = n.parent == kNoNode ? 1.0 : nodes_[n.parent].prob * n.branch_prob;
    if (n.is_leaf()) {
      n.leaf_begin = leaf_nodes_.size();
      n.leaf_end = n.leaf_begin + 1;
      leaf_nodes_.push_back(k);
    } else {
      inner_nodes_.push_back(k);
    }
  }
  if (leaf_nodes_.size() > limits.max_leaves) {
    throw Error(ErrorCode::InvalidTree, "tree has " + std::to_string(leaf_nodes_.size()) +
                                             " leaves, above the configured cap of " +
                                             std::to_string(limits.max_leaves));
  }
  for (std::size_t k = nodes_.size(); k-- > 0;) {
    Node& n = nodes_[k];
    if (n.is_leaf()) continue;
    n.leaf_begin = nodes_[n.children.front()].leaf_begin;
    n.leaf_end = nodes_[n.children.back()].leaf_end;
  }

  leaf_prob_.resize(static_cast<Eigen::Index>(leaf_nodes_.size()));
  for (std::size_t l = 0; l < leaf_nodes_.size(); ++l) {
    leaf_prob_[static_cast<Eigen::Index>(l)] = nodes_[leaf_nodes_[l]].prob;
  }
}

std::optional<std::size_t> MarketTree::find(std::string_view id) const {
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (nodes_[k].id == id) return k;
  }
  return std::nullopt;
}

std::optional<std::size_t> MarketTree::find_leaf(std::string_view id) const {
  auto n = find(id);
  if (!n || !nodes_[*n].is_leaf()) return std::nullopt;
  return nodes_[*n].leaf_begin;
}

std::vector<std::size_t> MarketTree::nodes_at(int t) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (nodes_[k].time == t) out.push_back(k);
  }
  return out;
}

Eigen::VectorXd MarketTree::increment(std::size_t child) const {
  const Node& c = nodes_[child];
  const Node& n = nodes_[c.parent];
  Eigen::VectorXd dS(static_cast<Eigen::Index>(assets_.size()));
  for (std::size_t i = 0; i < assets_.size(); ++i) {
    dS[static_cast<Eigen::Index>(i)] = c.prices[i] - n.prices[i];
  }
  return dS;
}

std::vector<NodeSpec> MarketTree::specs() const {
  std::vector<NodeSpec> out;
  out.reserve(nodes_.size());
  for (const Node& n : nodes_) {
    NodeSpec s;
    s.id = n.id;
    if (n.parent != kNoNode) s.parent = nodes_[n.parent].id;
    s.time = n.time;
    s.prices = n.price_text;
    s.prob = n.prob_text;
    out.push_back(std::move(s));
  }
  return out;
}

bool MarketTree::operator==(const MarketTree& other) const {
  if (assets_ != other.assets_ || nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const Node& a = nodes_[k];
    const Node& b = other.nodes_[k];
    if (a.id != b.id || a.parent != b.parent || a.time != b.time ||
        a.children != b.children || a.price_text != b.price_text ||
        a.prob_text != b.prob_text || a.prices != b.prices ||
        a.branch_prob != b.branch_prob) {
      return false;
    }
  }
  return true;
}

double subtree_mass(const MarketTree& tree, const MeasureVector& q, std::size_t node) {
  const Node& n = tree.node(node);
  return q.segment(static_cast<Eigen::Index>(n.leaf_begin),
                   static_cast<Eigen::Index>(n.leaf_end - n.leaf_begin))
      .sum();
}

double condition(const MarketTree& tree, const RandomVariable& x, const MeasureVector& q,
                 std::size_t node, ZeroMassPolicy policy) {
  const Node& n = tree.node(node);
  const auto b = static_cast<Eigen::Index>(n.leaf_begin);
  const auto len = static_cast<Eigen::Index>(n.leaf_end - n.leaf_begin);
  const double mass = q.segment(b, len).sum();
  if (!(mass > 0.0)) {
    if (policy == ZeroMassPolicy::ReturnZero) return 0.0;
    throw Error(ErrorCode::ZeroMass, "node '" + n.id + "' has zero subtree mass");
  }
  return q.segment(b, len).dot(x.segment(b, len)) / mass;
}

AdaptedProcess conditional_process(const MarketTree& tree, const RandomVariable& x,
                                   const MeasureVector& q, std::vector<bool>* reached) {
  AdaptedProcess w(static_cast<Eigen::Index>(tree.num_nodes()));
  if (reached) reached->assign(tree.num_nodes(), true);
  for (std::size_t k = 0; k < tree.num_nodes(); ++k) {
    const double m = subtree_mass(tree, q, k);
    const bool live = m > 0.0;
    if (reached) (*reached)[k] = live;
    w[static_cast<Eigen::Index>(k)] =
        live ? condition(tree, x, q, k) : 0.0;
  }
  return w;
}

MarketTree subtree_market(const MarketTree& tree, std::size_t node) {
  const Node& top = tree.node(node);
  std::vector<NodeSpec> specs;
  std::vector<std::size_t> stack{node};
  while (!stack.empty()) {
    const std::size_t k = stack.back();
    stack.pop_back();
    const Node& n = tree.node(k);
    NodeSpec s;
    s.id = n.id;
    if (k != node) s.parent = tree.node(n.parent).id;
    s.time = n.time - top.time;
    s.prices = n.price_text;
    s.prob = k == node ? "1" : n.prob_text;
    specs.push_back(std::move(s));
    for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) stack.push_back(*it);
  }
  return MarketTree(tree.assets(), std::move(specs));
}

}  // namespace dualprice
