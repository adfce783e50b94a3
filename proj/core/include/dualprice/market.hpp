#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace dualprice {

/// An F_T-measurable quantity: one value per leaf, in leaf order.
using RandomVariable = Eigen::VectorXd;
/// A nonnegative finite measure on the leaves (mass per leaf).
using MeasureVector = Eigen::VectorXd;
/// A scalar adapted process: one value per node, in node order.
using AdaptedProcess = Eigen::VectorXd;
/// A vector-valued adapted process: row n holds the value at node n.
using StrategyProcess = Eigen::MatrixXd;

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

/// Input description of one node. Prices and probability are decimal strings;
/// they are converted to binary floating point exactly once when the tree is
/// built.
struct NodeSpec {
  std::string id;
  std::optional<std::string> parent;
  int time = 0;
  std::vector<std::string> prices;
  std::string prob;

  /// Builds a spec from binary values using shortest round-trip decimals.
  static NodeSpec from_values(std::string id, std::optional<std::string> parent, int time,
                              const std::vector<double>& prices, double prob);
};

struct Node {
  std::string id;
  std::size_t parent = kNoNode;
  int time = 0;
  std::vector<double> prices;
  double branch_prob = 1.0;  // conditional on the parent
  double prob = 1.0;         // unconditional P(node)
  std::vector<std::size_t> children;
  std::size_t leaf_begin = 0;  // leaves under this node are [leaf_begin, leaf_end)
  std::size_t leaf_end = 0;
  std::vector<std::string> price_text;
  std::string prob_text;

  bool is_leaf() const { return children.empty(); }
};

struct TreeLimits {
  std::size_t max_leaves = 100000;
};

/// A finite filtered market on an event tree. Nodes are stored in depth-first
/// preorder so that every subtree owns a contiguous block of leaves.
/// Immutable once constructed.
class MarketTree {
 public:
  MarketTree(std::vector<std::string> assets, std::vector<NodeSpec> nodes,
             TreeLimits limits = {});

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_leaves() const { return leaf_nodes_.size(); }
  std::size_t num_assets() const { return assets_.size(); }
  int horizon() const { return horizon_; }

  const std::vector<std::string>& assets() const { return assets_; }
  std::span<const Node> nodes() const { return nodes_; }
  const Node& node(std::size_t n) const { return nodes_[n]; }
  static constexpr std::size_t root() { return 0; }

  std::size_t leaf_node(std::size_t leaf) const { return leaf_nodes_[leaf]; }
  const std::string& leaf_id(std::size_t leaf) const { return nodes_[leaf_nodes_[leaf]].id; }
  std::optional<std::size_t> find(std::string_view id) const;
  std::optional<std::size_t> find_leaf(std::string_view id) const;

  /// Non-leaf nodes in preorder.
  const std::vector<std::size_t>& inner_nodes() const { return inner_nodes_; }
  std::vector<std::size_t> nodes_at(int t) const;

  /// Leaf probabilities p_l (product of branch probabilities root to leaf).
  const Eigen::VectorXd& leaf_probabilities() const { return leaf_prob_; }

  /// Price increment S_c - S_n for child c of n, as a vector over assets.
  Eigen::VectorXd increment(std::size_t child) const;

  /// Specs in storage order, carrying the original decimal strings.
  std::vector<NodeSpec> specs() const;

  bool operator==(const MarketTree& other) const;

 private:
  std::vector<std::string> assets_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> leaf_nodes_;
  std::vector<std::size_t> inner_nodes_;
  Eigen::VectorXd leaf_prob_;
  int horizon_ = 0;
};

inline Eigen::VectorXd leaf_probabilities(const MarketTree& tree) {
  return tree.leaf_probabilities();
}

/// Total q-mass of the leaves under a node.
double subtree_mass(const MarketTree& tree, const MeasureVector& q, std::size_t node);

enum class ZeroMassPolicy { Throw, ReturnZero };

/// E_q[x | node]: the q-weighted average of x over the leaves under the node.
double condition(const MarketTree& tree, const RandomVariable& x, const MeasureVector& q,
                 std::size_t node, ZeroMassPolicy policy = ZeroMassPolicy::Throw);

/// W_n = E_q[x | n] at every node; nodes of zero q-mass get 0 and are
/// reported through `reached` when given.
AdaptedProcess conditional_process(const MarketTree& tree, const RandomVariable& x,
                                   const MeasureVector& q,
                                   std::vector<bool>* reached = nullptr);

/// The subtree rooted at `node` as a market of its own: times start at 0 and
/// branch probabilities are conditional on reaching the node. Leaf k of the
/// result is leaf leaf_begin + k of the original.
MarketTree subtree_market(const MarketTree& tree, std::size_t node);

/// Parses a decimal string the way the scenario loader does.
double parse_decimal(std::string_view text);
/// Shortest decimal string that parses back to exactly `value`.
std::string format_decimal(double value);

}  // namespace dualprice
