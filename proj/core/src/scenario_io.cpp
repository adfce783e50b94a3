#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dualprice/error.hpp"
#include "dualprice/scenario.hpp"

namespace dualprice {

namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(const std::string& what) {
  throw Error(ErrorCode::ParseError, what);
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) parse_fail("unknown field '" + it.key() + "' in " + where);
  }
}

std::string decimal_field(const json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  parse_fail(where + " must be a decimal string");
}

RandomVariable leaf_map(const json& obj, const MarketTree& tree, const std::string& where) {
  if (!obj.is_object()) parse_fail(where + " must be an object keyed by leaf id");
  RandomVariable x = RandomVariable::Constant(static_cast<Eigen::Index>(tree.num_leaves()),
                                              std::numeric_limits<double>::quiet_NaN());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    auto leaf = tree.find_leaf(it.key());
    if (!leaf) {
      throw Error(ErrorCode::InvalidTree, where + " names '" + it.key() + "', which is not a leaf");
    }
    double v = parse_decimal(decimal_field(it.value(), where + "." + it.key()));
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::InvalidTree, where + "." + it.key() + " is not finite");
    }
    x[static_cast<Eigen::Index>(*leaf)] = v;
  }
  for (std::size_t l = 0; l < tree.num_leaves(); ++l) {
    if (std::isnan(x[static_cast<Eigen::Index>(l)])) {
      throw Error(ErrorCode::InvalidTree, where + " is missing leaf '" + tree.leaf_id(l) + "'");
    }
  }
  return x;
}

json leaf_map_json(const MarketTree& tree, const RandomVariable& x) {
  json out = json::object();
  for (std::size_t l = 0; l < tree.num_leaves(); ++l) {
    out[tree.leaf_id(l)] = format_decimal(x[static_cast<Eigen::Index>(l)]);
  }
  return out;
}

}  // namespace

Scenario parse_scenario(std::string_view json_text, TreeLimits limits) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    parse_fail(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) parse_fail("top level must be an object");
  reject_unknown(doc, {"version", "assets", "nodes", "endowment", "claims"}, "scenario");

  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    parse_fail("missing integer field 'version'");
  }
  if (doc["version"].get<int>() != kScenarioVersion) {
    parse_fail("unsupported scenario version " + doc["version"].dump());
  }
  if (!doc.contains("assets") || !doc["assets"].is_array()) parse_fail("missing array 'assets'");
  std::vector<std::string> assets;
  for (const auto& a : doc["assets"]) {
    if (!a.is_string()) parse_fail("asset names must be strings");
    assets.push_back(a.get<std::string>());
  }
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) parse_fail("missing array 'nodes'");

  std::vector<NodeSpec> specs;
  for (const auto& n : doc["nodes"]) {
    if (!n.is_object()) parse_fail("each node must be an object");
    reject_unknown(n, {"id", "parent", "t", "prices", "prob"}, "node");
    for (const char* key : {"id", "parent", "t", "prices", "prob"}) {
      if (!n.contains(key)) parse_fail(std::string("node is missing field '") + key + "'");
    }
    NodeSpec s;
    if (!n["id"].is_string()) parse_fail("node id must be a string");
    s.id = n["id"].get<std::string>();
    if (n["parent"].is_null()) {
      s.parent.reset();
    } else if (n["parent"].is_string()) {
      s.parent = n["parent"].get<std::string>();
    } else {
      parse_fail("node '" + s.id + "': parent must be a string or null");
    }
    if (!n["t"].is_number_integer()) parse_fail("node '" + s.id + "': t must be an integer");
    s.time = n["t"].get<int>();
    if (!n["prices"].is_array()) parse_fail("node '" + s.id + "': prices must be an array");
    for (const auto& p : n["prices"]) s.prices.push_back(decimal_field(p, "node '" + s.id + "' price"));
    s.prob = decimal_field(n["prob"], "node '" + s.id + "' prob");
    // Validate the decimal syntax here so malformed numbers are parse errors.
    for (const auto& p : s.prices) parse_decimal(p);
    parse_decimal(s.prob);
    specs.push_back(std::move(s));
  }

  MarketTree tree(std::move(assets), std::move(specs), limits);
  RandomVariable endowment = RandomVariable::Zero(static_cast<Eigen::Index>(tree.num_leaves()));
  if (doc.contains("endowment")) endowment = leaf_map(doc["endowment"], tree, "endowment");
  std::map<std::string, RandomVariable> claims;
  if (doc.contains("claims")) {
    if (!doc["claims"].is_object()) parse_fail("claims must be an object");
    for (auto it = doc["claims"].begin(); it != doc["claims"].end(); ++it) {
      claims.emplace(it.key(), leaf_map(it.value(), tree, "claims." + it.key()));
    }
  }
  return Scenario{std::move(tree), std::move(endowment), std::move(claims)};
}

Scenario load_scenario(const std::filesystem::path& path, TreeLimits limits) {
  std::ifstream in(path);
  if (!in) parse_fail("cannot open scenario file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), limits);
}

MarketTree load_market(const std::filesystem::path& path, TreeLimits limits) {
  return load_scenario(path, limits).tree;
}

std::string serialize_scenario(const Scenario& scenario) {
  const MarketTree& tree = scenario.tree;
  json doc;
  doc["version"] = kScenarioVersion;
  doc["assets"] = tree.assets();
  json nodes = json::array();
  for (const NodeSpec& s : tree.specs()) {
    json n;
    n["id"] = s.id;
    n["parent"] = s.parent ? json(*s.parent) : json(nullptr);
    n["t"] = s.time;
    n["prices"] = s.prices;
    n["prob"] = s.prob;
    nodes.push_back(std::move(n));
  }
  doc["nodes"] = std::move(nodes);
  doc["endowment"] = leaf_map_json(tree, scenario.endowment);
  json claims = json::object();
  for (const auto& [name, x] : scenario.claims) claims[name] = leaf_map_json(tree, x);
  doc["claims"] = std::move(claims);
  return doc.dump(2) + "\n";
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path.string() + "'");
  out << serialize_scenario(scenario);
}

}  // namespace dualprice
