#include <random>

#include "common.hpp"
#include "dualprice/market.hpp"
#include "dualprice/scenario.hpp"
#include "support.hpp"

using namespace dualprice;

TEST_CASE("load BIN1 and TRI1 from files") {
  const MarketTree bin1 = load_market(data_file("bin1.json"));
  CHECK(bin1.num_nodes() == 3);
  CHECK(bin1.num_leaves() == 2);
  CHECK(bin1.horizon() == 1);
  CHECK(bin1.leaf_probabilities()[0] == 0.5);
  CHECK(bin1.leaf_probabilities()[1] == 0.5);

  const MarketTree tri1 = load_market(data_file("tri1.json"));
  CHECK(tri1.num_nodes() == 4);
  CHECK(tri1.num_leaves() == 3);
  for (Eigen::Index l = 0; l < 3; ++l) CHECK(tri1.leaf_probabilities()[l] == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(tri1.leaf_probabilities().sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tri1.find_leaf("m").has_value());
  CHECK(tri1.node(*tri1.find("d")).prices[0] == 0.5);
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_CODE(load_market(data_file("bad_probs.json")), ErrorCode::InvalidTree);
  CHECK_CODE(load_market(data_file("malformed.json")), ErrorCode::ParseError);
  CHECK_CODE(load_market(data_file("missing.json")), ErrorCode::ParseError);
  try {
    load_market(data_file("bad_probs.json"));
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("root") != std::string::npos);
  }
  // Unknown field.
  CHECK_CODE(parse_scenario(R"({"version":1,"assets":["S"],"bogus":1,"nodes":[
      {"id":"root","parent":null,"t":0,"prices":["1"],"prob":"1"}]})"),
             ErrorCode::ParseError);
  // Time must increase by one along edges.
  CHECK_CODE(parse_scenario(R"({"version":1,"assets":["S"],"nodes":[
      {"id":"root","parent":null,"t":0,"prices":["1"],"prob":"1"},
      {"id":"a","parent":"root","t":2,"prices":["1"],"prob":"1"}]})"),
             ErrorCode::InvalidTree);
}

TEST_CASE("two-period leaf probabilities multiply") {
  const MarketTree bin2 = builtin_scenario("bin2").tree;
  CHECK(bin2.num_leaves() == 4);
  for (Eigen::Index l = 0; l < 4; ++l) CHECK(bin2.leaf_probabilities()[l] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("condition") {
  const MarketTree tri1 = builtin_scenario("tri1").tree;
  CHECK(condition(tri1, vec({1, 0, 0}), vec({1.0 / 6, 0, 1.0 / 3}), MarketTree::root()) ==
        doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(condition(tri1, vec({4.5, 4.5, 4.5}), vec({0.2, 0.7, 0.1}), MarketTree::root()) ==
        doctest::Approx(4.5).epsilon(1e-15));
  CHECK_CODE(condition(tri1, vec({1, 0, 0}), vec({0, 0, 0}), MarketTree::root()), ErrorCode::ZeroMass);
  CHECK(condition(tri1, vec({1, 0, 0}), vec({0, 0, 0}), MarketTree::root(), ZeroMassPolicy::ReturnZero) == 0.0);
}

TEST_CASE("tower property on random trees") {
  std::mt19937_64 rng(11);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const MarketTree tree = random_scenario(seed).tree;
    const auto n = static_cast<Eigen::Index>(tree.num_leaves());
    Eigen::VectorXd q = testing_support::uniform_vector(n, 0.0, 1.0, rng);
    if (seed % 3 == 0) q[0] = 0.0;
    const Eigen::VectorXd x = testing_support::uniform_vector(n, -5.0, 5.0, rng);
    double acc = 0.0;
    for (std::size_t c : tree.nodes_at(1)) {
      const double m = subtree_mass(tree, q, c);
      if (m > 0.0) acc += m * condition(tree, x, q, c);
    }
    CHECK(condition(tree, x, q, MarketTree::root()) == doctest::Approx(acc / q.sum()).epsilon(1e-12));

    std::vector<bool> reached;
    const AdaptedProcess w = conditional_process(tree, x, q, &reached);
    CHECK(w[0] == doctest::Approx(condition(tree, x, q, 0)).epsilon(1e-12));
  }
}

TEST_CASE("serialize round trip is exact") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Scenario s = random_scenario(seed);
    const Scenario back = parse_scenario(serialize_scenario(s));
    CHECK(back.tree == s.tree);
    CHECK(back.endowment == s.endowment);
    REQUIRE(back.claims.size() == s.claims.size());
    for (const auto& [name, b] : s.claims) CHECK(back.claims.at(name) == b);
    CHECK(serialize_scenario(back) == serialize_scenario(s));
  }
  const Scenario tri = load_scenario(data_file("tri1.json"));
  const auto tmp = std::filesystem::temp_directory_path() / "dualprice_roundtrip.json";
  save_scenario(tri, tmp);
  CHECK(load_market(tmp) == tri.tree);
  std::filesystem::remove(tmp);
}

TEST_CASE("decimal parsing") {
  CHECK(parse_decimal("0.1") == 0.1);
  CHECK(parse_decimal("-2.5e-3") == -2.5e-3);
  CHECK_CODE(parse_decimal("1/3"), ErrorCode::ParseError);
  CHECK(parse_decimal(format_decimal(1.0 / 3)) == 1.0 / 3);
}

TEST_CASE("subtree market") {
  const MarketTree tri2 = builtin_scenario("tri2").tree;
  const std::size_t c = tri2.nodes_at(1)[0];
  const MarketTree sub = subtree_market(tri2, c);
  CHECK(sub.num_leaves() == 3);
  CHECK(sub.horizon() == 1);
  CHECK(sub.leaf_probabilities().sum() == doctest::Approx(1.0));
}
