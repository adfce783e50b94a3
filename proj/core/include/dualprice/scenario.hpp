#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "dualprice/market.hpp"

namespace dualprice {

/// A scenario file: the market tree plus an endowment and named claims.
///
/// JSON schema (version 1, unknown fields rejected at every level):
///
///     {
///       "version": 1,
///       "assets": ["S"],
///       "nodes": [
///         {"id": "root", "parent": null, "t": 0, "prices": ["1"], "prob": "1"},
///         {"id": "u", "parent": "root", "t": 1, "prices": ["2"], "prob": "0.5"},
///         ...
///       ],
///       "endowment": {"u": "0", ...},            // optional, defaults to 0
///       "claims": {"call": {"u": "1", ...}}      // optional
///     }
///
/// Prices, probabilities and payoffs are decimal strings. Endowment and claim
/// maps must name every leaf and nothing else.
struct Scenario {
  MarketTree tree;
  RandomVariable endowment;
  std::map<std::string, RandomVariable> claims;
};

inline constexpr int kScenarioVersion = 1;

Scenario parse_scenario(std::string_view json_text, TreeLimits limits = {});
Scenario load_scenario(const std::filesystem::path& path, TreeLimits limits = {});
MarketTree load_market(const std::filesystem::path& path, TreeLimits limits = {});

std::string serialize_scenario(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

}  // namespace dualprice
