#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dualprice/scenario.hpp"

namespace dualprice {

/// Built-in markets, addressable by name from the command line:
///
///   bin1       one period, S: 1 -> {2, 0.5}, p = 1/2 each
///   tri1       one period, S: 1 -> {2, 1, 0.5}, p = 1/3 each
///   bin2       two periods of bin1 (four leaves of 1/4)
///   tri2       two periods of tri1
///   arbitrage  S: 1 -> {2, 1.5}; no martingale measure
///   deadleaf   S: 1 -> A(1), B(1); A -> {2, 0.5}, B -> {1, 1.5}.
///              Martingale measures exist but all of them miss leaf B.up.
///
/// Every built-in carries a zero endowment and a few claims (call, put,
/// digital, and the terminal price as "stock").
Scenario builtin_scenario(std::string_view name);
const std::vector<std::string>& builtin_names();
bool is_builtin(std::string_view name);

struct RandomTreeSpec {
  int min_periods = 1;
  int max_periods = 3;
  int max_branches = 3;
  int max_assets = 2;
  double endowment_scale = 1.0;
};

/// A random tree with full-support P and an equivalent martingale measure
/// built in: at every inner node the child increments are drawn so that a
/// strictly positive combination of them vanishes. The endowment is random;
/// claims "call" and "payoff" are attached.
Scenario random_scenario(std::uint64_t seed, const RandomTreeSpec& spec = {});

}  // namespace dualprice
