#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dualprice::cli {

/// Exit codes: 0 success, 1 a requested verification failed (or the market
/// admits no solution), 2 input or usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dualprice::cli
