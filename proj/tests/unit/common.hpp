#pragma once

#include <filesystem>
#include <string>

#include "doctest.h"
#include "dualprice/error.hpp"
#include "dualprice/scenarios.hpp"

#define CHECK_CODE(expr, expected)                                   \
  do {                                                               \
    bool thrown_ = false;                                            \
    try {                                                            \
      (void)(expr);                                                  \
    } catch (const dualprice::Error& e_) {                           \
      thrown_ = true;                                                \
      CHECK_MESSAGE(e_.code() == (expected), e_.what());             \
    }                                                                \
    CHECK_MESSAGE(thrown_, "expected an error from " #expr);         \
  } while (0)

inline std::filesystem::path data_file(const std::string& name) {
  return std::filesystem::path(DUALPRICE_TEST_DATA) / name;
}

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}
