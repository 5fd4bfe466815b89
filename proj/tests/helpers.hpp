#pragma once

#include <filesystem>
#include <string>

#include "qroute/vrp.hpp"

namespace qroute::test {

inline std::filesystem::path tmp_path(const std::string& name) {
  const std::filesystem::path dir(QROUTE_TEST_TMP);
  std::filesystem::create_directories(dir);
  return dir / name;
}

inline Instance make_instance(std::initializer_list<std::pair<double, double>> xy, std::vector<int> demands,
                              int capacity) {
  Eigen::MatrixX2d c(static_cast<Eigen::Index>(xy.size()), 2);
  Eigen::Index i = 0;
  for (auto [x, y] : xy) {
    c(i, 0) = x;
    c(i, 1) = y;
    ++i;
  }
  return Instance(c, std::move(demands), capacity);
}

}  // namespace qroute::test
