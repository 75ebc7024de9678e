#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "ddopf/case_io.hpp"
#include "ddopf/netmodel.hpp"

namespace ddopf::testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(DDOPF_TEST_DATA_DIR) / name;
}

inline GridCase load_fixture(const std::string& name) { return load_case_json(data_path(name)); }

// Connected random graph: a random spanning tree plus extra edges.
inline GridCase random_grid(int buses, int extra_edges, std::mt19937_64& rng) {
  GridCase g;
  std::uniform_real_distribution<double> x(0.05, 0.5);
  std::uniform_real_distribution<double> pd(5.0, 60.0);
  for (int b = 1; b <= buses; ++b) g.buses.push_back({b, pd(rng)});
  for (int b = 2; b <= buses; ++b) {
    std::uniform_int_distribution<int> parent(1, b - 1);
    g.branches.push_back({parent(rng), b, x(rng), 1.0, 500.0});
  }
  std::uniform_int_distribution<int> any(1, buses);
  for (int k = 0; k < extra_edges; ++k) {
    const int a = any(rng);
    int b = any(rng);
    if (b == a) b = a % buses + 1;
    g.branches.push_back({a, b, x(rng), 1.0, 500.0});
  }
  g.generators.push_back({1, 0.0, 1000.0, 0.02, 20.0});
  g.generators.push_back({buses, 0.0, 500.0, 0.01, 25.0});
  g.storages.push_back({buses > 2 ? 2 : 1, 0.0, 50.0, -20.0, 20.0, 25.0, 0.01, 1e-4});
  int col = 0;
  for (int b = 2; b <= buses; ++b) g.demands.push_back({b, col++});
  g.slack_bus = 1;
  return g;
}

}  // namespace ddopf::testing
