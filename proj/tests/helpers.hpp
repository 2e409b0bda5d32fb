#pragma once

#include <cmath>
#include <numbers>

#include "rbc/dataset.hpp"
#include "rbc/grid.hpp"

namespace rbc::testing {

/// Two spatial modes rotating at a fixed rate: a linear flow that both
/// surrogate models can represent exactly.
inline Episode two_mode_episode(const Grid& g, int n_snapshots, double theta,
                                double ra = 1e5, double pr = 0.7) {
  Episode ep;
  ep.ra = ra;
  ep.pr = pr;
  ep.seed = 0;
  Matrix phi1(g.ny, g.nx), phi2(g.ny, g.nx);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double x = g.x(i);
      const double env =
          std::sin(std::numbers::pi * (g.y(j) - g.y_min) / (g.y_max - g.y_min));
      phi1(j, i) = env * std::sin(2.0 * std::numbers::pi * x / g.lx);
      phi2(j, i) = env * std::cos(2.0 * std::numbers::pi * x / g.lx);
    }
  for (int t = 0; t < n_snapshots; ++t) {
    ScalarField f(g);
    f.values = std::cos(theta * t) * phi1 + std::sin(theta * t) * phi2;
    ep.snapshots.push_back(std::move(f));
    ep.times.push_back(static_cast<double>(t));
  }
  return ep;
}

inline ScalarField random_field(const Grid& g, std::uint64_t seed, double amp = 1.0) {
  std::mt19937_64 eng(seed);
  ScalarField f(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      f.values(j, i) = amp * (2.0 * (static_cast<double>(eng() >> 11) * 0x1.0p-53) - 1.0);
  return f;
}

}  // namespace rbc::testing
