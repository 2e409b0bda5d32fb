#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rbc/errors.hpp"

namespace rbc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Rectangular channel: periodic in x with extent lx, walls at y_min and
/// y_max. nx must be even (real-FFT mode pairing); the y grid is uniform
/// with ny points including both walls.
struct Grid {
  int nx = 96;
  int ny = 64;
  double lx = 2.0 * std::numbers::pi;
  double y_min = -1.0;
  double y_max = 1.0;

  Grid() = default;
  Grid(int nx_, int ny_, double lx_ = 2.0 * std::numbers::pi,
       double y_min_ = -1.0, double y_max_ = 1.0)
      : nx(nx_), ny(ny_), lx(lx_), y_min(y_min_), y_max(y_max_) {
    if (nx < 2 || nx % 2 != 0)
      throw std::invalid_argument("Grid: nx must be even and >= 2");
    if (ny < 2) throw std::invalid_argument("Grid: ny must be >= 2");
    if (!(y_max > y_min)) throw std::invalid_argument("Grid: y_max <= y_min");
    if (!(lx > 0.0)) throw std::invalid_argument("Grid: lx <= 0");
  }

  double dx() const { return lx / nx; }
  double dy() const { return (y_max - y_min) / (ny - 1); }
  double x(int i) const { return i * dx(); }
  double y(int j) const { return y_min + j * dy(); }

  bool operator==(const Grid& o) const {
    return nx == o.nx && ny == o.ny && lx == o.lx && y_min == o.y_min &&
           y_max == o.y_max;
  }
};

/// Scalar field sampled on a Grid. values(j, i) is the sample at y_j, x_i
/// (row = wall-normal index, column = periodic index).
struct ScalarField {
  Grid grid;
  Matrix values;  // ny x nx

  ScalarField() = default;
  explicit ScalarField(const Grid& g) : grid(g), values(Matrix::Zero(g.ny, g.nx)) {}
  ScalarField(const Grid& g, Matrix v) : grid(g), values(std::move(v)) {
    if (values.rows() != grid.ny || values.cols() != grid.nx)
      throw ShapeMismatch("ScalarField: values shape does not match grid");
  }

  bool finite() const { return values.allFinite(); }

  /// Arithmetic mean over all grid points. Accumulated in quad precision so
  /// the result does not depend on traversal order; column permutations of
  /// a field then shift derived quantities bit-exactly.
  double mean() const {
#ifdef __SIZEOF_FLOAT128__
    __float128 acc = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i) acc += values.data()[i];
    return static_cast<double>(acc / values.size());
#else
    return values.mean();
#endif
  }
};

/// Field to snapshot vector, row-major (y outer, x inner).
inline Vector flatten(const ScalarField& f) {
  Vector v(f.grid.ny * f.grid.nx);
  for (int j = 0; j < f.grid.ny; ++j)
    for (int i = 0; i < f.grid.nx; ++i) v(j * f.grid.nx + i) = f.values(j, i);
  return v;
}

inline ScalarField unflatten(const Grid& g, const Vector& v) {
  if (v.size() != static_cast<Eigen::Index>(g.ny) * g.nx)
    throw ShapeMismatch("unflatten: vector length does not match grid");
  ScalarField f(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) f.values(j, i) = v(j * g.nx + i);
  return f;
}

}  // namespace rbc
