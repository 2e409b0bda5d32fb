#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "rbc/errors.hpp"
#include "rbc/fft.hpp"
#include "rbc/grid.hpp"

namespace rbc {

using SpectralMatrix = Eigen::MatrixXcd;

// -------- row transforms (x-direction) --------
//
// Half-spectrum convention: column m of the spectral matrix holds the Fourier
// coefficient c_m = (1/nx) sum_i f(j,i) e^{-2pi i m i/nx} for m = 0..nx/2,
// so c_0 is the row mean. The other half is implied by conjugate symmetry.

inline SpectralMatrix forward_x(const Matrix& f) {
  const int ny = static_cast<int>(f.rows());
  const int nx = static_cast<int>(f.cols());
  const Fft& plan = fft_plan(nx);
  SpectralMatrix out(ny, nx / 2 + 1);
  std::vector<std::complex<double>> in(nx), tf(nx);
  const double scale = 1.0 / nx;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) in[i] = f(j, i);
    plan.forward(in.data(), tf.data());
    for (int m = 0; m <= nx / 2; ++m) out(j, m) = tf[m] * scale;
  }
  return out;
}

inline Matrix inverse_x(const SpectralMatrix& c, int nx) {
  const int ny = static_cast<int>(c.rows());
  const Fft& plan = fft_plan(nx);
  Matrix out(ny, nx);
  std::vector<std::complex<double>> full(nx), tf(nx);
  for (int j = 0; j < ny; ++j) {
    full[0] = c(j, 0);
    for (int m = 1; m < nx / 2; ++m) {
      full[m] = c(j, m);
      full[nx - m] = std::conj(c(j, m));
    }
    full[nx / 2] = c(j, nx / 2);
    plan.inverse(full.data(), tf.data());
    for (int i = 0; i < nx; ++i) out(j, i) = tf[i].real();
  }
  return out;
}

/// Physical wavenumber of mode m: k_m = 2 pi m / lx.
inline double wavenumber(int m, double lx) {
  return 2.0 * std::numbers::pi * m / lx;
}

/// d/dx in spectral space. The Nyquist mode has no well-defined odd
/// derivative on a real grid and is zeroed.
inline void ddx_spectral(SpectralMatrix& c, int nx, double lx) {
  for (int m = 0; m < nx / 2; ++m)
    c.col(m) *= std::complex<double>(0.0, wavenumber(m, lx));
  c.col(nx / 2).setZero();
}

/// 2/3-rule filter: zero modes m > nx/3.
inline void dealias_x(SpectralMatrix& c, int nx) {
  const int keep = nx / 3;
  for (int m = keep + 1; m <= nx / 2; ++m) c.col(m).setZero();
}

// -------- public derivative operators --------

/// Spectral (Fourier) x-derivative; exact for resolved wavenumbers.
inline ScalarField ddx(const ScalarField& f) {
  SpectralMatrix c = forward_x(f.values);
  ddx_spectral(c, f.grid.nx, f.grid.lx);
  return ScalarField(f.grid, inverse_x(c, f.grid.nx));
}

/// y-derivative: second-order central differences on the uniform interior,
/// one-sided second-order stencils at the walls.
inline ScalarField ddy(const ScalarField& f) {
  const int ny = f.grid.ny;
  if (ny < 3) throw GridTooSmall("ddy: need ny >= 3");
  const double inv2dy = 1.0 / (2.0 * f.grid.dy());
  Matrix out(ny, f.grid.nx);
  out.row(0) =
      (-3.0 * f.values.row(0) + 4.0 * f.values.row(1) - f.values.row(2)) * inv2dy;
  for (int j = 1; j < ny - 1; ++j)
    out.row(j) = (f.values.row(j + 1) - f.values.row(j - 1)) * inv2dy;
  out.row(ny - 1) = (3.0 * f.values.row(ny - 1) - 4.0 * f.values.row(ny - 2) +
                     f.values.row(ny - 3)) *
                    inv2dy;
  return ScalarField(f.grid, std::move(out));
}

}  // namespace rbc
