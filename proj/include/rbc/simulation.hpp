#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rbc/dataset.hpp"
#include "rbc/errors.hpp"
#include "rbc/grid.hpp"
#include "rbc/operators.hpp"

namespace rbc {

/// Physical and numerical parameters of one DNS run. The diffusivities are
/// scaled so that ra is the Rayleigh number of the actual layer (thickness
/// y_max - y_min, temperature difference t_bottom - t_top); convection then
/// onsets near the no-slip critical value 1708 regardless of the domain
/// convention. For a unit-thickness, unit-difference layer they reduce to
/// the bare non-dimensional values sqrt(Pr/Ra) and 1/sqrt(Ra Pr).
struct SimulationConfig {
  double ra = 1e5;
  double pr = 0.7;
  Grid grid{48, 32};  // desk-scale default; full runs use 96 x 64
  double t_bottom = 2.0;
  double t_top = 1.0;
  double dt = 0.025;
  double record_interval = 1.0;
  double cook_time = 100.0;
  double episode_length = 500.0;
  double noise_amplitude = 1e-3;
  std::uint64_t seed = 0;
  bool buoyancy = true;  // diagnostic switch: false drops the dT/dx torque

  double layer_scale() const {
    const double d = grid.y_max - grid.y_min;
    return std::sqrt((t_bottom - t_top) * d * d * d);
  }
  double nu() const { return layer_scale() * std::sqrt(pr / ra); }
  double kappa() const { return layer_scale() / std::sqrt(ra * pr); }

  void validate() const {
    if (!(ra > 0.0) || !(pr > 0.0)) throw std::invalid_argument("SimulationConfig: Ra and Pr must be positive");
    if (!(t_bottom > t_top)) throw std::invalid_argument("SimulationConfig: t_bottom must exceed t_top");
    if (!(dt > 0.0)) throw std::invalid_argument("SimulationConfig: dt must be positive");
    const double steps = record_interval / dt;
    if (std::abs(steps - std::llround(steps)) > 1e-9 * std::max(1.0, steps) || std::llround(steps) < 1)
      throw std::invalid_argument("SimulationConfig: record_interval must be an integer multiple of dt");
    if (grid.ny < 3) throw GridTooSmall("SimulationConfig: ny < 3");
  }

  long record_steps() const { return std::llround(record_interval / dt); }
  long cook_steps() const { return std::llround(cook_time / dt); }
  long snapshot_count() const { return std::llround(episode_length / record_interval); }
};

/// Instantaneous solver state. Velocities derive from the streamfunction
/// (u_x = ddy(psi), u_y = -ddx(psi)), which keeps the discrete divergence
/// at the commutator-roundoff floor. The spectral tendencies of the
/// previous step ride along as Adams-Bashforth memory; they are empty on a
/// freshly constructed state, which makes the first step forward Euler.
struct FlowState {
  ScalarField temperature;
  ScalarField vorticity;
  ScalarField streamfunction;
  ScalarField u_x;
  ScalarField u_y;
  double time = 0.0;

  SpectralMatrix prev_tendency_omega;  // empty until one step has run
  SpectralMatrix prev_tendency_temp;

  bool has_history() const { return prev_tendency_omega.size() > 0; }
};

namespace detail {

/// Uniform double in [0, 1) from the raw 64-bit stream; avoids the
/// implementation-defined std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Thomas solve of the constant-coefficient tridiagonal system
///   off*x_{j-1} + diag*x_j + off*x_{j+1} = rhs_j   for j = 1..n-2
/// with Dirichlet values pinned at x_0 and x_{n-1}.
inline void solve_dirichlet_tridiag(int n, double off, double diag,
                                    const std::complex<double>* rhs_interior,
                                    std::complex<double> bc_low,
                                    std::complex<double> bc_high,
                                    std::complex<double>* x) {
  const int ni = n - 2;
  thread_local std::vector<double> upper;
  thread_local std::vector<std::complex<double>> work;
  upper.assign(ni, 0.0);
  work.assign(rhs_interior, rhs_interior + ni);
  work[0] -= off * bc_low;
  work[ni - 1] -= off * bc_high;

  double beta = diag;
  upper[0] = off / beta;
  work[0] /= beta;
  for (int j = 1; j < ni; ++j) {
    beta = diag - off * upper[j - 1];
    upper[j] = off / beta;
    work[j] = (work[j] - off * work[j - 1]) / beta;
  }
  x[0] = bc_low;
  x[n - 1] = bc_high;
  x[ni] = work[ni - 1];
  for (int j = ni - 2; j >= 0; --j) x[j + 1] = work[j] - upper[j] * x[j + 2];
}

/// Second difference in y applied to interior rows of a spectral matrix;
/// wall rows of the input supply the boundary closure.
inline SpectralMatrix d2y_interior(const SpectralMatrix& f, double dy) {
  const double inv_dy2 = 1.0 / (dy * dy);
  SpectralMatrix out = SpectralMatrix::Zero(f.rows(), f.cols());
  for (int j = 1; j + 1 < f.rows(); ++j)
    out.row(j) = (f.row(j + 1) - 2.0 * f.row(j) + f.row(j - 1)) * inv_dy2;
  return out;
}

}  // namespace detail

/// Diffusive equilibrium (linear conduction profile) plus seeded uniform
/// noise in [-a, a] on the interior temperature points; fluid at rest.
inline FlowState initial_condition(const SimulationConfig& config) {
  config.validate();
  const Grid& g = config.grid;
  FlowState s;
  s.temperature = ScalarField(g);
  s.vorticity = ScalarField(g);
  s.streamfunction = ScalarField(g);
  s.u_x = ScalarField(g);
  s.u_y = ScalarField(g);
  s.time = 0.0;

  const double span = g.y_max - g.y_min;
  for (int j = 0; j < g.ny; ++j) {
    const double frac = (g.y(j) - g.y_min) / span;
    s.temperature.values.row(j).setConstant(config.t_bottom +
                                            (config.t_top - config.t_bottom) * frac);
  }
  if (config.noise_amplitude != 0.0) {
    std::mt19937_64 eng(config.seed);
    for (int j = 1; j < g.ny - 1; ++j)
      for (int i = 0; i < g.nx; ++i)
        s.temperature.values(j, i) +=
            config.noise_amplitude * (2.0 * detail::uniform01(eng) - 1.0);
  }
  return s;
}

/// Streamfunction from vorticity: solves lap(psi) = -omega with psi = 0 at
/// both walls, one tridiagonal system per Fourier mode in x.
inline ScalarField poisson_solve(const ScalarField& vorticity) {
  const Grid& g = vorticity.grid;
  if (g.ny < 3) throw GridTooSmall("poisson_solve: ny < 3");
  const double dy = g.dy();
  const double inv_dy2 = 1.0 / (dy * dy);

  SpectralMatrix omega_hat = forward_x(vorticity.values);
  SpectralMatrix psi_hat(g.ny, g.nx / 2 + 1);
  std::vector<std::complex<double>> rhs(g.ny - 2), sol(g.ny);
  for (int m = 0; m <= g.nx / 2; ++m) {
    const double k = wavenumber(m, g.lx);
    for (int j = 1; j < g.ny - 1; ++j) rhs[j - 1] = -omega_hat(j, m);
    detail::solve_dirichlet_tridiag(g.ny, inv_dy2, -2.0 * inv_dy2 - k * k,
                                    rhs.data(), 0.0, 0.0, sol.data());
    for (int j = 0; j < g.ny; ++j) psi_hat(j, m) = sol[j];
  }
  Matrix psi = inverse_x(psi_hat, g.nx);
  psi.row(0).setZero();
  psi.row(g.ny - 1).setZero();
  return ScalarField(g, std::move(psi));
}

/// One time step of the vorticity-streamfunction system:
///   d(omega)/dt + u.grad(omega) = nu lap(omega) + dT/dx
///   dT/dt      + u.grad(T)     = kappa lap(T)
/// Advection and buoyancy advance by explicit AB2 (forward Euler on the
/// first step), diffusion by Crank-Nicolson solved per x-mode in y. The
/// advection products are 2/3-rule dealiased in x. Wall vorticity comes
/// from Thom's formula omega_wall = -2 psi_adjacent / dy^2 using the
/// streamfunction of the incoming state.
inline FlowState step(const FlowState& state, const SimulationConfig& config) {
  const Grid& g = state.temperature.grid;
  const int ny = g.ny, nx = g.nx, nm = nx / 2 + 1;
  const double dy = g.dy();
  const double inv_dy2 = 1.0 / (dy * dy);
  const double dt = config.dt;

  SpectralMatrix omega_hat = forward_x(state.vorticity.values);
  SpectralMatrix temp_hat = forward_x(state.temperature.values);
  SpectralMatrix psi_hat = forward_x(state.streamfunction.values);

  // physical-space gradients
  SpectralMatrix work = omega_hat;
  ddx_spectral(work, nx, g.lx);
  Matrix omega_x = inverse_x(work, nx);
  work = temp_hat;
  ddx_spectral(work, nx, g.lx);
  Matrix temp_x = inverse_x(work, nx);
  Matrix omega_y = ddy(state.vorticity).values;
  Matrix temp_y = ddy(state.temperature).values;

  // advection products, dealiased in x
  const Matrix& ux = state.u_x.values;
  const Matrix& uy = state.u_y.values;
  SpectralMatrix adv_omega =
      forward_x((ux.array() * omega_x.array() + uy.array() * omega_y.array()).matrix());
  SpectralMatrix adv_temp =
      forward_x((ux.array() * temp_x.array() + uy.array() * temp_y.array()).matrix());
  dealias_x(adv_omega, nx);
  dealias_x(adv_temp, nx);

  // explicit tendencies: advection plus buoyancy torque dT/dx
  SpectralMatrix n_omega = -adv_omega;
  if (config.buoyancy) {
    SpectralMatrix buoy = temp_hat;
    ddx_spectral(buoy, nx, g.lx);
    n_omega += buoy;
  }
  SpectralMatrix n_temp = -adv_temp;

  SpectralMatrix ab_omega, ab_temp;
  if (state.has_history()) {
    ab_omega = 1.5 * n_omega - 0.5 * state.prev_tendency_omega;
    ab_temp = 1.5 * n_temp - 0.5 * state.prev_tendency_temp;
  } else {
    ab_omega = n_omega;
    ab_temp = n_temp;
  }

  // Crank-Nicolson right-hand sides (interior rows)
  const double nu = config.nu();
  const double kappa = config.kappa();
  SpectralMatrix d2_omega = detail::d2y_interior(omega_hat, dy);
  SpectralMatrix d2_temp = detail::d2y_interior(temp_hat, dy);

  SpectralMatrix new_omega_hat(ny, nm), new_temp_hat(ny, nm), new_psi_hat(ny, nm);
  std::vector<std::complex<double>> rhs(ny - 2), sol(ny);
  for (int m = 0; m < nm; ++m) {
    const double k = wavenumber(m, g.lx);
    const double k2 = k * k;

    // vorticity, Thom wall values from the incoming streamfunction
    const double a_om = 0.5 * dt * nu;
    const std::complex<double> omega_bottom = -2.0 * inv_dy2 * psi_hat(1, m);
    const std::complex<double> omega_top = -2.0 * inv_dy2 * psi_hat(ny - 2, m);
    for (int j = 1; j < ny - 1; ++j)
      rhs[j - 1] = omega_hat(j, m) + dt * ab_omega(j, m) +
                   a_om * (d2_omega(j, m) - k2 * omega_hat(j, m));
    detail::solve_dirichlet_tridiag(ny, -a_om * inv_dy2,
                                    1.0 + a_om * (2.0 * inv_dy2 + k2), rhs.data(),
                                    omega_bottom, omega_top, sol.data());
    for (int j = 0; j < ny; ++j) new_omega_hat(j, m) = sol[j];

    // temperature, Dirichlet walls (only the mean mode carries them)
    const double a_t = 0.5 * dt * kappa;
    const std::complex<double> t_bottom = (m == 0) ? config.t_bottom : 0.0;
    const std::complex<double> t_top = (m == 0) ? config.t_top : 0.0;
    for (int j = 1; j < ny - 1; ++j)
      rhs[j - 1] = temp_hat(j, m) + dt * ab_temp(j, m) +
                   a_t * (d2_temp(j, m) - k2 * temp_hat(j, m));
    detail::solve_dirichlet_tridiag(ny, -a_t * inv_dy2,
                                    1.0 + a_t * (2.0 * inv_dy2 + k2), rhs.data(),
                                    t_bottom, t_top, sol.data());
    for (int j = 0; j < ny; ++j) new_temp_hat(j, m) = sol[j];

    // streamfunction from the updated vorticity
    for (int j = 1; j < ny - 1; ++j) rhs[j - 1] = -new_omega_hat(j, m);
    detail::solve_dirichlet_tridiag(ny, inv_dy2, -2.0 * inv_dy2 - k2, rhs.data(),
                                    0.0, 0.0, sol.data());
    for (int j = 0; j < ny; ++j) new_psi_hat(j, m) = sol[j];
  }

  FlowState next;
  next.time = state.time + dt;
  next.prev_tendency_omega = std::move(n_omega);
  next.prev_tendency_temp = std::move(n_temp);

  Matrix temp_new = inverse_x(new_temp_hat, nx);
  temp_new.row(0).setConstant(config.t_bottom);
  temp_new.row(ny - 1).setConstant(config.t_top);
  next.temperature = ScalarField(g, std::move(temp_new));

  Matrix omega_new = inverse_x(new_omega_hat, nx);
  omega_new.row(0) = -2.0 * inv_dy2 * state.streamfunction.values.row(1);
  omega_new.row(ny - 1) = -2.0 * inv_dy2 * state.streamfunction.values.row(ny - 2);
  next.vorticity = ScalarField(g, std::move(omega_new));

  Matrix psi_new = inverse_x(new_psi_hat, nx);
  psi_new.row(0).setZero();
  psi_new.row(ny - 1).setZero();
  next.streamfunction = ScalarField(g, std::move(psi_new));

  next.u_x = ddy(next.streamfunction);
  SpectralMatrix uy_hat = new_psi_hat;
  ddx_spectral(uy_hat, nx, g.lx);
  next.u_y = ScalarField(g, -inverse_x(uy_hat, nx));

  const double limit = 1e6;
  for (const ScalarField* f :
       {&next.temperature, &next.vorticity, &next.streamfunction, &next.u_x, &next.u_y}) {
    if (!f->finite() || f->values.cwiseAbs().maxCoeff() > limit)
      throw Blowup("step: field magnitude exceeded " + std::to_string(limit) +
                   " at t = " + std::to_string(next.time) + "; reduce dt");
  }
  return next;
}

/// Runs the cook phase, then records one convective-flux snapshot every
/// record_interval for episode_length time units.
inline Episode simulate_episode(const SimulationConfig& config) {
  config.validate();
  FlowState state = initial_condition(config);
  for (long n = 0; n < config.cook_steps(); ++n) state = step(state, config);

  Episode ep;
  ep.ra = config.ra;
  ep.pr = config.pr;
  ep.seed = config.seed;
  const long n_snap = config.snapshot_count();
  ep.times.reserve(n_snap);
  ep.snapshots.reserve(n_snap);
  for (long k = 1; k <= n_snap; ++k) {
    for (long n = 0; n < config.record_steps(); ++n) state = step(state, config);
    ep.times.push_back(config.cook_time + static_cast<double>(k) * config.record_interval);
    ep.snapshots.push_back(convective_field(state.temperature, state.u_y));
  }
  return ep;
}

/// Local convective heat flux of a full solver state.
inline ScalarField convective_field(const FlowState& state) {
  return convective_field(state.temperature, state.u_y);
}

}  // namespace rbc
