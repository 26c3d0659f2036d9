#pragma once

#include <cstdint>
#include <vector>

#include "neurop/pde/grid_spec.hpp"

namespace neurop::pde {

/// Gaussian random field: white noise filtered by exp(-|k|²ℓ²/2), mean mode
/// removed, rescaled to RMS `amplitude`. Shape = spec.points.
Tensor random_field(const GridSpec& spec, double length_scale, double amplitude, std::uint64_t seed);

/// Velocity has one component per axis. Fields u0, v0 have shape spec.points.
Trajectory solve_advection(const Tensor& u0, const std::vector<double>& velocity, const GridSpec& spec);
Trajectory solve_heat(const Tensor& u0, double nu, const GridSpec& spec);
Trajectory solve_heat_convection(const Tensor& u0, double nu, const std::vector<double>& velocity,
                                 const GridSpec& spec);

/// 1-D viscous Burgers, integrating-factor RK4 with 2/3 dealiasing.
/// Stability heuristic: dt·max|u0|·k_max ≤ 2.5 with k_max the largest kept
/// wavenumber; violations and blow-up throw NumericalError.
Trajectory solve_burgers(const Tensor& u0, double nu, const GridSpec& spec);

struct GrayScottParams {
  double du = 2e-5;
  double dv = 1e-5;
  double feed = 0.04;
  double kill = 0.06;
};

/// Two-channel output (u, v). Explicit reaction then exact diffusion per
/// step; requires dt·(1 + F + k) ≤ 2.
Trajectory solve_gray_scott(const Tensor& u0, const Tensor& v0, const GrayScottParams& p, const GridSpec& spec);
Trajectory solve_rd_advection(const Tensor& u0, const Tensor& v0, const GrayScottParams& p,
                              const std::vector<double>& velocity, const GridSpec& spec);

}  // namespace neurop::pde
