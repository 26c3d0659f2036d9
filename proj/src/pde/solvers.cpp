#include "neurop/pde/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "neurop/core/error.hpp"
#include "neurop/core/random.hpp"
#include "neurop/pde/spectral.hpp"

namespace neurop::pde {

using fft::Complex;

namespace {

void check_field(const Tensor& u, const GridSpec& spec, const char* name) {
  if (u.shape() != spec.points) {
    throw ShapeError(std::string(name) + " has shape " + to_string(u.shape()) + ", grid is " + to_string(spec.points));
  }
}

void check_velocity(const std::vector<double>& c, const GridSpec& spec) {
  if (c.size() != spec.dims()) {
    throw ShapeError("velocity has " + std::to_string(c.size()) + " components on a " + std::to_string(spec.dims()) +
                     "-D grid");
  }
}

bool saves_at(const GridSpec& spec, std::size_t step) {
  return step == spec.steps || (spec.save_stride > 0 && step % spec.save_stride == 0);
}

Tensor stack(std::initializer_list<const Tensor*> fields) {
  const Shape& s = (*fields.begin())->shape();
  Shape out{fields.size()};
  out.insert(out.end(), s.begin(), s.end());
  std::vector<double> data;
  data.reserve(numel(out));
  for (const Tensor* f : fields) data.insert(data.end(), f->data().begin(), f->data().end());
  return Tensor(out, std::move(data));
}

/// Per-step complex multiplier for advection with velocity c and diffusion ν.
std::vector<Complex> linear_multiplier(const Wavenumbers& wn, double nu, const std::vector<double>& c, double dt) {
  std::vector<Complex> m(wn.size());
  for (std::size_t i = 0; i < wn.size(); ++i) {
    double phase = 0.0;
    for (std::size_t d = 0; d < c.size(); ++d) phase += wn.k(d, i) * c[d];
    m[i] = std::exp(Complex(-nu * wn.k2(i) * dt, -phase * dt));
  }
  return m;
}

Trajectory run_linear(const Tensor& u0, double nu, const std::vector<double>& c, const GridSpec& spec) {
  spec.validate();
  check_field(u0, spec, "u0");
  check_velocity(c, spec);
  const Wavenumbers wn(spec);
  const auto mult = linear_multiplier(wn, nu, c, spec.dt);
  std::vector<Complex> hat(wn.size());
  wn.plan().forward(u0.data(), hat);

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.frames.push_back(stack({&u0}));
  for (std::size_t s = 1; s <= spec.steps; ++s) {
    for (std::size_t i = 0; i < hat.size(); ++i) hat[i] *= mult[i];
    if (saves_at(spec, s)) {
      Tensor u(spec.points);
      wn.plan().inverse(hat, u.data());
      traj.times.push_back(spec.dt * static_cast<double>(s));
      traj.frames.push_back(stack({&u}));
    }
  }
  return traj;
}

[[noreturn]] void blow_up(const std::string& solver, const std::string& params, std::size_t step) {
  throw NumericalError(solver + " diverged at step " + std::to_string(step) + " (" + params + ")");
}

bool bounded(std::span<const double> x, double limit = 1e6) {
  for (double v : x) {
    if (!(std::abs(v) <= limit)) return false;
  }
  return true;
}

}  // namespace

Tensor random_field(const GridSpec& spec, double length_scale, double amplitude, std::uint64_t seed) {
  if (!(length_scale > 0.0)) throw ValueError("random field length scale must be positive");
  spec.validate();
  Rng rng(seed);
  Tensor noise(spec.points);
  for (double& x : noise.data()) x = rng.normal();
  const Wavenumbers wn(spec);
  std::vector<Complex> hat(wn.size());
  wn.plan().forward(noise.data(), hat);
  for (std::size_t i = 0; i < hat.size(); ++i) hat[i] *= std::exp(-0.5 * wn.k2(i) * length_scale * length_scale);
  hat[0] = 0.0;
  Tensor u(spec.points);
  wn.plan().inverse(hat, u.data());
  double ss = 0.0;
  for (double x : u.data()) ss += x * x;
  const double rms = std::sqrt(ss / static_cast<double>(u.size()));
  if (rms > 0.0) {
    for (double& x : u.data()) x *= amplitude / rms;
  }
  return u;
}

Trajectory solve_advection(const Tensor& u0, const std::vector<double>& velocity, const GridSpec& spec) {
  return run_linear(u0, 0.0, velocity, spec);
}

Trajectory solve_heat(const Tensor& u0, double nu, const GridSpec& spec) {
  if (!(nu > 0.0)) throw ValueError("diffusivity must be positive");
  return run_linear(u0, nu, std::vector<double>(spec.dims(), 0.0), spec);
}

Trajectory solve_heat_convection(const Tensor& u0, double nu, const std::vector<double>& velocity,
                                 const GridSpec& spec) {
  if (!(nu > 0.0)) throw ValueError("diffusivity must be positive");
  return run_linear(u0, nu, velocity, spec);
}

Trajectory solve_burgers(const Tensor& u0, double nu, const GridSpec& spec) {
  spec.validate();
  if (spec.dims() != 1) throw ValueError("Burgers solver is 1-D only");
  if (!(nu > 0.0)) throw ValueError("viscosity must be positive");
  check_field(u0, spec, "u0");
  const std::string params = "nu=" + std::to_string(nu);
  const Wavenumbers wn(spec);
  const std::size_t n = spec.points[0], h = wn.size();

  double k_max = 0.0, u_max = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    if (wn.dealiased(i)) k_max = std::max(k_max, std::abs(wn.k(0, i)));
  }
  for (double x : u0.data()) u_max = std::max(u_max, std::abs(x));
  if (spec.dt * u_max * k_max > 2.5) {
    throw NumericalError("Burgers time step too large for the advective stability limit (" + params +
                         ", dt*max|u|*k_max = " + std::to_string(spec.dt * u_max * k_max) + ")");
  }

  std::vector<double> e(h), e2(h);
  for (std::size_t i = 0; i < h; ++i) {
    e[i] = std::exp(-nu * wn.k2(i) * spec.dt);
    e2[i] = std::exp(-0.5 * nu * wn.k2(i) * spec.dt);
  }

  std::vector<double> field(n);
  std::vector<Complex> work(h);
  // dt·N(v) with N(v) = -(ik/2)·F[(F⁻¹[v·mask])²]·mask.
  auto nonlinear = [&](const std::vector<Complex>& v, std::vector<Complex>& out) {
    for (std::size_t i = 0; i < h; ++i) work[i] = wn.dealiased(i) ? v[i] : Complex{};
    wn.plan().inverse(work, field);
    for (double& x : field) x *= x;
    wn.plan().forward(field, work);
    for (std::size_t i = 0; i < h; ++i) {
      out[i] = wn.dealiased(i) ? Complex(0.0, -0.5 * wn.k(0, i)) * work[i] * spec.dt : Complex{};
    }
  };

  std::vector<Complex> v(h), k1(h), k2(h), k3(h), k4(h), stage(h);
  wn.plan().forward(u0.data(), v);

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.frames.push_back(stack({&u0}));
  for (std::size_t s = 1; s <= spec.steps; ++s) {
    nonlinear(v, k1);
    for (std::size_t i = 0; i < h; ++i) stage[i] = e2[i] * (v[i] + 0.5 * k1[i]);
    nonlinear(stage, k2);
    for (std::size_t i = 0; i < h; ++i) stage[i] = e2[i] * v[i] + 0.5 * k2[i];
    nonlinear(stage, k3);
    for (std::size_t i = 0; i < h; ++i) stage[i] = e[i] * v[i] + e2[i] * k3[i];
    nonlinear(stage, k4);
    for (std::size_t i = 0; i < h; ++i) {
      v[i] = e[i] * v[i] + (e[i] * k1[i] + 2.0 * e2[i] * (k2[i] + k3[i]) + k4[i]) / 6.0;
    }
    const bool save = saves_at(spec, s);
    if (save || s % 16 == 0) {
      Tensor u(spec.points);
      wn.plan().inverse(v, u.data());
      if (!bounded(u.data())) blow_up("Burgers", params, s);
      if (save) {
        traj.times.push_back(spec.dt * static_cast<double>(s));
        traj.frames.push_back(stack({&u}));
      }
    }
  }
  return traj;
}

Trajectory solve_rd_advection(const Tensor& u0, const Tensor& v0, const GrayScottParams& p,
                              const std::vector<double>& velocity, const GridSpec& spec) {
  spec.validate();
  check_field(u0, spec, "u0");
  check_field(v0, spec, "v0");
  check_velocity(velocity, spec);
  if (!(p.du > 0.0) || !(p.dv > 0.0)) throw ValueError("reaction-diffusion diffusivities must be positive");
  if (p.feed < 0.0 || p.kill < 0.0) throw ValueError("feed and kill rates must be non-negative");
  if (spec.dt * (1.0 + p.feed + p.kill) > 2.0) {
    throw ValueError("reaction step unstable: dt*(1+F+k) = " + std::to_string(spec.dt * (1.0 + p.feed + p.kill)) +
                     " exceeds 2");
  }
  std::ostringstream params;
  params << "F=" << p.feed << ", k=" << p.kill;

  const Wavenumbers wn(spec);
  const auto mu = linear_multiplier(wn, p.du, velocity, spec.dt);
  const auto mv = linear_multiplier(wn, p.dv, velocity, spec.dt);
  Tensor u = u0, v = v0;
  std::vector<Complex> hat(wn.size());
  const double dt = spec.dt;

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.frames.push_back(stack({&u, &v}));
  for (std::size_t s = 1; s <= spec.steps; ++s) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double uv2 = u[i] * v[i] * v[i];
      const double du = -uv2 + p.feed * (1.0 - u[i]);
      const double dv = uv2 - (p.feed + p.kill) * v[i];
      u[i] += dt * du;
      v[i] += dt * dv;
    }
    for (auto [field, mult] : {std::pair{&u, &mu}, std::pair{&v, &mv}}) {
      wn.plan().forward(field->data(), hat);
      for (std::size_t i = 0; i < hat.size(); ++i) hat[i] *= (*mult)[i];
      wn.plan().inverse(hat, field->data());
    }
    if (!bounded(u.data()) || !bounded(v.data())) blow_up("reaction-diffusion", params.str(), s);
    if (saves_at(spec, s)) {
      traj.times.push_back(dt * static_cast<double>(s));
      traj.frames.push_back(stack({&u, &v}));
    }
  }
  return traj;
}

Trajectory solve_gray_scott(const Tensor& u0, const Tensor& v0, const GrayScottParams& p, const GridSpec& spec) {
  return solve_rd_advection(u0, v0, p, std::vector<double>(spec.dims(), 0.0), spec);
}

}  // namespace neurop::pde
