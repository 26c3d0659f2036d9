#pragma once

#include <cstddef>
#include <vector>

#include "neurop/core/fft.hpp"
#include "neurop/pde/grid_spec.hpp"

namespace neurop::pde {

/// Half-spectrum wavenumbers k = 2πn/L of a periodic grid, with n signed on
/// every axis but the last.
class Wavenumbers {
 public:
  explicit Wavenumbers(const GridSpec& spec);

  const fft::SpectralPlan& plan() const noexcept { return plan_; }
  std::size_t size() const noexcept { return k2_.size(); }
  /// k along `axis` for half-spectrum entry i.
  double k(std::size_t axis, std::size_t i) const { return k_[axis][i]; }
  double k2(std::size_t i) const { return k2_[i]; }
  /// True where the 2/3 rule keeps the mode (|n| < N/3 on every axis).
  bool dealiased(std::size_t i) const { return keep_[i]; }

 private:
  fft::SpectralPlan plan_;
  std::vector<std::vector<double>> k_;
  std::vector<double> k2_;
  std::vector<bool> keep_;
};

}  // namespace neurop::pde
