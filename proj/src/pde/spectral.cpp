#include "neurop/pde/spectral.hpp"

#include <numbers>

namespace neurop::pde {

Wavenumbers::Wavenumbers(const GridSpec& spec) : plan_(spec.points) {
  const Shape& half = plan_.half_shape();
  const std::size_t rank = half.size(), total = plan_.half_size();
  k_.assign(rank, std::vector<double>(total));
  k2_.assign(total, 0.0);
  keep_.assign(total, true);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rest = i;
    for (std::size_t d = rank; d-- > 0;) {
      const std::size_t n = rest % half[d];
      rest /= half[d];
      const std::size_t full = spec.points[d];
      const long signed_n = (d + 1 < rank && 2 * n > full) ? static_cast<long>(n) - static_cast<long>(full)
                                                           : static_cast<long>(n);
      const double k = 2.0 * std::numbers::pi * static_cast<double>(signed_n) / spec.lengths[d];
      k_[d][i] = k;
      k2_[i] += k * k;
      if (3 * static_cast<std::size_t>(signed_n < 0 ? -signed_n : signed_n) >= full) keep_[i] = false;
    }
  }
}

}  // namespace neurop::pde
