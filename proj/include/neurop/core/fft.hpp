#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "neurop/core/tape.hpp"
#include "neurop/core/tensor.hpp"

namespace neurop::fft {

using Complex = std::complex<double>;

/// Unnormalized in-place complex DFT of one contiguous sequence. Radix-2 for
/// power-of-two lengths, direct summation otherwise.
void transform(std::span<Complex> data, bool inverse);

class Plan1D;

/// Real transforms over a fixed spatial shape.
///
/// Conventions: the forward transform is unnormalized,
///   X[k] = sum_n x[n] exp(-2πi k·n/N),
/// and keeps only the non-redundant half of the last axis (N_last/2 + 1
/// coefficients). The inverse carries the 1/N factor and is defined for any
/// half spectrum as
///   x[n] = Re( sum_k w[k] X[k] exp(+2πi k·n/N) ) / N,
/// with w = 1 on the zero and Nyquist columns of the last axis and 2
/// elsewhere. For spectra of real fields this is the exact inverse; for
/// arbitrary spectra it is still a fixed real-linear map, which is what the
/// adjoints below are written against.
class SpectralPlan {
 public:
  explicit SpectralPlan(Shape spatial);

  const Shape& spatial_shape() const noexcept { return spatial_; }
  const Shape& half_shape() const noexcept { return half_; }
  std::size_t spatial_size() const noexcept { return spatial_size_; }
  std::size_t half_size() const noexcept { return half_size_; }

  void forward(std::span<const double> field, std::span<Complex> half) const;
  void inverse(std::span<const Complex> half, std::span<double> field) const;

  /// Adjoint of forward(): Re(unnormalized inverse DFT of the zero-extended g).
  void forward_adjoint(std::span<const Complex> g, std::span<double> field) const;
  /// Adjoint of inverse(): (w/N)·forward(g).
  void inverse_adjoint(std::span<const double> g, std::span<Complex> half) const;

  /// Last-axis weight w[k] of the inverse transform.
  double weight(std::size_t last_index) const noexcept;

 private:
  void transform_leading_axes(std::span<Complex> half, bool inverse) const;
  void reweighted_last_axis(std::span<const Complex> half, std::span<double> field, bool apply_weights) const;

  Shape spatial_;
  Shape half_;
  std::size_t spatial_size_ = 0;
  std::size_t half_size_ = 0;
  std::vector<std::shared_ptr<const Plan1D>> plans_;
  // Even last axis: real transforms run as half-length complex ones.
  std::shared_ptr<const Plan1D> packed_;
  std::vector<Complex> pack_twiddle_;
};

/// rfft over the trailing `spatial_rank` axes of x; leading axes are batched.
ComplexTensor rfft(const Tensor& x, std::size_t spatial_rank);
/// Inverse of rfft; `spatial` is the real shape of the trailing axes.
Tensor irfft(const ComplexTensor& c, const Shape& spatial);

}  // namespace neurop::fft

namespace neurop {

struct ComplexVar {
  Var real;
  Var imag;
};

/// Differentiable rfft / irfft with the conventions of fft::SpectralPlan.
ComplexVar rfft(const Var& x, std::size_t spatial_rank);
Var irfft(const ComplexVar& c, const Shape& spatial);

}  // namespace neurop
