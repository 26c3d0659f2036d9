#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "neurop/blocks/grid_field.hpp"
#include "neurop/blocks/parameter.hpp"

namespace neurop::blocks {

/// Which axis the causal scan runs along. Without an axis the scan covers
/// the spatial points in row-major order.
struct ScanAxis {
  std::optional<std::size_t> spatial_axis;

  static ScanAxis flattened() { return {}; }
  static ScanAxis along(std::size_t axis) { return {axis}; }
};

/// Depthwise causal convolution with learnable kernels:
///   out[c, t] = sum_{tau = 0}^{min(t, T-1)} K[c, tau] · v[c, t - tau],
/// history before the start of the scan counts as zero.
class SSMBlock {
 public:
  static constexpr std::size_t max_kernel_length = 256;

  SSMBlock() = default;
  SSMBlock(std::string prefix, std::size_t channels, std::size_t kernel_length, ScanAxis axis, Rng& rng);

  std::size_t channels() const noexcept { return channels_; }
  std::size_t kernel_length() const noexcept { return kernel_length_; }
  const ScanAxis& scan_axis() const noexcept { return axis_; }

  Parameter& kernels() noexcept { return kernels_; }
  const Parameter& kernels() const noexcept { return kernels_; }

  /// v: (B, channels, *grid), or (B, channels, T) for plain sequences.
  Var forward(ForwardContext& ctx, const Var& v) const;

  void visit(const ParameterVisitor& f) { f(kernels_); }
  void visit(const ConstParameterVisitor& f) const { f(kernels_); }
  std::size_t parameter_count() const { return kernels_.value.size(); }

 private:
  std::size_t channels_ = 0, kernel_length_ = 0;
  ScanAxis axis_;
  Parameter kernels_;  // (channels, kernel_length)
};

/// Differentiable causal convolution; kernels shaped (channels, T).
Var causal_conv(const Var& v, const Var& kernels, const ScanAxis& axis);

GridField ssm_apply(const SSMBlock& block, const GridField& v);

}  // namespace neurop::blocks
