#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "neurop/blocks/grid_field.hpp"
#include "neurop/blocks/parameter.hpp"

namespace neurop::blocks {

/// Retained-mode bookkeeping for a truncated half spectrum.
///
/// On every axis but the last, the m lowest wavenumbers of each sign are kept
/// (indices 0..m-1 and N-m..N-1, i.e. k in [-m, m-1]); on the last axis the
/// half-spectrum indices 0..m-1. Transform conventions are those of
/// fft::SpectralPlan: unnormalized forward, 1/N on the inverse.
class ModeSelection {
 public:
  ModeSelection() = default;
  ModeSelection(std::vector<std::size_t> modes, const Shape& spatial);

  std::size_t retained() const noexcept { return half_index_.size(); }
  /// Flat index into the half spectrum for each retained mode.
  const std::vector<std::size_t>& half_indices() const noexcept { return half_index_; }
  /// Weight-tensor extents per axis: 2m on full axes, m on the last.
  static Shape weight_extents(const std::vector<std::size_t>& modes);

 private:
  std::vector<std::size_t> half_index_;
};

/// Kernel-integral term of a Fourier layer: rfft, truncate, per-mode complex
/// channel mixing, zero-pad, irfft.
class SpectralConv {
 public:
  SpectralConv() = default;
  /// `modes` has one entry per spatial axis.
  SpectralConv(std::string prefix, std::size_t in_channels, std::size_t out_channels, std::vector<std::size_t> modes,
               Rng& rng);

  std::size_t in_channels() const noexcept { return in_; }
  std::size_t out_channels() const noexcept { return out_; }
  const std::vector<std::size_t>& modes() const noexcept { return modes_; }

  /// Throws ValueError if any axis keeps more modes than its Nyquist limit
  /// (extent < 2·modes).
  void check_grid(const Shape& spatial) const;

  /// v: (B, in_channels, *grid) -> (B, out_channels, *grid).
  Var forward(ForwardContext& ctx, const Var& v) const;

  Parameter& weight_real() noexcept { return real_; }
  Parameter& weight_imag() noexcept { return imag_; }
  const Parameter& weight_real() const noexcept { return real_; }
  const Parameter& weight_imag() const noexcept { return imag_; }

  void visit(const ParameterVisitor& f);
  void visit(const ConstParameterVisitor& f) const;
  std::size_t parameter_count() const { return real_.value.size() + imag_.value.size(); }

 private:
  std::size_t in_ = 0, out_ = 0;
  std::vector<std::size_t> modes_;
  Parameter real_, imag_;  // (out, in, *weight_extents)
};

enum class Activation { gelu, identity };

/// One Fourier layer: act(A·v + K(v) + b) with K the spectral convolution.
class FnoBlock {
 public:
  FnoBlock() = default;
  FnoBlock(std::string prefix, std::size_t width, std::vector<std::size_t> modes, Activation activation, Rng& rng);

  Activation activation() const noexcept { return activation_; }
  void set_activation(Activation a) noexcept { activation_ = a; }
  SpectralConv& spectral() noexcept { return spectral_; }
  const SpectralConv& spectral() const noexcept { return spectral_; }
  Parameter& pointwise_weight() noexcept { return weight_; }
  Parameter& bias() noexcept { return bias_; }

  Var forward(ForwardContext& ctx, const Var& v) const;

  void visit(const ParameterVisitor& f);
  void visit(const ConstParameterVisitor& f) const;
  std::size_t parameter_count() const;

 private:
  Activation activation_ = Activation::gelu;
  SpectralConv spectral_;
  Parameter weight_, bias_;
};

GridField spectral_conv(const SpectralConv& layer, const GridField& v);
GridField fno_block(const FnoBlock& block, const GridField& v);

}  // namespace neurop::blocks
