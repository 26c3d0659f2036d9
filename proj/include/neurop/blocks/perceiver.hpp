#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "neurop/blocks/grid_field.hpp"
#include "neurop/blocks/parameter.hpp"
#include "neurop/blocks/spectral_conv.hpp"

namespace neurop::blocks {

struct PerceiverConfig {
  std::size_t width = 32;
  std::size_t latents = 64;
  std::size_t self_attention_layers = 2;
  std::size_t heads = 1;
  std::vector<std::size_t> modes;
  /// Replace the Fourier key/value maps with pointwise ones.
  bool pointwise_key_value = false;
};

/// Perceiver IO style block over grid tokens.
///
/// Keys and values come from Fourier-layer maps of the input field; a
/// learnable latent array reads them through cross-attention, is refined by
/// latent self-attention, and is read back out by cross-attention whose
/// queries are the input tokens. Output has the input's shape.
class PerceiverBlock {
 public:
  PerceiverBlock() = default;
  PerceiverBlock(std::string prefix, const PerceiverConfig& config, Rng& rng);

  const PerceiverConfig& config() const noexcept { return config_; }

  /// v: (B, width, *grid).
  Var forward(ForwardContext& ctx, const Var& v) const;

  void visit(const ParameterVisitor& f);
  void visit(const ConstParameterVisitor& f) const;
  std::size_t parameter_count() const;

 private:
  struct Projections {
    Parameter query, key, value;
  };

  Var key_value_map(ForwardContext& ctx, const Var& v, const SpectralConv& spectral, const Parameter& weight,
                    const Parameter& bias) const;

  PerceiverConfig config_;
  Parameter latents_;  // (latents, width)
  SpectralConv key_spectral_, value_spectral_;
  Parameter key_weight_, key_bias_, value_weight_, value_bias_;
  std::vector<Projections> self_attention_;
  Projections readout_;
};

GridField perceiver_block(const PerceiverBlock& block, const GridField& v);

}  // namespace neurop::blocks
