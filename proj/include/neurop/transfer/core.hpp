#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurop/blocks/perceiver.hpp"
#include "neurop/blocks/spectral_conv.hpp"
#include "neurop/blocks/ssm.hpp"

namespace neurop::transfer {

enum class Architecture { fno, mamba_fno, perceiver_no };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& name);

struct CoreConfig {
  Architecture architecture = Architecture::fno;
  std::size_t width = 32;
  std::size_t layers = 4;
  /// Retained modes per spatial axis; its length fixes the core's dimensionality.
  std::vector<std::size_t> modes{16};
  std::size_t ssm_kernel = 16;
  /// Scan axis of the SSM block; unset scans the flattened grid.
  std::optional<std::size_t> scan_axis;
  std::size_t latents = 64;
  std::size_t self_attention_layers = 2;
  std::size_t heads = 1;

  std::size_t dims() const noexcept { return modes.size(); }
  void validate() const;
};

void to_json(nlohmann::json& j, const CoreConfig& c);
void from_json(const nlohmann::json& j, CoreConfig& c);

/// The shared operator F, acting on (B, width, *grid) features.
///
///   fno          n_layers Fourier layers, identity activation on the last
///   mamba_fno    an SSM block followed by the same Fourier stack
///   perceiver_no n_layers of act(A·v + Perceiver(v) + b)
class OperatorCore {
 public:
  OperatorCore() = default;
  OperatorCore(const CoreConfig& config, std::uint64_t seed);

  const CoreConfig& config() const noexcept { return config_; }
  std::size_t width() const noexcept { return config_.width; }
  std::size_t dims() const noexcept { return config_.dims(); }

  /// Throws if the grid has the wrong dimensionality or cannot hold the
  /// retained modes.
  void check_grid(const Shape& spatial) const;
  Var forward(blocks::ForwardContext& ctx, const Var& v) const;

  std::vector<blocks::FnoBlock>& fno_layers() noexcept { return fno_; }

  void visit(const blocks::ParameterVisitor& f);
  void visit(const blocks::ConstParameterVisitor& f) const;
  std::size_t parameter_count() const;

 private:
  struct PerceiverLayer {
    blocks::PerceiverBlock block;
    blocks::Parameter weight, bias;
  };

  CoreConfig config_;
  std::optional<blocks::SSMBlock> ssm_;
  std::vector<blocks::FnoBlock> fno_;
  std::vector<PerceiverLayer> perceiver_;
};

/// FNV-1a over every core parameter name and value bit pattern.
std::uint64_t parameter_hash(const OperatorCore& core);

}  // namespace neurop::transfer
