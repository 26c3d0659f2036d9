#include "neurop/transfer/core.hpp"

#include <bit>
#include <cmath>

#include "neurop/core/error.hpp"
#include "neurop/core/ops.hpp"

namespace neurop::transfer {

using blocks::Activation;

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::fno:
      return "fno";
    case Architecture::mamba_fno:
      return "mamba_fno";
    case Architecture::perceiver_no:
      return "perceiver_no";
  }
  return "unknown";
}

Architecture architecture_from_string(const std::string& name) {
  for (auto a : {Architecture::fno, Architecture::mamba_fno, Architecture::perceiver_no}) {
    if (to_string(a) == name) return a;
  }
  throw ValueError("unknown architecture '" + name + "' (expected fno, mamba_fno or perceiver_no)");
}

void CoreConfig::validate() const {
  if (width == 0) throw ValueError("core width must be positive");
  if (layers == 0) throw ValueError("core needs at least one layer");
  if (modes.empty() || modes.size() > 2) throw ValueError("core modes must list one entry per axis of a 1-D or 2-D grid");
  for (auto m : modes) {
    if (m == 0) throw ValueError("mode counts must be positive");
  }
  if (architecture == Architecture::mamba_fno) {
    if (ssm_kernel == 0 || ssm_kernel > blocks::SSMBlock::max_kernel_length) {
      throw ValueError("ssm kernel length must lie in [1, " + std::to_string(blocks::SSMBlock::max_kernel_length) + "]");
    }
    if (scan_axis && *scan_axis >= dims()) throw ValueError("scan axis out of range");
  }
  if (architecture == Architecture::perceiver_no) {
    if (latents == 0) throw ValueError("perceiver needs at least one latent");
    if (heads == 0 || width % heads != 0) throw ValueError("width must be divisible by the head count");
  }
}

void to_json(nlohmann::json& j, const CoreConfig& c) {
  j = nlohmann::json{{"architecture", to_string(c.architecture)}, {"width", c.width}, {"layers", c.layers},
                     {"modes", c.modes}};
  if (c.architecture == Architecture::mamba_fno) {
    j["ssm_kernel"] = c.ssm_kernel;
    j["scan_axis"] = c.scan_axis ? nlohmann::json(*c.scan_axis) : nlohmann::json("flattened");
  }
  if (c.architecture == Architecture::perceiver_no) {
    j["latents"] = c.latents;
    j["self_attention_layers"] = c.self_attention_layers;
    j["heads"] = c.heads;
  }
}

void from_json(const nlohmann::json& j, CoreConfig& c) {
  auto field = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(out);
    } catch (const nlohmann::json::exception&) {
      throw ValueError(std::string("field '") + key + "' has the wrong type");
    }
  };
  std::string arch = to_string(c.architecture);
  field("architecture", arch);
  c.architecture = architecture_from_string(arch);
  field("width", c.width);
  field("layers", c.layers);
  field("modes", c.modes);
  field("ssm_kernel", c.ssm_kernel);
  if (j.contains("scan_axis")) {
    const auto& s = j.at("scan_axis");
    if (s.is_string() && s.get<std::string>() == "flattened") {
      c.scan_axis.reset();
    } else if (s.is_number_unsigned()) {
      c.scan_axis = s.get<std::size_t>();
    } else {
      throw ValueError("field 'scan_axis' must be 'flattened' or an axis index");
    }
  }
  field("latents", c.latents);
  field("self_attention_layers", c.self_attention_layers);
  field("heads", c.heads);
}

OperatorCore::OperatorCore(const CoreConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.width;
  auto layer_activation = [&](std::size_t t) { return t + 1 == config_.layers ? Activation::identity : Activation::gelu; };

  if (config_.architecture == Architecture::mamba_fno) {
    const blocks::ScanAxis axis = config_.scan_axis ? blocks::ScanAxis::along(*config_.scan_axis) : blocks::ScanAxis::flattened();
    ssm_.emplace("core/ssm", d, config_.ssm_kernel, axis, rng);
  }
  if (config_.architecture == Architecture::perceiver_no) {
    blocks::PerceiverConfig pc;
    pc.width = d;
    pc.latents = config_.latents;
    pc.self_attention_layers = config_.self_attention_layers;
    pc.heads = config_.heads;
    pc.modes = config_.modes;
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t t = 0; t < config_.layers; ++t) {
      const std::string prefix = "core/perceiver/" + std::to_string(t);
      PerceiverLayer layer;
      layer.block = blocks::PerceiverBlock(prefix, pc, rng);
      layer.weight = blocks::uniform_parameter(prefix + "/weight", {d, d}, bound, rng);
      layer.bias = blocks::uniform_parameter(prefix + "/bias", {d}, bound, rng);
      perceiver_.push_back(std::move(layer));
    }
  } else {
    for (std::size_t t = 0; t < config_.layers; ++t) {
      fno_.emplace_back("core/fno/" + std::to_string(t), d, config_.modes, layer_activation(t), rng);
    }
  }
}

void OperatorCore::check_grid(const Shape& spatial) const {
  if (spatial.size() != dims()) {
    throw ShapeError("core is " + std::to_string(dims()) + "-D but the grid " + neurop::to_string(spatial) + " is " +
                     std::to_string(spatial.size()) + "-D");
  }
  for (std::size_t a = 0; a < spatial.size(); ++a) {
    if (spatial[a] < 2 * config_.modes[a]) {
      throw ValueError("grid " + neurop::to_string(spatial) + " cannot hold " + std::to_string(config_.modes[a]) +
                       " modes on axis " + std::to_string(a));
    }
  }
}

Var OperatorCore::forward(blocks::ForwardContext& ctx, const Var& v) const {
  const Shape& s = v.shape();
  if (s.size() != dims() + 2 || s[1] != width()) {
    throw ShapeError("core expects (B, " + std::to_string(width()) + ", grid) features, got " + neurop::to_string(s));
  }
  check_grid(Shape(s.begin() + 2, s.end()));
  Var h = v;
  if (ssm_) h = ssm_->forward(ctx, h);
  for (const auto& block : fno_) h = block.forward(ctx, h);
  for (std::size_t t = 0; t < perceiver_.size(); ++t) {
    const auto& layer = perceiver_[t];
    Var pre = add(channel_linear(h, ctx.bind(layer.weight), ctx.bind(layer.bias)), layer.block.forward(ctx, h));
    h = t + 1 == perceiver_.size() ? pre : gelu(pre);
  }
  return h;
}

void OperatorCore::visit(const blocks::ParameterVisitor& f) {
  if (ssm_) ssm_->visit(f);
  for (auto& b : fno_) b.visit(f);
  for (auto& l : perceiver_) {
    l.block.visit(f);
    f(l.weight);
    f(l.bias);
  }
}

void OperatorCore::visit(const blocks::ConstParameterVisitor& f) const {
  if (ssm_) ssm_->visit(f);
  for (const auto& b : fno_) b.visit(f);
  for (const auto& l : perceiver_) {
    l.block.visit(f);
    f(l.weight);
    f(l.bias);
  }
}

std::size_t OperatorCore::parameter_count() const {
  std::size_t n = 0;
  visit(blocks::ConstParameterVisitor([&](const blocks::Parameter& p) { n += p.value.size(); }));
  return n;
}

std::uint64_t parameter_hash(const OperatorCore& core) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto byte = [&](unsigned char b) {
    h ^= b;
    h *= 0x100000001b3ull;
  };
  core.visit(blocks::ConstParameterVisitor([&](const blocks::Parameter& p) {
    for (char c : p.name) byte(static_cast<unsigned char>(c));
    for (double x : p.value.data()) {
      const auto bits = std::bit_cast<std::uint64_t>(x);
      for (int b = 0; b < 8; ++b) byte(static_cast<unsigned char>(bits >> (8 * b)));
    }
  }));
  return h;
}

}  // namespace neurop::transfer
