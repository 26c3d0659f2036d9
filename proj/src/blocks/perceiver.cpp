#include "neurop/blocks/perceiver.hpp"

#include <cmath>

#include "neurop/blocks/attention.hpp"
#include "neurop/core/error.hpp"
#include "neurop/core/ops.hpp"
#include "single.hpp"

namespace neurop::blocks {

PerceiverBlock::PerceiverBlock(std::string prefix, const PerceiverConfig& config, Rng& rng) : config_(config) {
  const std::size_t d = config_.width;
  if (d == 0 || config_.latents == 0) throw ValueError(prefix + ": width and latent count must be positive");
  if (config_.heads == 0 || d % config_.heads != 0) {
    throw ValueError(prefix + ": width " + std::to_string(d) + " not divisible by " + std::to_string(config_.heads) +
                     " heads");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  latents_ = uniform_parameter(prefix + "/latents", {config_.latents, d}, 1.0, rng);
  if (!config_.pointwise_key_value) {
    key_spectral_ = SpectralConv(prefix + "/key", d, d, config_.modes, rng);
    value_spectral_ = SpectralConv(prefix + "/value", d, d, config_.modes, rng);
  }
  key_weight_ = uniform_parameter(prefix + "/key/weight", {d, d}, bound, rng);
  key_bias_ = uniform_parameter(prefix + "/key/bias", {d}, bound, rng);
  value_weight_ = uniform_parameter(prefix + "/value/weight", {d, d}, bound, rng);
  value_bias_ = uniform_parameter(prefix + "/value/bias", {d}, bound, rng);
  auto projections = [&](const std::string& p) {
    return Projections{uniform_parameter(p + "/query", {d, d}, bound, rng),
                       uniform_parameter(p + "/key", {d, d}, bound, rng),
                       uniform_parameter(p + "/value", {d, d}, bound, rng)};
  };
  for (std::size_t l = 0; l < config_.self_attention_layers; ++l) {
    self_attention_.push_back(projections(prefix + "/self/" + std::to_string(l)));
  }
  readout_ = projections(prefix + "/readout");
}

Var PerceiverBlock::key_value_map(ForwardContext& ctx, const Var& v, const SpectralConv& spectral,
                                  const Parameter& weight, const Parameter& bias) const {
  Var local = channel_linear(v, ctx.bind(weight), ctx.bind(bias));
  if (config_.pointwise_key_value) return local;
  return add(local, spectral.forward(ctx, v));
}

Var PerceiverBlock::forward(ForwardContext& ctx, const Var& v) const {
  const Shape& s = v.shape();
  if (s.size() < 3 || s[1] != config_.width) {
    throw ShapeError("perceiver block expects (B, " + std::to_string(config_.width) + ", grid), got " + to_string(s));
  }
  const std::size_t batch = s[0], d = s[1], points = v.value().size() / (batch * d);
  const std::size_t heads = config_.heads;

  auto tokens = [&](const Var& field) { return transpose_last2(reshape(field, {batch, d, points})); };

  Var keys = tokens(key_value_map(ctx, v, key_spectral_, key_weight_, key_bias_));
  Var values = tokens(key_value_map(ctx, v, value_spectral_, value_weight_, value_bias_));

  Var latent = broadcast_batch(ctx.bind(latents_), batch);
  Var z = add(latent, attention(latent, keys, values, heads));
  for (const auto& layer : self_attention_) {
    Var q = token_linear(z, ctx.bind(layer.query), std::nullopt);
    Var k = token_linear(z, ctx.bind(layer.key), std::nullopt);
    Var val = token_linear(z, ctx.bind(layer.value), std::nullopt);
    z = add(z, attention(q, k, val, heads));
  }

  Var queries = token_linear(tokens(v), ctx.bind(readout_.query), std::nullopt);
  Var read = attention(queries, token_linear(z, ctx.bind(readout_.key), std::nullopt),
                       token_linear(z, ctx.bind(readout_.value), std::nullopt), heads);
  return reshape(transpose_last2(read), s);
}

void PerceiverBlock::visit(const ParameterVisitor& f) {
  f(latents_);
  if (!config_.pointwise_key_value) {
    key_spectral_.visit(f);
    value_spectral_.visit(f);
  }
  f(key_weight_);
  f(key_bias_);
  f(value_weight_);
  f(value_bias_);
  for (auto& layer : self_attention_) {
    f(layer.query);
    f(layer.key);
    f(layer.value);
  }
  f(readout_.query);
  f(readout_.key);
  f(readout_.value);
}

void PerceiverBlock::visit(const ConstParameterVisitor& f) const {
  const_cast<PerceiverBlock*>(this)->visit(ParameterVisitor([&f](Parameter& p) { f(p); }));
}

std::size_t PerceiverBlock::parameter_count() const {
  std::size_t n = 0;
  visit(ConstParameterVisitor([&n](const Parameter& p) { n += p.value.size(); }));
  return n;
}

GridField perceiver_block(const PerceiverBlock& block, const GridField& v) {
  return detail::apply_single(v, [&](ForwardContext& ctx, const Var& x) { return block.forward(ctx, x); });
}

}  // namespace neurop::blocks
