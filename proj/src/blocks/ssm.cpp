#include "neurop/blocks/ssm.hpp"

#include "neurop/core/error.hpp"
#include "single.hpp"

namespace neurop::blocks {

namespace {

// Lines of the scan: `count` sequences of `length` elements separated by
// `stride`, starting at offsets produced by start(line).
struct ScanLayout {
  std::size_t lines = 0, length = 0, stride = 1, inner = 1;

  std::size_t start(std::size_t line) const { return (line / inner) * length * inner + line % inner; }
};

ScanLayout scan_layout(const Shape& spatial, const ScanAxis& axis) {
  ScanLayout l;
  const std::size_t total = numel(spatial);
  if (!axis.spatial_axis) {
    l.lines = 1;
    l.length = total;
    l.stride = 1;
    l.inner = 1;
    return l;
  }
  const std::size_t a = *axis.spatial_axis;
  if (a >= spatial.size()) {
    throw ShapeError("scan axis " + std::to_string(a) + " invalid for grid " + to_string(spatial));
  }
  l.length = spatial[a];
  for (std::size_t d = a + 1; d < spatial.size(); ++d) l.inner *= spatial[d];
  l.stride = l.inner;
  l.lines = total / l.length;
  return l;
}

}  // namespace

Var causal_conv(const Var& v, const Var& kernels, const ScanAxis& axis) {
  const Tensor& x = v.value();
  const Tensor& k = kernels.value();
  if (x.rank() < 3 || k.rank() != 2 || k.extent(0) != x.extent(1)) {
    throw ShapeError("causal_conv: kernels " + to_string(k.shape()) + " do not fit input " + to_string(x.shape()));
  }
  const std::size_t batch = x.extent(0), channels = x.extent(1), taps = k.extent(1);
  const Shape spatial(x.shape().begin() + 2, x.shape().end());
  const ScanLayout l = scan_layout(spatial, axis);
  const std::size_t points = numel(spatial);

  Tensor out(x.shape(), 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double* kc = k.raw() + c * taps;
      const double* src = x.raw() + (b * channels + c) * points;
      double* dst = out.raw() + (b * channels + c) * points;
      for (std::size_t line = 0; line < l.lines; ++line) {
        const std::size_t s0 = l.start(line);
        for (std::size_t t = 0; t < l.length; ++t) {
          double acc = 0.0;
          const std::size_t reach = std::min(t + 1, taps);
          for (std::size_t tau = 0; tau < reach; ++tau) acc += kc[tau] * src[s0 + (t - tau) * l.stride];
          dst[s0 + t * l.stride] = acc;
        }
      }
    }
  }

  return v.tape().record("causal_conv", std::move(out), {v, kernels},
                         [x, k, l, batch, channels, taps, points](const Tensor& g, std::span<Tensor* const> pg) {
                           for (std::size_t b = 0; b < batch; ++b) {
                             for (std::size_t c = 0; c < channels; ++c) {
                               const double* kc = k.raw() + c * taps;
                               const double* src = x.raw() + (b * channels + c) * points;
                               const double* gc = g.raw() + (b * channels + c) * points;
                               for (std::size_t line = 0; line < l.lines; ++line) {
                                 const std::size_t s0 = l.start(line);
                                 for (std::size_t t = 0; t < l.length; ++t) {
                                   const double gt = gc[s0 + t * l.stride];
                                   if (gt == 0.0) continue;
                                   const std::size_t reach = std::min(t + 1, taps);
                                   for (std::size_t tau = 0; tau < reach; ++tau) {
                                     const std::size_t si = s0 + (t - tau) * l.stride;
                                     if (pg[0]) (*pg[0])[(b * channels + c) * points + si] += kc[tau] * gt;
                                     if (pg[1]) (*pg[1])[c * taps + tau] += src[si] * gt;
                                   }
                                 }
                               }
                             }
                           }
                         });
}

SSMBlock::SSMBlock(std::string prefix, std::size_t channels, std::size_t kernel_length, ScanAxis axis, Rng& rng)
    : channels_(channels), kernel_length_(kernel_length), axis_(axis) {
  if (kernel_length_ == 0 || kernel_length_ > max_kernel_length) {
    throw ValueError(prefix + ": kernel length " + std::to_string(kernel_length_) + " outside [1, " +
                     std::to_string(max_kernel_length) + "]");
  }
  if (channels_ == 0) throw ValueError(prefix + ": channel count must be positive");
  // Starts near the identity map: unit tap at lag 0, small random history.
  kernels_ = uniform_parameter(prefix + "/kernels", {channels_, kernel_length_},
                               0.1 / static_cast<double>(kernel_length_), rng);
  for (std::size_t c = 0; c < channels_; ++c) kernels_.value[c * kernel_length_] += 1.0;
}

Var SSMBlock::forward(ForwardContext& ctx, const Var& v) const { return causal_conv(v, ctx.bind(kernels_), axis_); }

GridField ssm_apply(const SSMBlock& block, const GridField& v) {
  return detail::apply_single(v, [&](ForwardContext& ctx, const Var& x) { return block.forward(ctx, x); });
}

}  // namespace neurop::blocks
