#include "neurop/blocks/spectral_conv.hpp"

#include <cmath>
#include <memory>

#include "neurop/core/error.hpp"
#include "neurop/core/fft.hpp"
#include "neurop/core/ops.hpp"
#include "single.hpp"

namespace neurop::blocks {

using fft::Complex;

ModeSelection::ModeSelection(std::vector<std::size_t> modes, const Shape& spatial) {
  const std::size_t rank = spatial.size();
  if (modes.size() != rank) {
    throw ShapeError("mode list has " + std::to_string(modes.size()) + " entries for a " + std::to_string(rank) +
                     "-D grid");
  }
  Shape half = spatial;
  half.back() = spatial.back() / 2 + 1;

  std::vector<std::vector<std::size_t>> per_axis(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    const std::size_t m = modes[d], n = spatial[d];
    for (std::size_t k = 0; k < m; ++k) per_axis[d].push_back(k);
    if (d + 1 < rank) {
      for (std::size_t k = n - m; k < n; ++k) per_axis[d].push_back(k);
    }
  }
  // Row-major over the weight extents.
  std::vector<std::size_t> counter(rank, 0);
  std::size_t total = 1;
  for (const auto& a : per_axis) total *= a.size();
  half_index_.reserve(total);
  for (std::size_t t = 0; t < total; ++t) {
    std::size_t flat = 0;
    for (std::size_t d = 0; d < rank; ++d) flat = flat * half[d] + per_axis[d][counter[d]];
    half_index_.push_back(flat);
    for (std::size_t d = rank; d-- > 0;) {
      if (++counter[d] < per_axis[d].size()) break;
      counter[d] = 0;
    }
  }
}

Shape ModeSelection::weight_extents(const std::vector<std::size_t>& modes) {
  Shape s;
  for (std::size_t d = 0; d < modes.size(); ++d) s.push_back(d + 1 < modes.size() ? 2 * modes[d] : modes[d]);
  return s;
}

SpectralConv::SpectralConv(std::string prefix, std::size_t in_channels, std::size_t out_channels,
                           std::vector<std::size_t> modes, Rng& rng)
    : in_(in_channels), out_(out_channels), modes_(std::move(modes)) {
  if (modes_.empty() || modes_.size() > 2) throw ValueError(prefix + ": spectral conv supports 1D and 2D grids");
  for (auto m : modes_) {
    if (m == 0) throw ValueError(prefix + ": mode counts must be positive");
  }
  Shape shape{out_, in_};
  const Shape ext = ModeSelection::weight_extents(modes_);
  shape.insert(shape.end(), ext.begin(), ext.end());
  const double bound = 1.0 / static_cast<double>(in_);
  real_ = uniform_parameter(prefix + "/spectral_real", shape, bound, rng);
  imag_ = uniform_parameter(prefix + "/spectral_imag", shape, bound, rng);
}

void SpectralConv::check_grid(const Shape& spatial) const {
  if (spatial.size() != modes_.size()) {
    throw ShapeError("spectral conv with " + std::to_string(modes_.size()) + " mode axes applied to grid " +
                     to_string(spatial));
  }
  for (std::size_t d = 0; d < spatial.size(); ++d) {
    if (spatial[d] < 2 * modes_[d]) {
      throw ValueError("retaining " + std::to_string(modes_[d]) + " modes on axis " + std::to_string(d) +
                       " exceeds the Nyquist limit of a " + std::to_string(spatial[d]) + "-point grid");
    }
  }
}

Var SpectralConv::forward(ForwardContext& ctx, const Var& v) const {
  const Tensor& x = v.value();
  if (x.rank() != modes_.size() + 2 || x.extent(1) != in_) {
    throw ShapeError("spectral conv expects (B, " + std::to_string(in_) + ", grid) input, got " + to_string(x.shape()));
  }
  const Shape spatial(x.shape().begin() + 2, x.shape().end());
  check_grid(spatial);

  auto plan = std::make_shared<const fft::SpectralPlan>(spatial);
  auto modes = std::make_shared<const ModeSelection>(modes_, spatial);
  const std::size_t batch = x.extent(0), cin = in_, cout = out_;
  const std::size_t m = modes->retained(), ss = plan->spatial_size(), hs = plan->half_size();
  const auto& idx = modes->half_indices();

  Var wr = ctx.bind(real_);
  Var wi = ctx.bind(imag_);
  const Tensor& Wr = wr.value();
  const Tensor& Wi = wi.value();

  // Retained input coefficients, kept for the weight gradient.
  std::vector<Complex> coeffs(batch * cin * m);
  std::vector<Complex> half(hs);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < cin; ++i) {
      plan->forward(x.data().subspan((b * cin + i) * ss, ss), half);
      for (std::size_t k = 0; k < m; ++k) coeffs[(b * cin + i) * m + k] = half[idx[k]];
    }
  }

  Shape out_shape = x.shape();
  out_shape[1] = cout;
  Tensor out(out_shape);
  std::vector<Complex> mixed(m);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      std::fill(mixed.begin(), mixed.end(), Complex{});
      for (std::size_t i = 0; i < cin; ++i) {
        const std::size_t w0 = (o * cin + i) * m;
        const Complex* xc = &coeffs[(b * cin + i) * m];
        for (std::size_t k = 0; k < m; ++k) mixed[k] += Complex(Wr[w0 + k], Wi[w0 + k]) * xc[k];
      }
      std::fill(half.begin(), half.end(), Complex{});
      for (std::size_t k = 0; k < m; ++k) half[idx[k]] = mixed[k];
      plan->inverse(half, out.data().subspan((b * cout + o) * ss, ss));
    }
  }

  return ctx.tape().record(
      "spectral_conv", std::move(out), {v, wr, wi},
      [plan, modes, coeffs = std::move(coeffs), Wr, Wi, batch, cin, cout](const Tensor& g,
                                                                         std::span<Tensor* const> pg) {
        const std::size_t m = modes->retained(), ss = plan->spatial_size(), hs = plan->half_size();
        const auto& idx = modes->half_indices();
        std::vector<Complex> half(hs);
        std::vector<Complex> gy(cout * m);
        std::vector<Complex> gx(m);
        std::vector<double> field(ss);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t o = 0; o < cout; ++o) {
            plan->inverse_adjoint(g.data().subspan((b * cout + o) * ss, ss), half);
            for (std::size_t k = 0; k < m; ++k) gy[o * m + k] = half[idx[k]];
          }
          if (pg[1] || pg[2]) {
            for (std::size_t o = 0; o < cout; ++o) {
              for (std::size_t i = 0; i < cin; ++i) {
                const std::size_t w0 = (o * cin + i) * m;
                const Complex* xc = &coeffs[(b * cin + i) * m];
                for (std::size_t k = 0; k < m; ++k) {
                  const Complex d = gy[o * m + k] * std::conj(xc[k]);
                  if (pg[1]) (*pg[1])[w0 + k] += d.real();
                  if (pg[2]) (*pg[2])[w0 + k] += d.imag();
                }
              }
            }
          }
          if (pg[0]) {
            for (std::size_t i = 0; i < cin; ++i) {
              std::fill(gx.begin(), gx.end(), Complex{});
              for (std::size_t o = 0; o < cout; ++o) {
                const std::size_t w0 = (o * cin + i) * m;
                for (std::size_t k = 0; k < m; ++k) gx[k] += std::conj(Complex(Wr[w0 + k], Wi[w0 + k])) * gy[o * m + k];
              }
              std::fill(half.begin(), half.end(), Complex{});
              for (std::size_t k = 0; k < m; ++k) half[idx[k]] = gx[k];
              plan->forward_adjoint(half, field);
              double* dst = pg[0]->raw() + (b * cin + i) * ss;
              for (std::size_t s = 0; s < ss; ++s) dst[s] += field[s];
            }
          }
        }
      });
}

void SpectralConv::visit(const ParameterVisitor& f) {
  f(real_);
  f(imag_);
}

void SpectralConv::visit(const ConstParameterVisitor& f) const {
  f(real_);
  f(imag_);
}

FnoBlock::FnoBlock(std::string prefix, std::size_t width, std::vector<std::size_t> modes, Activation activation,
                   Rng& rng)
    : activation_(activation), spectral_(prefix, width, width, std::move(modes), rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(width));
  weight_ = uniform_parameter(prefix + "/weight", {width, width}, bound, rng);
  bias_ = uniform_parameter(prefix + "/bias", {width}, bound, rng);
}

Var FnoBlock::forward(ForwardContext& ctx, const Var& v) const {
  Var local = channel_linear(v, ctx.bind(weight_), ctx.bind(bias_));
  Var pre = add(local, spectral_.forward(ctx, v));
  return activation_ == Activation::gelu ? gelu(pre) : pre;
}

void FnoBlock::visit(const ParameterVisitor& f) {
  spectral_.visit(f);
  f(weight_);
  f(bias_);
}

void FnoBlock::visit(const ConstParameterVisitor& f) const {
  spectral_.visit(f);
  f(weight_);
  f(bias_);
}

std::size_t FnoBlock::parameter_count() const {
  return spectral_.parameter_count() + weight_.value.size() + bias_.value.size();
}

GridField spectral_conv(const SpectralConv& layer, const GridField& v) {
  return detail::apply_single(v, [&](ForwardContext& ctx, const Var& x) { return layer.forward(ctx, x); });
}

GridField fno_block(const FnoBlock& block, const GridField& v) {
  return detail::apply_single(v, [&](ForwardContext& ctx, const Var& x) { return block.forward(ctx, x); });
}

}  // namespace neurop::blocks
