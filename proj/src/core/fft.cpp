#include "neurop/core/fft.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "neurop/core/error.hpp"

namespace neurop::fft {

/// Twiddles and bit-reversal table for one transform length.
class Plan1D {
 public:
  explicit Plan1D(std::size_t n) : n_(n), pow2_((n & (n - 1)) == 0) {
    if (pow2_) {
      twiddle_.resize(n / 2);
      conj_twiddle_.resize(n / 2);
      for (std::size_t k = 0; k < n / 2; ++k) {
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        twiddle_[k] = Complex(std::cos(angle), std::sin(angle));
        conj_twiddle_[k] = std::conj(twiddle_[k]);
      }
      reversed_.resize(n);
      std::size_t bits = 0;
      while ((std::size_t{1} << bits) < n) ++bits;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
        reversed_[i] = r;
      }
    } else {
      twiddle_.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        twiddle_[k] = Complex(std::cos(angle), std::sin(angle));
      }
    }
  }

  std::size_t size() const noexcept { return n_; }

  void run(Complex* data, bool inverse, std::vector<Complex>& scratch) const {
    if (n_ <= 1) return;
    if (pow2_) {
      for (std::size_t i = 0; i < n_; ++i) {
        if (i < reversed_[i]) std::swap(data[i], data[reversed_[i]]);
      }
      const Complex* table = inverse ? conj_twiddle_.data() : twiddle_.data();
      for (std::size_t len = 2; len <= n_; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t step = n_ / len;
        for (std::size_t start = 0; start < n_; start += len) {
          for (std::size_t j = 0; j < half; ++j) {
            const Complex w = table[j * step];
            const Complex u = data[start + j];
            const Complex v = data[start + j + half] * w;
            data[start + j] = u + v;
            data[start + j + half] = u - v;
          }
        }
      }
      return;
    }
    scratch.assign(n_, Complex{});
    for (std::size_t k = 0; k < n_; ++k) {
      Complex acc{};
      for (std::size_t j = 0; j < n_; ++j) {
        Complex w = twiddle_[(j * k) % n_];
        if (inverse) w = std::conj(w);
        acc += data[j] * w;
      }
      scratch[k] = acc;
    }
    std::copy(scratch.begin(), scratch.end(), data);
  }

 private:
  std::size_t n_;
  bool pow2_;
  std::vector<Complex> twiddle_;
  std::vector<Complex> conj_twiddle_;
  std::vector<std::size_t> reversed_;
};

namespace {

std::shared_ptr<const Plan1D> plan_for(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::shared_ptr<const Plan1D>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_shared<const Plan1D>(n);
  return slot;
}

thread_local std::vector<Complex> tl_scratch;
thread_local std::vector<Complex> tl_line;

}  // namespace

void transform(std::span<Complex> data, bool inverse) {
  if (data.empty()) return;
  plan_for(data.size())->run(data.data(), inverse, tl_scratch);
}

SpectralPlan::SpectralPlan(Shape spatial) : spatial_(std::move(spatial)) {
  if (spatial_.empty()) throw ShapeError("spectral plan needs at least one spatial axis");
  for (auto e : spatial_) {
    if (e == 0) throw ShapeError("spectral plan extents must be positive, got " + to_string(spatial_));
  }
  half_ = spatial_;
  half_.back() = spatial_.back() / 2 + 1;
  spatial_size_ = numel(spatial_);
  half_size_ = numel(half_);
  for (auto e : spatial_) plans_.push_back(plan_for(e));
  const std::size_t n = spatial_.back();
  if (n % 2 == 0 && n >= 4) {
    packed_ = plan_for(n / 2);
    pack_twiddle_.resize(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      pack_twiddle_[k] = Complex(std::cos(angle), std::sin(angle));
    }
  }
}

double SpectralPlan::weight(std::size_t k) const noexcept {
  const std::size_t n = spatial_.back();
  if (k == 0) return 1.0;
  if (n % 2 == 0 && k == n / 2) return 1.0;
  return 2.0;
}

void SpectralPlan::transform_leading_axes(std::span<Complex> half, bool inverse) const {
  const std::size_t rank = spatial_.size();
  // Axis `axis` of the half array: stride is the product of later extents.
  for (std::size_t axis = rank - 1; axis-- > 0;) {
    const std::size_t len = half_[axis];
    std::size_t inner = 1;
    for (std::size_t d = axis + 1; d < rank; ++d) inner *= half_[d];
    const std::size_t outer = half_size_ / (len * inner);
    tl_line.resize(len);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        Complex* base = half.data() + o * len * inner + i;
        for (std::size_t j = 0; j < len; ++j) tl_line[j] = base[j * inner];
        plans_[axis]->run(tl_line.data(), inverse, tl_scratch);
        for (std::size_t j = 0; j < len; ++j) base[j * inner] = tl_line[j];
      }
    }
  }
}

void SpectralPlan::forward(std::span<const double> field, std::span<Complex> half) const {
  if (field.size() != spatial_size_ || half.size() != half_size_) {
    throw ShapeError("rfft: buffer sizes do not match spatial shape " + to_string(spatial_));
  }
  const std::size_t n = spatial_.back(), h = half_.back();
  const std::size_t rows = spatial_size_ / n;
  tl_line.resize(n);
  if (packed_) {
    // z[j] = x[2j] + i·x[2j+1]; X[k] = E[k] + W^k·O[k].
    const std::size_t m = n / 2;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* x = field.data() + r * n;
      for (std::size_t j = 0; j < m; ++j) tl_line[j] = Complex(x[2 * j], x[2 * j + 1]);
      packed_->run(tl_line.data(), false, tl_scratch);
      Complex* out = half.data() + r * h;
      for (std::size_t k = 0; k <= m; ++k) {
        const Complex a = tl_line[k % m], b = std::conj(tl_line[(m - k) % m]);
        const Complex e = 0.5 * (a + b);
        const Complex o = Complex(0.0, -0.5) * (a - b);
        out[k] = e + pack_twiddle_[k] * o;
      }
    }
  } else {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < n; ++j) tl_line[j] = Complex(field[r * n + j], 0.0);
      plans_.back()->run(tl_line.data(), false, tl_scratch);
      for (std::size_t k = 0; k < h; ++k) half[r * h + k] = tl_line[k];
    }
  }
  transform_leading_axes(half, false);
}

void SpectralPlan::reweighted_last_axis(std::span<const Complex> half, std::span<double> field,
                                        bool apply_weights) const {
  const std::size_t n = spatial_.back(), h = half_.back();
  const std::size_t rows = spatial_size_ / n;
  tl_line.resize(n);
  if (packed_) {
    // Re(sum_k w_k Y_k e^{+iθ}) is the Hermitian extension of Y with the
    // imaginary parts of the zero and Nyquist columns dropped; evaluate it as
    // a half-length inverse of Z = E + i·O.
    const std::size_t m = n / 2;
    for (std::size_t r = 0; r < rows; ++r) {
      const Complex* y = half.data() + r * h;
      auto coeff = [&](std::size_t k) {
        if (k == 0 || k == m) return Complex(y[k].real(), 0.0);
        return apply_weights ? y[k] : 0.5 * y[k];
      };
      for (std::size_t k = 0; k < m; ++k) {
        const Complex a = coeff(k), b = std::conj(coeff(m - k));
        const Complex e = a + b;
        const Complex o = (a - b) * std::conj(pack_twiddle_[k]);
        tl_line[k] = e + Complex(0.0, 1.0) * o;
      }
      packed_->run(tl_line.data(), true, tl_scratch);
      double* x = field.data() + r * n;
      for (std::size_t j = 0; j < m; ++j) {
        x[2 * j] = tl_line[j].real();
        x[2 * j + 1] = tl_line[j].imag();
      }
    }
    return;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill(tl_line.begin(), tl_line.end(), Complex{});
    for (std::size_t k = 0; k < h; ++k) tl_line[k] = apply_weights ? weight(k) * half[r * h + k] : half[r * h + k];
    plans_.back()->run(tl_line.data(), true, tl_scratch);
    for (std::size_t j = 0; j < n; ++j) field[r * n + j] = tl_line[j].real();
  }
}

void SpectralPlan::inverse(std::span<const Complex> half, std::span<double> field) const {
  if (field.size() != spatial_size_ || half.size() != half_size_) {
    throw ShapeError("irfft: buffer sizes do not match spatial shape " + to_string(spatial_));
  }
  std::vector<Complex> work(half.begin(), half.end());
  transform_leading_axes(work, true);
  reweighted_last_axis(work, field, true);
  const double norm = 1.0 / static_cast<double>(spatial_size_);
  for (auto& v : field) v *= norm;
}

void SpectralPlan::forward_adjoint(std::span<const Complex> g, std::span<double> field) const {
  if (field.size() != spatial_size_ || g.size() != half_size_) {
    throw ShapeError("rfft adjoint: buffer sizes do not match spatial shape " + to_string(spatial_));
  }
  std::vector<Complex> work(g.begin(), g.end());
  transform_leading_axes(work, true);
  reweighted_last_axis(work, field, false);
}

void SpectralPlan::inverse_adjoint(std::span<const double> g, std::span<Complex> half) const {
  forward(g, half);
  const std::size_t h = half_.back();
  const double norm = 1.0 / static_cast<double>(spatial_size_);
  for (std::size_t i = 0; i < half_size_; ++i) half[i] *= weight(i % h) * norm;
}

namespace {

Shape trailing(const Shape& shape, std::size_t rank) {
  if (rank == 0 || rank > shape.size()) {
    throw ShapeError("spatial rank " + std::to_string(rank) + " invalid for shape " + to_string(shape));
  }
  return Shape(shape.end() - static_cast<std::ptrdiff_t>(rank), shape.end());
}

Shape leading(const Shape& shape, std::size_t rank) {
  return Shape(shape.begin(), shape.end() - static_cast<std::ptrdiff_t>(rank));
}

Shape join(Shape a, const Shape& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void check_half_shape(const Shape& c_shape, const Shape& spatial) {
  const SpectralPlan probe(spatial);
  if (c_shape.size() < spatial.size() ||
      !std::equal(probe.half_shape().begin(), probe.half_shape().end(),
                  c_shape.end() - static_cast<std::ptrdiff_t>(spatial.size()))) {
    throw ShapeError("irfft: coefficients " + to_string(c_shape) + " do not match spatial shape " +
                     to_string(spatial) + " (expected trailing " + to_string(probe.half_shape()) + ")");
  }
}

}  // namespace

ComplexTensor rfft(const Tensor& x, std::size_t spatial_rank) {
  const SpectralPlan plan(trailing(x.shape(), spatial_rank));
  const Shape out_shape = join(leading(x.shape(), spatial_rank), plan.half_shape());
  const std::size_t fields = x.size() / plan.spatial_size();
  ComplexTensor out{Tensor(out_shape), Tensor(out_shape)};
  std::vector<Complex> half(plan.half_size());
  for (std::size_t f = 0; f < fields; ++f) {
    plan.forward(x.data().subspan(f * plan.spatial_size(), plan.spatial_size()), half);
    for (std::size_t i = 0; i < half.size(); ++i) {
      out.real[f * half.size() + i] = half[i].real();
      out.imag[f * half.size() + i] = half[i].imag();
    }
  }
  return out;
}

Tensor irfft(const ComplexTensor& c, const Shape& spatial) {
  if (c.real.shape() != c.imag.shape()) throw ShapeError("irfft: real and imaginary parts differ in shape");
  check_half_shape(c.real.shape(), spatial);
  const SpectralPlan plan(spatial);
  const Shape out_shape = join(leading(c.real.shape(), spatial.size()), spatial);
  const std::size_t fields = c.real.size() / plan.half_size();
  Tensor out(out_shape);
  std::vector<Complex> half(plan.half_size());
  for (std::size_t f = 0; f < fields; ++f) {
    for (std::size_t i = 0; i < half.size(); ++i) {
      half[i] = Complex(c.real[f * half.size() + i], c.imag[f * half.size() + i]);
    }
    plan.inverse(half, out.data().subspan(f * plan.spatial_size(), plan.spatial_size()));
  }
  return out;
}

}  // namespace neurop::fft

namespace neurop {

ComplexVar rfft(const Var& x, std::size_t spatial_rank) {
  const Tensor& xv = x.value();
  ComplexTensor c = fft::rfft(xv, spatial_rank);
  const Shape spatial(xv.shape().end() - static_cast<std::ptrdiff_t>(spatial_rank), xv.shape().end());
  auto plan = std::make_shared<const fft::SpectralPlan>(spatial);

  // Each part is its own node; the adjoint feeds a zero for the other part.
  auto make_part = [&](Tensor value, bool imaginary) {
    return x.tape().record(imaginary ? "rfft_imag" : "rfft_real", std::move(value), {x},
                           [plan, imaginary](const Tensor& g, std::span<Tensor* const> pg) {
                             if (!pg[0]) return;
                             const std::size_t hs = plan->half_size(), ss = plan->spatial_size();
                             std::vector<fft::Complex> half(hs);
                             std::vector<double> field(ss);
                             for (std::size_t f = 0; f < g.size() / hs; ++f) {
                               for (std::size_t i = 0; i < hs; ++i) {
                                 half[i] = imaginary ? fft::Complex(0.0, g[f * hs + i]) : fft::Complex(g[f * hs + i], 0.0);
                               }
                               plan->forward_adjoint(half, field);
                               for (std::size_t i = 0; i < ss; ++i) (*pg[0])[f * ss + i] += field[i];
                             }
                           });
  };
  Var re = make_part(std::move(c.real), false);
  Var im = make_part(std::move(c.imag), true);
  return {re, im};
}

Var irfft(const ComplexVar& c, const Shape& spatial) {
  if (&c.real.tape() != &c.imag.tape()) throw TapeError("irfft: parts recorded on different tapes");
  Tensor out = fft::irfft(ComplexTensor{c.real.value(), c.imag.value()}, spatial);
  auto plan = std::make_shared<const fft::SpectralPlan>(spatial);
  return c.real.tape().record("irfft", std::move(out), {c.real, c.imag},
                              [plan](const Tensor& g, std::span<Tensor* const> pg) {
                                const std::size_t hs = plan->half_size(), ss = plan->spatial_size();
                                std::vector<fft::Complex> half(hs);
                                for (std::size_t f = 0; f < g.size() / ss; ++f) {
                                  plan->inverse_adjoint(g.data().subspan(f * ss, ss), half);
                                  for (std::size_t i = 0; i < hs; ++i) {
                                    if (pg[0]) (*pg[0])[f * hs + i] += half[i].real();
                                    if (pg[1]) (*pg[1])[f * hs + i] += half[i].imag();
                                  }
                                }
                              });
}

}  // namespace neurop
