#include "neurop/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "neurop/core/error.hpp"

namespace neurop {

namespace {

void require_same_tape(const Var& a, const Var& b, const char* op) {
  if (&a.tape() != &b.tape()) throw TapeError(std::string(op) + ": operands live on different tapes");
}

// Broadcast classification for binary elementwise ops.
enum class Broadcast { none, scalar_a, scalar_b };

Broadcast classify(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (b.size() == 1) return Broadcast::scalar_b;
  if (a.size() == 1) return Broadcast::scalar_a;
  throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

double sum_of(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s;
}

// Row-major (m×k)·(k×n) with optional transposes, accumulating into c.
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool ta,
              bool tb) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ta ? a[p * m + i] : a[i * k + p];
      if (av == 0.0) continue;
      if (!tb) {
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
      }
    }
  }
}

}  // namespace

double gelu(double x) noexcept { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_derivative(double x) noexcept {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Var elementwise(Elementwise op, const Var& a, const std::optional<Var>& b, double factor) {
  Tape& tape = a.tape();
  const Tensor& av = a.value();

  switch (op) {
    case Elementwise::scale: {
      Tensor out = av;
      for (auto& v : out.data()) v *= factor;
      return tape.record("scale", std::move(out), {a}, [factor](const Tensor& g, std::span<Tensor* const> pg) {
        if (!pg[0]) return;
        for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += factor * g[i];
      });
    }
    case Elementwise::gelu:
    case Elementwise::relu: {
      const bool is_gelu = op == Elementwise::gelu;
      Tensor out = av;
      for (auto& v : out.data()) v = is_gelu ? gelu(v) : std::max(v, 0.0);
      return tape.record(is_gelu ? "gelu" : "relu", std::move(out), {a},
                         [x = av, is_gelu](const Tensor& g, std::span<Tensor* const> pg) {
                           if (!pg[0]) return;
                           auto& ga = *pg[0];
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             const double d = is_gelu ? gelu_derivative(x[i]) : (x[i] > 0.0 ? 1.0 : 0.0);
                             ga[i] += d * g[i];
                           }
                         });
    }
    case Elementwise::add:
    case Elementwise::sub:
    case Elementwise::mul:
      break;
  }

  if (!b) throw ValueError("binary elementwise op needs a second operand");
  require_same_tape(a, *b, "elementwise");
  const Tensor& bv = b->value();
  const char* name = op == Elementwise::add ? "add" : op == Elementwise::sub ? "sub" : "mul";
  const Broadcast bc = classify(av, bv, name);
  const Shape& out_shape = bc == Broadcast::scalar_a ? bv.shape() : av.shape();
  const std::size_t n = numel(out_shape);
  const double sign = op == Elementwise::sub ? -1.0 : 1.0;

  auto at_a = [&](std::size_t i) { return bc == Broadcast::scalar_a ? av[0] : av[i]; };
  auto at_b = [&](std::size_t i) { return bc == Broadcast::scalar_b ? bv[0] : bv[i]; };

  Tensor out(out_shape);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = op == Elementwise::mul ? at_a(i) * at_b(i) : at_a(i) + sign * at_b(i);
  }

  if (op != Elementwise::mul) {
    return tape.record(name, std::move(out), {a, *b}, [bc, sign](const Tensor& g, std::span<Tensor* const> pg) {
      if (pg[0]) {
        if (bc == Broadcast::scalar_a) (*pg[0])[0] += sum_of(g);
        else *pg[0] += g;
      }
      if (pg[1]) {
        if (bc == Broadcast::scalar_b) {
          (*pg[1])[0] += sign * sum_of(g);
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += sign * g[i];
        }
      }
    });
  }
  return tape.record("mul", std::move(out), {a, *b}, [bc, x = av, y = bv](const Tensor& g, std::span<Tensor* const> pg) {
    auto xa = [&](std::size_t i) { return bc == Broadcast::scalar_a ? x[0] : x[i]; };
    auto yb = [&](std::size_t i) { return bc == Broadcast::scalar_b ? y[0] : y[i]; };
    if (pg[0]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[bc == Broadcast::scalar_a ? 0 : i] += g[i] * yb(i);
    }
    if (pg[1]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[bc == Broadcast::scalar_b ? 0 : i] += g[i] * xa(i);
    }
  });
}

Var add(const Var& a, const Var& b) { return elementwise(Elementwise::add, a, b); }
Var sub(const Var& a, const Var& b) { return elementwise(Elementwise::sub, a, b); }
Var mul(const Var& a, const Var& b) { return elementwise(Elementwise::mul, a, b); }
Var scale(const Var& a, double factor) { return elementwise(Elementwise::scale, a, std::nullopt, factor); }
Var gelu(const Var& a) { return elementwise(Elementwise::gelu, a); }
Var relu(const Var& a) { return elementwise(Elementwise::relu, a); }

Var log(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) {
    if (!(v > 0.0)) throw ValueError("log of non-positive value " + std::to_string(v));
    v = std::log(v);
  }
  return a.tape().record("log", std::move(out), {a}, [x = a.value()](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] / x[i];
  });
}

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.extent(1) != bv.extent(0)) {
    throw ShapeError("matmul: cannot multiply " + to_string(av.shape()) + " by " + to_string(bv.shape()));
  }
  const std::size_t m = av.extent(0), k = av.extent(1), n = bv.extent(1);
  Tensor out(Shape{m, n});
  gemm_acc(av.raw(), bv.raw(), out.raw(), m, k, n, false, false);
  return a.tape().record("matmul", std::move(out), {a, b},
                         [x = av, y = bv, m, k, n](const Tensor& g, std::span<Tensor* const> pg) {
                           // dA = dC·Bᵀ, dB = Aᵀ·dC
                           if (pg[0]) gemm_acc(g.raw(), y.raw(), pg[0]->raw(), m, n, k, false, true);
                           if (pg[1]) gemm_acc(x.raw(), g.raw(), pg[1]->raw(), k, m, n, true, false);
                         });
}

Var bmm(const Var& a, const Var& b, bool transpose_a, bool transpose_b) {
  require_same_tape(a, b, "bmm");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.extent(0) != bv.extent(0)) {
    throw ShapeError("bmm: need (B,·,·) operands with equal batch, got " + to_string(av.shape()) + " and " +
                     to_string(bv.shape()));
  }
  const std::size_t batch = av.extent(0);
  const std::size_t m = transpose_a ? av.extent(2) : av.extent(1);
  const std::size_t k = transpose_a ? av.extent(1) : av.extent(2);
  const std::size_t kb = transpose_b ? bv.extent(2) : bv.extent(1);
  const std::size_t n = transpose_b ? bv.extent(1) : bv.extent(2);
  if (k != kb) {
    throw ShapeError("bmm: inner dimensions differ for " + to_string(av.shape()) + " and " + to_string(bv.shape()));
  }
  Tensor out(Shape{batch, m, n});
  for (std::size_t i = 0; i < batch; ++i) {
    gemm_acc(av.raw() + i * m * k, bv.raw() + i * k * n, out.raw() + i * m * n, m, k, n, transpose_a, transpose_b);
  }
  return a.tape().record(
      "bmm", std::move(out), {a, b},
      [x = av, y = bv, batch, m, k, n, transpose_a, transpose_b](const Tensor& g, std::span<Tensor* const> pg) {
        for (std::size_t i = 0; i < batch; ++i) {
          const double* gi = g.raw() + i * m * n;
          const double* xi = x.raw() + i * m * k;
          const double* yi = y.raw() + i * k * n;
          if (pg[0]) {
            double* dx = pg[0]->raw() + i * m * k;
            // op(A) = G·op(B)ᵀ; store back in A's own layout.
            if (!transpose_a) gemm_acc(gi, yi, dx, m, n, k, false, !transpose_b);
            else gemm_acc(yi, gi, dx, k, n, m, transpose_b, true);
          }
          if (pg[1]) {
            double* dy = pg[1]->raw() + i * k * n;
            if (!transpose_b) gemm_acc(xi, gi, dy, k, m, n, !transpose_a, false);
            else gemm_acc(gi, xi, dy, n, m, k, true, transpose_a);
          }
        }
      });
}

Var transpose_last2(const Var& a) {
  const Tensor& av = a.value();
  if (av.rank() < 2) throw ShapeError("transpose_last2 needs rank >= 2, got " + to_string(av.shape()));
  Shape shape = av.shape();
  const std::size_t r = shape[shape.size() - 2], c = shape[shape.size() - 1];
  std::swap(shape[shape.size() - 2], shape[shape.size() - 1]);
  const std::size_t blocks = av.size() / (r * c);
  auto permute = [blocks, r, c](const double* src, double* dst, bool forward) {
    for (std::size_t b = 0; b < blocks; ++b) {
      const double* s = src + b * r * c;
      double* d = dst + b * r * c;
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          if (forward) d[j * r + i] = s[i * c + j];
          else d[i * c + j] += s[j * r + i];
        }
      }
    }
  };
  Tensor out(shape);
  permute(av.raw(), out.raw(), true);
  return a.tape().record("transpose", std::move(out), {a}, [permute](const Tensor& g, std::span<Tensor* const> pg) {
    if (pg[0]) permute(g.raw(), pg[0]->raw(), false);
  });
}

Var reshape(const Var& a, Shape shape) {
  const Tensor& av = a.value();
  if (numel(shape) != av.size()) {
    throw ShapeError("reshape: " + to_string(av.shape()) + " cannot become " + to_string(shape));
  }
  return a.tape().record("reshape", av.reshaped(std::move(shape)), {a},
                         [](const Tensor& g, std::span<Tensor* const> pg) {
                           if (!pg[0]) return;
                           for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                         });
}

Var broadcast_batch(const Var& a, std::size_t count) {
  const Tensor& av = a.value();
  if (count == 0) throw ShapeError("broadcast_batch: count must be positive");
  Shape shape{count};
  shape.insert(shape.end(), av.shape().begin(), av.shape().end());
  Tensor out(shape);
  const std::size_t n = av.size();
  for (std::size_t b = 0; b < count; ++b) std::copy(av.raw(), av.raw() + n, out.raw() + b * n);
  return a.tape().record("broadcast_batch", std::move(out), {a},
                         [count, n](const Tensor& g, std::span<Tensor* const> pg) {
                           if (!pg[0]) return;
                           for (std::size_t b = 0; b < count; ++b) {
                             for (std::size_t i = 0; i < n; ++i) (*pg[0])[i] += g[b * n + i];
                           }
                         });
}

namespace {

// Maps each input element to its slot in the reduced output.
std::vector<std::size_t> reduction_map(const Shape& shape, std::span<const std::size_t> axes, Shape& out_shape) {
  const std::size_t rank = shape.size();
  std::vector<bool> reduced(rank, axes.empty());
  for (auto ax : axes) {
    if (ax >= rank) throw ShapeError("reduction axis " + std::to_string(ax) + " invalid for " + to_string(shape));
    reduced[ax] = true;
  }
  out_shape.clear();
  for (std::size_t d = 0; d < rank; ++d) {
    if (!reduced[d]) out_shape.push_back(shape[d]);
  }
  std::vector<std::size_t> map(numel(shape));
  std::vector<std::size_t> index(rank, 0);
  for (std::size_t flat = 0; flat < map.size(); ++flat) {
    std::size_t o = 0;
    for (std::size_t d = 0; d < rank; ++d) {
      if (!reduced[d]) o = o * shape[d] + index[d];
    }
    map[flat] = o;
    for (std::size_t d = rank; d-- > 0;) {
      if (++index[d] < shape[d]) break;
      index[d] = 0;
    }
  }
  return map;
}

Var sum_or_mean(const Var& a, std::span<const std::size_t> axes, bool average) {
  const Tensor& av = a.value();
  if (av.empty()) throw ShapeError("cannot reduce an empty tensor");
  Shape out_shape;
  auto map = reduction_map(av.shape(), axes, out_shape);
  Tensor out(out_shape, 0.0);
  for (std::size_t i = 0; i < av.size(); ++i) out[map[i]] += av[i];
  const double factor = average ? static_cast<double>(out.size()) / static_cast<double>(av.size()) : 1.0;
  if (average) {
    for (auto& v : out.data()) v *= factor;
  }
  return a.tape().record(average ? "mean" : "sum", std::move(out), {a},
                         [map = std::move(map), factor](const Tensor& g, std::span<Tensor* const> pg) {
                           if (!pg[0]) return;
                           for (std::size_t i = 0; i < map.size(); ++i) (*pg[0])[i] += factor * g[map[i]];
                         });
}

// Strides for iterating lines along `axis`.
struct AxisLayout {
  std::size_t outer = 1, length = 1, inner = 1;
};

AxisLayout layout_for(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) throw ShapeError("axis " + std::to_string(axis) + " invalid for " + to_string(shape));
  AxisLayout l;
  for (std::size_t d = 0; d < axis; ++d) l.outer *= shape[d];
  l.length = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) l.inner *= shape[d];
  return l;
}

}  // namespace

Var sum(const Var& a, std::span<const std::size_t> axes) { return sum_or_mean(a, axes, false); }
Var mean(const Var& a, std::span<const std::size_t> axes) { return sum_or_mean(a, axes, true); }

Tensor softmax(const Tensor& a, std::size_t axis) {
  const AxisLayout l = layout_for(a.shape(), axis);
  Tensor out = a;
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.length * l.inner + in;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < l.length; ++j) m = std::max(m, a[base + j * l.inner]);
      double s = 0.0;
      for (std::size_t j = 0; j < l.length; ++j) {
        const double e = std::exp(a[base + j * l.inner] - m);
        out[base + j * l.inner] = e;
        s += e;
      }
      for (std::size_t j = 0; j < l.length; ++j) out[base + j * l.inner] /= s;
    }
  }
  return out;
}

Var softmax(const Var& a, std::size_t axis) {
  Tensor out = softmax(a.value(), axis);
  const AxisLayout l = layout_for(out.shape(), axis);
  return a.tape().record("softmax", out, {a}, [y = out, l](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    // dx_j = y_j (g_j − Σ_i g_i y_i)
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.length * l.inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < l.length; ++j) dot += g[base + j * l.inner] * y[base + j * l.inner];
        for (std::size_t j = 0; j < l.length; ++j) {
          const std::size_t idx = base + j * l.inner;
          (*pg[0])[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Var channel_linear(const Var& x, const Var& weight, const std::optional<Var>& bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if (xv.rank() < 2 || wv.rank() != 2 || wv.extent(1) != xv.extent(1)) {
    throw ShapeError("channel_linear: weight " + to_string(wv.shape()) + " does not fit input " + to_string(xv.shape()));
  }
  const std::size_t batch = xv.extent(0), cin = xv.extent(1), cout = wv.extent(0);
  const std::size_t points = xv.size() / (batch * cin);
  if (bias && (bias->value().rank() != 1 || bias->value().extent(0) != cout)) {
    throw ShapeError("channel_linear: bias " + to_string(bias->value().shape()) + " does not match " +
                     std::to_string(cout) + " output channels");
  }
  Shape shape = xv.shape();
  shape[1] = cout;
  Tensor out(shape, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    double* ob = out.raw() + b * cout * points;
    gemm_acc(wv.raw(), xv.raw() + b * cin * points, ob, cout, cin, points, false, false);
    if (bias) {
      for (std::size_t o = 0; o < cout; ++o) {
        const double bo = bias->value()[o];
        for (std::size_t s = 0; s < points; ++s) ob[o * points + s] += bo;
      }
    }
  }
  std::vector<Var> parents{x, weight};
  if (bias) parents.push_back(*bias);
  return x.tape().record("channel_linear", std::move(out), std::move(parents),
                         [xs = xv, w = wv, batch, cin, cout, points](const Tensor& g, std::span<Tensor* const> pg) {
                           for (std::size_t b = 0; b < batch; ++b) {
                             const double* gb = g.raw() + b * cout * points;
                             if (pg[0]) gemm_acc(w.raw(), gb, pg[0]->raw() + b * cin * points, cin, cout, points, true, false);
                             if (pg[1]) gemm_acc(gb, xs.raw() + b * cin * points, pg[1]->raw(), cout, points, cin, false, true);
                             if (pg.size() > 2 && pg[2]) {
                               for (std::size_t o = 0; o < cout; ++o) {
                                 double s = 0.0;
                                 for (std::size_t p = 0; p < points; ++p) s += gb[o * points + p];
                                 (*pg[2])[o] += s;
                               }
                             }
                           }
                         });
}

Var token_linear(const Var& x, const Var& weight, const std::optional<Var>& bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if (xv.rank() < 1 || wv.rank() != 2 || wv.extent(0) != xv.shape().back()) {
    throw ShapeError("token_linear: weight " + to_string(wv.shape()) + " does not fit input " + to_string(xv.shape()));
  }
  const std::size_t din = wv.extent(0), dout = wv.extent(1);
  const std::size_t rows = xv.size() / din;
  if (bias && (bias->value().rank() != 1 || bias->value().extent(0) != dout)) {
    throw ShapeError("token_linear: bias " + to_string(bias->value().shape()) + " does not match width " +
                     std::to_string(dout));
  }
  Shape shape = xv.shape();
  shape.back() = dout;
  Tensor out(shape, 0.0);
  gemm_acc(xv.raw(), wv.raw(), out.raw(), rows, din, dout, false, false);
  if (bias) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < dout; ++j) out[r * dout + j] += bias->value()[j];
    }
  }
  std::vector<Var> parents{x, weight};
  if (bias) parents.push_back(*bias);
  return x.tape().record("token_linear", std::move(out), std::move(parents),
                         [xs = xv, w = wv, rows, din, dout](const Tensor& g, std::span<Tensor* const> pg) {
                           if (pg[0]) gemm_acc(g.raw(), w.raw(), pg[0]->raw(), rows, dout, din, false, true);
                           if (pg[1]) gemm_acc(xs.raw(), g.raw(), pg[1]->raw(), din, rows, dout, true, false);
                           if (pg.size() > 2 && pg[2]) {
                             for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t j = 0; j < dout; ++j) (*pg[2])[j] += g[r * dout + j];
                             }
                           }
                         });
}

Var concat_channels(const Var& a, const Var& b) {
  require_same_tape(a, b, "concat_channels");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() < 2 || av.rank() != bv.rank() || av.extent(0) != bv.extent(0) ||
      !std::equal(av.shape().begin() + 2, av.shape().end(), bv.shape().begin() + 2)) {
    throw ShapeError("concat_channels: incompatible " + to_string(av.shape()) + " and " + to_string(bv.shape()));
  }
  const std::size_t batch = av.extent(0);
  const std::size_t na = av.size() / batch, nb = bv.size() / batch;
  Shape shape = av.shape();
  shape[1] += bv.extent(1);
  Tensor out(shape);
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy(av.raw() + i * na, av.raw() + (i + 1) * na, out.raw() + i * (na + nb));
    std::copy(bv.raw() + i * nb, bv.raw() + (i + 1) * nb, out.raw() + i * (na + nb) + na);
  }
  return a.tape().record("concat_channels", std::move(out), {a, b},
                         [batch, na, nb](const Tensor& g, std::span<Tensor* const> pg) {
                           for (std::size_t i = 0; i < batch; ++i) {
                             const double* gi = g.raw() + i * (na + nb);
                             if (pg[0]) {
                               for (std::size_t j = 0; j < na; ++j) (*pg[0])[i * na + j] += gi[j];
                             }
                             if (pg[1]) {
                               for (std::size_t j = 0; j < nb; ++j) (*pg[1])[i * nb + j] += gi[na + j];
                             }
                           }
                         });
}

}  // namespace neurop
