#include "neurop/blocks/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "neurop/core/error.hpp"

namespace neurop::blocks {

namespace {

struct Dims {
  std::size_t batch, nq, nk, d, dv;
};

Dims check(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads) {
  if (q.rank() != k.rank() || q.rank() != v.rank() || (q.rank() != 2 && q.rank() != 3)) {
    throw ShapeError("attention expects (tokens, features) or (batch, tokens, features) operands");
  }
  const std::size_t off = q.rank() - 2;
  Dims d{off ? q.extent(0) : 1, q.extent(off), k.extent(off), q.extent(off + 1), v.extent(off + 1)};
  if (off && (k.extent(0) != d.batch || v.extent(0) != d.batch)) throw ShapeError("attention: batch sizes differ");
  if (k.extent(off + 1) != d.d) {
    throw ShapeError("attention: query width " + std::to_string(d.d) + " != key width " +
                     std::to_string(k.extent(off + 1)));
  }
  if (v.extent(off) != d.nk) {
    throw ShapeError("attention: " + std::to_string(d.nk) + " keys but " + std::to_string(v.extent(off)) + " values");
  }
  if (heads == 0 || d.d % heads != 0 || d.dv % heads != 0) {
    throw ShapeError("attention: widths " + std::to_string(d.d) + "/" + std::to_string(d.dv) +
                     " not divisible by " + std::to_string(heads) + " heads");
  }
  return d;
}

}  // namespace

Var attention(const Var& q, const Var& k, const Var& v, std::size_t heads) {
  const Tensor& Q = q.value();
  const Tensor& K = k.value();
  const Tensor& V = v.value();
  const Dims d = check(Q, K, V, heads);
  const std::size_t hd = d.d / heads, hv = d.dv / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Shape out_shape = Q.shape();
  out_shape.back() = d.dv;
  Tensor out(out_shape, 0.0);
  // Attention weights per (batch, head): nq × nk.
  std::vector<double> probs(d.batch * heads * d.nq * d.nk);

  for (std::size_t b = 0; b < d.batch; ++b) {
    const double* qb = Q.raw() + b * d.nq * d.d;
    const double* kb = K.raw() + b * d.nk * d.d;
    const double* vb = V.raw() + b * d.nk * d.dv;
    double* ob = out.raw() + b * d.nq * d.dv;
    for (std::size_t h = 0; h < heads; ++h) {
      double* p = probs.data() + (b * heads + h) * d.nq * d.nk;
      for (std::size_t i = 0; i < d.nq; ++i) {
        double* row = p + i * d.nk;
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < d.nk; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < hd; ++c) s += qb[i * d.d + h * hd + c] * kb[j * d.d + h * hd + c];
          row[j] = s * scale;
          m = std::max(m, row[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < d.nk; ++j) {
          row[j] = std::exp(row[j] - m);
          z += row[j];
        }
        for (std::size_t j = 0; j < d.nk; ++j) {
          row[j] /= z;
          const double pj = row[j];
          const double* vj = vb + j * d.dv + h * hv;
          double* oi = ob + i * d.dv + h * hv;
          for (std::size_t c = 0; c < hv; ++c) oi[c] += pj * vj[c];
        }
      }
    }
  }

  return q.tape().record(
      "attention", std::move(out), {q, k, v},
      [Q, K, V, d, heads, hd, hv, scale, probs = std::move(probs)](const Tensor& g, std::span<Tensor* const> pg) {
        std::vector<double> dp(d.nk);
        for (std::size_t b = 0; b < d.batch; ++b) {
          const double* qb = Q.raw() + b * d.nq * d.d;
          const double* kb = K.raw() + b * d.nk * d.d;
          const double* vb = V.raw() + b * d.nk * d.dv;
          const double* gb = g.raw() + b * d.nq * d.dv;
          for (std::size_t h = 0; h < heads; ++h) {
            const double* p = probs.data() + (b * heads + h) * d.nq * d.nk;
            for (std::size_t i = 0; i < d.nq; ++i) {
              const double* gi = gb + i * d.dv + h * hv;
              const double* row = p + i * d.nk;
              // dP = dO·Vᵀ, dS = P ⊙ (dP − Σ dP⊙P)
              double dot = 0.0;
              for (std::size_t j = 0; j < d.nk; ++j) {
                double s = 0.0;
                const double* vj = vb + j * d.dv + h * hv;
                for (std::size_t c = 0; c < hv; ++c) s += gi[c] * vj[c];
                dp[j] = s;
                dot += s * row[j];
              }
              for (std::size_t j = 0; j < d.nk; ++j) {
                const double ds = row[j] * (dp[j] - dot) * scale;
                if (pg[2]) {
                  double* dvj = pg[2]->raw() + b * d.nk * d.dv + j * d.dv + h * hv;
                  for (std::size_t c = 0; c < hv; ++c) dvj[c] += row[j] * gi[c];
                }
                if (ds == 0.0) continue;
                if (pg[0]) {
                  double* dqi = pg[0]->raw() + b * d.nq * d.d + i * d.d + h * hd;
                  const double* kj = kb + j * d.d + h * hd;
                  for (std::size_t c = 0; c < hd; ++c) dqi[c] += ds * kj[c];
                }
                if (pg[1]) {
                  double* dkj = pg[1]->raw() + b * d.nk * d.d + j * d.d + h * hd;
                  const double* qi = qb + i * d.d + h * hd;
                  for (std::size_t c = 0; c < hd; ++c) dkj[c] += ds * qi[c];
                }
              }
            }
          }
        }
      });
}

Tensor attention_weights(const Tensor& q, const Tensor& k) {
  const Dims d = check(q, k, k, 1);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.d));
  Shape shape = q.shape();
  shape.back() = d.nk;
  Tensor out(shape);
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t i = 0; i < d.nq; ++i) {
      double* row = out.raw() + (b * d.nq + i) * d.nk;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < d.nk; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d.d; ++c) s += q[(b * d.nq + i) * d.d + c] * k[(b * d.nk + j) * d.d + c];
        row[j] = s * scale;
        m = std::max(m, row[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < d.nk; ++j) z += (row[j] = std::exp(row[j] - m));
      for (std::size_t j = 0; j < d.nk; ++j) row[j] /= z;
    }
  }
  return out;
}

}  // namespace neurop::blocks
