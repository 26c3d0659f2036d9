#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "block_check.hpp"
#include "doctest.h"
#include "neurop/blocks/attention.hpp"
#include "neurop/blocks/perceiver.hpp"
#include "neurop/blocks/pointwise.hpp"
#include "neurop/blocks/spectral_conv.hpp"
#include "neurop/blocks/ssm.hpp"
#include "neurop/core/error.hpp"
#include "neurop/core/ops.hpp"
#include "oracles.hpp"

using namespace neurop;
using namespace neurop::blocks;
using testing::check_block;

namespace {

template <typename Block>
void set_parameters(Block& block, const std::string& suffix, double value) {
  block.visit(ParameterVisitor([&](Parameter& p) {
    if (p.name.size() >= suffix.size() && p.name.compare(p.name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      p.value.fill(value);
    }
  }));
}

Grid grid1(std::size_t n) { return Grid{{n}, {1.0}}; }
Grid grid2(std::size_t n1, std::size_t n2) { return Grid{{n1, n2}, {1.0, 1.0}}; }

// Circular shift of a (C, N1, N2) field by (s1, s2) cells.
Tensor roll2(const Tensor& x, std::size_t s1, std::size_t s2) {
  const std::size_t c = x.extent(0), n1 = x.extent(1), n2 = x.extent(2);
  Tensor out(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t a = 0; a < n1; ++a) {
      for (std::size_t b = 0; b < n2; ++b) {
        out[(ch * n1 + (a + s1) % n1) * n2 + (b + s2) % n2] = x[(ch * n1 + a) * n2 + b];
      }
    }
  }
  return out;
}

const GradCheckOptions kTight{.tolerance = 1e-5};
const GradCheckOptions kBlock{.tolerance = 1e-4};

}  // namespace

TEST_SUITE("lifting and projection") {
  TEST_CASE("zero weights give the output bias everywhere") {
    Rng rng(1);
    LiftingMap lift_map("heat", "adapter/heat/lift", 3, 16, rng);
    set_parameters(lift_map, "/w1", 0.0);
    set_parameters(lift_map, "/w2", 0.0);
    set_parameters(lift_map, "/b2", 0.375);
    GridField a(grid2(4, 4), oracle::random_tensor({3, 4, 4}, 2));
    GridField v = lift(lift_map, a);
    CHECK(v.channels() == 16);
    for (double x : v.values.data()) CHECK(x == 0.375);

    ProjectionMap proj("heat", "adapter/heat/proj", 16, 2, rng);
    set_parameters(proj, "/w1", 0.0);
    set_parameters(proj, "/w2", 0.0);
    set_parameters(proj, "/b2", -1.5);
    GridField u = project(proj, v);
    CHECK(u.channels() == 2);
    for (double x : u.values.data()) CHECK(x == -1.5);
  }

  TEST_CASE("pointwise maps commute with permutations of grid locations") {
    Rng rng(3);
    LiftingMap lift_map("t", "lift", 2, 8, rng);
    Tensor a = oracle::random_tensor({2, 12}, 4);
    std::vector<std::size_t> perm(12);
    for (std::size_t i = 0; i < 12; ++i) perm[i] = (i * 5 + 3) % 12;
    Tensor pa(a.shape());
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t i = 0; i < 12; ++i) pa[c * 12 + i] = a[c * 12 + perm[i]];
    }
    Tensor y = lift(lift_map, GridField(grid1(12), a)).values;
    Tensor py = lift(lift_map, GridField(grid1(12), pa)).values;
    for (std::size_t c = 0; c < 8; ++c) {
      for (std::size_t i = 0; i < 12; ++i) CHECK(py[c * 12 + i] == y[c * 12 + perm[i]]);
    }
  }

  TEST_CASE("channel mismatch names the task") {
    Rng rng(5);
    LiftingMap lift_map("gray_scott", "lift", 4, 8, rng);
    try {
      lift(lift_map, GridField(grid1(8), Tensor(Shape{3, 8})));
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("gray_scott") != std::string::npos);
    }
  }

  TEST_CASE("gradients on an 8x8 grid") {
    Rng rng(6);
    LiftingMap lift_map("t", "lift", 2, 16, rng);
    auto report = check_block(lift_map, oracle::random_tensor({1, 2, 8, 8}, 7), kTight);
    CHECK_MESSAGE(report.passed, report.summary());

    ProjectionMap proj("t", "proj", 16, 2, rng);
    report = check_block(proj, oracle::random_tensor({1, 16, 8, 8}, 8), kTight);
    CHECK_MESSAGE(report.passed, report.summary());
  }

  TEST_CASE("parameter counts are exact") {
    Rng rng(9);
    LiftingMap lift_map("t", "lift", 3, 32, rng);
    CHECK(lift_map.parameter_count() == 3 * 32 + 32 + 32 * 32 + 32);
    ProjectionMap proj("t", "proj", 32, 2, rng);
    CHECK(proj.parameter_count() == 32 * 32 + 32 + 32 * 2 + 2);
  }
}

TEST_SUITE("spectral convolution") {
  TEST_CASE("zero weights give zero output") {
    Rng rng(10);
    SpectralConv layer("k", 3, 3, {4, 4}, rng);
    set_parameters(layer, "spectral_real", 0.0);
    set_parameters(layer, "spectral_imag", 0.0);
    GridField out = spectral_conv(layer, GridField(grid2(16, 16), oracle::random_tensor({3, 16, 16}, 11)));
    for (double x : out.values.data()) CHECK(x == 0.0);
  }

  TEST_CASE("retained 1-D mode passes through, truncated mode vanishes") {
    Rng rng(12);
    SpectralConv layer("k", 1, 1, {4}, rng);
    set_parameters(layer, "spectral_real", 0.0);
    set_parameters(layer, "spectral_imag", 0.0);
    layer.weight_real().value[2] = 1.0;

    Tensor wave(Shape{1, 16}), high(Shape{1, 16});
    for (std::size_t n = 0; n < 16; ++n) {
      wave[n] = std::cos(2 * std::numbers::pi * 2 * n / 16.0) + 0.5 * std::sin(2 * std::numbers::pi * 2 * n / 16.0);
      high[n] = std::cos(2 * std::numbers::pi * 6 * n / 16.0);
    }
    CHECK(max_abs_difference(spectral_conv(layer, GridField(grid1(16), wave)).values, wave) < 1e-10);

    set_parameters(layer, "spectral_real", 1.0);
    set_parameters(layer, "spectral_imag", 1.0);
    Tensor res = spectral_conv(layer, GridField(grid1(16), high)).values;
    for (double x : res.data()) CHECK(std::abs(x) < 1e-13);
  }

  TEST_CASE("retained 2-D mode with a negative wavenumber passes through") {
    Rng rng(13);
    SpectralConv layer("k", 1, 1, {4, 4}, rng);
    set_parameters(layer, "spectral_real", 0.0);
    set_parameters(layer, "spectral_imag", 0.0);
    // Rows kept: 0..3 and 12..15, so row 13 (k1 = -3) sits at weight row 5.
    layer.weight_real().value[5 * 4 + 2] = 1.0;
    Tensor wave(Shape{1, 16, 16});
    for (std::size_t a = 0; a < 16; ++a) {
      for (std::size_t b = 0; b < 16; ++b) wave[a * 16 + b] = std::cos(2 * std::numbers::pi * (-3.0 * a + 2.0 * b) / 16.0);
    }
    CHECK(max_abs_difference(spectral_conv(layer, GridField(grid2(16, 16), wave)).values, wave) < 1e-10);

    Tensor high(Shape{1, 16, 16});
    for (std::size_t a = 0; a < 16; ++a) {
      for (std::size_t b = 0; b < 16; ++b) high[a * 16 + b] = std::cos(2 * std::numbers::pi * (5.0 * a + 1.0 * b) / 16.0);
    }
    set_parameters(layer, "spectral_real", 1.0);
    Tensor res = spectral_conv(layer, GridField(grid2(16, 16), high)).values;
    for (double x : res.data()) CHECK(std::abs(x) < 1e-14);
  }

  TEST_CASE("modes beyond Nyquist are rejected") {
    Rng rng(14);
    SpectralConv layer("k", 1, 1, {5}, rng);
    CHECK_THROWS_AS(layer.check_grid({8}), ValueError);
    CHECK_NOTHROW(layer.check_grid({10}));
    CHECK_THROWS_AS(spectral_conv(layer, GridField(grid1(8), Tensor(Shape{1, 8}))), ValueError);
  }

  TEST_CASE("translation equivariance on periodic grids") {
    Rng rng(15);
    SpectralConv layer("k", 3, 2, {4, 3}, rng);
    Tensor x = oracle::random_tensor({3, 16, 12}, 16);
    for (auto [s1, s2] : {std::pair<std::size_t, std::size_t>{1, 0}, {5, 7}, {15, 11}}) {
      Tensor a = spectral_conv(layer, GridField(grid2(16, 12), roll2(x, s1, s2))).values;
      Tensor b = roll2(spectral_conv(layer, GridField(grid2(16, 12), x)).values, s1, s2);
      CHECK(max_abs_difference(a, b) < 1e-9);
    }
  }

  TEST_CASE("linearity") {
    Rng rng(17);
    SpectralConv layer("k", 2, 2, {3}, rng);
    Tensor x = oracle::random_tensor({2, 24}, 18), y = oracle::random_tensor({2, 24}, 19);
    Tensor z(x.shape());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = 2.5 * x[i] - 0.75 * y[i];
    Tensor fx = spectral_conv(layer, GridField(grid1(24), x)).values;
    Tensor fy = spectral_conv(layer, GridField(grid1(24), y)).values;
    Tensor fz = spectral_conv(layer, GridField(grid1(24), z)).values;
    for (std::size_t i = 0; i < fz.size(); ++i) CHECK(std::abs(fz[i] - (2.5 * fx[i] - 0.75 * fy[i])) < 1e-10);
  }

  TEST_CASE("gradients in 1-D and 2-D") {
    Rng rng(20);
    SpectralConv one("k", 2, 3, {3}, rng);
    auto report = check_block(one, oracle::random_tensor({2, 2, 8}, 21), kTight);
    CHECK_MESSAGE(report.passed, report.summary());
    SpectralConv two("k", 2, 2, {2, 3}, rng);
    report = check_block(two, oracle::random_tensor({1, 2, 8, 8}, 22), kTight);
    CHECK_MESSAGE(report.passed, report.summary());
  }
}

TEST_SUITE("fno block") {
  TEST_CASE("identity configuration returns the input") {
    Rng rng(30);
    FnoBlock block("b", 3, {2, 2}, Activation::identity, rng);
    set_parameters(block, "spectral_real", 0.0);
    set_parameters(block, "spectral_imag", 0.0);
    set_parameters(block, "/bias", 0.0);
    auto& w = block.pointwise_weight().value;
    w.fill(0.0);
    for (std::size_t i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
    Tensor x = oracle::random_tensor({3, 8, 8}, 31);
    CHECK(fno_block(block, GridField(grid2(8, 8), x)).values == x);
  }

  TEST_CASE("zero input with zero bias stays zero under GELU") {
    Rng rng(32);
    FnoBlock block("b", 4, {3}, Activation::gelu, rng);
    set_parameters(block, "/bias", 0.0);
    Tensor res = fno_block(block, GridField(grid1(16), Tensor(Shape{4, 16}))).values;
    for (double x : res.data()) CHECK(x == 0.0);
  }

  TEST_CASE("composite gradient on an 8x8 grid") {
    Rng rng(33);
    FnoBlock block("b", 3, {2, 2}, Activation::gelu, rng);
    auto report = check_block(block, oracle::random_tensor({2, 3, 8, 8}, 34), kBlock);
    CHECK_MESSAGE(report.passed, report.summary());
  }
}

TEST_SUITE("ssm block") {
  TEST_CASE("unit kernel is the identity") {
    Rng rng(40);
    SSMBlock block("m", 2, 4, ScanAxis::flattened(), rng);
    block.kernels().value.fill(0.0);
    block.kernels().value[0] = block.kernels().value[4] = 1.0;
    Tensor x = oracle::random_tensor({2, 5, 3}, 41);
    CHECK(ssm_apply(block, GridField(grid2(5, 3), x)).values == x);
  }

  TEST_CASE("kernel [0, 1] delays by one step") {
    Rng rng(42);
    SSMBlock block("m", 1, 2, ScanAxis::flattened(), rng);
    block.kernels().value = Tensor(Shape{1, 2}, {0.0, 1.0});
    Tensor x = Tensor(Shape{1, 6}, {3, 1, 4, 1, 5, 9});
    Tensor y = ssm_apply(block, GridField(grid1(6), x)).values;
    CHECK(y == Tensor(Shape{1, 6}, {0, 3, 1, 4, 1, 5}));
  }

  TEST_CASE("scan along a chosen axis") {
    Rng rng(43);
    SSMBlock block("m", 1, 2, ScanAxis::along(0), rng);
    block.kernels().value = Tensor(Shape{1, 2}, {0.0, 1.0});
    Tensor x = Tensor(Shape{1, 3, 2}, {1, 2, 3, 4, 5, 6});
    CHECK(ssm_apply(block, GridField(grid2(3, 2), x)).values == Tensor(Shape{1, 3, 2}, {0, 0, 1, 2, 3, 4}));
  }

  TEST_CASE("causality holds for random kernels of every length") {
    for (std::size_t taps = 1; taps <= 12; ++taps) {
      Rng rng(100 + taps);
      SSMBlock block("m", 3, taps, ScanAxis::flattened(), rng);
      Tensor x = oracle::random_tensor({3, 20}, 200 + taps);
      Tensor y = ssm_apply(block, GridField(grid1(20), x)).values;
      const std::size_t t_prime = static_cast<std::size_t>(rng.below(20));
      Tensor xp = x;
      for (std::size_t c = 0; c < 3; ++c) xp[c * 20 + t_prime] += rng.uniform(-5, 5);
      Tensor yp = ssm_apply(block, GridField(grid1(20), xp)).values;
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t t = 0; t < t_prime; ++t) CHECK(yp[c * 20 + t] == y[c * 20 + t]);
      }
    }
  }

  TEST_CASE("kernel length limits") {
    Rng rng(44);
    CHECK_THROWS_AS(SSMBlock("m", 2, SSMBlock::max_kernel_length + 1, ScanAxis::flattened(), rng), ValueError);
    CHECK_THROWS_AS(SSMBlock("m", 2, 0, ScanAxis::flattened(), rng), ValueError);
  }

  TEST_CASE("gradients") {
    Rng rng(45);
    SSMBlock flat("m", 2, 5, ScanAxis::flattened(), rng);
    auto report = check_block(flat, oracle::random_tensor({2, 2, 8, 8}, 46), kTight);
    CHECK_MESSAGE(report.passed, report.summary());
    SSMBlock axis("m", 2, 3, ScanAxis::along(1), rng);
    report = check_block(axis, oracle::random_tensor({1, 2, 4, 6}, 47), kTight);
    CHECK_MESSAGE(report.passed, report.summary());
  }
}

TEST_SUITE("attention") {
  Var run(Tape& t, const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads = 1) {
    return attention(t.constant(q), t.constant(k), t.constant(v), heads);
  }

  TEST_CASE("a single key returns its value row") {
    Tape t;
    Tensor v = Tensor::matrix({{0.25, -1.0, 3.0}});
    Var out = run(t, oracle::random_tensor({4, 2}, 50), oracle::random_tensor({1, 2}, 51), v);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t c = 0; c < 3; ++c) CHECK(out.value()[i * 3 + c] == v[c]);
    }
  }

  TEST_CASE("weight rows sum to one") {
    Tensor w = attention_weights(oracle::random_tensor({3, 7, 4}, 52, 4.0), oracle::random_tensor({3, 9, 4}, 53, 4.0));
    for (std::size_t r = 0; r < 21; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < 9; ++j) s += w[r * 9 + j];
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }

  TEST_CASE("2 queries x 3 keys against direct evaluation") {
    const Tensor q = Tensor::matrix({{0.5, -1.0}, {2.0, 0.25}});
    const Tensor k = Tensor::matrix({{1.0, 0.0}, {-0.5, 1.5}, {0.3, 0.3}});
    const Tensor v = Tensor::matrix({{1.0, 2.0, 3.0}, {-1.0, 0.0, 1.0}, {0.5, 0.5, -2.0}});
    Tape t;
    Var out = run(t, q, k, v);
    for (std::size_t i = 0; i < 2; ++i) {
      double e[3], z = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        e[j] = std::exp((q[i * 2] * k[j * 2] + q[i * 2 + 1] * k[j * 2 + 1]) / std::sqrt(2.0));
        z += e[j];
      }
      for (std::size_t c = 0; c < 3; ++c) {
        double expected = 0.0;
        for (std::size_t j = 0; j < 3; ++j) expected += e[j] / z * v[j * 3 + c];
        CHECK(std::abs(out.value()[i * 3 + c] - expected) < 1e-10);
      }
    }
  }

  TEST_CASE("fused multi-head path matches bmm + softmax composition") {
    const std::size_t heads = 2, d = 4, dv = 6;
    Tensor q = oracle::random_tensor({2, 5, d}, 54), k = oracle::random_tensor({2, 3, d}, 55),
           v = oracle::random_tensor({2, 3, dv}, 56);
    Tape t;
    Tensor fused = run(t, q, k, v, heads).value();
    for (std::size_t h = 0; h < heads; ++h) {
      auto slice = [&](const Tensor& x, std::size_t width) {
        const std::size_t hw = width / heads, rows = x.size() / width;
        Tensor out(Shape{x.extent(0), x.extent(1), hw});
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < hw; ++c) out[r * hw + c] = x[r * width + h * hw + c];
        }
        return out;
      };
      Var qh = t.constant(slice(q, d)), kh = t.constant(slice(k, d)), vh = t.constant(slice(v, dv));
      Var p = softmax(scale(bmm(qh, kh, false, true), 1.0 / std::sqrt(double(d / heads))), 2);
      Tensor ref = bmm(p, vh).value();
      const std::size_t hv = dv / heads;
      for (std::size_t r = 0; r < 10; ++r) {
        for (std::size_t c = 0; c < hv; ++c) CHECK(std::abs(fused[r * dv + h * hv + c] - ref[r * hv + c]) < 1e-13);
      }
    }
  }

  TEST_CASE("width mismatches are rejected") {
    Tape t;
    CHECK_THROWS_AS(run(t, Tensor(Shape{2, 3}), Tensor(Shape{4, 2}), Tensor(Shape{4, 2})), ShapeError);
    CHECK_THROWS_AS(run(t, Tensor(Shape{2, 3}), Tensor(Shape{4, 3}), Tensor(Shape{5, 2})), ShapeError);
    CHECK_THROWS_AS(run(t, Tensor(Shape{2, 3}), Tensor(Shape{4, 3}), Tensor(Shape{4, 2}), 2), ShapeError);
  }

  TEST_CASE("gradients, single and multi-head") {
    for (std::size_t heads : {1u, 2u}) {
      auto report = grad_check(
          [heads](Tape& t, std::span<const Var> x) {
            Var y = attention(x[0], x[1], x[2], heads);
            return sum(mul(y, t.constant(oracle::random_tensor(y.shape(), 57))));
          },
          {oracle::random_tensor({2, 3, 4}, 58), oracle::random_tensor({2, 5, 4}, 59),
           oracle::random_tensor({2, 5, 2}, 60)},
          kTight);
      CHECK_MESSAGE(report.passed, report.summary());
    }
  }
}

TEST_SUITE("perceiver block") {
  PerceiverConfig small_config(std::vector<std::size_t> modes) {
    PerceiverConfig c;
    c.width = 4;
    c.latents = 3;
    c.self_attention_layers = 1;
    c.modes = std::move(modes);
    return c;
  }

  TEST_CASE("token count follows the input grid") {
    Rng rng(70);
    PerceiverBlock block("p", small_config({4, 4}), rng);
    const auto params = block.parameter_count();
    for (std::size_t n : {16u, 32u}) {
      GridField out = perceiver_block(block, GridField(grid2(n, n), oracle::random_tensor({4, n, n}, 71)));
      CHECK(out.values.shape() == Shape{4, n, n});
      CHECK(out.values.all_finite());
    }
    CHECK(block.parameter_count() == params);
  }

  TEST_CASE("parameter count does not depend on the grid") {
    Rng a(72), b(72);
    PerceiverBlock coarse("p", small_config({2, 2}), a);
    PerceiverBlock fine("p", small_config({2, 2}), b);
    perceiver_block(coarse, GridField(grid2(8, 8), oracle::random_tensor({4, 8, 8}, 73)));
    perceiver_block(fine, GridField(grid2(32, 32), oracle::random_tensor({4, 32, 32}, 74)));
    CHECK(coarse.parameter_count() == fine.parameter_count());
  }

  TEST_CASE("pointwise key/value maps make the block permutation-equivariant") {
    Rng rng(75);
    PerceiverConfig c = small_config({});
    c.pointwise_key_value = true;
    PerceiverBlock block("p", c, rng);
    const std::size_t n = 10;
    Tensor x = oracle::random_tensor({4, n}, 76);
    std::vector<std::size_t> perm{3, 7, 0, 9, 1, 4, 8, 2, 6, 5};
    Tensor px(x.shape());
    for (std::size_t ch = 0; ch < 4; ++ch) {
      for (std::size_t i = 0; i < n; ++i) px[ch * n + i] = x[ch * n + perm[i]];
    }
    Tensor y = perceiver_block(block, GridField(grid1(n), x)).values;
    Tensor py = perceiver_block(block, GridField(grid1(n), px)).values;
    for (std::size_t ch = 0; ch < 4; ++ch) {
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(py[ch * n + i] - y[ch * n + perm[i]]) < 1e-12);
    }
  }

  TEST_CASE("gradient through the full block on an 8x8 grid") {
    Rng rng(77);
    PerceiverBlock block("p", small_config({2, 2}), rng);
    auto report = check_block(block, oracle::random_tensor({1, 4, 8, 8}, 78), kBlock);
    CHECK_MESSAGE(report.passed, report.summary());
  }
}
