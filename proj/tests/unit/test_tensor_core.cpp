#include <cmath>
#include <numbers>
#include <string>

#include "doctest.h"
#include "neurop/core/error.hpp"
#include "neurop/core/fft.hpp"
#include "neurop/core/grad_check.hpp"
#include "neurop/core/ops.hpp"
#include "oracles.hpp"

using namespace neurop;

TEST_SUITE("elementwise") {
  TEST_CASE("add and relu") {
    Tape tape;
    Var a = tape.constant(Tensor::vector({1, 2}));
    Var b = tape.constant(Tensor::vector({3, 4}));
    CHECK(add(a, b).value() == Tensor::vector({4, 6}));
    CHECK(relu(tape.constant(Tensor::vector({-1, 0, 2}))).value() == Tensor::vector({0, 0, 2}));
  }

  TEST_CASE("scalar broadcast") {
    Tape tape;
    Var a = tape.constant(Tensor::vector({1, 2, 3}));
    Var s = tape.constant(Tensor::scalar(2));
    CHECK(mul(a, s).value() == Tensor::vector({2, 4, 6}));
    CHECK(sub(s, a).value() == Tensor::vector({1, 0, -1}));
  }

  TEST_CASE("shape mismatch names both shapes") {
    Tape tape;
    Var a = tape.constant(Tensor(Shape{2, 3}));
    Var b = tape.constant(Tensor(Shape{3, 2}));
    try {
      add(a, b);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("(2, 3)") != std::string::npos);
      CHECK(msg.find("(3, 2)") != std::string::npos);
    }
  }

  TEST_CASE("gelu derivative at 0.5 against a central difference") {
    const double h = 1e-5;
    const double numeric = (gelu(0.5 + h) - gelu(0.5 - h)) / (2 * h);
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(0.5), true);
    tape.backward(gelu(x));
    const double analytic = tape.gradient(x).item();
    CHECK(std::abs(analytic - numeric) / std::abs(numeric) < 1e-6);
  }
}

TEST_SUITE("matmul") {
  TEST_CASE("identity and hand product") {
    Tape tape;
    Tensor x = oracle::random_tensor({3, 4}, 1);
    Var eye = tape.constant(Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
    CHECK(matmul(eye, tape.constant(x)).value() == x);
    Var a = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
    Var b = tape.constant(Tensor::matrix({{5}, {6}}));
    CHECK(matmul(a, b).value() == Tensor::matrix({{17}, {39}}));
    CHECK_THROWS_AS(matmul(a, tape.constant(Tensor(Shape{3, 1}))), ShapeError);
  }

  TEST_CASE("random 4x4 gradient") {
    auto report = grad_check(
        [](Tape&, std::span<const Var> v) {
          Var c = matmul(v[0], v[1]);
          return sum(mul(c, c));
        },
        {oracle::random_tensor({4, 4}, 2), oracle::random_tensor({4, 4}, 3)}, {.tolerance = 1e-6});
    CHECK_MESSAGE(report.passed, report.summary());
  }
}

TEST_SUITE("reduce") {
  TEST_CASE("sum mean max min") {
    CHECK(reduce(ReduceOp::sum, Tensor::vector({1, 2, 3})).item() == 6.0);
    CHECK(reduce(ReduceOp::mean, Tensor(Shape{4, 5}, 2.5)).item() == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(max_value(Tensor::vector({0.1, 0.9, 0.4})) == 0.9);
    CHECK(min_value(Tensor::vector({0.1, 0.9, 0.4})) == 0.1);
    const std::size_t axis[] = {1};
    CHECK(reduce(ReduceOp::sum, Tensor::matrix({{1, 2}, {3, 4}}), axis) == Tensor::vector({3, 7}));
  }

  TEST_CASE("empty tensor and bad axis are rejected") {
    CHECK_THROWS_AS(reduce(ReduceOp::sum, Tensor{}), ShapeError);
    const std::size_t axis[] = {2};
    CHECK_THROWS_AS(reduce(ReduceOp::sum, Tensor(Shape{2, 2}), axis), ShapeError);
  }
}

TEST_SUITE("softmax") {
  TEST_CASE("symmetry, shift invariance and reference values") {
    auto p = softmax(Tensor::vector({0, 0}), 0);
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);

    Tensor v = oracle::random_tensor({7}, 4, 3.0);
    Tensor shifted = v;
    for (auto& x : shifted.data()) x += 123.25;
    CHECK(max_abs_difference(softmax(v, 0), softmax(shifted, 0)) < 1e-14);

    // Direct evaluation: e^k / (e + e² + e³).
    auto q = softmax(Tensor::vector({1, 2, 3}), 0);
    CHECK(q[0] == doctest::Approx(0.09003).epsilon(1e-4));
    CHECK(std::abs(q[0] - 0.0900306) < 1e-5);
    CHECK(std::abs(q[1] - 0.2447285) < 1e-5);
    CHECK(std::abs(q[2] - 0.6652410) < 1e-5);
  }

  TEST_CASE("large logits stay finite") {
    auto p = softmax(Tensor::vector({1000, 1001}), 0);
    CHECK(p.all_finite());
  }
}

TEST_SUITE("fft") {
  TEST_CASE("constant field has only the zero mode") {
    const double c = 1.75;
    auto spec = fft::rfft(Tensor(Shape{16}, c), 1);
    CHECK(spec.real[0] == doctest::Approx(c * 16));
    for (std::size_t k = 1; k < 9; ++k) {
      CHECK(std::abs(spec.real[k]) < 1e-12);
      CHECK(std::abs(spec.imag[k]) < 1e-12);
    }
  }

  TEST_CASE("cos(2πx) on 16 points matches direct summation") {
    Tensor x(Shape{16});
    std::vector<double> raw(16);
    for (std::size_t n = 0; n < 16; ++n) raw[n] = x[n] = std::cos(2 * std::numbers::pi * n / 16.0);
    auto spec = fft::rfft(x, 1);
    auto ref = oracle::dft2(raw, 1, 16);
    for (std::size_t k = 0; k < 9; ++k) {
      CHECK(std::abs(spec.real[k] - ref[k].real()) < 1e-12);
      CHECK(std::abs(spec.imag[k] - ref[k].imag()) < 1e-12);
    }
    CHECK(std::abs(ref[1].real() - 8.0) < 1e-12);
    CHECK(std::abs(spec.real[1] - 8.0) < 1e-12);
  }

  TEST_CASE("2-D transform and non-power-of-two lengths match direct summation") {
    for (auto [n1, n2] : {std::pair<std::size_t, std::size_t>{4, 8}, {6, 5}, {3, 12}}) {
      Tensor x = oracle::random_tensor({n1, n2}, 10 + n1);
      std::vector<double> raw(x.data().begin(), x.data().end());
      auto ref = oracle::dft2(raw, n1, n2);
      auto spec = fft::rfft(x, 2);
      const std::size_t h = n2 / 2 + 1;
      for (std::size_t a = 0; a < n1; ++a) {
        for (std::size_t k = 0; k < h; ++k) {
          CHECK(std::abs(spec.real[a * h + k] - ref[a * n2 + k].real()) < 1e-10);
          CHECK(std::abs(spec.imag[a * h + k] - ref[a * n2 + k].imag()) < 1e-10);
        }
      }
      CHECK(max_abs_difference(fft::irfft(spec, {n1, n2}), x) < 1e-12);
    }
  }

  TEST_CASE("round trip on a random 32x32 field") {
    Tensor x = oracle::random_tensor({32, 32}, 5);
    CHECK(max_abs_difference(fft::irfft(fft::rfft(x, 2), {32, 32}), x) < 1e-10);
  }

  TEST_CASE("batched leading axes") {
    Tensor x = oracle::random_tensor({3, 2, 8, 8}, 6);
    auto spec = fft::rfft(x, 2);
    CHECK(spec.shape() == Shape{3, 2, 8, 5});
    CHECK(max_abs_difference(fft::irfft(spec, {8, 8}), x) < 1e-12);
  }

  TEST_CASE("linearity") {
    Tensor x = oracle::random_tensor({16, 16}, 7), y = oracle::random_tensor({16, 16}, 8);
    const double alpha = 0.7, beta = -1.3;
    Tensor z(x.shape());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = alpha * x[i] + beta * y[i];
    auto fx = fft::rfft(x, 2), fy = fft::rfft(y, 2), fz = fft::rfft(z, 2);
    for (std::size_t i = 0; i < fz.real.size(); ++i) {
      CHECK(std::abs(fz.real[i] - (alpha * fx.real[i] + beta * fy.real[i])) < 1e-10);
      CHECK(std::abs(fz.imag[i] - (alpha * fx.imag[i] + beta * fy.imag[i])) < 1e-10);
    }
  }

  TEST_CASE("Parseval on random fields") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
      const Shape shape = seed == 11 ? Shape{64} : Shape{16, 10};
      Tensor x = oracle::random_tensor(shape, seed);
      auto spec = fft::rfft(x, shape.size());
      fft::SpectralPlan plan(shape);
      double energy = 0.0, spectral = 0.0;
      for (double v : x.data()) energy += v * v;
      const std::size_t h = plan.half_shape().back();
      for (std::size_t i = 0; i < spec.real.size(); ++i) {
        spectral += plan.weight(i % h) * (spec.real[i] * spec.real[i] + spec.imag[i] * spec.imag[i]);
      }
      spectral /= static_cast<double>(plan.spatial_size());
      CHECK(std::abs(energy - spectral) / energy < 1e-8);
    }
  }

  TEST_CASE("irfft rejects a mismatched spatial shape") {
    auto spec = fft::rfft(oracle::random_tensor({8}, 9), 1);
    CHECK_THROWS_AS(fft::irfft(spec, {10}), ShapeError);
  }
}

TEST_SUITE("backward") {
  TEST_CASE("x squared") {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(3), true);
    tape.backward(mul(x, x));
    CHECK(tape.gradient(x).item() == 6.0);
  }

  TEST_CASE("product plus sum rule") {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(2), true);
    Var y = tape.leaf(Tensor::scalar(-5), true);
    tape.backward(add(mul(x, y), x));
    CHECK(tape.gradient(x).item() == -4.0);
    CHECK(tape.gradient(y).item() == 2.0);
  }

  TEST_CASE("non-scalar loss and repeated backward are rejected") {
    Tape tape;
    Var x = tape.leaf(Tensor::vector({1, 2}), true);
    CHECK_THROWS_AS(tape.backward(scale(x, 2.0)), ShapeError);
    Var l = sum(x);
    tape.backward(l);
    CHECK_THROWS_AS(tape.backward(l), TapeError);
    CHECK_THROWS_AS(tape.leaf(Tensor::scalar(1), true), TapeError);
  }

  TEST_CASE("tape order is topological and every reachable leaf has a gradient") {
    Tape tape;
    Var x = tape.leaf(oracle::random_tensor({3, 2}, 1), true);
    Var unused = tape.leaf(oracle::random_tensor({4}, 2), true);
    Var loss = sum(gelu(matmul(x, tape.constant(oracle::random_tensor({2, 2}, 3)))));
    for (std::size_t id = 0; id < tape.size(); ++id) {
      for (auto p : tape.parents(id)) CHECK(p < id);
    }
    tape.backward(loss);
    CHECK(tape.gradient(x).shape() == x.shape());
    CHECK(tape.gradient(unused) == Tensor(Shape{4}, 0.0));
  }
}

TEST_SUITE("grad_check") {
  TEST_CASE("linear function is exact to rounding") {
    Tensor w = oracle::random_tensor({5}, 21);
    auto report = grad_check([&w](Tape& t, const Var& x) { return sum(mul(x, t.constant(w))); },
                             oracle::random_tensor({5}, 22));
    CHECK(report.passed);
    CHECK(report.max_error < 1e-9);
  }

  TEST_CASE("softmax cross-entropy composite") {
    Tensor target(Shape{3, 4}, 0.0);
    target[1] = target[6] = target[11] = 1.0;
    auto report = grad_check(
        [&target](Tape& t, const Var& logits) {
          return scale(sum(mul(t.constant(target), log(softmax(logits, 1)))), -1.0);
        },
        oracle::random_tensor({3, 4}, 23));
    CHECK_MESSAGE(report.passed, report.summary());
  }

  TEST_CASE("corrupted backward rule is caught") {
    auto broken_square = [](const Var& x) {
      Tensor out = x.value();
      for (auto& v : out.data()) v = v * v;
      return x.tape().record("broken_square", std::move(out), {x},
                             [xv = x.value()](const Tensor& g, std::span<Tensor* const> pg) {
                               for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += 2.2 * xv[i] * g[i];
                             });
    };
    auto report = grad_check([&](Tape&, const Var& x) { return sum(broken_square(x)); }, oracle::random_tensor({4}, 24));
    CHECK_FALSE(report.passed);
  }
}

TEST_SUITE("primitive gradients") {
  // Each primitive is checked on three random shapes and reduced to a scalar
  // through a fixed random weighting so every output coordinate matters.
  Var weighted_sum(Tape& t, const Var& y, std::uint64_t seed) {
    return sum(mul(y, t.constant(oracle::random_tensor(y.shape(), seed))));
  }

  void check_unary(const char* name, const std::function<Var(const Var&)>& op, const std::vector<Shape>& shapes) {
    std::uint64_t seed = 100;
    for (const auto& s : shapes) {
      auto report = grad_check([&](Tape& t, const Var& x) { return weighted_sum(t, op(x), seed + 1); },
                               oracle::random_tensor(s, seed));
      CHECK_MESSAGE(report.passed, name << " " << to_string(s) << ": " << report.summary());
      seed += 7;
    }
  }

  void check_binary(const char* name, const std::function<Var(const Var&, const Var&)>& op,
                    const std::vector<std::pair<Shape, Shape>>& shapes) {
    std::uint64_t seed = 200;
    for (const auto& [sa, sb] : shapes) {
      auto report = grad_check(
          [&](Tape& t, std::span<const Var> v) { return weighted_sum(t, op(v[0], v[1]), seed + 2); },
          {oracle::random_tensor(sa, seed), oracle::random_tensor(sb, seed + 1)});
      CHECK_MESSAGE(report.passed, name << " " << to_string(sa) << "," << to_string(sb) << ": " << report.summary());
      seed += 7;
    }
  }

  const std::vector<Shape> kShapes{{5}, {3, 4}, {2, 3, 4}};

  TEST_CASE("elementwise family") {
    check_binary("add", [](const Var& a, const Var& b) { return add(a, b); }, {{{5}, {5}}, {{3, 4}, {3, 4}}, {{2, 3}, {1}}});
    check_binary("sub", [](const Var& a, const Var& b) { return sub(a, b); }, {{{5}, {5}}, {{1}, {3, 4}}, {{2, 3}, {1}}});
    check_binary("mul", [](const Var& a, const Var& b) { return mul(a, b); }, {{{5}, {5}}, {{1}, {3, 4}}, {{2, 3}, {1}}});
    check_unary("scale", [](const Var& a) { return scale(a, -1.7); }, kShapes);
    check_unary("gelu", [](const Var& a) { return gelu(a); }, kShapes);
    // Away from the kink at zero.
    check_unary("relu", [](const Var& a) { return relu(add(a, a.tape().constant(Tensor::scalar(1.5)))); }, kShapes);
  }

  TEST_CASE("products") {
    check_binary("matmul", [](const Var& a, const Var& b) { return matmul(a, b); },
                 {{{2, 3}, {3, 4}}, {{1, 5}, {5, 1}}, {{4, 4}, {4, 2}}});
    for (bool ta : {false, true}) {
      for (bool tb : {false, true}) {
        const Shape sa = ta ? Shape{2, 3, 4} : Shape{2, 4, 3};
        const Shape sb = tb ? Shape{2, 5, 3} : Shape{2, 3, 5};
        check_binary("bmm", [ta, tb](const Var& a, const Var& b) { return bmm(a, b, ta, tb); },
                     {{sa, sb}, {{1, ta ? 2u : 3u, ta ? 3u : 2u}, {1, tb ? 4u : 2u, tb ? 2u : 4u}}, {sa, sb}});
      }
    }
    check_binary("channel_linear", [](const Var& x, const Var& w) { return channel_linear(x, w, std::nullopt); },
                 {{{2, 3, 5}, {4, 3}}, {{1, 2, 3, 3}, {2, 2}}, {{3, 1, 4}, {2, 1}}});
    check_binary("token_linear", [](const Var& x, const Var& w) { return token_linear(x, w, std::nullopt); },
                 {{{2, 3, 5}, {5, 4}}, {{4, 3}, {3, 3}}, {{1, 2, 2}, {2, 6}}});
  }

  TEST_CASE("biases") {
    auto report = grad_check(
        [](Tape& t, std::span<const Var> v) { return weighted_sum(t, channel_linear(v[0], v[1], v[2]), 5); },
        {oracle::random_tensor({2, 3, 4}, 1), oracle::random_tensor({2, 3}, 2), oracle::random_tensor({2}, 3)});
    CHECK_MESSAGE(report.passed, report.summary());
    report = grad_check(
        [](Tape& t, std::span<const Var> v) { return weighted_sum(t, token_linear(v[0], v[1], v[2]), 6); },
        {oracle::random_tensor({2, 3, 4}, 4), oracle::random_tensor({4, 2}, 5), oracle::random_tensor({2}, 6)});
    CHECK_MESSAGE(report.passed, report.summary());
  }

  TEST_CASE("layout ops and reductions") {
    check_unary("transpose_last2", [](const Var& a) { return transpose_last2(a); }, {{3, 4}, {2, 3, 4}, {1, 5, 2}});
    check_unary("reshape", [](const Var& a) { return reshape(a, {a.value().size()}); }, kShapes);
    check_unary("broadcast_batch", [](const Var& a) { return broadcast_batch(a, 3); }, kShapes);
    check_unary("sum_axis", [](const Var& a) {
      const std::size_t ax[] = {0};
      return sum(a, ax);
    }, kShapes);
    check_unary("mean", [](const Var& a) { return mean(a); }, kShapes);
    check_unary("softmax", [](const Var& a) { return softmax(a, a.value().rank() - 1); }, kShapes);
    check_unary("softmax_axis0", [](const Var& a) { return softmax(a, 0); }, kShapes);
    check_binary("concat", [](const Var& a, const Var& b) { return concat_channels(a, b); },
                 {{{2, 1, 3}, {2, 2, 3}}, {{1, 2, 2, 2}, {1, 1, 2, 2}}, {{3, 2, 4}, {3, 2, 4}}});
  }

  TEST_CASE("rfft and irfft") {
    for (const Shape& s : {Shape{2, 8}, Shape{1, 6, 4}, Shape{2, 5}}) {
      const std::size_t rank = s.size() == 3 ? 2 : 1;
      auto report = grad_check(
          [rank](Tape& t, const Var& x) {
            ComplexVar c = rfft(x, rank);
            return add(weighted_sum(t, c.real, 31), weighted_sum(t, c.imag, 32));
          },
          oracle::random_tensor(s, 33));
      CHECK_MESSAGE(report.passed, "rfft " << to_string(s) << ": " << report.summary());

      const Shape spatial(s.end() - static_cast<std::ptrdiff_t>(rank), s.end());
      Shape half = s;
      half.back() = s.back() / 2 + 1;
      auto report_inv = grad_check(
          [&](Tape& t, std::span<const Var> v) { return weighted_sum(t, irfft(ComplexVar{v[0], v[1]}, spatial), 34); },
          {oracle::random_tensor(half, 35), oracle::random_tensor(half, 36)});
      CHECK_MESSAGE(report_inv.passed, "irfft " << to_string(s) << ": " << report_inv.summary());
    }
  }
}

TEST_CASE("identical inputs give bit-identical outputs") {
  auto run = [] {
    Tape tape;
    Var x = tape.leaf(oracle::random_tensor({2, 4, 16}, 77), true);
    Var w = tape.leaf(oracle::random_tensor({4, 4}, 78), true);
    ComplexVar c = rfft(gelu(channel_linear(x, w, std::nullopt)), 1);
    Var loss = sum(mul(irfft(c, {16}), x));
    tape.backward(loss);
    return std::pair{loss.value(), tape.gradient(w)};
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}
