#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace neurop {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Tensors are plain values. Gradients live on the Tape, not here; the
/// requires_grad flag only sets the default when a tensor is registered as a
/// tape leaf.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* raw() noexcept { return data_.data(); }
  const double* raw() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Value of a single-element tensor.
  double item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  Tensor& set_requires_grad(bool flag) noexcept {
    requires_grad_ = flag;
    return *this;
  }

  /// Copy with a new shape of equal element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;

  void fill(double value) noexcept;
  Tensor& operator+=(const Tensor& other);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
};

/// Half-spectrum complex coefficients, stored as two real tensors.
struct ComplexTensor {
  Tensor real;
  Tensor imag;

  const Shape& shape() const noexcept { return real.shape(); }
};

enum class ReduceOp { sum, mean, max, min };

/// Reduction over the given axes (all axes when empty). Reduced axes are
/// removed from the result shape; a full reduction yields a scalar.
Tensor reduce(ReduceOp op, const Tensor& a, std::span<const std::size_t> axes = {});

double max_value(const Tensor& a);
double min_value(const Tensor& a);
double max_abs_difference(const Tensor& a, const Tensor& b);

/// Keeps freed tensor storage in the process heap instead of handing large
/// blocks back to the OS, so training steps do not page-fault on every
/// temporary. No-op outside glibc.
void retain_heap_memory();

}  // namespace neurop
