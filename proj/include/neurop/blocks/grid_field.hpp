#pragma once

#include <cstddef>
#include <vector>

#include "neurop/core/tensor.hpp"

namespace neurop::blocks {

/// Uniform periodic grid. Point i on an axis of length L with N points sits
/// at x = i·L/N.
struct Grid {
  Shape extents;
  std::vector<double> lengths;

  std::size_t dims() const noexcept { return extents.size(); }
  std::size_t points() const noexcept { return numel(extents); }
  void validate() const;
};

/// Scalar fields on one grid; values has shape (channels, *extents).
struct GridField {
  Grid grid;
  Tensor values;

  GridField() = default;
  GridField(Grid grid, Tensor values);

  std::size_t channels() const { return values.extent(0); }
};

/// Coordinates as fields: shape (dims, *extents), channel d holding the
/// d-th coordinate of every point.
Tensor coordinate_channels(const Grid& grid);

/// Append coordinate channels to a batch of fields shaped (B, C, *extents).
Tensor with_coordinates(const Tensor& batch, const Grid& grid);

}  // namespace neurop::blocks
