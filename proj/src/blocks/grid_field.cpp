#include "neurop/blocks/grid_field.hpp"

#include "neurop/core/error.hpp"

namespace neurop::blocks {

void Grid::validate() const {
  if (extents.empty() || extents.size() > 2) throw ShapeError("grid must be 1D or 2D, got " + to_string(extents));
  if (lengths.size() != extents.size()) throw ShapeError("grid needs one domain length per axis");
  for (double l : lengths) {
    if (!(l > 0.0)) throw ValueError("domain lengths must be positive");
  }
}

GridField::GridField(Grid g, Tensor v) : grid(std::move(g)), values(std::move(v)) {
  grid.validate();
  const Shape& s = values.shape();
  if (s.size() != grid.dims() + 1 || !std::equal(grid.extents.begin(), grid.extents.end(), s.begin() + 1)) {
    throw ShapeError("field values " + to_string(s) + " do not match grid " + to_string(grid.extents));
  }
}

Tensor coordinate_channels(const Grid& grid) {
  grid.validate();
  Shape shape{grid.dims()};
  shape.insert(shape.end(), grid.extents.begin(), grid.extents.end());
  Tensor out(shape);
  const std::size_t points = grid.points();
  for (std::size_t p = 0; p < points; ++p) {
    std::size_t rem = p;
    for (std::size_t d = grid.dims(); d-- > 0;) {
      const std::size_t i = rem % grid.extents[d];
      rem /= grid.extents[d];
      out[d * points + p] = static_cast<double>(i) * grid.lengths[d] / static_cast<double>(grid.extents[d]);
    }
  }
  return out;
}

Tensor with_coordinates(const Tensor& batch, const Grid& grid) {
  const Tensor coords = coordinate_channels(grid);
  const Shape& s = batch.shape();
  if (s.size() != grid.dims() + 2 || !std::equal(grid.extents.begin(), grid.extents.end(), s.begin() + 2)) {
    throw ShapeError("batch " + to_string(s) + " does not match grid " + to_string(grid.extents));
  }
  const std::size_t b = s[0], c = s[1], points = grid.points(), dims = grid.dims();
  Shape out_shape = s;
  out_shape[1] = c + dims;
  Tensor out(out_shape);
  for (std::size_t i = 0; i < b; ++i) {
    double* dst = out.raw() + i * (c + dims) * points;
    std::copy(batch.raw() + i * c * points, batch.raw() + (i + 1) * c * points, dst);
    std::copy(coords.raw(), coords.raw() + dims * points, dst + c * points);
  }
  return out;
}

}  // namespace neurop::blocks
