#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace hsicx {

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const noexcept { return height * width * channels; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// A batch of model inputs sharing one layout. With a shape, each row is a
/// flattened H x W x C image (row-major, channels fastest); without one, each
/// row is a d-entry cell mask.
struct InputBatch {
  std::vector<std::vector<double>> rows;
  std::optional<Shape> shape;

  std::size_t size() const noexcept { return rows.size(); }
};

}  // namespace hsicx
