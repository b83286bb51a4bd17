#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace hsicx {

/// Patch grid laid over the input; cell (gx, gy) has flat index gy * width + gx.
struct Grid {
  std::size_t width = 1;
  std::size_t height = 1;

  std::size_t cells() const noexcept { return width * height; }
  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Parses "WxH", e.g. "7x7".
Grid parse_grid(std::string_view text);
std::string to_string(const Grid& grid);

}  // namespace hsicx
