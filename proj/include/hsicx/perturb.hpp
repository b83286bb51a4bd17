#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hsicx/batch.hpp"
#include "hsicx/design.hpp"
#include "hsicx/grid.hpp"

namespace hsicx {

/// H x W x C image with values in [0, 1], row-major with channels fastest.
struct InputTensor {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> data;

  InputTensor() = default;
  InputTensor(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), data(h * w * c, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) { return data[(y * width + x) * channels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return data[(y * width + x) * channels + c]; }
  Shape shape() const noexcept { return {height, width, channels}; }

  friend bool operator==(const InputTensor&, const InputTensor&) = default;
};

/// Throws unless channels is 1 or 3, the payload matches the shape and all values are finite.
void validate(const InputTensor& x);

/// Inpainting baseline mu: one value for all channels or one per channel.
struct Baseline {
  std::vector<double> values{0.0};

  double channel(std::size_t c) const { return values.size() == 1 ? values[0] : values.at(c); }
};

/// Parses "0.5" or "0.485,0.456,0.406".
Baseline parse_baseline(std::string_view text);

enum class Upsampling { Nearest, Bilinear };

Upsampling parse_upsampling(std::string_view name);
std::string to_string(Upsampling mode);

struct PerturbConfig {
  Grid grid;
  Baseline baseline;
  Upsampling upsampling = Upsampling::Nearest;
};

/// Per-pixel mask, row-major, values in [0, 1].
struct PixelMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

/// Resizes a d-entry cell mask to out_w x out_h pixels. Nearest maps pixel x to
/// cell floor(x * gridW / out_w), so leftover pixels of a non-divisible grid
/// land in the last cells. Bilinear interpolates between cell centres.
PixelMask upsample_mask(std::span<const double> mask, const PerturbConfig& config, std::size_t out_w,
                        std::size_t out_h);

/// x * m + (1 - m) * mu, with the mask broadcast over channels.
InputTensor inpaint(const InputTensor& x, const PixelMask& mask, const Baseline& mu);

/// Grid cell holding pixel (x, y) under the nearest mapping.
std::size_t cell_of(const Grid& grid, std::size_t x, std::size_t y, std::size_t width, std::size_t height);

/// Mean intensity of each cell over its pixels and channels.
std::vector<double> cell_means(std::span<const double> pixels, const Shape& shape, const Grid& grid);

/// Where masks are applied. Image spaces inpaint a concrete input; cell spaces
/// feed the masks straight to the model, which amounts to an all-ones input of
/// d cells: row_i = m_i + (1 - m_i) * mu.
class PerturbationSpace {
 public:
  static PerturbationSpace cells(Grid grid, Baseline baseline = {});
  static PerturbationSpace image(InputTensor input, PerturbConfig config);

  const Grid& grid() const noexcept { return config_.grid; }
  std::size_t cell_count() const noexcept { return config_.grid.cells(); }
  bool is_image() const noexcept { return is_image_; }
  const InputTensor& input() const noexcept { return input_; }
  const PerturbConfig& config() const noexcept { return config_; }

  /// Model inputs for `count` binary cell masks stored row-major in `masks`.
  InputBatch build(std::span<const std::uint8_t> masks, std::size_t count) const;
  InputBatch build(const MaskDesign& design) const;

 private:
  PerturbationSpace() = default;

  bool is_image_ = false;
  InputTensor input_;
  PerturbConfig config_;
};

}  // namespace hsicx
