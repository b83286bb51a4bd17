#include "hsicx/perturb.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <tuple>

#include "hsicx/error.hpp"

namespace hsicx {

void validate(const InputTensor& x) {
  if (x.channels != 1 && x.channels != 3) throw InvalidArgument("input must have 1 or 3 channels");
  if (x.height == 0 || x.width == 0) throw InvalidArgument("input must not be empty");
  if (x.data.size() != x.height * x.width * x.channels) throw InvalidArgument("input payload does not match its shape");
  for (double v : x.data) {
    if (!std::isfinite(v)) throw InvalidArgument("input contains NaN or Inf");
  }
}

Baseline parse_baseline(std::string_view text) {
  Baseline out;
  out.values.clear();
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto token = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(v)) {
      throw InvalidArgument("cannot parse baseline '" + std::string(text) + "'");
    }
    out.values.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.values.size() != 1 && out.values.size() != 3) {
    throw InvalidArgument("baseline needs 1 or 3 values");
  }
  return out;
}

Upsampling parse_upsampling(std::string_view name) {
  if (name == "nearest") return Upsampling::Nearest;
  if (name == "bilinear") return Upsampling::Bilinear;
  throw InvalidArgument("unknown upsampling '" + std::string(name) + "'");
}

std::string to_string(Upsampling mode) { return mode == Upsampling::Nearest ? "nearest" : "bilinear"; }

std::size_t cell_of(const Grid& grid, std::size_t x, std::size_t y, std::size_t width, std::size_t height) {
  const std::size_t gx = x * grid.width / width;
  const std::size_t gy = y * grid.height / height;
  return gy * grid.width + gx;
}

PixelMask upsample_mask(std::span<const double> mask, const PerturbConfig& config, std::size_t out_w,
                        std::size_t out_h) {
  const Grid& grid = config.grid;
  if (mask.size() != grid.cells()) {
    throw InvalidArgument("mask has " + std::to_string(mask.size()) + " entries, grid " + to_string(grid) +
                          " needs " + std::to_string(grid.cells()));
  }
  if (out_w == 0 || out_h == 0) throw InvalidArgument("output size must be positive");
  PixelMask out{out_h, out_w, std::vector<double>(out_w * out_h)};
  if (config.upsampling == Upsampling::Nearest) {
    for (std::size_t y = 0; y < out_h; ++y) {
      for (std::size_t x = 0; x < out_w; ++x) out.values[y * out_w + x] = mask[cell_of(grid, x, y, out_w, out_h)];
    }
    return out;
  }
  auto axis = [](std::size_t pixel, std::size_t cells, std::size_t pixels) {
    double g = (static_cast<double>(pixel) + 0.5) * static_cast<double>(cells) / static_cast<double>(pixels) - 0.5;
    g = std::clamp(g, 0.0, static_cast<double>(cells - 1));
    const auto lo = static_cast<std::size_t>(std::floor(g));
    const auto hi = std::min(lo + 1, cells - 1);
    return std::tuple{lo, hi, g - static_cast<double>(lo)};
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto [y0, y1, fy] = axis(y, grid.height, out_h);
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto [x0, x1, fx] = axis(x, grid.width, out_w);
      const double top = mask[y0 * grid.width + x0] * (1.0 - fx) + mask[y0 * grid.width + x1] * fx;
      const double bottom = mask[y1 * grid.width + x0] * (1.0 - fx) + mask[y1 * grid.width + x1] * fx;
      out.values[y * out_w + x] = std::clamp(top * (1.0 - fy) + bottom * fy, 0.0, 1.0);
    }
  }
  return out;
}

InputTensor inpaint(const InputTensor& x, const PixelMask& mask, const Baseline& mu) {
  if (mask.height != x.height || mask.width != x.width) {
    throw InvalidArgument("pixel mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                          ", input is " + std::to_string(x.width) + "x" + std::to_string(x.height));
  }
  if (mu.values.size() != 1 && mu.values.size() != x.channels) {
    throw InvalidArgument("baseline has " + std::to_string(mu.values.size()) + " values for " +
                          std::to_string(x.channels) + " channels");
  }
  InputTensor out(x.height, x.width, x.channels);
  for (std::size_t y = 0; y < x.height; ++y) {
    for (std::size_t px = 0; px < x.width; ++px) {
      const double m = mask.at(y, px);
      for (std::size_t c = 0; c < x.channels; ++c) {
        out.at(y, px, c) = x.at(y, px, c) * m + (1.0 - m) * mu.channel(c);
      }
    }
  }
  return out;
}

std::vector<double> cell_means(std::span<const double> pixels, const Shape& shape, const Grid& grid) {
  if (pixels.size() != shape.size()) throw InvalidArgument("image payload does not match its shape");
  if (shape.width < grid.width || shape.height < grid.height) {
    throw InvalidArgument("image " + std::to_string(shape.width) + "x" + std::to_string(shape.height) +
                          " is smaller than grid " + to_string(grid));
  }
  std::vector<double> sums(grid.cells(), 0.0);
  std::vector<std::size_t> counts(grid.cells(), 0);
  for (std::size_t y = 0; y < shape.height; ++y) {
    for (std::size_t x = 0; x < shape.width; ++x) {
      const auto cell = cell_of(grid, x, y, shape.width, shape.height);
      for (std::size_t c = 0; c < shape.channels; ++c) sums[cell] += pixels[(y * shape.width + x) * shape.channels + c];
      counts[cell] += shape.channels;
    }
  }
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i] /= static_cast<double>(counts[i]);
  return sums;
}

PerturbationSpace PerturbationSpace::cells(Grid grid, Baseline baseline) {
  if (grid.cells() == 0) throw InvalidArgument("grid must have at least one cell");
  if (baseline.values.size() != 1) throw InvalidArgument("cell-space perturbation takes a scalar baseline");
  PerturbationSpace space;
  space.config_ = PerturbConfig{grid, std::move(baseline), Upsampling::Nearest};
  return space;
}

PerturbationSpace PerturbationSpace::image(InputTensor input, PerturbConfig config) {
  validate(input);
  if (config.grid.cells() == 0) throw InvalidArgument("grid must have at least one cell");
  if (input.width < config.grid.width || input.height < config.grid.height) {
    throw InvalidArgument("grid " + to_string(config.grid) + " is finer than the input image");
  }
  if (config.baseline.values.size() != 1 && config.baseline.values.size() != input.channels) {
    throw InvalidArgument("baseline does not match the input channel count");
  }
  PerturbationSpace space;
  space.is_image_ = true;
  space.input_ = std::move(input);
  space.config_ = std::move(config);
  return space;
}

InputBatch PerturbationSpace::build(std::span<const std::uint8_t> masks, std::size_t count) const {
  const std::size_t d = cell_count();
  if (masks.size() != count * d) throw InvalidArgument("mask block does not hold count x d entries");
  InputBatch batch;
  batch.rows.reserve(count);
  std::vector<double> cell_mask(d);
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t i = 0; i < d; ++i) cell_mask[i] = masks[r * d + i] ? 1.0 : 0.0;
    if (!is_image_) {
      const double mu = config_.baseline.values[0];
      std::vector<double> row(d);
      for (std::size_t i = 0; i < d; ++i) row[i] = cell_mask[i] + (1.0 - cell_mask[i]) * mu;
      batch.rows.push_back(std::move(row));
      continue;
    }
    const auto pixel_mask = upsample_mask(cell_mask, config_, input_.width, input_.height);
    batch.rows.push_back(inpaint(input_, pixel_mask, config_.baseline).data);
  }
  if (is_image_) batch.shape = input_.shape();
  return batch;
}

InputBatch PerturbationSpace::build(const MaskDesign& design) const {
  if (design.patches() != cell_count()) {
    throw InvalidArgument("design has d=" + std::to_string(design.patches()) + " but grid " + to_string(grid()) +
                          " has " + std::to_string(cell_count()) + " cells");
  }
  return build(design.bits(), design.samples());
}

}  // namespace hsicx
