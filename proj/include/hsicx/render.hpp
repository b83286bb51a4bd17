#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hsicx/grid.hpp"

namespace hsicx {

using Rgb = std::array<std::uint8_t, 3>;

/// 256-entry viridis table.
const std::array<Rgb, 256>& viridis();

/// Scores upsampled (nearest) to width x height, negatives clamped to 0 and
/// min-max normalized to [0, 1]. All-equal scores map to 0.
std::vector<double> heatmap_intensity(std::span<const double> scores, const Grid& grid, std::size_t width,
                                      std::size_t height);

/// 8-bit heatmap pixels: greyscale (1 channel) or viridis (3 channels).
std::vector<std::uint8_t> render_heatmap(std::span<const double> scores, const Grid& grid, std::size_t width,
                                         std::size_t height, bool color = true);

void write_heatmap_png(const std::filesystem::path& path, std::span<const double> scores, const Grid& grid,
                       std::size_t width, std::size_t height, bool color = true);

struct PlotSeries {
  std::vector<double> x;
  std::vector<double> y;
  Rgb color{0, 0, 0};
};

/// Plain RGB line plot on a white canvas with a grey frame; axes fit the data.
std::vector<std::uint8_t> render_line_plot(const std::vector<PlotSeries>& series, std::size_t width,
                                           std::size_t height);

void write_line_plot_png(const std::filesystem::path& path, const std::vector<PlotSeries>& series,
                         std::size_t width = 480, std::size_t height = 320);

}  // namespace hsicx
