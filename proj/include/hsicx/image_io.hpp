#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>

#include "hsicx/perturb.hpp"

namespace hsicx {

/// 8-bit PNG to [0,1] floats. Greyscale stays single-channel, everything else
/// becomes RGB; alpha is dropped.
InputTensor read_png(const std::filesystem::path& path);

/// 8-bit PNG from row-major pixels; channels is 1 (grey) or 3 (RGB).
void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height, std::size_t channels,
               std::span<const std::uint8_t> pixels);

/// Writes a [0,1] tensor as 8-bit PNG (values are clamped and rounded).
void write_png(const std::filesystem::path& path, const InputTensor& image);

/// Raw tensor file: 16-byte header {"HSXT", u32 H, u32 W, u32 C} followed by
/// H*W*C little-endian float32 values, row-major with channels fastest.
InputTensor read_raw_tensor(const std::filesystem::path& path);
void write_raw_tensor(const std::filesystem::path& path, const InputTensor& tensor);

/// Dispatches on the extension: ".png" or the raw tensor format.
InputTensor load_input(const std::filesystem::path& path);

}  // namespace hsicx
