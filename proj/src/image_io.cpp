#include "hsicx/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "hsicx/error.hpp"

namespace hsicx {

InputTensor read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError(path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t channels = color ? 3 : 1;
  std::vector<png_byte> raw(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw IoError(path.string() + ": " + message);
  }
  InputTensor out(image.height, image.width, channels);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = raw[i] / 255.0;
  return out;
}

void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height, std::size_t channels,
               std::span<const std::uint8_t> pixels) {
  if (channels != 1 && channels != 3) throw InvalidArgument("PNG output needs 1 or 3 channels");
  if (pixels.size() != width * height * channels) throw InvalidArgument("PNG pixel buffer does not match its size");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + image.message);
  }
}

void write_png(const std::filesystem::path& path, const InputTensor& image) {
  std::vector<std::uint8_t> bytes(image.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
  }
  write_png(path, image.width, image.height, image.channels, bytes);
}

namespace {

constexpr std::array<char, 4> kTensorMagic{'H', 'S', 'X', 'T'};

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void write_u32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

}  // namespace

InputTensor read_raw_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<std::uint8_t, 16> header{};
  if (!in.read(reinterpret_cast<char*>(header.data()), header.size()) ||
      !std::equal(kTensorMagic.begin(), kTensorMagic.end(), header.begin())) {
    throw IoError(path.string() + " is not a raw tensor file");
  }
  const std::size_t h = read_u32(header.data() + 4);
  const std::size_t w = read_u32(header.data() + 8);
  const std::size_t c = read_u32(header.data() + 12);
  if (h == 0 || w == 0 || c == 0 || h * w * c > (std::size_t{1} << 31)) throw IoError("bad raw tensor dimensions");
  std::vector<std::uint8_t> payload(h * w * c * 4);
  if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()))) {
    throw IoError(path.string() + ": truncated raw tensor payload");
  }
  InputTensor out(h, w, c);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = static_cast<double>(std::bit_cast<float>(read_u32(payload.data() + 4 * i)));
  }
  return out;
}

void write_raw_tensor(const std::filesystem::path& path, const InputTensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kTensorMagic.data(), 4);
  write_u32(out, static_cast<std::uint32_t>(tensor.height));
  write_u32(out, static_cast<std::uint32_t>(tensor.width));
  write_u32(out, static_cast<std::uint32_t>(tensor.channels));
  for (double v : tensor.data) write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) throw IoError("failed writing " + path.string());
}

InputTensor load_input(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" ? read_png(path) : read_raw_tensor(path);
}

}  // namespace hsicx
