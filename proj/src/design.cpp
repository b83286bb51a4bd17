#include "hsicx/design.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "hsicx/error.hpp"
#include "hsicx/grid.hpp"
#include "hsicx/rng.hpp"

namespace hsicx {

Grid parse_grid(std::string_view text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string_view::npos || x == 0 || x + 1 == text.size()) {
    throw InvalidArgument("grid must look like WxH, got '" + std::string(text) + "'");
  }
  auto parse_dim = [&](std::string_view part) {
    std::size_t value = 0;
    for (char c : part) {
      if (c < '0' || c > '9') {
        throw InvalidArgument("grid must look like WxH, got '" + std::string(text) + "'");
      }
      value = value * 10 + static_cast<std::size_t>(c - '0');
    }
    if (value == 0) throw InvalidArgument("grid dimensions must be positive");
    return value;
  };
  return Grid{parse_dim(text.substr(0, x)), parse_dim(text.substr(x + 1))};
}

std::string to_string(const Grid& grid) {
  return std::to_string(grid.width) + "x" + std::to_string(grid.height);
}

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Lhs: return "lhs";
    case SamplerKind::Bernoulli: return "bernoulli";
    case SamplerKind::Exhaustive: return "exhaustive";
  }
  return "unknown";
}

SamplerKind parse_sampler_kind(std::string_view name) {
  if (name == "lhs") return SamplerKind::Lhs;
  if (name == "bernoulli") return SamplerKind::Bernoulli;
  if (name == "exhaustive") return SamplerKind::Exhaustive;
  throw InvalidArgument("unknown sampler '" + std::string(name) + "'");
}

MaskDesign::MaskDesign(std::size_t p, std::size_t d, Sampler sampler, std::uint64_t seed,
                       std::vector<std::uint8_t> bits)
    : p_(p), d_(d), sampler_(sampler), seed_(seed), bits_(std::move(bits)) {
  if (p_ == 0 || d_ == 0) throw InvalidArgument("mask design needs p >= 1 and d >= 1");
  if (bits_.size() != p_ * d_) throw InvalidArgument("mask payload size does not match p*d");
  for (auto b : bits_) {
    if (b > 1) throw InvalidArgument("mask entries must be 0 or 1");
  }
}

std::vector<std::uint8_t> MaskDesign::column(std::size_t c) const {
  std::vector<std::uint8_t> out(p_);
  for (std::size_t r = 0; r < p_; ++r) out[r] = bits_[r * d_ + c];
  return out;
}

namespace {

void check_shape(std::size_t p, std::size_t d) {
  if (p == 0) throw InvalidArgument("sample count p must be >= 1");
  if (d == 0) throw InvalidArgument("patch count d must be >= 1");
}

}  // namespace

MaskDesign sample_lhs_masks(std::size_t p, std::size_t d, std::uint64_t seed, bool jitter) {
  check_shape(p, d);
  std::vector<std::uint8_t> bits(p * d);
  std::vector<std::size_t> strata(p);
  const double width = 1.0 / static_cast<double>(p);
  for (std::size_t col = 0; col < d; ++col) {
    RandomStream stream(substream_seed(seed, col));
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    for (std::size_t i = p; i > 1; --i) {
      std::swap(strata[i - 1], strata[stream.below(i)]);
    }
    for (std::size_t row = 0; row < p; ++row) {
      const double offset = jitter ? stream.uniform() : 0.5;
      const double value = (static_cast<double>(strata[row]) + offset) * width;
      bits[row * d + col] = value >= 0.5 ? 1 : 0;
    }
  }
  return MaskDesign(p, d, Sampler{SamplerKind::Lhs, 0.5, jitter}, seed, std::move(bits));
}

MaskDesign sample_bernoulli_masks(std::size_t p, std::size_t d, double prob, std::uint64_t seed) {
  check_shape(p, d);
  if (!(prob >= 0.0 && prob <= 1.0)) throw InvalidArgument("Bernoulli probability must lie in [0, 1]");
  std::vector<std::uint8_t> bits(p * d);
  for (std::size_t col = 0; col < d; ++col) {
    RandomStream stream(substream_seed(seed, col));
    for (std::size_t row = 0; row < p; ++row) {
      bits[row * d + col] = stream.uniform() < prob ? 1 : 0;
    }
  }
  return MaskDesign(p, d, Sampler{SamplerKind::Bernoulli, prob, false}, seed, std::move(bits));
}

MaskDesign exhaustive_design(std::size_t d) {
  if (d == 0) throw InvalidArgument("patch count d must be >= 1");
  if (d > kMaxExhaustivePatches) {
    throw InvalidArgument("exhaustive design refused: d=" + std::to_string(d) + " exceeds " +
                          std::to_string(kMaxExhaustivePatches));
  }
  const std::size_t p = std::size_t{1} << d;
  std::vector<std::uint8_t> bits(p * d);
  for (std::size_t row = 0; row < p; ++row) {
    for (std::size_t col = 0; col < d; ++col) {
      bits[row * d + col] = static_cast<std::uint8_t>((row >> (d - 1 - col)) & 1U);
    }
  }
  return MaskDesign(p, d, Sampler{SamplerKind::Exhaustive, 0.5, false}, 0, std::move(bits));
}

nlohmann::json design_to_json(const MaskDesign& design) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < design.samples(); ++r) {
    std::string line;
    line.reserve(design.patches());
    for (auto b : design.row(r)) line.push_back(b ? '1' : '0');
    rows.push_back(std::move(line));
  }
  return {
      {"p", design.samples()},
      {"d", design.patches()},
      {"sampler", to_string(design.sampler().kind)},
      {"prob", design.sampler().prob},
      {"jitter", design.sampler().jitter},
      {"seed", design.seed()},
      {"rows", std::move(rows)},
  };
}

MaskDesign design_from_json(const nlohmann::json& doc) {
  try {
    const auto p = doc.at("p").get<std::size_t>();
    const auto d = doc.at("d").get<std::size_t>();
    Sampler sampler{parse_sampler_kind(doc.at("sampler").get<std::string>()),
                    doc.at("prob").get<double>(), doc.value("jitter", false)};
    const auto seed = doc.at("seed").get<std::uint64_t>();
    const auto& rows = doc.at("rows");
    if (rows.size() != p) throw InvalidArgument("design JSON: row count does not match p");
    std::vector<std::uint8_t> bits;
    bits.reserve(p * d);
    for (const auto& row : rows) {
      const auto line = row.get<std::string>();
      if (line.size() != d) throw InvalidArgument("design JSON: row length does not match d");
      for (char c : line) {
        if (c != '0' && c != '1') throw InvalidArgument("design JSON: rows must contain only 0/1");
        bits.push_back(c == '1' ? 1 : 0);
      }
    }
    return MaskDesign(p, d, sampler, seed, std::move(bits));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("design JSON: ") + e.what());
  }
}

namespace {

constexpr std::array<char, 4> kDesignMagic{'H', 'S', 'X', 'D'};
constexpr std::uint32_t kDesignVersion = 1;
constexpr std::size_t kDesignHeaderSize = 4 + 4 + 8 + 8 + 1 + 1 + 8 + 8;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<std::uint8_t, sizeof(T)> raw{};
  std::memcpy(raw.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  out.insert(out.end(), raw.begin(), raw.end());
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
  std::array<std::uint8_t, sizeof(T)> raw{};
  std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(pos), sizeof(T), raw.begin());
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  pos += sizeof(T);
  T value;
  std::memcpy(&value, raw.data(), sizeof(T));
  return value;
}

}  // namespace

std::vector<std::uint8_t> design_to_bytes(const MaskDesign& design) {
  std::vector<std::uint8_t> out(kDesignMagic.begin(), kDesignMagic.end());
  put_le<std::uint32_t>(out, kDesignVersion);
  put_le<std::uint64_t>(out, design.samples());
  put_le<std::uint64_t>(out, design.patches());
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(design.sampler().kind));
  put_le<std::uint8_t>(out, design.sampler().jitter ? 1 : 0);
  put_le<double>(out, design.sampler().prob);
  put_le<std::uint64_t>(out, design.seed());
  const auto bits = design.bits();
  std::vector<std::uint8_t> packed((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) packed[i / 8] |= static_cast<std::uint8_t>(1U << (i % 8));
  }
  out.insert(out.end(), packed.begin(), packed.end());
  return out;
}

MaskDesign design_from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kDesignHeaderSize || !std::equal(kDesignMagic.begin(), kDesignMagic.end(), bytes.begin())) {
    throw IoError("not a mask design file (bad magic)");
  }
  std::size_t pos = 4;
  if (get_le<std::uint32_t>(bytes, pos) != kDesignVersion) throw IoError("unsupported mask design version");
  const auto p = get_le<std::uint64_t>(bytes, pos);
  const auto d = get_le<std::uint64_t>(bytes, pos);
  const auto kind = get_le<std::uint8_t>(bytes, pos);
  const auto jitter = get_le<std::uint8_t>(bytes, pos);
  const auto prob = get_le<double>(bytes, pos);
  const auto seed = get_le<std::uint64_t>(bytes, pos);
  if (kind > static_cast<std::uint8_t>(SamplerKind::Exhaustive)) throw IoError("bad sampler tag in mask design");
  if (p == 0 || d == 0 || p > (std::uint64_t{1} << 40) / d) throw IoError("bad mask design dimensions");
  const std::size_t count = p * d;
  if (bytes.size() - pos != (count + 7) / 8) throw IoError("mask design payload size mismatch");
  std::vector<std::uint8_t> bits(count);
  for (std::size_t i = 0; i < count; ++i) bits[i] = (bytes[pos + i / 8] >> (i % 8)) & 1U;
  return MaskDesign(p, d, Sampler{static_cast<SamplerKind>(kind), prob, jitter != 0}, seed, std::move(bits));
}

void save_design(const MaskDesign& design, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  if (path.extension() == ".json") {
    out << design_to_json(design).dump() << '\n';
  } else {
    const auto bytes = design_to_bytes(design);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

MaskDesign load_design(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (path.extension() == ".json") {
    auto doc = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (doc.is_discarded()) throw IoError("malformed design JSON in " + path.string());
    return design_from_json(doc);
  }
  return design_from_bytes(bytes);
}

}  // namespace hsicx
