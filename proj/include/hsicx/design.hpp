#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace hsicx {

enum class SamplerKind { Lhs, Bernoulli, Exhaustive };

struct Sampler {
  SamplerKind kind = SamplerKind::Lhs;
  double prob = 0.5;    // Bernoulli success probability; LHS and exhaustive report 0.5
  bool jitter = false;  // LHS only: random position inside each stratum instead of its midpoint

  friend bool operator==(const Sampler&, const Sampler&) = default;
};

std::string to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(std::string_view name);

/// p x d binary perturbation masks, row-major. Row a is the a-th mask, column i
/// the i-th patch. A 1 keeps the patch, a 0 sends it to the baseline.
class MaskDesign {
 public:
  MaskDesign(std::size_t p, std::size_t d, Sampler sampler, std::uint64_t seed,
             std::vector<std::uint8_t> bits);

  std::size_t samples() const noexcept { return p_; }
  std::size_t patches() const noexcept { return d_; }
  const Sampler& sampler() const noexcept { return sampler_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::uint8_t at(std::size_t row, std::size_t col) const { return bits_[row * d_ + col]; }
  std::span<const std::uint8_t> row(std::size_t r) const { return {bits_.data() + r * d_, d_}; }
  std::vector<std::uint8_t> column(std::size_t c) const;
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  /// Expected value of a mask entry under the sampler.
  double expected_value() const noexcept { return sampler_.prob; }

  friend bool operator==(const MaskDesign&, const MaskDesign&) = default;

 private:
  std::size_t p_;
  std::size_t d_;
  Sampler sampler_;
  std::uint64_t seed_;
  std::vector<std::uint8_t> bits_;
};

/// Latin hypercube design on [0,1)^d thresholded at 1/2. Each column permutes
/// the p strata with its own substream, so every column has floor(p/2) or
/// ceil(p/2) ones and columns do not depend on d.
MaskDesign sample_lhs_masks(std::size_t p, std::size_t d, std::uint64_t seed, bool jitter = false);

/// iid Bernoulli(prob) entries, one substream per column.
MaskDesign sample_bernoulli_masks(std::size_t p, std::size_t d, double prob, std::uint64_t seed);

/// All 2^d binary rows in lexicographic order (column 0 is the most significant bit).
MaskDesign exhaustive_design(std::size_t d);

inline constexpr std::size_t kMaxExhaustivePatches = 20;

nlohmann::json design_to_json(const MaskDesign& design);
MaskDesign design_from_json(const nlohmann::json& doc);

/// Binary layout: "HSXD" magic, u32 version, u64 p, u64 d, u8 sampler, u8 jitter,
/// f64 prob, u64 seed, then p*d bits packed row-major, LSB first. All little-endian.
std::vector<std::uint8_t> design_to_bytes(const MaskDesign& design);
MaskDesign design_from_bytes(std::span<const std::uint8_t> bytes);

/// Writes JSON when the extension is ".json", the binary layout otherwise.
void save_design(const MaskDesign& design, const std::filesystem::path& path);
MaskDesign load_design(const std::filesystem::path& path);

}  // namespace hsicx
