#pragma once

#include <cstdint>
#include <random>

namespace hsicx {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for an independent substream `index` of `seed`.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return seed ^ splitmix64(index);
}

/// Portable random stream. std::mt19937_64 is fully specified by the standard,
/// but the std distributions are not, so the conversions live here.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

}  // namespace hsicx
