#include "hsicx/rng.hpp"

namespace hsicx {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t RandomStream::below(std::uint64_t bound) {
  // reject the low 2^64 mod bound values so that x % bound is unbiased
  const std::uint64_t threshold = (std::uint64_t{0} - bound) % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x < threshold);
  return x % bound;
}

}  // namespace hsicx
