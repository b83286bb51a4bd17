#include "hsicx/kernel.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <set>

#include "hsicx/error.hpp"

namespace hsicx {

RbfKernel parse_output_kernel(std::string_view text) {
  constexpr std::string_view prefix = "rbf:";
  if (text.substr(0, prefix.size()) != prefix) {
    throw InvalidArgument("output kernel must be rbf:median, rbf:median-norm or rbf:<sigma>");
  }
  const auto arg = text.substr(prefix.size());
  if (arg == "median") return RbfKernel{std::nullopt, BandwidthRule::PairwiseMedian};
  if (arg == "median-norm") return RbfKernel{std::nullopt, BandwidthRule::NormMedian};
  double sigma = 0.0;
  const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), sigma);
  if (ec != std::errc{} || ptr != arg.data() + arg.size()) {
    throw InvalidArgument("cannot parse RBF bandwidth '" + std::string(arg) + "'");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("RBF bandwidth must be strictly positive");
  return RbfKernel{sigma, BandwidthRule::PairwiseMedian};
}

std::string to_string(const RbfKernel& kernel) {
  if (kernel.bandwidth) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), *kernel.bandwidth);
    return "rbf:" + std::string(buf, res.ptr);
  }
  return kernel.rule == BandwidthRule::NormMedian ? "rbf:median-norm" : "rbf:median";
}

void validate(const KernelSpec& spec, std::size_t patches) {
  if (const auto* rbf = std::get_if<RbfKernel>(&spec)) {
    if (rbf->bandwidth && !(*rbf->bandwidth > 0.0)) throw InvalidArgument("RBF bandwidth must be strictly positive");
  } else if (const auto* anova = std::get_if<AnovaSubsetKernel>(&spec)) {
    if (anova->indices.empty()) throw InvalidArgument("ANOVA subset must not be empty");
    std::set<std::size_t> seen;
    for (auto i : anova->indices) {
      if (i >= patches) throw InvalidArgument("ANOVA subset index " + std::to_string(i) + " out of range");
      if (!seen.insert(i).second) throw InvalidArgument("ANOVA subset contains duplicate index " + std::to_string(i));
    }
  }
}

namespace {

void check_binary(std::span<const std::uint8_t> values) {
  for (auto v : values) {
    if (v > 1) throw InvalidArgument("mask entries must be 0 or 1");
  }
}

}  // namespace

GramMatrix gram_dirac_centered(std::span<const std::uint8_t> column) {
  check_binary(column);
  const auto p = static_cast<Eigen::Index>(column.size());
  Matrix k(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    k(a, a) = 0.5;
    for (Eigen::Index b = a + 1; b < p; ++b) {
      const double v = column[a] == column[b] ? 0.5 : -0.5;
      k(a, b) = v;
      k(b, a) = v;
    }
  }
  return {std::move(k), DiracCenteredKernel{}};
}

GramMatrix gram_anova_subset(std::span<const std::uint8_t> columns, std::size_t width) {
  if (width == 0) throw InvalidArgument("ANOVA subset must not be empty");
  if (columns.size() % width != 0) throw InvalidArgument("ANOVA column block is not p x |A|");
  check_binary(columns);
  const auto p = static_cast<Eigen::Index>(columns.size() / width);
  Matrix k(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    const auto* ra = columns.data() + a * static_cast<Eigen::Index>(width);
    for (Eigen::Index b = a; b < p; ++b) {
      const auto* rb = columns.data() + b * static_cast<Eigen::Index>(width);
      double v = 1.0;
      for (std::size_t i = 0; i < width; ++i) v *= ra[i] == rb[i] ? 1.5 : 0.5;
      k(a, b) = v;
      k(b, a) = v;
    }
  }
  AnovaSubsetKernel spec;
  spec.indices.resize(width);
  for (std::size_t i = 0; i < width; ++i) spec.indices[i] = i;
  return {std::move(k), std::move(spec)};
}

namespace {

double median_of(std::vector<double>& values) {
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

// Number of pairs a < b of the sorted sample with y[b] - y[a] <= t.
std::uint64_t pairs_within(const std::vector<double>& sorted, double t) {
  std::uint64_t count = 0;
  std::size_t a = 0;
  for (std::size_t b = 0; b < sorted.size(); ++b) {
    while (sorted[b] - sorted[a] > t) ++a;
    count += b - a;
  }
  return count;
}

// k-th smallest (0-based) pairwise difference of a sorted scalar sample, found
// by bisection over the bit patterns of non-negative doubles. The result is
// exactly one of the attained differences.
double kth_pairwise_difference(const std::vector<double>& sorted, std::uint64_t k) {
  std::uint64_t lo = 0;
  std::uint64_t hi = std::bit_cast<std::uint64_t>(sorted.back() - sorted.front());
  while (lo < hi) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (pairs_within(sorted, std::bit_cast<double>(mid)) >= k + 1) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return std::bit_cast<double>(lo);
}

}  // namespace

std::optional<double> median_bandwidth(const Outputs& outputs, BandwidthRule rule) {
  const auto p = outputs.rows();
  if (p < 2) throw InvalidArgument("median bandwidth needs at least 2 outputs");
  double median = 0.0;
  if (rule == BandwidthRule::NormMedian) {
    std::vector<double> norms(static_cast<std::size_t>(p));
    for (Eigen::Index a = 0; a < p; ++a) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < outputs.cols(); ++k) acc += outputs(a, k) * outputs(a, k);
      norms[static_cast<std::size_t>(a)] = std::sqrt(acc);
    }
    median = median_of(norms);
  } else if (outputs.cols() == 1) {
    std::vector<double> sorted(outputs.data(), outputs.data() + p);
    std::sort(sorted.begin(), sorted.end());
    const std::uint64_t pairs = static_cast<std::uint64_t>(p) * static_cast<std::uint64_t>(p - 1) / 2;
    const double upper = kth_pairwise_difference(sorted, pairs / 2);
    median = pairs % 2 == 1 ? upper : 0.5 * (kth_pairwise_difference(sorted, pairs / 2 - 1) + upper);
  } else {
    std::vector<double> distances;
    distances.reserve(static_cast<std::size_t>(p * (p - 1) / 2));
    for (Eigen::Index a = 0; a < p; ++a) {
      for (Eigen::Index b = a + 1; b < p; ++b) distances.push_back(std::sqrt(squared_distance(outputs, a, b)));
    }
    median = median_of(distances);
  }
  if (median == 0.0) return std::nullopt;
  return median;
}

GramMatrix gram_rbf(const Outputs& outputs, double bandwidth) {
  if (!(bandwidth > 0.0)) throw InvalidArgument("RBF bandwidth must be strictly positive");
  const auto p = outputs.rows();
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  Matrix l(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    l(a, a) = 1.0;
    for (Eigen::Index b = a + 1; b < p; ++b) {
      const double v = std::exp(squared_distance(outputs, a, b) * scale);
      l(a, b) = v;
      l(b, a) = v;
    }
  }
  return {std::move(l), RbfKernel{bandwidth, BandwidthRule::PairwiseMedian}};
}

Matrix centering_matrix(std::size_t p) {
  if (p == 0) throw InvalidArgument("centering matrix needs p >= 1");
  const auto n = static_cast<Eigen::Index>(p);
  Matrix h = Matrix::Constant(n, n, -1.0 / static_cast<double>(p));
  h.diagonal().array() += 1.0;
  return h;
}

}  // namespace hsicx
