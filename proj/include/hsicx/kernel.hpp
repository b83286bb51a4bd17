#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace hsicx {

using Matrix = Eigen::MatrixXd;
/// Model outputs: one row per sample, one column per output component.
using Outputs = Eigen::MatrixXd;

/// How the RBF bandwidth is chosen when none is fixed.
enum class BandwidthRule {
  PairwiseMedian,  // median of the p(p-1)/2 pairwise output distances (default)
  NormMedian,      // median of the output norms |y_a|, i.e. "median of the output" read literally
};

struct DiracCenteredKernel {};

struct AnovaSubsetKernel {
  std::vector<std::size_t> indices;
};

struct RbfKernel {
  std::optional<double> bandwidth;  // nullopt selects the bandwidth from the data
  BandwidthRule rule = BandwidthRule::PairwiseMedian;
};

using KernelSpec = std::variant<DiracCenteredKernel, AnovaSubsetKernel, RbfKernel>;

/// Parses "rbf:median", "rbf:median-norm" or "rbf:<sigma>".
RbfKernel parse_output_kernel(std::string_view text);
std::string to_string(const RbfKernel& kernel);
void validate(const KernelSpec& spec, std::size_t patches);

struct GramMatrix {
  Matrix entries;
  KernelSpec kernel;
};

/// k0(x, x') = delta(x = x') - 1/2 on a binary column.
GramMatrix gram_dirac_centered(std::span<const std::uint8_t> column);

/// k_A(x, x') = prod_{i in A} (1 + k0(x_i, x'_i)). `columns` is p x |A|, row-major.
GramMatrix gram_anova_subset(std::span<const std::uint8_t> columns, std::size_t width);

/// Median heuristic. Returns nullopt when the median is zero (no spread in the outputs).
std::optional<double> median_bandwidth(const Outputs& outputs,
                                       BandwidthRule rule = BandwidthRule::PairwiseMedian);

/// exp(-|y_a - y_b|^2 / (2 sigma^2)).
GramMatrix gram_rbf(const Outputs& outputs, double bandwidth);

/// H = I - J/p.
Matrix centering_matrix(std::size_t p);

/// Squared Euclidean distance between rows a and b, summed in column order.
inline double squared_distance(const Outputs& y, Eigen::Index a, Eigen::Index b) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < y.cols(); ++k) {
    const double diff = y(a, k) - y(b, k);
    acc += diff * diff;
  }
  return acc;
}

}  // namespace hsicx
