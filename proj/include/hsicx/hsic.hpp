#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hsicx/design.hpp"
#include "hsicx/grid.hpp"
#include "hsicx/kernel.hpp"

namespace hsicx {

/// HSIC V-statistic tr(K H L H) / (p-1)^2.
double hsic_estimate(const Matrix& k, const Matrix& l);

/// H M H, computed by subtracting row and column means and adding back the grand mean.
Matrix double_center(const Matrix& m);

struct AttributionResult {
  std::vector<double> scores;  // one per patch; small negative values are possible
  Grid grid;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> warnings;
};

inline constexpr const char* kZeroSpreadWarning =
    "zero-spread: outputs have no spread under the output kernel, all scores are 0";

/// Output side of the estimator: the RBF Gram L of the outputs, evaluated in
/// fixed row blocks so it never has to be held in memory as a whole.
class OutputGram {
 public:
  OutputGram(Outputs outputs, const RbfKernel& kernel);

  std::size_t samples() const noexcept { return static_cast<std::size_t>(outputs_.rows()); }
  /// nullopt when the median heuristic found no spread.
  std::optional<double> bandwidth() const noexcept { return bandwidth_; }

  /// diag(V^T L V) for each column of V (p x q). Reduction order is fixed by the
  /// block layout, so the result does not depend on `workers`.
  Eigen::VectorXd quadratic_forms(const Matrix& v, std::size_t workers = 1) const;

  /// Materialized H L H. Zero matrix when there is no spread.
  Matrix centered() const;

 private:
  Outputs outputs_;
  std::optional<double> bandwidth_;
};

/// Per-patch scores H^p_i = hsic(k0 on column i, L). Uses the rank-one form of
/// the Dirac-centered Gram: k0 = s s^T / 2 with s = 2m - 1.
AttributionResult attribute(const MaskDesign& design, const Outputs& outputs, const RbfKernel& kernel,
                            std::size_t workers = 1);

/// HSIC of the patch group `subset` under the ANOVA kernel.
double hsic_subset(const MaskDesign& design, const Outputs& outputs, std::span<const std::size_t> subset,
                   const RbfKernel& kernel);

/// H_{(i,j)} - H_i - H_j with a shared output Gram.
double interaction(const MaskDesign& design, const Outputs& outputs, std::size_t i, std::size_t j,
                   const RbfKernel& kernel);

struct InteractionPair {
  std::size_t i;
  std::size_t j;
  double value;
};

struct InteractionMatrix {
  Matrix entries;                                         // symmetric, zero diagonal
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // evaluated pairs, i < j
  std::vector<std::string> warnings;
};

/// Interaction index for every pair i < j, or only for `candidates` when given.
InteractionMatrix interaction_matrix(const MaskDesign& design, const Outputs& outputs, const RbfKernel& kernel,
                                     const std::vector<std::pair<std::size_t, std::size_t>>* candidates = nullptr,
                                     std::size_t workers = 1);

/// Evaluated pairs sorted by value descending, ties by (i, j); keeps values > threshold
/// when one is given, then truncates to k (k = 0 keeps all).
std::vector<InteractionPair> top_interactions(const InteractionMatrix& matrix, std::size_t k,
                                              std::optional<double> threshold = std::nullopt);

}  // namespace hsicx
