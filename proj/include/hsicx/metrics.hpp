#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsicx/hsic.hpp"
#include "hsicx/model.hpp"
#include "hsicx/perturb.hpp"
#include "hsicx/pipeline.hpp"

namespace hsicx {

struct Curve {
  std::vector<double> fractions;  // share of cells removed (deletion) or inserted (insertion)
  std::vector<double> scores;
  double auc = 0.0;
};

/// Trapezoid rule over x; normalized by the x range so constant curves integrate to the constant.
double trapezoid_auc(std::span<const double> x, std::span<const double> y);

/// Cells by descending score, ties by ascending index.
std::vector<std::size_t> importance_order(std::span<const double> scores);

/// Sets the top-k cells to the baseline for k = round-down(step * d / steps),
/// step = 0..steps, and records the model score. All steps go out in one batch.
Curve deletion_curve(Endpoint& endpoint, const PerturbationSpace& space, std::span<const double> scores,
                     std::size_t steps, const EvaluateOptions& eval = {});

/// Starts from the all-baseline input and restores the top-k cells.
Curve insertion_curve(Endpoint& endpoint, const PerturbationSpace& space, std::span<const double> scores,
                      std::size_t steps, const EvaluateOptions& eval = {});

/// Pearson correlation, over `subsets` random cell subsets u of size
/// round(k_fraction * d), between sum_{i in u} scores[i] and f(x) - f(x with u
/// at the baseline). Throws UndefinedCorrelation if either side is constant.
double mu_fidelity(Endpoint& endpoint, const PerturbationSpace& space, std::span<const double> scores,
                   double k_fraction, std::size_t subsets, std::uint64_t seed, const EvaluateOptions& eval = {});

double pearson(std::span<const double> a, std::span<const double> b);
/// 1-based ranks; tied values share the mean of their ranks.
std::vector<double> average_ranks(std::span<const double> values);
double spearman(std::span<const double> a, std::span<const double> b);

struct ConvergencePoint {
  std::size_t samples;
  double rho;
};

/// Spearman correlation of attributions at each p in `schedule` against a
/// reference attribution at p_reference, all drawn with config.seed.
std::vector<ConvergencePoint> convergence_study(Endpoint& endpoint, const PerturbationSpace& space,
                                                const ExplainConfig& config, std::span<const std::size_t> schedule,
                                                std::size_t p_reference);

struct ConvergenceRow {
  std::size_t samples;
  double median;
  double q1;
  double q3;
  std::vector<double> rhos;  // one per seed
};

/// Repeats the study for seeds config.seed, config.seed + 1, ... against a
/// single reference drawn with config.seed.
std::vector<ConvergenceRow> convergence_table(Endpoint& endpoint, const PerturbationSpace& space,
                                              const ExplainConfig& config, std::span<const std::size_t> schedule,
                                              std::size_t p_reference, std::size_t seeds);

/// Linear-interpolation quantile (q in [0, 1]) of an unsorted sample.
double quantile(std::vector<double> values, double q);

/// RISE: g_i = sum_n f(x . m_n) m_{n,i} / (E[M] N).
AttributionResult rise_attribution(Endpoint& endpoint, const PerturbationSpace& space, const MaskDesign& design,
                                   const EvaluateOptions& eval = {});

/// Occlusion: g_i = f(x) - f(x with cell i at the baseline); d + 1 model calls.
AttributionResult occlusion_attribution(Endpoint& endpoint, const PerturbationSpace& space,
                                        const EvaluateOptions& eval = {});

struct FidelityConfig {
  std::size_t steps = 0;  // 0 means one step per cell
  std::size_t subsets = 200;
  double k_fraction = 0.2;
  std::uint64_t seed = 0;
  bool deletion = true;
  bool insertion = true;
  bool mu_fidelity = true;
};

struct FidelityReport {
  std::optional<Curve> deletion;
  std::optional<Curve> insertion;
  std::optional<double> mu_fidelity;
  std::string mu_fidelity_error;  // set when the correlation is undefined
  FidelityConfig config;
  std::vector<double> baseline;
};

FidelityReport evaluate_fidelity(Endpoint& endpoint, const PerturbationSpace& space, std::span<const double> scores,
                                 const FidelityConfig& config, const EvaluateOptions& eval = {});

}  // namespace hsicx
