#include "hsicx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hsicx/error.hpp"
#include "hsicx/rng.hpp"

namespace hsicx {

namespace {

std::vector<double> scalar_outputs(const Outputs& out) {
  if (out.cols() != 1) {
    throw InvalidArgument("this metric needs a scalar model output, got arity " + std::to_string(out.cols()));
  }
  return {out.data(), out.data() + out.rows()};
}

void check_scores(const PerturbationSpace& space, std::span<const double> scores) {
  if (scores.size() != space.cell_count()) {
    throw InvalidArgument("got " + std::to_string(scores.size()) + " scores for " +
                          std::to_string(space.cell_count()) + " cells");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw InvalidArgument("scores contain NaN or Inf");
  }
}

Curve run_curve(Endpoint& endpoint, const PerturbationSpace& space, std::span<const double> scores,
                std::size_t steps, const EvaluateOptions& eval, bool deletion) {
  check_scores(space, scores);
  const std::size_t d = space.cell_count();
  if (steps == 0) steps = d;
  const auto order = importance_order(scores);
  std::vector<std::uint8_t> masks((steps + 1) * d, deletion ? 1 : 0);
  Curve curve;
  for (std::size_t step = 0; step <= steps; ++step) {
    const std::size_t k = step * d / steps;
    for (std::size_t r = 0; r < k; ++r) masks[step * d + order[r]] = deletion ? 0 : 1;
    curve.fractions.push_back(static_cast<double>(k) / static_cast<double>(d));
  }
  curve.scores = scalar_outputs(evaluate_batch(endpoint, space.build(masks, steps + 1), eval));
  curve.auc = trapezoid_auc(curve.fractions, curve.scores);
  return curve;
}

}  // namespace

double trapezoid_auc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("AUC needs two or more matching points");
  const double range = x.back() - x.front();
  if (!(range > 0.0)) throw InvalidArgument("AUC needs an increasing x axis");
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return area / range;
}

std::vector<std::size_t> importance_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

Curve deletion_curve(Endpoint& endpoint, const PerturbationSpace& space, std::span<const double> scores,
                     std::size_t steps, const EvaluateOptions& eval) {
  return run_curve(endpoint, space, scores, steps, eval, true);
}

Curve insertion_curve(Endpoint& endpoint, const PerturbationSpace& space, std::span<const double> scores,
                      std::size_t steps, const EvaluateOptions& eval) {
  return run_curve(endpoint, space, scores, steps, eval, false);
}

double mu_fidelity(Endpoint& endpoint, const PerturbationSpace& space, std::span<const double> scores,
                   double k_fraction, std::size_t subsets, std::uint64_t seed, const EvaluateOptions& eval) {
  check_scores(space, scores);
  if (!(k_fraction > 0.0 && k_fraction < 1.0)) throw InvalidArgument("k fraction must lie in (0, 1)");
  if (subsets < 2) throw InvalidArgument("muFidelity needs at least 2 subsets");
  const std::size_t d = space.cell_count();
  const auto k = static_cast<std::size_t>(std::llround(k_fraction * static_cast<double>(d)));
  if (k == 0) throw InvalidArgument("subset size round(k_fraction * d) is 0");

  // row 0 is the intact input, row s + 1 has subset s at the baseline
  std::vector<std::uint8_t> masks((subsets + 1) * d, 1);
  std::vector<double> attributed(subsets, 0.0);
  RandomStream stream(seed);
  std::vector<std::size_t> cells(d);
  for (std::size_t s = 0; s < subsets; ++s) {
    std::iota(cells.begin(), cells.end(), std::size_t{0});
    for (std::size_t r = 0; r < k; ++r) {
      std::swap(cells[r], cells[r + stream.below(d - r)]);
      masks[(s + 1) * d + cells[r]] = 0;
      attributed[s] += scores[cells[r]];
    }
  }
  const auto f = scalar_outputs(evaluate_batch(endpoint, space.build(masks, subsets + 1), eval));
  std::vector<double> drops(subsets);
  for (std::size_t s = 0; s < subsets; ++s) drops[s] = f[0] - f[s + 1];
  return pearson(attributed, drops);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("correlation needs vectors of equal length");
  if (a.size() < 2) throw InvalidArgument("correlation needs at least 2 points");
  const double n = static_cast<double>(a.size());
  const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw UndefinedCorrelation(std::string("correlation undefined: ") + (saa == 0.0 ? "first" : "second") +
                               " sample has zero variance");
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const auto n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && values[order[end]] == values[order[start]]) ++end;
    const double rank = 0.5 * static_cast<double>(start + 1 + end);  // mean of ranks start+1 .. end
    for (std::size_t i = start; i < end; ++i) ranks[order[i]] = rank;
    start = end;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("correlation needs vectors of equal length");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

std::vector<ConvergencePoint> convergence_study(Endpoint& endpoint, const PerturbationSpace& space,
                                                const ExplainConfig& config, std::span<const std::size_t> schedule,
                                                std::size_t p_reference) {
  const auto table = convergence_table(endpoint, space, config, schedule, p_reference, 1);
  std::vector<ConvergencePoint> out;
  for (const auto& row : table) out.push_back({row.samples, row.rhos.front()});
  return out;
}

std::vector<ConvergenceRow> convergence_table(Endpoint& endpoint, const PerturbationSpace& space,
                                              const ExplainConfig& config, std::span<const std::size_t> schedule,
                                              std::size_t p_reference, std::size_t seeds) {
  if (schedule.empty()) throw InvalidArgument("convergence schedule is empty");
  if (seeds == 0) throw InvalidArgument("convergence study needs at least one seed");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i] < 2) throw InvalidArgument("p >= 2 required");
    if (i > 0 && schedule[i] <= schedule[i - 1]) throw InvalidArgument("convergence schedule must be ascending");
  }
  if (p_reference < schedule.back()) throw InvalidArgument("reference sample count must be >= the schedule");
  if (config.sampler.kind == SamplerKind::Exhaustive) {
    throw InvalidArgument("convergence study needs a random sampler");
  }
  ExplainConfig ref_config = config;
  ref_config.samples = p_reference;
  const auto reference = explain(endpoint, space, ref_config).result.scores;

  std::vector<ConvergenceRow> table;
  for (auto p : schedule) {
    ConvergenceRow row{p, 0.0, 0.0, 0.0, {}};
    for (std::size_t s = 0; s < seeds; ++s) {
      ExplainConfig run = config;
      run.samples = p;
      run.seed = config.seed + s;
      row.rhos.push_back(spearman(explain(endpoint, space, run).result.scores, reference));
    }
    row.median = quantile(row.rhos, 0.5);
    row.q1 = quantile(row.rhos, 0.25);
    row.q3 = quantile(row.rhos, 0.75);
    table.push_back(std::move(row));
  }
  return table;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

AttributionResult rise_attribution(Endpoint& endpoint, const PerturbationSpace& space, const MaskDesign& design,
                                   const EvaluateOptions& eval) {
  if (design.patches() != space.cell_count()) throw InvalidArgument("design does not match the grid");
  const double expected = design.expected_value();
  if (!(expected > 0.0)) throw InvalidArgument("RISE needs E[M] > 0");
  const auto f = scalar_outputs(evaluate_batch(endpoint, space.build(design), eval));
  const std::size_t d = design.patches();
  AttributionResult result;
  result.grid = space.grid();
  result.scores.assign(d, 0.0);
  std::vector<std::size_t> kept(d, 0);
  for (std::size_t n = 0; n < design.samples(); ++n) {
    for (std::size_t i = 0; i < d; ++i) {
      if (design.at(n, i)) {
        result.scores[i] += f[n];
        ++kept[i];
      }
    }
  }
  const double norm = 1.0 / (expected * static_cast<double>(design.samples()));
  for (std::size_t i = 0; i < d; ++i) {
    result.scores[i] *= norm;
    if (kept[i] == 0) result.warnings.push_back("cell " + std::to_string(i) + " is never kept; score set to 0");
  }
  result.config = {
      {"method", "rise"},
      {"sampler", to_string(design.sampler().kind)},
      {"prob", design.sampler().prob},
      {"seed", design.seed()},
      {"samples", design.samples()},
      {"patches", d},
  };
  return result;
}

AttributionResult occlusion_attribution(Endpoint& endpoint, const PerturbationSpace& space,
                                        const EvaluateOptions& eval) {
  const std::size_t d = space.cell_count();
  std::vector<std::uint8_t> masks((d + 1) * d, 1);
  for (std::size_t i = 0; i < d; ++i) masks[(i + 1) * d + i] = 0;
  const auto f = scalar_outputs(evaluate_batch(endpoint, space.build(masks, d + 1), eval));
  AttributionResult result;
  result.grid = space.grid();
  result.scores.resize(d);
  for (std::size_t i = 0; i < d; ++i) result.scores[i] = f[0] - f[i + 1];
  result.config = {{"method", "occlusion"}, {"patches", d}};
  return result;
}

FidelityReport evaluate_fidelity(Endpoint& endpoint, const PerturbationSpace& space, std::span<const double> scores,
                                 const FidelityConfig& config, const EvaluateOptions& eval) {
  FidelityReport report;
  report.config = config;
  report.baseline = space.config().baseline.values;
  if (config.deletion) report.deletion = deletion_curve(endpoint, space, scores, config.steps, eval);
  if (config.insertion) report.insertion = insertion_curve(endpoint, space, scores, config.steps, eval);
  if (config.mu_fidelity) {
    try {
      report.mu_fidelity = mu_fidelity(endpoint, space, scores, config.k_fraction, config.subsets, config.seed, eval);
    } catch (const UndefinedCorrelation& e) {
      report.mu_fidelity_error = e.what();
    }
  }
  return report;
}

}  // namespace hsicx
