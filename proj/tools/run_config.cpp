#include "run_config.hpp"

#include "hsicx/error.hpp"
#include "hsicx/image_io.hpp"

namespace hsicx::cli {

#define HSICX_CONFIG_FIELDS(X)                                                                              \
  X(model) X(input) X(grid) X(samples) X(sampler) X(prob) X(jitter) X(seed) X(baseline) X(upsampling)       \
  X(output_kernel) X(exhaustive) X(workers) X(batch_limit) X(timeout_ms) X(out_scores) X(out_csv)          \
  X(out_heatmap) X(heatmap_gray) X(out_plot) X(save_design) X(load_design) X(top_k) X(threshold) X(scores) \
  X(metrics) X(steps) X(subsets) X(k_fraction) X(schedule) X(reference) X(seeds) X(method)

nlohmann::json to_json(const RunConfig& config) {
  nlohmann::json doc;
#define X(field) doc[#field] = config.field;
  HSICX_CONFIG_FIELDS(X)
#undef X
  return doc;
}

void merge_json(RunConfig& config, const nlohmann::json& doc) {
  if (!doc.is_object()) throw InvalidArgument("config file must hold a JSON object");
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    try {
#define X(field)                                              \
  if (key == #field) {                                        \
    config.field = value.get<decltype(RunConfig::field)>();   \
    known = true;                                             \
  }
      HSICX_CONFIG_FIELDS(X)
#undef X
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument("config key '" + key + "': " + e.what());
    }
    if (!known) throw InvalidArgument("unknown config key '" + key + "'");
  }
}

Grid resolve_grid(const RunConfig& config) { return parse_grid(config.grid.empty() ? "7x7" : config.grid); }

ExplainConfig explain_config(const RunConfig& config) {
  ExplainConfig out;
  out.samples = config.samples;
  out.sampler.kind = config.exhaustive ? SamplerKind::Exhaustive : parse_sampler_kind(config.sampler);
  out.sampler.prob = out.sampler.kind == SamplerKind::Bernoulli ? config.prob : 0.5;
  out.sampler.jitter = config.jitter;
  if (!(config.prob >= 0.0 && config.prob <= 1.0)) throw InvalidArgument("--prob must lie in [0, 1]");
  out.seed = config.seed;
  out.output_kernel = parse_output_kernel(config.output_kernel);
  out.eval = evaluate_options(config);
  out.workers = config.workers;
  return out;
}

EvaluateOptions evaluate_options(const RunConfig& config) {
  if (config.workers == 0) throw InvalidArgument("--workers must be >= 1");
  if (config.batch_limit == 0) throw InvalidArgument("--batch-limit must be >= 1");
  return EvaluateOptions{config.batch_limit, config.workers};
}

EndpointOptions endpoint_options(const RunConfig& config) {
  EndpointOptions out;
  out.grid = resolve_grid(config);
  out.timeout = std::chrono::milliseconds(config.timeout_ms);
  out.workers = std::max<std::size_t>(1, config.workers);
  return out;
}

PerturbationSpace perturbation_space(const RunConfig& config, const Grid& grid) {
  const Baseline baseline = parse_baseline(config.baseline);
  if (config.input.empty()) return PerturbationSpace::cells(grid, baseline);
  return PerturbationSpace::image(load_input(config.input),
                                  PerturbConfig{grid, baseline, parse_upsampling(config.upsampling)});
}

}  // namespace hsicx::cli
