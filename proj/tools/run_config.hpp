#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "hsicx/grid.hpp"
#include "hsicx/metrics.hpp"
#include "hsicx/model.hpp"
#include "hsicx/perturb.hpp"
#include "hsicx/pipeline.hpp"

namespace hsicx::cli {

/// Everything a command needs to re-run. Mirrors the command-line flags; a
/// saved config re-executes to byte-identical score artifacts.
struct RunConfig {
  std::string model;
  std::string input;
  std::string grid;  // empty: 7x7, or the grid of the scores file for `fidelity`
  std::size_t samples = 764;
  std::string sampler = "lhs";
  double prob = 0.5;
  bool jitter = false;
  std::uint64_t seed = 0;
  std::string baseline = "0";
  std::string upsampling = "nearest";
  std::string output_kernel = "rbf:median";
  bool exhaustive = false;
  std::size_t workers = 1;
  std::size_t batch_limit = 256;
  std::size_t timeout_ms = 60000;

  std::string out_scores;
  std::string out_csv;
  std::string out_heatmap;
  bool heatmap_gray = false;
  std::string out_plot;
  std::string save_design;
  std::string load_design;

  // interactions
  std::size_t top_k = 10;
  double threshold = 0.0;

  // fidelity
  std::string scores;
  std::string metrics = "deletion,insertion,mufidelity";
  std::size_t steps = 0;
  std::size_t subsets = 200;
  double k_fraction = 0.2;

  // converge
  std::string schedule = "64,128,256,512";
  std::size_t reference = 13000;
  std::size_t seeds = 1;

  // baseline
  std::string method;
};

nlohmann::json to_json(const RunConfig& config);
/// Overlays the keys present in `doc` onto `config`; unknown keys are an error.
void merge_json(RunConfig& config, const nlohmann::json& doc);

Grid resolve_grid(const RunConfig& config);
ExplainConfig explain_config(const RunConfig& config);
EndpointOptions endpoint_options(const RunConfig& config);
EvaluateOptions evaluate_options(const RunConfig& config);
PerturbationSpace perturbation_space(const RunConfig& config, const Grid& grid);

}  // namespace hsicx::cli
