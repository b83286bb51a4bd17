#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "hsicx/design.hpp"
#include "hsicx/hsic.hpp"
#include "hsicx/model.hpp"
#include "hsicx/perturb.hpp"

namespace hsicx {

struct ExplainConfig {
  std::size_t samples = 1536;
  Sampler sampler;  // LHS by default; Exhaustive ignores samples and seed
  std::uint64_t seed = 0;
  RbfKernel output_kernel;
  EvaluateOptions eval;
  std::size_t workers = 1;  // estimator threads
};

/// Draws the design described by `config` for d patches.
MaskDesign make_design(const ExplainConfig& config, std::size_t patches);

struct ExplainRun {
  MaskDesign design;
  Outputs outputs;
  AttributionResult result;
};

/// Samples masks, perturbs, evaluates the model and scores every patch.
/// A preset design (e.g. loaded from disk) replaces sampling.
ExplainRun explain(Endpoint& endpoint, const PerturbationSpace& space, const ExplainConfig& config,
                   const std::optional<MaskDesign>& preset = std::nullopt);

}  // namespace hsicx
