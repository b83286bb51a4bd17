#include "hsicx/pipeline.hpp"

#include "hsicx/error.hpp"

namespace hsicx {

MaskDesign make_design(const ExplainConfig& config, std::size_t patches) {
  switch (config.sampler.kind) {
    case SamplerKind::Exhaustive: return exhaustive_design(patches);
    case SamplerKind::Bernoulli: return sample_bernoulli_masks(config.samples, patches, config.sampler.prob, config.seed);
    case SamplerKind::Lhs: return sample_lhs_masks(config.samples, patches, config.seed, config.sampler.jitter);
  }
  throw InvalidArgument("unknown sampler");
}

ExplainRun explain(Endpoint& endpoint, const PerturbationSpace& space, const ExplainConfig& config,
                   const std::optional<MaskDesign>& preset) {
  if (!preset && config.sampler.kind != SamplerKind::Exhaustive && config.samples < 2) {
    throw InvalidArgument("p >= 2 required");
  }
  MaskDesign design = preset ? *preset : make_design(config, space.cell_count());
  if (design.patches() != space.cell_count()) {
    throw InvalidArgument("design has d=" + std::to_string(design.patches()) + " but the grid has " +
                          std::to_string(space.cell_count()) + " cells");
  }
  if (design.samples() < 2) throw InvalidArgument("p >= 2 required");
  Outputs outputs = evaluate_batch(endpoint, space.build(design), config.eval);
  AttributionResult result = attribute(design, outputs, config.output_kernel, config.workers);
  result.grid = space.grid();
  return {std::move(design), std::move(outputs), std::move(result)};
}

}  // namespace hsicx
