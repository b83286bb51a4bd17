#include <cstring>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hsicx/design.hpp"
#include "hsicx/error.hpp"
#include "hsicx/hsic.hpp"
#include "hsicx/kernel.hpp"
#include "hsicx/metrics.hpp"
#include "hsicx/model.hpp"
#include "hsicx/pipeline.hpp"
#include "hsicx/serialize.hpp"

namespace py = pybind11;

namespace {

using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

MaskArray to_array(const hsicx::MaskDesign& design) {
  MaskArray out({design.samples(), design.patches()});
  std::memcpy(out.mutable_data(), design.bits().data(), design.bits().size());
  return out;
}

hsicx::MaskDesign from_array(const MaskArray& masks) {
  if (masks.ndim() != 2) throw hsicx::InvalidArgument("masks must be a 2-d array");
  const auto p = static_cast<std::size_t>(masks.shape(0));
  const auto d = static_cast<std::size_t>(masks.shape(1));
  std::vector<std::uint8_t> bits(masks.data(), masks.data() + p * d);
  return hsicx::MaskDesign(p, d, hsicx::Sampler{}, 0, std::move(bits));
}

hsicx::Outputs as_outputs(const Eigen::Ref<const hsicx::Matrix>& y) { return y; }

py::dict to_dict(const hsicx::AttributionResult& result) {
  py::dict out;
  out["scores"] = result.scores;
  out["grid"] = py::make_tuple(result.grid.width, result.grid.height);
  out["warnings"] = result.warnings;
  out["json"] = hsicx::scores_to_json(result).dump();
  return out;
}

}  // namespace

PYBIND11_MODULE(_hsicx, m) {
  m.doc() = "HSIC attributions for black-box models";

  py::register_exception<hsicx::InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<hsicx::TransportError>(m, "TransportError", PyExc_RuntimeError);
  py::register_exception<hsicx::UndefinedCorrelation>(m, "UndefinedCorrelation", PyExc_ArithmeticError);
  py::register_exception<hsicx::IoError>(m, "IoError", PyExc_OSError);

  m.def(
      "sample_lhs_masks",
      [](std::size_t p, std::size_t d, std::uint64_t seed, bool jitter) {
        return to_array(hsicx::sample_lhs_masks(p, d, seed, jitter));
      },
      py::arg("p"), py::arg("d"), py::arg("seed") = 0, py::arg("jitter") = false);
  m.def(
      "sample_bernoulli_masks",
      [](std::size_t p, std::size_t d, double prob, std::uint64_t seed) {
        return to_array(hsicx::sample_bernoulli_masks(p, d, prob, seed));
      },
      py::arg("p"), py::arg("d"), py::arg("prob") = 0.5, py::arg("seed") = 0);
  m.def(
      "exhaustive_masks", [](std::size_t d) { return to_array(hsicx::exhaustive_design(d)); }, py::arg("d"));

  m.def(
      "attribute",
      [](const MaskArray& masks, const Eigen::Ref<const hsicx::Matrix>& outputs, const std::string& kernel,
         std::size_t workers) {
        py::gil_scoped_release release;
        return hsicx::attribute(from_array(masks), as_outputs(outputs), hsicx::parse_output_kernel(kernel), workers)
            .scores;
      },
      py::arg("masks"), py::arg("outputs"), py::arg("output_kernel") = "rbf:median", py::arg("workers") = 1,
      "Per-patch HSIC scores for a p x d mask array and p x k outputs.");
  m.def(
      "hsic_subset",
      [](const MaskArray& masks, const Eigen::Ref<const hsicx::Matrix>& outputs, std::vector<std::size_t> subset,
         const std::string& kernel) {
        return hsicx::hsic_subset(from_array(masks), as_outputs(outputs), subset, hsicx::parse_output_kernel(kernel));
      },
      py::arg("masks"), py::arg("outputs"), py::arg("subset"), py::arg("output_kernel") = "rbf:median");
  m.def(
      "interaction",
      [](const MaskArray& masks, const Eigen::Ref<const hsicx::Matrix>& outputs, std::size_t i, std::size_t j,
         const std::string& kernel) {
        return hsicx::interaction(from_array(masks), as_outputs(outputs), i, j, hsicx::parse_output_kernel(kernel));
      },
      py::arg("masks"), py::arg("outputs"), py::arg("i"), py::arg("j"), py::arg("output_kernel") = "rbf:median");
  m.def(
      "interaction_matrix",
      [](const MaskArray& masks, const Eigen::Ref<const hsicx::Matrix>& outputs, const std::string& kernel,
         std::size_t workers) -> hsicx::Matrix {
        py::gil_scoped_release release;
        return hsicx::interaction_matrix(from_array(masks), as_outputs(outputs), hsicx::parse_output_kernel(kernel),
                                         nullptr, workers)
            .entries;
      },
      py::arg("masks"), py::arg("outputs"), py::arg("output_kernel") = "rbf:median", py::arg("workers") = 1);

  m.def(
      "pearson",
      [](const std::vector<double>& a, const std::vector<double>& b) { return hsicx::pearson(a, b); }, py::arg("a"),
      py::arg("b"));
  m.def(
      "spearman",
      [](const std::vector<double>& a, const std::vector<double>& b) { return hsicx::spearman(a, b); }, py::arg("a"),
      py::arg("b"));

  m.def(
      "explain",
      [](const std::string& model, const std::string& grid, std::size_t samples, std::uint64_t seed,
         const std::string& sampler, const std::string& kernel, std::size_t workers) {
        hsicx::ExplainRun run = [&] {
          py::gil_scoped_release release;
          const auto g = hsicx::parse_grid(grid);
          hsicx::EndpointOptions options;
          options.grid = g;
          options.workers = workers;
          auto endpoint = hsicx::open_endpoint(model, options);
          hsicx::ExplainConfig config;
          config.samples = samples;
          config.seed = seed;
          config.sampler.kind = hsicx::parse_sampler_kind(sampler);
          config.output_kernel = hsicx::parse_output_kernel(kernel);
          config.workers = workers;
          config.eval.workers = workers;
          return hsicx::explain(*endpoint, hsicx::PerturbationSpace::cells(g), config);
        }();
        return to_dict(run.result);
      },
      py::arg("model"), py::arg("grid") = "7x7", py::arg("samples") = 764, py::arg("seed") = 0,
      py::arg("sampler") = "lhs", py::arg("output_kernel") = "rbf:median", py::arg("workers") = 1,
      "Cell-space attribution of a model spec (builtin:, cmd: or http://).");

  m.def("builtin_models", [] {
    std::vector<std::string> names;
    for (const auto& b : hsicx::builtin_catalog()) names.push_back(b.name);
    return names;
  });
}
