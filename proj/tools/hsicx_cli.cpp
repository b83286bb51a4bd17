#include <csignal>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsicx/design.hpp"
#include "hsicx/error.hpp"
#include "hsicx/hsic.hpp"
#include "hsicx/metrics.hpp"
#include "hsicx/model.hpp"
#include "hsicx/pipeline.hpp"
#include "hsicx/render.hpp"
#include "hsicx/serialize.hpp"
#include "run_config.hpp"

namespace {

using hsicx::cli::RunConfig;

constexpr std::size_t kPixelsPerCell = 32;

enum ExitCode : int { kOk = 0, kInvalid = 1, kTransport = 2, kIo = 3 };

int report(int code, const std::string& kind, const std::string& message,
           std::optional<std::size_t> chunk = std::nullopt) {
  nlohmann::json line{{"error", kind}, {"exit", code}, {"message", message}};
  if (chunk) line["chunk"] = *chunk;
  std::cerr << line.dump() << '\n';
  return code;
}

// Flags write into `flags`; only options actually given on the command line
// are copied over the defaults / config file.
class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description)
      : app_(parent.add_subcommand(name, description)) {}

  CLI::App* app() const { return app_; }

  template <typename T>
  CLI::Option* bind(const std::string& flag, T RunConfig::*member, const std::string& description) {
    CLI::Option* opt;
    if constexpr (std::is_same_v<T, bool>)
      opt = app_->add_flag(flag, flags_.*member, description);
    else
      opt = app_->add_option(flag, flags_.*member, description);
    overlays_.push_back([opt, member](RunConfig& dst, const RunConfig& src) {
      if (opt->count() > 0) dst.*member = src.*member;
    });
    return opt;
  }

  void add_common() {
    app_->add_option("--config", config_file_, "JSON run config; flags override its keys");
    app_->add_option("--save-config", save_config_, "write the effective run config as JSON");
    bind("--model", &RunConfig::model, "builtin:<name>?k=v, cmd:<command> or http://host:port/path");
    bind("--input", &RunConfig::input, "input image (.png or .hsxt); cell space when omitted");
    bind("--grid", &RunConfig::grid, "patch grid WxH (default 7x7)");
    bind("--baseline", &RunConfig::baseline, "baseline value, or one value per channel: 0.1,0.2,0.3");
    bind("--upsampling", &RunConfig::upsampling, "nearest or bilinear");
    bind("--workers", &RunConfig::workers, "concurrent model requests and estimator threads");
    bind("--batch-limit", &RunConfig::batch_limit, "max inputs per model request");
    bind("--timeout", &RunConfig::timeout_ms, "per-request timeout in ms");
  }

  void add_sampling() {
    bind("--samples", &RunConfig::samples, "number of perturbation masks p");
    bind("--sampler", &RunConfig::sampler, "lhs or bernoulli");
    bind("--prob", &RunConfig::prob, "Bernoulli keep probability");
    bind("--jitter", &RunConfig::jitter, "LHS: random point inside each stratum");
    bind("--seed", &RunConfig::seed, "RNG seed");
    bind("--exhaustive", &RunConfig::exhaustive, "use all 2^d masks");
    bind("--output-kernel", &RunConfig::output_kernel, "rbf:median, rbf:median-norm or rbf:<sigma>");
    bind("--save-design", &RunConfig::save_design, "write the mask design (.json or binary)");
    bind("--load-design", &RunConfig::load_design, "reuse a saved mask design");
  }

  RunConfig resolve() const {
    RunConfig config;
    if (!config_file_.empty()) {
      nlohmann::json doc;
      try {
        doc = hsicx::read_json(config_file_);
      } catch (const hsicx::IoError& e) {
        throw hsicx::InvalidArgument(std::string("--config: ") + e.what());
      }
      hsicx::cli::merge_json(config, doc);
    }
    for (const auto& overlay : overlays_) overlay(config, flags_);
    if (config.model.empty()) throw hsicx::InvalidArgument("--model is required");
    if (!save_config_.empty()) hsicx::write_json(save_config_, hsicx::cli::to_json(config));
    return config;
  }

 private:
  CLI::App* app_;
  RunConfig flags_;
  std::string config_file_;
  std::string save_config_;
  std::vector<std::function<void(RunConfig&, const RunConfig&)>> overlays_;
};

void emit_json(const std::string& path, const nlohmann::json& doc) {
  if (path.empty())
    std::cout << doc.dump() << '\n';
  else
    hsicx::write_json(path, doc);
}

void emit_text(const std::string& path, const std::string& text) {
  if (path.empty())
    std::cout << text;
  else
    hsicx::write_text(path, text);
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

std::vector<std::size_t> parse_list(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw hsicx::InvalidArgument(what + ": bad entry '" + item + "'");
    }
  }
  if (out.empty()) throw hsicx::InvalidArgument(what + " is empty");
  return out;
}

struct Session {
  RunConfig config;
  hsicx::Grid grid;
  std::unique_ptr<hsicx::Endpoint> endpoint;
  std::optional<hsicx::PerturbationSpace> space;

  explicit Session(RunConfig c, std::optional<hsicx::Grid> forced_grid = std::nullopt) : config(std::move(c)) {
    grid = forced_grid ? *forced_grid : hsicx::cli::resolve_grid(config);
    auto options = hsicx::cli::endpoint_options(config);
    options.grid = grid;
    space = hsicx::cli::perturbation_space(config, grid);
    endpoint = hsicx::open_endpoint(config.model, options);
  }

  nlohmann::json describe() const {
    nlohmann::json doc{{"model", config.model}, {"grid", hsicx::to_string(grid)}, {"baseline", config.baseline}};
    if (!config.input.empty()) {
      doc["input"] = config.input;
      doc["upsampling"] = config.upsampling;
    }
    return doc;
  }

  void write_heatmap(const std::vector<double>& scores) const {
    if (config.out_heatmap.empty()) return;
    std::size_t w = grid.width * kPixelsPerCell, h = grid.height * kPixelsPerCell;
    if (space->is_image()) {
      w = space->input().width;
      h = space->input().height;
    }
    hsicx::write_heatmap_png(config.out_heatmap, scores, grid, w, h, !config.heatmap_gray);
  }
};

hsicx::ExplainRun run_explain(Session& session) {
  const auto& config = session.config;
  const auto explain = hsicx::cli::explain_config(config);
  std::optional<hsicx::MaskDesign> preset;
  if (!config.load_design.empty()) preset = hsicx::load_design(config.load_design);
  auto run = hsicx::explain(*session.endpoint, *session.space, explain, preset);
  if (!config.save_design.empty()) hsicx::save_design(run.design, config.save_design);
  run.result.config.update(session.describe());
  return run;
}

int cmd_explain(const RunConfig& config) {
  Session session(config);
  auto run = run_explain(session);
  print_warnings(run.result.warnings);
  emit_json(config.out_scores, hsicx::scores_to_json(run.result));
  if (!config.out_csv.empty()) hsicx::write_text(config.out_csv, hsicx::scores_to_csv(run.result));
  session.write_heatmap(run.result.scores);
  return kOk;
}

int cmd_interactions(const RunConfig& config) {
  Session session(config);
  auto run = run_explain(session);
  const auto matrix = hsicx::interaction_matrix(run.design, run.outputs, hsicx::cli::explain_config(config).output_kernel,
                                                nullptr, config.workers);
  print_warnings(matrix.warnings);
  const auto top = hsicx::top_interactions(matrix, config.top_k, config.threshold);
  auto doc = hsicx::interactions_to_json(matrix, session.grid, top, run.result.config);
  doc["scores"] = run.result.scores;
  emit_json(config.out_scores, doc);
  if (!config.out_csv.empty()) hsicx::write_text(config.out_csv, hsicx::interactions_to_csv(matrix));
  return kOk;
}

int cmd_fidelity(const RunConfig& config) {
  if (config.scores.empty()) throw hsicx::InvalidArgument("--scores is required");
  const auto scores = hsicx::scores_from_json(hsicx::read_json(config.scores));
  if (!config.grid.empty()) {
    const auto grid = hsicx::parse_grid(config.grid);
    if (grid.width != scores.grid.width || grid.height != scores.grid.height)
      throw hsicx::InvalidArgument("grid mismatch: scores are " + hsicx::to_string(scores.grid) + ", --grid is " +
                                   config.grid);
  }
  hsicx::FidelityConfig fc;
  fc.steps = config.steps;
  fc.subsets = config.subsets;
  fc.k_fraction = config.k_fraction;
  fc.seed = config.seed;
  fc.deletion = fc.insertion = fc.mu_fidelity = false;
  std::stringstream in(config.metrics);
  std::string name;
  while (std::getline(in, name, ',')) {
    if (name == "deletion")
      fc.deletion = true;
    else if (name == "insertion")
      fc.insertion = true;
    else if (name == "mufidelity")
      fc.mu_fidelity = true;
    else
      throw hsicx::InvalidArgument("unknown metric '" + name + "'");
  }

  Session session(config, scores.grid);
  auto report = hsicx::evaluate_fidelity(*session.endpoint, *session.space, scores.scores, fc,
                                         hsicx::cli::evaluate_options(config));
  if (!report.mu_fidelity_error.empty()) std::cerr << "warning: " << report.mu_fidelity_error << '\n';
  auto doc = hsicx::fidelity_to_json(report);
  doc["config"].update(session.describe());
  emit_json(config.out_scores, doc);
  if (!config.out_csv.empty()) hsicx::write_text(config.out_csv, hsicx::fidelity_to_csv(report));
  if (!config.out_plot.empty()) {
    std::vector<hsicx::PlotSeries> series;
    if (report.deletion) series.push_back({report.deletion->fractions, report.deletion->scores, {200, 40, 40}});
    if (report.insertion) series.push_back({report.insertion->fractions, report.insertion->scores, {40, 90, 200}});
    if (series.empty()) throw hsicx::InvalidArgument("--out-plot needs the deletion or insertion metric");
    hsicx::write_line_plot_png(config.out_plot, series);
  }
  return kOk;
}

int cmd_converge(const RunConfig& config) {
  const auto schedule = parse_list(config.schedule, "--schedule");
  if (config.seeds == 0) throw hsicx::InvalidArgument("--seeds must be >= 1");
  Session session(config);
  const auto table = hsicx::convergence_table(*session.endpoint, *session.space, hsicx::cli::explain_config(config),
                                              schedule, config.reference, config.seeds);
  emit_text(config.out_csv, hsicx::convergence_to_csv(table));
  if (!config.out_plot.empty()) {
    hsicx::PlotSeries median{{}, {}, {40, 90, 200}}, q1{{}, {}, {160, 160, 160}}, q3{{}, {}, {160, 160, 160}};
    for (const auto& row : table) {
      const double x = std::log2(static_cast<double>(row.samples));
      median.x.push_back(x);
      median.y.push_back(row.median);
      q1.x.push_back(x);
      q1.y.push_back(row.q1);
      q3.x.push_back(x);
      q3.y.push_back(row.q3);
    }
    hsicx::write_line_plot_png(config.out_plot, {q1, q3, median});
  }
  return kOk;
}

int cmd_baseline(const RunConfig& config) {
  Session session(config);
  const auto eval = hsicx::cli::evaluate_options(config);
  hsicx::AttributionResult result;
  if (config.method == "rise") {
    const auto explain = hsicx::cli::explain_config(config);
    const auto design = config.load_design.empty() ? hsicx::make_design(explain, session.grid.cells())
                                                   : hsicx::load_design(config.load_design);
    if (!config.save_design.empty()) hsicx::save_design(design, config.save_design);
    result = hsicx::rise_attribution(*session.endpoint, *session.space, design, eval);
  } else if (config.method == "occlusion") {
    result = hsicx::occlusion_attribution(*session.endpoint, *session.space, eval);
  } else {
    throw hsicx::InvalidArgument("--method must be rise or occlusion");
  }
  result.config.update(session.describe());
  print_warnings(result.warnings);
  emit_json(config.out_scores, hsicx::scores_to_json(result));
  if (!config.out_csv.empty()) hsicx::write_text(config.out_csv, hsicx::scores_to_csv(result));
  session.write_heatmap(result.scores);
  return kOk;
}

int cmd_models() {
  for (const auto& b : hsicx::builtin_catalog())
    std::cout << "builtin:" << b.name << (b.params.empty() ? "" : "?" + b.params) << "\t" << b.summary << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);

  CLI::App app{"hsicx: HSIC attributions for black-box models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hsicx 0.1.0");

  Command explain(app, "explain", "per-patch HSIC attribution scores");
  explain.add_common();
  explain.add_sampling();
  explain.bind("--out-scores", &RunConfig::out_scores, "scores JSON (stdout when omitted)");
  explain.bind("--out-csv", &RunConfig::out_csv, "scores CSV");
  explain.bind("--out-heatmap", &RunConfig::out_heatmap, "heatmap PNG");
  explain.bind("--gray", &RunConfig::heatmap_gray, "greyscale heatmap");

  Command interactions(app, "interactions", "pairwise interaction indices");
  interactions.add_common();
  interactions.add_sampling();
  interactions.bind("--top-k", &RunConfig::top_k, "pairs to report (0 = all)");
  interactions.bind("--threshold", &RunConfig::threshold, "report pairs above this value");
  interactions.bind("--out-scores", &RunConfig::out_scores, "interaction JSON (stdout when omitted)");
  interactions.bind("--out-csv", &RunConfig::out_csv, "CSV of every evaluated pair");

  Command fidelity(app, "fidelity", "deletion, insertion and muFidelity of saved scores");
  fidelity.add_common();
  fidelity.bind("--seed", &RunConfig::seed, "RNG seed for muFidelity subsets");
  fidelity.bind("--scores", &RunConfig::scores, "scores JSON written by explain or baseline");
  fidelity.bind("--metrics", &RunConfig::metrics, "comma list of deletion, insertion, mufidelity");
  fidelity.bind("--steps", &RunConfig::steps, "curve steps (0 = one per cell)");
  fidelity.bind("--subsets", &RunConfig::subsets, "muFidelity subsets");
  fidelity.bind("--k-fraction", &RunConfig::k_fraction, "muFidelity subset size as a share of cells");
  fidelity.bind("--out-report", &RunConfig::out_scores, "report JSON (stdout when omitted)");
  fidelity.bind("--out-csv", &RunConfig::out_csv, "curve CSV");
  fidelity.bind("--out-plot", &RunConfig::out_plot, "curve plot PNG");

  Command converge(app, "converge", "Spearman convergence of scores against a large-p reference");
  converge.add_common();
  converge.add_sampling();
  converge.bind("--schedule", &RunConfig::schedule, "comma list of sample counts");
  converge.bind("--reference", &RunConfig::reference, "reference sample count");
  converge.bind("--seeds", &RunConfig::seeds, "repetitions per sample count");
  converge.bind("--out-csv", &RunConfig::out_csv, "table CSV (stdout when omitted)");
  converge.bind("--out-plot", &RunConfig::out_plot, "median / quartile plot PNG");

  Command baseline(app, "baseline", "RISE or occlusion scores");
  baseline.add_common();
  baseline.add_sampling();
  baseline.bind("--method", &RunConfig::method, "rise or occlusion");
  baseline.bind("--out-scores", &RunConfig::out_scores, "scores JSON (stdout when omitted)");
  baseline.bind("--out-csv", &RunConfig::out_csv, "scores CSV");
  baseline.bind("--out-heatmap", &RunConfig::out_heatmap, "heatmap PNG");
  baseline.bind("--gray", &RunConfig::heatmap_gray, "greyscale heatmap");

  auto* models = app.add_subcommand("models", "list builtin models");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(kInvalid, "invalid-config", e.what());
  }

  try {
    if (*models) return cmd_models();
    if (*explain.app()) return cmd_explain(explain.resolve());
    if (*interactions.app()) return cmd_interactions(interactions.resolve());
    if (*fidelity.app()) return cmd_fidelity(fidelity.resolve());
    if (*converge.app()) return cmd_converge(converge.resolve());
    if (*baseline.app()) return cmd_baseline(baseline.resolve());
  } catch (const hsicx::TransportError& e) {
    return report(kTransport, "transport", e.what(), e.chunk());
  } catch (const hsicx::IoError& e) {
    return report(kIo, "io", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report(kIo, "io", e.what());
  } catch (const hsicx::InvalidArgument& e) {
    return report(kInvalid, "invalid-config", e.what());
  } catch (const hsicx::UndefinedCorrelation& e) {
    return report(kInvalid, "undefined", e.what());
  } catch (const std::exception& e) {
    return report(kInvalid, "error", e.what());
  }
  return kInvalid;
}
