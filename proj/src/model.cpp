#include "hsicx/model.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "hsicx/error.hpp"
#include "hsicx/parallel.hpp"
#include "hsicx/perturb.hpp"
#include "hsicx/protocol.hpp"

namespace hsicx {

std::optional<std::size_t> Endpoint::output_arity() const {
  std::lock_guard lock(arity_mutex_);
  return arity_;
}

bool Endpoint::record_arity(std::size_t arity) {
  std::lock_guard lock(arity_mutex_);
  if (!arity_) arity_ = arity;
  return *arity_ == arity;
}

Outputs evaluate_batch(Endpoint& endpoint, const InputBatch& inputs, const EvaluateOptions& options) {
  if (inputs.rows.empty()) throw InvalidArgument("evaluate_batch needs at least one input");
  if (options.batch_limit == 0) throw InvalidArgument("batch limit must be >= 1");
  const std::size_t n = inputs.rows.size();
  const std::size_t chunks = (n + options.batch_limit - 1) / options.batch_limit;
  const std::size_t workers =
      std::max<std::size_t>(1, std::min({options.workers, endpoint.max_concurrency(), chunks}));
  std::vector<Outputs> results(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t first = c * options.batch_limit;
    const std::size_t count = std::min(options.batch_limit, n - first);
    InputBatch chunk;
    chunk.shape = inputs.shape;
    chunk.rows.assign(inputs.rows.begin() + static_cast<std::ptrdiff_t>(first),
                      inputs.rows.begin() + static_cast<std::ptrdiff_t>(first + count));
    Outputs out;
    try {
      out = endpoint.evaluate_chunk(chunk, c % workers);
    } catch (const EndpointFailure& e) {
      throw TransportError(c, e.what());
    } catch (const ProtocolError& e) {
      throw TransportError(c, std::string("malformed response: ") + e.what());
    }
    if (static_cast<std::size_t>(out.rows()) != count) {
      throw TransportError(c, "expected " + std::to_string(count) + " outputs, got " + std::to_string(out.rows()));
    }
    if (out.cols() == 0) throw TransportError(c, "empty output rows");
    if (!out.allFinite()) throw TransportError(c, "model returned NaN or Inf");
    if (!endpoint.record_arity(static_cast<std::size_t>(out.cols()))) {
      throw TransportError(c, "output arity changed to " + std::to_string(out.cols()));
    }
    results[c] = std::move(out);
  });
  const auto cols = results.front().cols();
  Outputs all(static_cast<Eigen::Index>(n), cols);
  Eigen::Index row = 0;
  for (const auto& r : results) {
    if (r.cols() != cols) throw TransportError(0, "chunks disagree on output arity");
    all.middleRows(row, r.rows()) = r;
    row += r.rows();
  }
  return all;
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

namespace {

enum class BuiltinKind { PatchSum, PatchImageMean, Xor, Additive, Constant, Mean };

std::vector<double> parse_list(std::string_view text, std::string_view key) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    const auto token = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(v)) {
      throw InvalidArgument("cannot parse parameter " + std::string(key) + "='" + std::string(text) + "'");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

double param_number(const ParamMap& params, std::string_view key, double fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  const auto values = parse_list(it->second, key);
  if (values.size() != 1) throw InvalidArgument("parameter " + std::string(key) + " takes one value");
  return values[0];
}

std::size_t param_index(const ParamMap& params, std::string_view key, std::size_t fallback) {
  const double v = param_number(params, key, static_cast<double>(fallback));
  if (v < 0 || v != std::floor(v)) throw InvalidArgument("parameter " + std::string(key) + " must be an index");
  return static_cast<std::size_t>(v);
}

class BuiltinModel final : public Endpoint {
 public:
  BuiltinModel(BuiltinKind kind, std::string name, const ParamMap& params, std::optional<Grid> grid)
      : kind_(kind), name_(std::move(name)), grid_(grid) {
    for (const auto& [key, value] : params) {
      if (!allowed(key)) throw InvalidArgument("builtin " + name_ + " does not take parameter '" + key + "'");
    }
    if (const auto it = params.find("grid"); it != params.end()) grid_ = parse_grid(it->second);
    if (const auto it = params.find("w"); it != params.end()) weights_ = parse_list(it->second, "w");
    i_ = param_index(params, "i", 0);
    j_ = param_index(params, "j", 1);
    a_ = param_number(params, "a", 1.0);
    b_ = param_number(params, "b", 1.0);
    c_ = param_number(params, "c", 0.0);
    if ((kind_ == BuiltinKind::Xor || kind_ == BuiltinKind::Additive) && i_ == j_) {
      throw InvalidArgument("builtin " + name_ + " needs two distinct cells i and j");
    }
    if (kind_ == BuiltinKind::PatchSum && weights_.empty()) {
      throw InvalidArgument("builtin patch-sum needs weights, e.g. patch-sum?w=3,5,7");
    }
    if (kind_ == BuiltinKind::PatchImageMean && !weights_.empty()) {
      double total = 0.0;
      for (double w : weights_) total += w;
      if (total == 0.0) throw InvalidArgument("patch-image-mean weights must not sum to zero");
    }
  }

  std::string describe() const override { return "builtin:" + name_; }
  std::size_t max_concurrency() const override { return std::numeric_limits<std::size_t>::max(); }

  Outputs evaluate_chunk(const InputBatch& chunk, std::size_t) override {
    Outputs out(static_cast<Eigen::Index>(chunk.rows.size()), 1);
    for (std::size_t r = 0; r < chunk.rows.size(); ++r) out(static_cast<Eigen::Index>(r), 0) = evaluate(chunk, r);
    return out;
  }

 private:
  bool allowed(std::string_view key) const {
    if (key == "grid") return true;
    switch (kind_) {
      case BuiltinKind::PatchSum:
      case BuiltinKind::PatchImageMean: return key == "w";
      case BuiltinKind::Xor: return key == "i" || key == "j";
      case BuiltinKind::Additive: return key == "i" || key == "j" || key == "a" || key == "b";
      case BuiltinKind::Constant: return key == "c";
      case BuiltinKind::Mean: return false;
    }
    return false;
  }

  std::vector<double> features(const InputBatch& chunk, std::size_t r) const {
    const auto& row = chunk.rows[r];
    if (!chunk.shape) return row;
    if (!grid_) throw InvalidArgument("builtin " + name_ + " needs a grid to read image inputs");
    return cell_means(row, *chunk.shape, *grid_);
  }

  const double& cell(const std::vector<double>& z, std::size_t i) const {
    if (i >= z.size()) {
      throw InvalidArgument("builtin " + name_ + " reads cell " + std::to_string(i) + " of a " +
                            std::to_string(z.size()) + "-cell input");
    }
    return z[i];
  }

  double evaluate(const InputBatch& chunk, std::size_t r) const {
    if (kind_ == BuiltinKind::Mean) return mean_of(chunk.rows[r]);
    if (kind_ == BuiltinKind::Constant) return c_;
    const auto z = features(chunk, r);
    switch (kind_) {
      case BuiltinKind::PatchSum: {
        check_width(z);
        double acc = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) acc += weights_[i] * z[i];
        return acc;
      }
      case BuiltinKind::PatchImageMean: {
        if (!weights_.empty()) check_width(z);
        double acc = 0.0;
        double total = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
          const double w = weights_.empty() ? 1.0 : weights_[i];
          acc += w * z[i];
          total += w;
        }
        return acc / total;
      }
      case BuiltinKind::Xor: return (cell(z, i_) >= 0.5) != (cell(z, j_) >= 0.5) ? 1.0 : 0.0;
      case BuiltinKind::Additive: {
        const double zj = cell(z, j_);
        return a_ * cell(z, i_) + b_ * zj * zj;
      }
      default: return 0.0;
    }
  }

  void check_width(const std::vector<double>& z) const {
    if (z.size() != weights_.size()) {
      throw InvalidArgument("builtin " + name_ + " has " + std::to_string(weights_.size()) + " weights for a " +
                            std::to_string(z.size()) + "-cell input");
    }
  }

  BuiltinKind kind_;
  std::string name_;
  std::optional<Grid> grid_;
  std::vector<double> weights_;
  std::size_t i_ = 0;
  std::size_t j_ = 1;
  double a_ = 1.0;
  double b_ = 1.0;
  double c_ = 0.0;
};

ParamMap parse_query(std::string_view query) {
  ParamMap params;
  std::size_t start = 0;
  while (start < query.size()) {
    const auto amp = query.find('&', start);
    const auto item = query.substr(start, amp == std::string_view::npos ? std::string_view::npos : amp - start);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw InvalidArgument("model parameter '" + std::string(item) + "' is not key=value");
    }
    params.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
    if (amp == std::string_view::npos) break;
    start = amp + 1;
  }
  return params;
}

}  // namespace

std::vector<BuiltinDescriptor> builtin_catalog() {
  return {
      {"patch-sum", "w=w1,...,wd", "sum_i w_i z_i; linear, ground-truth ranking by |w_i|"},
      {"xor", "i=0&j=1", "[z_i >= 1/2] xor [z_j >= 1/2]; pure pairwise interaction"},
      {"additive", "i=0&j=1&a=1&b=1", "a z_i + b z_j^2 (additive)"},
      {"constant", "c=0", "always c; degenerate"},
      {"patch-image-mean", "w=w1,...,wd (optional)", "sum_i w_i z_i / sum_i w_i; weighted mean cell intensity"},
      {"mean", "", "mean of the raw input values; reference for protocol round trips"},
  };
}

std::unique_ptr<Endpoint> make_builtin(std::string_view name, const ParamMap& params, std::optional<Grid> grid) {
  static const std::map<std::string, BuiltinKind, std::less<>> kinds = {
      {"patch-sum", BuiltinKind::PatchSum}, {"patch-image-mean", BuiltinKind::PatchImageMean},
      {"xor", BuiltinKind::Xor},            {"additive", BuiltinKind::Additive},
      {"constant", BuiltinKind::Constant},  {"mean", BuiltinKind::Mean},
  };
  const auto it = kinds.find(name);
  if (it == kinds.end()) throw InvalidArgument("unknown builtin model '" + std::string(name) + "'");
  return std::make_unique<BuiltinModel>(it->second, std::string(name), params, grid);
}

std::unique_ptr<Endpoint> open_endpoint(std::string_view spec, const EndpointOptions& options) {
  if (options.workers == 0) throw InvalidArgument("endpoint needs at least one worker");
  if (spec.starts_with("builtin:")) {
    const auto body = spec.substr(8);
    const auto q = body.find('?');
    const auto name = body.substr(0, q);
    const ParamMap params = q == std::string_view::npos ? ParamMap{} : parse_query(body.substr(q + 1));
    return make_builtin(name, params, options.grid);
  }
  if (spec.starts_with("cmd:")) {
    if (spec.size() == 4) throw InvalidArgument("cmd: model spec needs a command");
    return make_subprocess_endpoint(std::string(spec.substr(4)), options.timeout, options.workers);
  }
  if (spec.starts_with("http://")) return make_http_endpoint(std::string(spec), options.timeout, options.workers);
  throw InvalidArgument("model spec must start with builtin:, cmd: or http://, got '" + std::string(spec) + "'");
}

}  // namespace hsicx
