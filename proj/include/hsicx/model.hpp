#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hsicx/batch.hpp"
#include "hsicx/grid.hpp"
#include "hsicx/kernel.hpp"

namespace hsicx {

/// Raised by endpoints when a chunk cannot be evaluated; evaluate_batch turns
/// it into a TransportError carrying the chunk index.
class EndpointFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The black box f. Implementations evaluate one chunk at a time; worker slot
/// `worker` is always below max_concurrency() and never used by two chunks at
/// once.
class Endpoint {
 public:
  virtual ~Endpoint() = default;

  virtual std::string describe() const = 0;
  virtual std::size_t max_concurrency() const { return 1; }
  virtual Outputs evaluate_chunk(const InputBatch& chunk, std::size_t worker) = 0;

  /// Output arity, fixed by the first successful response.
  std::optional<std::size_t> output_arity() const;
  /// Records the arity of a response; false if it differs from the fixed one.
  bool record_arity(std::size_t arity);

 private:
  mutable std::mutex arity_mutex_;
  std::optional<std::size_t> arity_;
};

struct EvaluateOptions {
  std::size_t batch_limit = 256;  // max inputs per request
  std::size_t workers = 1;
};

/// One output row per input, in input order. Inputs are split into chunks of
/// batch_limit; any failing chunk aborts the whole batch with a TransportError
/// naming the lowest failing chunk.
Outputs evaluate_batch(Endpoint& endpoint, const InputBatch& inputs, const EvaluateOptions& options = {});

using ParamMap = std::map<std::string, std::string, std::less<>>;

struct BuiltinDescriptor {
  std::string name;
  std::string params;
  std::string summary;
};

/// Verification fixtures. All builtins read a d-entry cell vector z: the mask
/// row itself, or the per-cell mean intensity of an image input.
std::vector<BuiltinDescriptor> builtin_catalog();

std::unique_ptr<Endpoint> make_builtin(std::string_view name, const ParamMap& params,
                                       std::optional<Grid> grid = std::nullopt);

struct EndpointOptions {
  std::optional<Grid> grid;                  // cell layout for builtins fed with images
  std::chrono::milliseconds timeout{60000};  // per request, external endpoints only
  std::size_t workers = 1;                   // child processes / concurrent HTTP requests
};

/// Opens "builtin:<name>?k=v&k=v", "cmd:<shell command>" or "http://host:port/path".
std::unique_ptr<Endpoint> open_endpoint(std::string_view spec, const EndpointOptions& options = {});

/// Sum in index order divided by the count; shared by the in-process "mean"
/// builtin and the reference echo server.
double mean_of(std::span<const double> values);

std::unique_ptr<Endpoint> make_subprocess_endpoint(std::string command, std::chrono::milliseconds timeout,
                                                   std::size_t workers);
std::unique_ptr<Endpoint> make_http_endpoint(std::string url, std::chrono::milliseconds timeout,
                                             std::size_t workers);

}  // namespace hsicx
