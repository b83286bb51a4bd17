#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "hsicx/batch.hpp"
#include "hsicx/kernel.hpp"

namespace hsicx {

/// Violation of the NDJSON framing or schema.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One JSON document per line. Requests look like
//   {"id":7,"inputs":[[0.0,1.0],[1.0,1.0]]}
// with an extra "shape":[H,W,C] when the rows are flattened images; responses
// look like {"id":7,"outputs":[[0.5],[1.0]]}. Doubles use shortest round-trip
// formatting, so values survive the trip bit for bit. Encoders return the
// document without its terminating '\n'.

std::string encode_request(std::uint64_t id, const InputBatch& batch);

struct Request {
  std::uint64_t id = 0;
  InputBatch batch;
};
Request decode_request(std::string_view line);

std::string encode_response(std::uint64_t id, const Outputs& outputs);

/// Parses a response and checks its id and row count; rows must share one length.
Outputs decode_response(std::string_view line, std::uint64_t expected_id, std::size_t expected_rows);

/// Server side helper: decodes one request line, runs `model` and encodes the reply.
std::string serve_line(std::string_view line, const std::function<Outputs(const InputBatch&)>& model);

}  // namespace hsicx
