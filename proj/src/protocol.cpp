#include "hsicx/protocol.hpp"

#include <cmath>

#include <json.hpp>

#include "hsicx/error.hpp"

namespace hsicx {

namespace {

std::string_view strip_newline(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

nlohmann::json parse_line(std::string_view line) {
  line = strip_newline(line);
  if (line.find('\n') != std::string_view::npos) throw ProtocolError("more than one line in a message");
  auto doc = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
  if (doc.is_discarded()) throw ProtocolError("not a JSON document");
  if (!doc.is_object()) throw ProtocolError("message is not a JSON object");
  return doc;
}

std::uint64_t read_id(const nlohmann::json& doc) {
  const auto it = doc.find("id");
  if (it == doc.end() || !it->is_number_unsigned()) throw ProtocolError("missing or non-integer \"id\"");
  return it->get<std::uint64_t>();
}

std::vector<double> read_row(const nlohmann::json& row, const char* what) {
  if (!row.is_array()) throw ProtocolError(std::string(what) + " row is not an array");
  std::vector<double> out;
  out.reserve(row.size());
  for (const auto& v : row) {
    if (!v.is_number()) throw ProtocolError(std::string(what) + " contain a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::string encode_request(std::uint64_t id, const InputBatch& batch) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& row : batch.rows) {
    if (batch.shape && row.size() != batch.shape->size()) throw InvalidArgument("input row does not match shape");
    for (double v : row) {
      if (!std::isfinite(v)) throw InvalidArgument("inputs contain NaN or Inf");
    }
    inputs.push_back(row);
  }
  nlohmann::json doc = {{"id", id}, {"inputs", std::move(inputs)}};
  if (batch.shape) doc["shape"] = {batch.shape->height, batch.shape->width, batch.shape->channels};
  return doc.dump();
}

Request decode_request(std::string_view line) {
  const auto doc = parse_line(line);
  Request req;
  req.id = read_id(doc);
  const auto it = doc.find("inputs");
  if (it == doc.end() || !it->is_array()) throw ProtocolError("missing \"inputs\" array");
  for (const auto& row : *it) req.batch.rows.push_back(read_row(row, "inputs"));
  if (const auto s = doc.find("shape"); s != doc.end()) {
    if (!s->is_array() || s->size() != 3) throw ProtocolError("\"shape\" must be [H,W,C]");
    for (const auto& v : *s) {
      if (!v.is_number_unsigned()) throw ProtocolError("\"shape\" entries must be non-negative integers");
    }
    req.batch.shape = Shape{(*s)[0].get<std::size_t>(), (*s)[1].get<std::size_t>(), (*s)[2].get<std::size_t>()};
    for (const auto& row : req.batch.rows) {
      if (row.size() != req.batch.shape->size()) throw ProtocolError("input row does not match \"shape\"");
    }
  }
  return req;
}

std::string encode_response(std::uint64_t id, const Outputs& outputs) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < outputs.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < outputs.cols(); ++c) row.push_back(outputs(r, c));
    rows.push_back(std::move(row));
  }
  return nlohmann::json{{"id", id}, {"outputs", std::move(rows)}}.dump();
}

Outputs decode_response(std::string_view line, std::uint64_t expected_id, std::size_t expected_rows) {
  const auto doc = parse_line(line);
  const auto id = read_id(doc);
  if (id != expected_id) {
    throw ProtocolError("response id " + std::to_string(id) + " does not match request id " +
                        std::to_string(expected_id));
  }
  const auto it = doc.find("outputs");
  if (it == doc.end() || !it->is_array()) throw ProtocolError("missing \"outputs\" array");
  if (it->size() != expected_rows) {
    throw ProtocolError("expected " + std::to_string(expected_rows) + " outputs, got " + std::to_string(it->size()));
  }
  Outputs out;
  for (std::size_t r = 0; r < expected_rows; ++r) {
    const auto row = read_row((*it)[r], "outputs");
    if (row.empty()) throw ProtocolError("empty output row");
    if (r == 0) out.resize(static_cast<Eigen::Index>(expected_rows), static_cast<Eigen::Index>(row.size()));
    if (static_cast<Eigen::Index>(row.size()) != out.cols()) throw ProtocolError("output rows differ in length");
    for (std::size_t c = 0; c < row.size(); ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  return out;
}

std::string serve_line(std::string_view line, const std::function<Outputs(const InputBatch&)>& model) {
  const auto req = decode_request(line);
  return encode_response(req.id, model(req.batch));
}

}  // namespace hsicx
