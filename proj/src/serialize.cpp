#include "hsicx/serialize.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "hsicx/error.hpp"

namespace hsicx {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

nlohmann::json scores_to_json(const AttributionResult& result) {
  return {
      {"grid", {result.grid.width, result.grid.height}},
      {"scores", result.scores},
      {"config", result.config},
      {"warnings", result.warnings},
  };
}

AttributionResult scores_from_json(const nlohmann::json& doc) {
  try {
    AttributionResult result;
    const auto& grid = doc.at("grid");
    if (!grid.is_array() || grid.size() != 2) throw InvalidArgument("scores JSON: grid must be [W,H]");
    result.grid = Grid{grid[0].get<std::size_t>(), grid[1].get<std::size_t>()};
    result.scores = doc.at("scores").get<std::vector<double>>();
    if (result.scores.size() != result.grid.cells()) {
      throw InvalidArgument("scores JSON: " + std::to_string(result.scores.size()) + " scores for grid " +
                            to_string(result.grid));
    }
    if (doc.contains("config")) result.config = doc.at("config");
    if (doc.contains("warnings")) result.warnings = doc.at("warnings").get<std::vector<std::string>>();
    return result;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("scores JSON: ") + e.what());
  }
}

std::string scores_to_csv(const AttributionResult& result) {
  std::ostringstream out;
  out << "cell,x,y,score\n";
  for (std::size_t i = 0; i < result.scores.size(); ++i) {
    out << i << ',' << i % result.grid.width << ',' << i / result.grid.width << ',' << format_double(result.scores[i])
        << '\n';
  }
  return out.str();
}

nlohmann::json interactions_to_json(const InteractionMatrix& matrix, const Grid& grid,
                                    const std::vector<InteractionPair>& top, const nlohmann::json& config) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < matrix.entries.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < matrix.entries.cols(); ++j) row.push_back(matrix.entries(i, j));
    rows.push_back(std::move(row));
  }
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : top) pairs.push_back({{"i", p.i}, {"j", p.j}, {"value", p.value}});
  return {
      {"grid", {grid.width, grid.height}},
      {"matrix", std::move(rows)},
      {"top", std::move(pairs)},
      {"config", config},
      {"warnings", matrix.warnings},
  };
}

std::string interactions_to_csv(const InteractionMatrix& matrix) {
  std::ostringstream out;
  out << "i,j,value\n";
  for (auto [i, j] : matrix.pairs) {
    out << i << ',' << j << ','
        << format_double(matrix.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << '\n';
  }
  return out.str();
}

namespace {

nlohmann::json curve_to_json(const Curve& curve) {
  return {{"fractions", curve.fractions}, {"scores", curve.scores}, {"auc", curve.auc}};
}

}  // namespace

nlohmann::json fidelity_to_json(const FidelityReport& report) {
  nlohmann::json doc = {
      {"deletion", report.deletion ? curve_to_json(*report.deletion) : nlohmann::json(nullptr)},
      {"insertion", report.insertion ? curve_to_json(*report.insertion) : nlohmann::json(nullptr)},
      {"muFidelity", report.mu_fidelity ? nlohmann::json(*report.mu_fidelity) : nlohmann::json(nullptr)},
      {"config",
       {
           {"steps", report.config.steps},
           {"subsets", report.config.subsets},
           {"k_fraction", report.config.k_fraction},
           {"seed", report.config.seed},
           {"baseline", report.baseline},
       }},
  };
  if (!report.mu_fidelity_error.empty()) doc["muFidelityError"] = report.mu_fidelity_error;
  return doc;
}

std::string fidelity_to_csv(const FidelityReport& report) {
  std::ostringstream out;
  out << "curve,fraction,score\n";
  auto dump = [&](const char* name, const std::optional<Curve>& curve) {
    if (!curve) return;
    for (std::size_t i = 0; i < curve->fractions.size(); ++i) {
      out << name << ',' << format_double(curve->fractions[i]) << ',' << format_double(curve->scores[i]) << '\n';
    }
  };
  dump("deletion", report.deletion);
  dump("insertion", report.insertion);
  return out.str();
}

std::string convergence_to_csv(const std::vector<ConvergenceRow>& table) {
  std::ostringstream out;
  out << "p,median,q1,q3\n";
  for (const auto& row : table) {
    out << row.samples << ',' << format_double(row.median) << ',' << format_double(row.q1) << ','
        << format_double(row.q3) << '\n';
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) { write_text(path, doc.dump() + '\n'); }

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw IoError("malformed JSON in " + path.string());
  return doc;
}

}  // namespace hsicx
