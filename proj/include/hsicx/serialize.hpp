#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsicx/hsic.hpp"
#include "hsicx/metrics.hpp"

namespace hsicx {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// {"grid":[W,H],"scores":[...],"config":{...},"warnings":[...]}
nlohmann::json scores_to_json(const AttributionResult& result);
AttributionResult scores_from_json(const nlohmann::json& doc);
/// "cell,x,y,score" rows.
std::string scores_to_csv(const AttributionResult& result);

nlohmann::json interactions_to_json(const InteractionMatrix& matrix, const Grid& grid,
                                    const std::vector<InteractionPair>& top, const nlohmann::json& config);
/// "i,j,value" for every evaluated pair.
std::string interactions_to_csv(const InteractionMatrix& matrix);

nlohmann::json fidelity_to_json(const FidelityReport& report);
/// "curve,fraction,score" rows.
std::string fidelity_to_csv(const FidelityReport& report);

/// "p,median,q1,q3" rows.
std::string convergence_to_csv(const std::vector<ConvergenceRow>& table);

/// Compact JSON dump followed by '\n'.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace hsicx
