#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "regmatch/market.hpp"

namespace regmatch::io {

using nlohmann::json;

/** Market file: `worker_types`, `slot_types`, `regions` (string arrays), `n`, `m` (arrays aligned
 * with the type lists), `region_of` (object slot -> region), `upper`, `lower` (objects region ->
 * value; an absent upper key is +inf, an absent lower key is 0). An optional `phi` (array of rows)
 * carries the surplus matrix alongside the market.
 */
json market_to_json(const MarketSpec& spec);
MarketSpec market_from_json(const json& doc);

json matrix_to_json(const Matrix& a);
Matrix matrix_from_json(const json& doc, const std::string& field);

json matching_to_json(const Matching& mu);
Matching matching_from_json(const json& doc);

json result_to_json(const EquilibriumResult& result);
EquilibriumResult result_from_json(const json& doc);

/// Reads and parses a JSON document; ParseError carries the line and column of the failure.
json read_json(const std::filesystem::path& path);
/// Writes a JSON document with a trailing newline.
void write_json(const json& doc, const std::filesystem::path& path);

MarketSpec load_market(const std::filesystem::path& path);
void save_market(const MarketSpec& spec, const std::filesystem::path& path,
                 const std::optional<SurplusMatrix>& phi = std::nullopt);

/// Surplus matrix from a file holding a `phi` key (market files may carry one).
std::optional<SurplusMatrix> load_surplus(const std::filesystem::path& path);
TaxScheme load_taxes(const std::filesystem::path& path, const MarketSpec& spec);

/// Result file: `mu`, `U`, `V`, `w`, `diagnostics`, plus any members of `extra` merged at top level.
void save_result(const EquilibriumResult& result, const std::filesystem::path& path, const json& extra = json::object());
EquilibriumResult load_result(const std::filesystem::path& path);

}  // namespace regmatch::io
