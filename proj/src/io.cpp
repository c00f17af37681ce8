#include "regmatch/io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace regmatch::io {

namespace {

const json& require(const json& doc, const std::string& key) {
    if (!doc.is_object()) throw SchemaError("expected a JSON object while reading '" + key + "'");
    auto it = doc.find(key);
    if (it == doc.end()) throw SchemaError("missing required field '" + key + "'");
    return *it;
}

double number(const json& v, const std::string& field) {
    if (!v.is_number()) throw SchemaError("field '" + field + "' must be a number");
    return v.get<double>();
}

std::vector<double> number_array(const json& v, const std::string& field) {
    if (!v.is_array()) throw SchemaError("field '" + field + "' must be an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<std::string> string_array(const json& v, const std::string& field) {
    if (!v.is_array()) throw SchemaError("field '" + field + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw SchemaError("field '" + field + "' must contain only strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double finite_or_inf(const json& v, const std::string& field) {
    if (v.is_null()) return kInfinity;
    return number(v, field);
}

}  // namespace

json matrix_to_json(const Matrix& a) {
    json rows = json::array();
    for (std::size_t i = 0; i < a.rows; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < a.cols; ++j) row.push_back(a(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& doc, const std::string& field) {
    if (!doc.is_array()) throw SchemaError("field '" + field + "' must be an array of rows");
    const std::size_t rows = doc.size();
    const std::size_t cols = rows == 0 ? 0 : (doc[0].is_array() ? doc[0].size() : 0);
    Matrix a(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        auto row = number_array(doc[i], field + "[" + std::to_string(i) + "]");
        if (row.size() != cols) throw SchemaError("field '" + field + "' is ragged at row " + std::to_string(i));
        for (std::size_t j = 0; j < cols; ++j) a(i, j) = row[j];
    }
    return a;
}

json market_to_json(const MarketSpec& spec) {
    json doc;
    doc["worker_types"] = spec.worker_types;
    doc["slot_types"] = spec.slot_types;
    doc["regions"] = spec.regions;
    doc["n"] = spec.n;
    doc["m"] = spec.m;
    json region_of = json::object();
    for (std::size_t y = 0; y < spec.num_slots(); ++y) region_of[spec.slot_types[y]] = spec.regions.at(spec.region_of[y]);
    doc["region_of"] = region_of;
    json upper = json::object(), lower = json::object();
    for (std::size_t z = 0; z < spec.num_regions(); ++z) {
        if (std::isfinite(spec.upper[z])) upper[spec.regions[z]] = spec.upper[z];
        if (spec.lower[z] != 0.0) lower[spec.regions[z]] = spec.lower[z];
    }
    doc["upper"] = upper;
    doc["lower"] = lower;
    return doc;
}

MarketSpec market_from_json(const json& doc) {
    MarketSpec spec;
    spec.worker_types = string_array(require(doc, "worker_types"), "worker_types");
    spec.slot_types = string_array(require(doc, "slot_types"), "slot_types");
    spec.regions = string_array(require(doc, "regions"), "regions");
    spec.n = number_array(require(doc, "n"), "n");
    spec.m = number_array(require(doc, "m"), "m");
    if (spec.n.size() != spec.worker_types.size()) throw SchemaError("field 'n' must have one entry per worker type");
    if (spec.m.size() != spec.slot_types.size()) throw SchemaError("field 'm' must have one entry per slot type");

    const json& region_of = require(doc, "region_of");
    if (!region_of.is_object()) throw SchemaError("field 'region_of' must be an object mapping slot type to region");
    for (const auto& y : spec.slot_types) {
        auto it = region_of.find(y);
        if (it == region_of.end()) throw SchemaError("region_of has no entry for slot type '" + y + "'");
        if (!it->is_string()) throw SchemaError("region_of['" + y + "'] must be a region identifier");
        spec.region_of.push_back(spec.region_index(it->get<std::string>()));
    }
    for (auto it = region_of.begin(); it != region_of.end(); ++it) {
        bool known = false;
        for (const auto& y : spec.slot_types) known = known || (y == it.key());
        if (!known) throw SchemaError("region_of names unknown slot type '" + it.key() + "'");
    }

    spec.upper.assign(spec.num_regions(), kInfinity);
    spec.lower.assign(spec.num_regions(), 0.0);
    for (const char* key : {"upper", "lower"}) {
        auto it = doc.find(key);
        if (it == doc.end()) continue;
        if (!it->is_object()) throw SchemaError(std::string("field '") + key + "' must be an object mapping region to quota");
        for (auto q = it->begin(); q != it->end(); ++q) {
            const std::size_t z = spec.region_index(q.key());
            const std::string field = std::string(key) + "['" + q.key() + "']";
            if (std::string(key) == "upper")
                spec.upper[z] = finite_or_inf(q.value(), field);
            else
                spec.lower[z] = number(q.value(), field);
        }
    }
    require_valid(spec);
    return spec;
}

json matching_to_json(const Matching& mu) {
    return json{{"matched", matrix_to_json(mu.matched)},
                {"unmatched_workers", mu.unmatched_workers},
                {"unmatched_slots", mu.unmatched_slots}};
}

Matching matching_from_json(const json& doc) {
    Matching mu;
    mu.matched = matrix_from_json(require(doc, "matched"), "mu.matched");
    mu.unmatched_workers = number_array(require(doc, "unmatched_workers"), "mu.unmatched_workers");
    mu.unmatched_slots = number_array(require(doc, "unmatched_slots"), "mu.unmatched_slots");
    if (mu.unmatched_workers.size() != mu.matched.rows || mu.unmatched_slots.size() != mu.matched.cols)
        throw SchemaError("mu: unmatched vectors do not match the matched block");
    return mu;
}

json result_to_json(const EquilibriumResult& r) {
    const auto& d = r.diagnostics;
    json diag{{"dual_value", finite_or_null(d.dual_value)},
              {"primal_value", finite_or_null(d.primal_value)},
              {"duality_gap", finite_or_null(d.duality_gap)},
              {"max_kkt_residual", finite_or_null(d.max_kkt_residual)},
              {"inner_iterations", d.inner_iterations},
              {"outer_iterations", d.outer_iterations},
              {"converged", d.converged}};
    return json{{"mu", matching_to_json(r.matching)},
                {"U", matrix_to_json(r.utilities.U)},
                {"V", matrix_to_json(r.utilities.V)},
                {"w", r.taxes.w},
                {"diagnostics", diag}};
}

EquilibriumResult result_from_json(const json& doc) {
    EquilibriumResult r;
    r.matching = matching_from_json(require(doc, "mu"));
    r.utilities.U = matrix_from_json(require(doc, "U"), "U");
    r.utilities.V = matrix_from_json(require(doc, "V"), "V");
    r.taxes.w = number_array(require(doc, "w"), "w");
    if (auto it = doc.find("diagnostics"); it != doc.end()) {
        auto& d = r.diagnostics;
        auto get = [&](const char* key) { return it->contains(key) ? finite_or_inf((*it)[key], key) : 0.0; };
        d.dual_value = get("dual_value");
        d.primal_value = get("primal_value");
        d.duality_gap = get("duality_gap");
        d.max_kkt_residual = get("max_kkt_residual");
        d.inner_iterations = it->value("inner_iterations", 0L);
        d.outer_iterations = it->value("outer_iterations", 0L);
        d.converged = it->value("converged", false);
    }
    return r;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::ostringstream msg;
        msg << path.string() << ":" << line << ":" << col << ": " << e.what();
        throw ParseError(msg.str());
    }
}

void write_json(const json& doc, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
}

MarketSpec load_market(const std::filesystem::path& path) {
    const json doc = read_json(path);
    try {
        return market_from_json(doc);
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

void save_market(const MarketSpec& spec, const std::filesystem::path& path, const std::optional<SurplusMatrix>& phi) {
    json doc = market_to_json(spec);
    if (phi) doc["phi"] = matrix_to_json(phi->phi);
    write_json(doc, path);
}

std::optional<SurplusMatrix> load_surplus(const std::filesystem::path& path) {
    const json doc = read_json(path);
    if (!doc.is_object() || !doc.contains("phi")) return std::nullopt;
    return SurplusMatrix{matrix_from_json(doc["phi"], "phi")};
}

TaxScheme load_taxes(const std::filesystem::path& path, const MarketSpec& spec) {
    const json doc = read_json(path);
    const json& w = require(doc, "w");
    TaxScheme taxes = TaxScheme::zeros(spec.num_regions());
    if (w.is_object()) {
        for (auto it = w.begin(); it != w.end(); ++it) taxes.w[spec.region_index(it.key())] = number(it.value(), "w");
    } else {
        taxes.w = number_array(w, "w");
        check_dimensions(spec, taxes);
    }
    return taxes;
}

void save_result(const EquilibriumResult& result, const std::filesystem::path& path, const json& extra) {
    json doc = result_to_json(result);
    for (auto it = extra.begin(); it != extra.end(); ++it) doc[it.key()] = it.value();
    write_json(doc, path);
}

EquilibriumResult load_result(const std::filesystem::path& path) {
    const json doc = read_json(path);
    try {
        return result_from_json(doc);
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

}  // namespace regmatch::io
