#include "regmatch/market.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace regmatch {

namespace {

void check_unique(const std::vector<std::string>& ids, const char* what, std::vector<std::string>& out) {
    std::set<std::string> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) out.push_back(std::string("duplicate ") + what + " identifier '" + id + "'");
    }
}

}  // namespace

std::size_t MarketSpec::region_index(const std::string& id) const {
    for (std::size_t z = 0; z < regions.size(); ++z)
        if (regions[z] == id) return z;
    throw SchemaError("unknown region '" + id + "'");
}

ValidationReport validate_market(const MarketSpec& spec) {
    ValidationReport report;
    auto& v = report.violations;
    const std::size_t N = spec.num_workers(), M = spec.num_slots(), L = spec.num_regions();

    if (N == 0) v.push_back("no worker types");
    if (M == 0) v.push_back("no slot types");
    if (L == 0) v.push_back("no regions");
    check_unique(spec.worker_types, "worker type", v);
    check_unique(spec.slot_types, "slot type", v);
    check_unique(spec.regions, "region", v);

    if (spec.n.size() != N) v.push_back("n has " + std::to_string(spec.n.size()) + " entries, expected " + std::to_string(N));
    if (spec.m.size() != M) v.push_back("m has " + std::to_string(spec.m.size()) + " entries, expected " + std::to_string(M));
    if (spec.region_of.size() != M)
        v.push_back("region_of has " + std::to_string(spec.region_of.size()) + " entries, expected " + std::to_string(M));
    if (spec.upper.size() != L) v.push_back("upper has wrong length");
    if (spec.lower.size() != L) v.push_back("lower has wrong length");
    if (!v.empty() && (spec.n.size() != N || spec.m.size() != M || spec.region_of.size() != M ||
                       spec.upper.size() != L || spec.lower.size() != L))
        return report;

    for (std::size_t x = 0; x < N; ++x)
        if (!(spec.n[x] > 0.0) || !std::isfinite(spec.n[x]))
            v.push_back("n[" + spec.worker_types[x] + "] must be positive and finite");
    for (std::size_t y = 0; y < M; ++y) {
        if (!(spec.m[y] > 0.0) || !std::isfinite(spec.m[y]))
            v.push_back("m[" + spec.slot_types[y] + "] must be positive and finite");
        if (spec.region_of[y] >= L) v.push_back("slot type '" + spec.slot_types[y] + "' maps to no region");
    }

    double total_n = 0.0, total_lower = 0.0;
    for (double nx : spec.n) total_n += nx;
    std::vector<double> region_capacity(L, 0.0);
    for (std::size_t y = 0; y < M; ++y)
        if (spec.region_of[y] < L) region_capacity[spec.region_of[y]] += spec.m[y];

    for (std::size_t z = 0; z < L; ++z) {
        const double hi = spec.upper[z], lo = spec.lower[z];
        const std::string& id = spec.regions[z];
        if (std::isnan(hi) || !(hi > 0.0)) v.push_back("upper quota of '" + id + "' must be positive");
        if (!std::isfinite(lo) || lo < 0.0) v.push_back("lower quota of '" + id + "' must be finite and nonnegative");
        if (hi < lo) {
            std::ostringstream s;
            s << "quota order violated in '" << id << "': upper " << hi << " < lower " << lo;
            v.push_back(s.str());
        }
        if (lo > region_capacity[z]) {
            std::ostringstream s;
            s << "lower quota of '" << id << "' (" << lo << ") exceeds its slot capacity (" << region_capacity[z] << ")";
            v.push_back(s.str());
        }
        if (std::isfinite(lo)) total_lower += lo;
    }
    if (total_lower > total_n) {
        std::ostringstream s;
        s << "infeasible floors: sum of lower quotas " << total_lower << " exceeds total worker mass " << total_n;
        v.push_back(s.str());
    }
    return report;
}

void require_valid(const MarketSpec& spec) {
    auto report = validate_market(spec);
    if (report.ok()) return;
    std::string msg = "invalid market:";
    for (const auto& s : report.violations) msg += "\n  - " + s;
    throw SchemaError(msg);
}

void check_dimensions(const MarketSpec& spec, const SurplusMatrix& phi) {
    if (phi.phi.rows != spec.num_workers() || phi.phi.cols != spec.num_slots())
        throw DimensionError("surplus matrix is " + std::to_string(phi.phi.rows) + "x" + std::to_string(phi.phi.cols) +
                             ", market is " + std::to_string(spec.num_workers()) + "x" +
                             std::to_string(spec.num_slots()));
}

void check_dimensions(const MarketSpec& spec, const TaxScheme& w) {
    if (w.w.size() != spec.num_regions())
        throw DimensionError("tax scheme has " + std::to_string(w.w.size()) + " regions, market has " +
                             std::to_string(spec.num_regions()));
}

void check_dimensions(const MarketSpec& spec, const Matching& mu) {
    if (mu.matched.rows != spec.num_workers() || mu.matched.cols != spec.num_slots() ||
        mu.unmatched_workers.size() != spec.num_workers() || mu.unmatched_slots.size() != spec.num_slots())
        throw DimensionError("matching dimensions do not match the market");
}

std::vector<double> region_masses(const Matching& mu, const MarketSpec& spec) {
    check_dimensions(spec, mu);
    std::vector<double> mass(spec.num_regions(), 0.0);
    for (std::size_t x = 0; x < mu.matched.rows; ++x)
        for (std::size_t y = 0; y < mu.matched.cols; ++y) mass[spec.region_of[y]] += mu.matched(x, y);
    return mass;
}

double region_mass(const Matching& mu, std::size_t z, const MarketSpec& spec) {
    if (z >= spec.num_regions()) throw SchemaError("region index " + std::to_string(z) + " out of range");
    check_dimensions(spec, mu);
    double mass = 0.0;
    for (std::size_t x = 0; x < mu.matched.rows; ++x)
        for (std::size_t y = 0; y < mu.matched.cols; ++y)
            if (spec.region_of[y] == z) mass += mu.matched(x, y);
    return mass;
}

double region_mass(const Matching& mu, const std::string& region, const MarketSpec& spec) {
    return region_mass(mu, spec.region_index(region), spec);
}

double population_residual(const Matching& mu, const MarketSpec& spec) {
    check_dimensions(spec, mu);
    double worst = 0.0;
    for (std::size_t x = 0; x < spec.num_workers(); ++x) {
        double s = mu.unmatched_workers[x];
        for (std::size_t y = 0; y < spec.num_slots(); ++y) s += mu.matched(x, y);
        worst = std::max(worst, std::abs(s - spec.n[x]));
    }
    for (std::size_t y = 0; y < spec.num_slots(); ++y) {
        double s = mu.unmatched_slots[y];
        for (std::size_t x = 0; x < spec.num_workers(); ++x) s += mu.matched(x, y);
        worst = std::max(worst, std::abs(s - spec.m[y]));
    }
    return worst;
}

}  // namespace regmatch
