#include "regmatch/welfare.hpp"

#include <tuple>

#include "regmatch/logit.hpp"

namespace regmatch {

namespace {

double match_surplus(const Matching& mu, const SurplusMatrix& phi) {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.matched.data.size(); ++i) s += mu.matched.data[i] * phi.phi.data[i];
    return s;
}

}  // namespace

double social_welfare(const Matching& mu, const SurplusMatrix& phi, const MarketSpec& spec) {
    check_dimensions(spec, mu);
    check_dimensions(spec, phi);
    return match_surplus(mu, phi) + entropy(mu, spec);
}

double pm_surplus(const Matching& mu, const TaxScheme& w, const MarketSpec& spec) {
    check_dimensions(spec, mu);
    check_dimensions(spec, w);
    double s = 0.0;
    for (std::size_t x = 0; x < spec.num_workers(); ++x)
        for (std::size_t y = 0; y < spec.num_slots(); ++y) s += mu.matched(x, y) * w.w[spec.region_of[y]];
    return s;
}

std::pair<double, double> agent_welfare(const Matrix& U, const Matrix& V, const MarketSpec& spec) {
    return {g_value(U, spec), h_value(V, spec)};
}

WelfareBreakdown welfare_breakdown(const EquilibriumResult& result, const SurplusMatrix& phi, const MarketSpec& spec) {
    WelfareBreakdown b;
    b.match_surplus = match_surplus(result.matching, phi);
    b.entropy_term = entropy(result.matching, spec);
    b.social = b.match_surplus + b.entropy_term;
    std::tie(b.worker_side, b.slot_side) = agent_welfare(result.utilities.U, result.utilities.V, spec);
    b.pm_surplus = pm_surplus(result.matching, result.taxes, spec);
    return b;
}

double gamma_offset(const MarketSpec& spec) {
    double total = 0.0;
    for (double v : spec.n) total += v;
    for (double v : spec.m) total += v;
    return kEulerGamma * total;
}

}  // namespace regmatch
