#include "regmatch/counterfactuals.hpp"

#include <algorithm>
#include <optional>

#include "regmatch/logit.hpp"

namespace regmatch {

namespace {

void check_floors(const MarketSpec& spec, const std::vector<double>& floors) {
    if (floors.size() != spec.num_regions()) throw DimensionError("target floors must have one entry per region");
}

void check_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw RangeError("search grid is empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw RangeError("search grid must be strictly ascending");
}

MarketSpec without_quotas(const MarketSpec& spec) {
    MarketSpec out = spec;
    out.upper.assign(spec.num_regions(), kInfinity);
    out.lower.assign(spec.num_regions(), 0.0);
    return out;
}

PolicyResult finish(Policy policy, EquilibriumResult eq, MarketSpec market, const SurplusMatrix& phi,
                    const std::vector<double>& floors, double tol) {
    PolicyResult r;
    r.policy = policy;
    r.welfare = welfare_breakdown(eq, phi, market);
    r.selection_objective = r.welfare.match_surplus - r.welfare.pm_surplus;
    r.region_mass = region_masses(eq.matching, market);
    r.feasible = meets_floors(r.region_mass, floors, tol);
    r.equilibrium = std::move(eq);
    r.market = std::move(market);
    return r;
}

}  // namespace

std::string_view policy_name(Policy p) {
    switch (p) {
    case Policy::unconstrained:
        return "unconstrained";
    case Policy::eae:
        return "eae";
    case Policy::eae_upper_bound:
        return "eae_upper_bound";
    case Policy::cap_reduced:
        return "cap_reduced";
    case Policy::bbae:
        return "bbae";
    }
    return "unknown";
}

bool meets_floors(const std::vector<double>& region_mass, const std::vector<double>& floors, double tol) {
    for (std::size_t z = 0; z < floors.size(); ++z)
        if (floors[z] > 0.0 && region_mass.at(z) < floors[z] - tol) return false;
    return true;
}

PolicyResult unconstrained_policy(const MarketSpec& spec, const SurplusMatrix& phi, const std::vector<double>& floors,
                                  const EaeConfig& cfg) {
    check_floors(spec, floors);
    auto eq = solve_ae(spec, phi, TaxScheme::zeros(spec.num_regions()), cfg.inner);
    return finish(Policy::unconstrained, std::move(eq), spec, phi, floors, cfg.constraint_tolerance);
}

PolicyResult eae_policy(const MarketSpec& spec, const SurplusMatrix& phi, const std::vector<double>& floors,
                        const EaeConfig& cfg) {
    check_floors(spec, floors);
    MarketSpec constrained = spec;
    for (std::size_t z = 0; z < spec.num_regions(); ++z) constrained.lower[z] = std::max(spec.lower[z], floors[z]);
    auto eq = solve_eae(constrained, phi, cfg);
    auto r = finish(Policy::eae, std::move(eq), spec, phi, floors, cfg.constraint_tolerance);
    r.search_parameter = r.equilibrium.taxes.w;
    return r;
}

std::vector<PolicyResult> upper_bound_candidates(const MarketSpec& spec, const SurplusMatrix& phi,
                                                 const PolicyRoles& roles, const std::vector<double>& grid,
                                                 const EaeConfig& cfg) {
    check_grid(grid);
    const std::vector<double> no_floors(spec.num_regions(), 0.0);
    std::vector<PolicyResult> out;
    out.reserve(grid.size());
    for (double ceiling : grid) {
        MarketSpec capped = without_quotas(spec);
        for (std::size_t z : roles.urban) capped.upper.at(z) = ceiling;
        auto eq = solve_eae(capped, phi, cfg);
        auto r = finish(Policy::eae_upper_bound, std::move(eq), spec, phi, no_floors, cfg.constraint_tolerance);
        r.search_parameter = {ceiling};
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<PolicyResult> cap_candidates(const MarketSpec& spec, const SurplusMatrix& phi, const PolicyRoles& roles,
                                         const std::vector<double>& grid, const EaeConfig& cfg) {
    check_grid(grid);
    const std::vector<double> no_floors(spec.num_regions(), 0.0);
    std::vector<PolicyResult> out;
    out.reserve(grid.size());
    for (double capacity : grid) {
        MarketSpec reduced = without_quotas(spec);
        for (std::size_t y = 0; y < spec.num_slots(); ++y)
            if (std::find(roles.urban.begin(), roles.urban.end(), spec.region_of[y]) != roles.urban.end())
                reduced.m[y] = capacity;
        auto eq = solve_ae(reduced, phi, TaxScheme::zeros(spec.num_regions()), cfg.inner);
        auto r = finish(Policy::cap_reduced, std::move(eq), std::move(reduced), phi, no_floors,
                        cfg.constraint_tolerance);
        r.search_parameter = {capacity};
        out.push_back(std::move(r));
    }
    return out;
}

PolicyResult select_loosest(const std::vector<PolicyResult>& candidates, const std::vector<double>& floors,
                            double tol) {
    if (candidates.empty()) throw RangeError("no grid candidates to select from");
    std::vector<bool> ok;
    for (const auto& c : candidates) ok.push_back(meets_floors(c.region_mass, floors, tol));

    bool monotone = true;
    for (std::size_t i = 1; i < ok.size(); ++i) monotone = monotone && (ok[i - 1] || !ok[i]);

    std::size_t pick = 0;
    bool found = false;
    for (std::size_t i = ok.size(); i-- > 0;) {
        if (ok[i]) {
            pick = i;
            found = true;
            break;
        }
    }
    PolicyResult r = candidates[pick];
    r.feasible = found;
    r.grid_monotone = monotone;
    return r;
}

PolicyResult eae_upper_bound(const MarketSpec& spec, const SurplusMatrix& phi, const PolicyRoles& roles,
                             const std::vector<double>& floors, const std::vector<double>& grid, const EaeConfig& cfg) {
    check_floors(spec, floors);
    return select_loosest(upper_bound_candidates(spec, phi, roles, grid, cfg), floors, cfg.constraint_tolerance);
}

PolicyResult cap_reduced_ae(const MarketSpec& spec, const SurplusMatrix& phi, const PolicyRoles& roles,
                            const std::vector<double>& floors, const std::vector<double>& grid, const EaeConfig& cfg) {
    check_floors(spec, floors);
    return select_loosest(cap_candidates(spec, phi, roles, grid, cfg), floors, cfg.constraint_tolerance);
}

std::vector<TaxScheme> tax_grid_product(const std::vector<std::vector<double>>& per_region) {
    std::vector<TaxScheme> out{TaxScheme{}};
    for (const auto& values : per_region) {
        if (values.empty()) throw RangeError("tax grid has a region with no candidate values");
        std::vector<TaxScheme> next;
        next.reserve(out.size() * values.size());
        for (const auto& prefix : out) {
            for (double v : values) {
                TaxScheme t = prefix;
                t.w.push_back(v);
                next.push_back(std::move(t));
            }
        }
        out = std::move(next);
    }
    return out;
}

std::vector<TaxGridPoint> evaluate_tax_grid(const MarketSpec& spec, const SurplusMatrix& phi,
                                            const std::vector<TaxScheme>& grid, const EaeConfig& cfg) {
    check_dimensions(spec, phi);
    std::vector<TaxGridPoint> out;
    out.reserve(grid.size());
    IpfpState warm;
    for (const auto& w : grid) {
        const ChooSiowKernel kernel = build_kernel(phi, w, spec);
        warm = ipfp(spec, kernel, cfg.inner, &warm);
        const Matching mu = matching_from_state(spec, kernel, warm);
        TaxGridPoint p;
        p.w = w;
        p.region_mass = region_masses(mu, spec);
        p.pm_surplus = pm_surplus(mu, w, spec);
        double surplus = 0.0;
        for (std::size_t i = 0; i < mu.matched.data.size(); ++i) surplus += mu.matched.data[i] * phi.phi.data[i];
        p.selection_objective = surplus - p.pm_surplus;
        p.social_welfare = surplus + entropy(mu, spec);
        p.converged = warm.converged;
        out.push_back(std::move(p));
    }
    return out;
}

PolicyResult select_bbae(const std::vector<TaxGridPoint>& points, const MarketSpec& spec, const SurplusMatrix& phi,
                         const std::vector<double>& floors, const EaeConfig& cfg, BbaeCriterion criterion) {
    check_floors(spec, floors);
    if (points.empty()) throw RangeError("empty tax grid");
    auto score = [criterion](const TaxGridPoint& p) {
        return criterion == BbaeCriterion::social_welfare ? p.social_welfare : p.selection_objective;
    };
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (!p.converged || p.pm_surplus < 0.0 || !meets_floors(p.region_mass, floors, cfg.constraint_tolerance))
            continue;
        if (!best || score(p) > score(points[*best])) best = i;
    }
    const TaxScheme& w = points[best.value_or(0)].w;
    auto eq = solve_ae(spec, phi, w, cfg.inner);
    auto r = finish(Policy::bbae, std::move(eq), spec, phi, floors, cfg.constraint_tolerance);
    r.search_parameter = w.w;
    r.feasible = best.has_value();
    return r;
}

PolicyResult bbae(const MarketSpec& spec, const SurplusMatrix& phi, const std::vector<double>& floors,
                  const std::vector<TaxScheme>& grid_w, const EaeConfig& cfg, BbaeCriterion criterion) {
    check_floors(spec, floors);
    return select_bbae(evaluate_tax_grid(spec, phi, grid_w, cfg), spec, phi, floors, cfg, criterion);
}

OrderingReport welfare_ordering_check(const std::vector<PolicyResult>& results, double tol) {
    static constexpr Policy chain[] = {Policy::eae, Policy::bbae, Policy::eae_upper_bound, Policy::cap_reduced};
    OrderingReport report;
    std::vector<const PolicyResult*> present;
    for (Policy p : chain) {
        auto it = std::find_if(results.begin(), results.end(),
                               [&](const PolicyResult& r) { return r.policy == p && r.feasible; });
        if (it == results.end())
            report.complete = false;
        else
            present.push_back(&*it);
    }
    for (std::size_t i = 1; i < present.size(); ++i) {
        OrderingGap g{present[i - 1]->policy, present[i]->policy,
                      present[i - 1]->welfare.social - present[i]->welfare.social, false};
        g.holds = g.gap >= -tol;
        report.holds = report.holds && g.holds;
        report.gaps.push_back(g);
    }
    return report;
}

}  // namespace regmatch
