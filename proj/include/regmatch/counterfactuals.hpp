#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "regmatch/eae_solver.hpp"
#include "regmatch/market.hpp"
#include "regmatch/welfare.hpp"

namespace regmatch {

enum class Policy { unconstrained, eae, eae_upper_bound, cap_reduced, bbae };

std::string_view policy_name(Policy p);

/// Which regions receive the ceiling / capacity treatment (urban) and which carry the floors (rural).
struct PolicyRoles {
    std::vector<std::size_t> urban;
    std::vector<std::size_t> rural;
};

/** Outcome of one policy on one market.
 *
 * `market` is the market the equilibrium was solved in; it differs from the input only for the
 * cap-reduced policy, whose urban slot masses are the artificial capacities. Welfare is evaluated
 * in that market.
 */
struct PolicyResult {
    Policy policy = Policy::unconstrained;
    EquilibriumResult equilibrium;
    MarketSpec market;
    std::vector<double> search_parameter;  ///< accepted ceiling, capacity, or tax vector
    WelfareBreakdown welfare;
    double selection_objective = 0.0;      ///< sum mu_xy (Phi_xy - w_{z(y)})
    std::vector<double> region_mass;
    bool feasible = false;                 ///< every target floor holds at the constraint tolerance
    bool grid_monotone = true;             ///< grid policies: the feasible candidates form a prefix of the grid
};

/// Grid point of the budget-balance search, kept in summary form.
struct TaxGridPoint {
    TaxScheme w;
    std::vector<double> region_mass;
    double pm_surplus = 0.0;
    double selection_objective = 0.0;
    double social_welfare = 0.0;
    bool converged = false;
};

/// Ranking of budget-balanced grid points: full social welfare, or the entropy-free sum mu (Phi - w).
enum class BbaeCriterion { social_welfare, match_surplus_net_of_tax };

/// True iff every region's mass is at least its floor minus tol.
bool meets_floors(const std::vector<double>& region_mass, const std::vector<double>& floors, double tol);

/// Zero-tax equilibrium ignoring every quota.
PolicyResult unconstrained_policy(const MarketSpec& spec, const SurplusMatrix& phi, const std::vector<double>& floors,
                                  const EaeConfig& cfg = {});

/// EAE with the target floors imposed (lower_z = max(spec lower, floor)).
PolicyResult eae_policy(const MarketSpec& spec, const SurplusMatrix& phi, const std::vector<double>& floors,
                        const EaeConfig& cfg = {});

/// EAE under each ceiling of the grid on the urban regions, with every other quota dropped.
std::vector<PolicyResult> upper_bound_candidates(const MarketSpec& spec, const SurplusMatrix& phi,
                                                 const PolicyRoles& roles, const std::vector<double>& grid,
                                                 const EaeConfig& cfg = {});

/// Zero-tax equilibrium with every urban slot type's mass replaced by each grid capacity.
std::vector<PolicyResult> cap_candidates(const MarketSpec& spec, const SurplusMatrix& phi, const PolicyRoles& roles,
                                         const std::vector<double>& grid, const EaeConfig& cfg = {});

/** Loosest candidate meeting the floors: the largest grid value whose equilibrium satisfies them.
 * When none does, the smallest grid value is returned with feasible = false.
 */
PolicyResult select_loosest(const std::vector<PolicyResult>& candidates, const std::vector<double>& floors,
                            double tol);

PolicyResult eae_upper_bound(const MarketSpec& spec, const SurplusMatrix& phi, const PolicyRoles& roles,
                             const std::vector<double>& floors, const std::vector<double>& grid,
                             const EaeConfig& cfg = {});

PolicyResult cap_reduced_ae(const MarketSpec& spec, const SurplusMatrix& phi, const PolicyRoles& roles,
                            const std::vector<double>& floors, const std::vector<double>& grid,
                            const EaeConfig& cfg = {});

/// Cartesian product of per-region tax values, first region varying slowest.
std::vector<TaxScheme> tax_grid_product(const std::vector<std::vector<double>>& per_region);

/// Zero-quota equilibrium at every tax vector of the grid.
std::vector<TaxGridPoint> evaluate_tax_grid(const MarketSpec& spec, const SurplusMatrix& phi,
                                            const std::vector<TaxScheme>& grid, const EaeConfig& cfg = {});

/** Budget-balanced equilibrium: among grid points with nonnegative policymaker surplus that meet
 * the floors, the one ranked best by `criterion`; first in grid order on ties.
 */
PolicyResult select_bbae(const std::vector<TaxGridPoint>& points, const MarketSpec& spec, const SurplusMatrix& phi,
                         const std::vector<double>& floors, const EaeConfig& cfg = {},
                         BbaeCriterion criterion = BbaeCriterion::social_welfare);

PolicyResult bbae(const MarketSpec& spec, const SurplusMatrix& phi, const std::vector<double>& floors,
                  const std::vector<TaxScheme>& grid_w, const EaeConfig& cfg = {},
                  BbaeCriterion criterion = BbaeCriterion::social_welfare);

struct OrderingGap {
    Policy higher;
    Policy lower;
    double gap = 0.0;  ///< welfare(higher) - welfare(lower)
    bool holds = false;
};

struct OrderingReport {
    std::vector<OrderingGap> gaps;
    bool holds = true;
    bool complete = true;  ///< every policy of the chain was present and feasible
};

/// Checks EAE >= BBAE >= EAE upper-bound >= cap-reduced in social welfare, each within tol.
OrderingReport welfare_ordering_check(const std::vector<PolicyResult>& results, double tol = 1e-7);

}  // namespace regmatch
