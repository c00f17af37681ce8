#pragma once

#include <optional>

#include "regmatch/ae_solver.hpp"
#include "regmatch/market.hpp"

namespace regmatch {

struct EaeConfig {
    double tax_tolerance = 1e-8;         ///< max coordinate change of w over a sweep at convergence
    double constraint_tolerance = 1e-8;  ///< quota residuals and KKT verification tolerance
    long max_sweeps = 200;
    double initial_bracket = 1.0;        ///< bracket [0, 1] (or [-1, 0]) grown by doubling
    double bracket_limit = 64.0;         ///< |w| beyond which a quota is declared infeasible
    IpfpConfig inner;
    std::optional<TaxScheme> initial_taxes;  ///< starting point of the sweeps; zero when absent

    void validate() const;
};

/// Residuals of the equilibrium and complementary-slackness conditions plus the duality gap.
struct KKTReport {
    double population_residual = 0.0;
    double noblocking_min_slack = 0.0;   ///< min over pairs of U + V - (Phi - w); negative means a blocking pair
    double binding_residual = 0.0;       ///< max |U + V - (Phi - w)| over pairs with positive mass
    double clearing_residual = 0.0;      ///< max |mu - grad G(U)|, |mu - grad H(V)|
    double quota_violation = 0.0;
    double complementary_slackness_residual = 0.0;
    double dual_value = 0.0;
    double primal_value = 0.0;
    double duality_gap = 0.0;            ///< |dual - primal|; checked relative to 1 + |dual|
    bool pass = false;

    /// Largest residual, with the duality gap taken relative to 1 + |dual|.
    double max_residual() const;
};

/// Problem D objective G(U) + H(V) + sum_z upper_z max(0, w_z) - sum_z lower_z max(0, -w_z).
double dual_value(const Matrix& U, const Matrix& V, const TaxScheme& w, const MarketSpec& spec);

/// Checks population, no-blocking, market clearing, quota and complementary-slackness conditions to tol.
KKTReport verify_kkt(const EquilibriumResult& result, const MarketSpec& spec, const SurplusMatrix& phi, double tol);

/** One coordinate step on region z with the other taxes fixed.
 *
 * If the equilibrium at w_z = 0 meets the quotas of z, w_z becomes 0. Otherwise region mass is
 * monotone decreasing in w_z and the returned w_z puts the mass on the violated bound to within the
 * constraint tolerance. Throws InfeasibleError when no |w_z| <= bracket_limit reaches the bound.
 */
TaxScheme outer_step(const TaxScheme& w, std::size_t z, const MarketSpec& spec, const SurplusMatrix& phi,
                     const EaeConfig& cfg, IpfpState* warm = nullptr, long* inner_iterations = nullptr);

/** Efficient aggregate equilibrium: the welfare-maximizing region tax scheme under the quotas.
 *
 * Gauss-Seidel sweeps of outer_step over the constrained regions until no tax moves by more than
 * tax_tolerance and every quota holds. The returned diagnostics carry the Problem D and Problem P
 * values; converged is set only if verify_kkt passes at constraint_tolerance.
 */
EquilibriumResult solve_eae(const MarketSpec& spec, const SurplusMatrix& phi, const EaeConfig& cfg = {});

}  // namespace regmatch
