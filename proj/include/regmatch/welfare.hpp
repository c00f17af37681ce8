#pragma once

#include <utility>

#include "regmatch/market.hpp"

namespace regmatch {

/** Welfare accounting of an equilibrium profile.
 *
 * All values omit the Euler-Mascheroni offset gamma * (sum n + sum m) (see gamma_offset()).
 * social = match_surplus + entropy_term is the Problem P objective.
 */
struct WelfareBreakdown {
    double social = 0.0;
    double worker_side = 0.0;   ///< G(U)
    double slot_side = 0.0;     ///< H(V)
    double pm_surplus = 0.0;    ///< sum mu_xy w_{z(y)}
    double entropy_term = 0.0;  ///< E(mu)
    double match_surplus = 0.0; ///< sum mu_xy Phi_xy
};

/// sum mu_xy Phi_xy + E(mu)
double social_welfare(const Matching& mu, const SurplusMatrix& phi, const MarketSpec& spec);

/// sum_{x, y} mu_xy w_{z(y)}: tax revenue net of subsidies.
double pm_surplus(const Matching& mu, const TaxScheme& w, const MarketSpec& spec);

/// (G(U), H(V))
std::pair<double, double> agent_welfare(const Matrix& U, const Matrix& V, const MarketSpec& spec);

WelfareBreakdown welfare_breakdown(const EquilibriumResult& result, const SurplusMatrix& phi, const MarketSpec& spec);

/// Amount to add to reported welfare to obtain the expected-utility convention.
double gamma_offset(const MarketSpec& spec);

}  // namespace regmatch
