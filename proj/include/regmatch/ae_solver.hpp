#pragma once

#include <optional>
#include <vector>

#include "regmatch/market.hpp"

namespace regmatch {

struct IpfpConfig {
    double population_tolerance = 1e-10;  ///< max absolute population residual at convergence
    long max_iterations = 10'000;

    void validate() const;
};

/// K_xy = exp((Phi_xy - w_{z(y)}) / 2), with its logarithm kept exactly.
struct ChooSiowKernel {
    Matrix K;
    Matrix log_K;
};

/** Scaling vectors of the Choo-Siow fixed point: a_x = sqrt(mu_{x y0}), b_y = sqrt(mu_{x0 y}).
 *
 * Matches are mu_xy = a_x b_y K_xy. Passing a state back into ipfp() warm-starts the iteration.
 */
struct IpfpState {
    std::vector<double> a;
    std::vector<double> b;
    long iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

/// Throws RangeError if (Phi - w) / 2 exceeds 700 anywhere.
ChooSiowKernel build_kernel(const SurplusMatrix& phi, const TaxScheme& w, const MarketSpec& spec);

/** Alternating closed-form updates: a_x solves a^2 + a (sum_y b_y K_xy) = n_x, then b_y solves the
 * mirror equation, until the worker-side residual (the slot side is exact after each sweep) is at
 * most the tolerance.
 */
IpfpState ipfp(const MarketSpec& spec, const ChooSiowKernel& kernel, const IpfpConfig& cfg,
               const IpfpState* warm = nullptr);

Matching matching_from_state(const MarketSpec& spec, const ChooSiowKernel& kernel, const IpfpState& state);

/// Matched mass of each region straight from the scaling vectors.
std::vector<double> region_masses(const MarketSpec& spec, const ChooSiowKernel& kernel, const IpfpState& state);

/** Aggregate equilibrium at a fixed tax scheme with no regional constraints (the tax-fixed dual).
 *
 * The result satisfies mu = grad G(U) = grad H(V) and U + V = Phi - w by construction; the
 * population constraints hold to cfg.population_tolerance when diagnostics.converged is set.
 * Non-convergence is reported through the flag, not thrown.
 */
EquilibriumResult solve_ae(const MarketSpec& spec, const SurplusMatrix& phi, const TaxScheme& w,
                           const IpfpConfig& cfg = {}, IpfpState* warm = nullptr);

/// Builds the full result (utilities, objective values, diagnostics) from a fixed-point state.
EquilibriumResult assemble_ae_result(const MarketSpec& spec, const SurplusMatrix& phi, const TaxScheme& w,
                                     const ChooSiowKernel& kernel, const IpfpState& state, const IpfpConfig& cfg);

}  // namespace regmatch
