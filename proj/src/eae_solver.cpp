#include "regmatch/eae_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "regmatch/logit.hpp"
#include "regmatch/welfare.hpp"

namespace regmatch {

namespace {

bool is_constrained(const MarketSpec& spec, std::size_t z) {
    return std::isfinite(spec.upper[z]) || spec.lower[z] > 0.0;
}

/// Evaluates the mass of one region as a function of its own tax, the other taxes held fixed.
class RegionProbe {
    public:
        RegionProbe(const MarketSpec& spec, const SurplusMatrix& phi, const TaxScheme& w, std::size_t z,
                    const EaeConfig& cfg, IpfpState* warm, long* iterations)
            : spec_{spec}, phi_{phi}, cfg_{cfg}, z_{z}, taxes_{w}, kernel_{build_kernel(phi, w, spec)},
              warm_{warm}, iterations_{iterations} {}

        double mass(double tax) {
            taxes_.w[z_] = tax;
            for (std::size_t y = 0; y < spec_.num_slots(); ++y) {
                if (spec_.region_of[y] != z_) continue;
                for (std::size_t x = 0; x < spec_.num_workers(); ++x) {
                    const double half = 0.5 * (phi_.phi(x, y) - tax);
                    if (half > 700.0) throw RangeError("(Phi - w) / 2 exceeds 700 during tax search");
                    kernel_.log_K(x, y) = half;
                    kernel_.K(x, y) = std::max(std::exp(half), std::numeric_limits<double>::min());
                }
            }
            IpfpState st = ipfp(spec_, kernel_, cfg_.inner, warm_);
            if (iterations_) *iterations_ += st.iterations;
            if (warm_) *warm_ = st;
            return region_masses(spec_, kernel_, st)[z_];
        }

    private:
        const MarketSpec& spec_;
        const SurplusMatrix& phi_;
        const EaeConfig& cfg_;
        std::size_t z_;
        TaxScheme taxes_;
        ChooSiowKernel kernel_;
        IpfpState* warm_;
        long* iterations_;
};

[[noreturn]] void monotonicity_failure(std::size_t z, double t, double m) {
    std::ostringstream s;
    s << "region mass not monotone in its tax (region " << z << ", w = " << t << ", mass = " << m << ")";
    throw std::logic_error(s.str());
}

/// Finds t in (lo, hi) with mass(t) = target, given mass(lo) > target > mass(hi).
double bracketed_root(RegionProbe& probe, std::size_t z, double target, double lo, double m_lo, double hi,
                      double m_hi, double tol, double noise) {
    double f_lo = m_lo - target, f_hi = m_hi - target;
    int retained = 0;  // -1: lo kept twice in a row, +1: hi kept
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        t = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
        const double m = probe.mass(t);
        if (m > m_lo + noise || m < m_hi - noise) monotonicity_failure(z, t, m);
        const double f = m - target;
        if (std::abs(f) <= tol) return t;
        if (f > 0.0) {
            lo = t;
            m_lo = m;
            f_lo = f;
            if (retained == 1) f_hi *= 0.5;
            retained = 1;
        } else {
            hi = t;
            m_hi = m;
            f_hi = f;
            if (retained == -1) f_lo *= 0.5;
            retained = -1;
        }
        if (hi - lo <= 1e-15 * (1.0 + std::abs(t))) return t;
    }
    return t;
}

}  // namespace

void EaeConfig::validate() const {
    if (!(tax_tolerance > 0.0) || !(constraint_tolerance > 0.0))
        throw RangeError("EAE tolerances must be positive");
    if (max_sweeps < 1) throw RangeError("max_sweeps must be at least 1");
    if (!(initial_bracket > 0.0) || !(bracket_limit >= initial_bracket))
        throw RangeError("tax bracket must satisfy 0 < initial <= limit");
    inner.validate();
}

double KKTReport::max_residual() const {
    return std::max({population_residual, -noblocking_min_slack, binding_residual, clearing_residual,
                     quota_violation, complementary_slackness_residual, duality_gap / (1.0 + std::abs(dual_value))});
}

double dual_value(const Matrix& U, const Matrix& V, const TaxScheme& w, const MarketSpec& spec) {
    check_dimensions(spec, w);
    double value = g_value(U, spec) + h_value(V, spec);
    for (std::size_t z = 0; z < spec.num_regions(); ++z) {
        if (w.upper_part(z) > 0.0) value += spec.upper[z] * w.upper_part(z);
        if (w.lower_part(z) > 0.0) value -= spec.lower[z] * w.lower_part(z);
    }
    return value;
}

KKTReport verify_kkt(const EquilibriumResult& result, const MarketSpec& spec, const SurplusMatrix& phi, double tol) {
    KKTReport k;
    const auto& mu = result.matching;
    const auto& U = result.utilities.U;
    const auto& V = result.utilities.V;
    const auto& w = result.taxes;
    check_dimensions(spec, mu);
    check_dimensions(spec, phi);
    check_dimensions(spec, w);
    const std::size_t N = spec.num_workers(), M = spec.num_slots();

    k.population_residual = population_residual(mu, spec);

    k.noblocking_min_slack = kInfinity;
    for (std::size_t x = 0; x < N; ++x) {
        for (std::size_t y = 0; y < M; ++y) {
            const double slack = U(x, y) + V(x, y) - (phi.phi(x, y) - w.w[spec.region_of[y]]);
            k.noblocking_min_slack = std::min(k.noblocking_min_slack, slack);
            if (mu.matched(x, y) > tol) k.binding_residual = std::max(k.binding_residual, std::abs(slack));
        }
    }

    const Matrix dG = g_gradient(U, spec);
    const Matrix dH = h_gradient(V, spec);
    double clearing = 0.0;
    for (std::size_t x = 0; x < N; ++x) {
        clearing = std::max(clearing, std::abs(mu.unmatched_workers[x] - dG(x, 0)));
        for (std::size_t y = 0; y < M; ++y) {
            clearing = std::max(clearing, std::abs(mu.matched(x, y) - dG(x, y + 1)));
            clearing = std::max(clearing, std::abs(mu.matched(x, y) - dH(x + 1, y)));
        }
    }
    for (std::size_t y = 0; y < M; ++y) clearing = std::max(clearing, std::abs(mu.unmatched_slots[y] - dH(0, y)));
    k.clearing_residual = clearing;

    const auto mass = region_masses(mu, spec);
    for (std::size_t z = 0; z < spec.num_regions(); ++z) {
        k.quota_violation = std::max({k.quota_violation, spec.lower[z] - mass[z], mass[z] - spec.upper[z]});
        if (w.w[z] > tol)
            k.complementary_slackness_residual =
                std::max(k.complementary_slackness_residual, std::abs(mass[z] - spec.upper[z]));
        if (w.w[z] < -tol)
            k.complementary_slackness_residual =
                std::max(k.complementary_slackness_residual, std::abs(mass[z] - spec.lower[z]));
    }

    k.dual_value = dual_value(U, V, w, spec);
    try {
        k.primal_value = social_welfare(mu, phi, spec);
        k.duality_gap = std::abs(k.dual_value - k.primal_value);
    } catch (const RangeError&) {
        k.primal_value = std::nan("");
        k.duality_gap = kInfinity;
    }
    k.pass = k.max_residual() <= tol;
    return k;
}

TaxScheme outer_step(const TaxScheme& w, std::size_t z, const MarketSpec& spec, const SurplusMatrix& phi,
                     const EaeConfig& cfg, IpfpState* warm, long* inner_iterations) {
    check_dimensions(spec, w);
    if (z >= spec.num_regions()) throw DimensionError("region index out of range");
    TaxScheme out = w;
    if (!is_constrained(spec, z)) {
        out.w[z] = 0.0;
        return out;
    }
    IpfpState local;
    IpfpState* state = warm ? warm : &local;
    RegionProbe probe(spec, phi, w, z, cfg, state, inner_iterations);
    const double hi_q = spec.upper[z], lo_q = spec.lower[z];
    const double m0 = probe.mass(0.0);
    if (m0 >= lo_q && m0 <= hi_q) {
        out.w[z] = 0.0;
        return out;
    }

    const double tol = 0.1 * cfg.constraint_tolerance;
    const double noise = 10.0 * cfg.inner.population_tolerance * static_cast<double>(spec.num_workers() + 1);
    const bool too_much = m0 > hi_q;
    const double target = too_much ? hi_q : lo_q;
    const double sign = too_much ? 1.0 : -1.0;

    double near = 0.0, m_near = m0;
    double far = cfg.initial_bracket;
    double m_far = probe.mass(sign * far);
    for (;;) {
        if (too_much ? m_far > m_near + noise : m_far < m_near - noise) monotonicity_failure(z, sign * far, m_far);
        if (std::abs(m_far - target) <= tol) {
            out.w[z] = sign * far;
            return out;
        }
        if (too_much ? m_far < target : m_far > target) break;
        if (far >= cfg.bracket_limit) {
            std::ostringstream s;
            s << "quota of region '" << spec.regions[z] << "' unreachable with |w| <= " << cfg.bracket_limit
              << " (mass " << m_far << ", bound " << target << ")";
            throw InfeasibleError(s.str());
        }
        near = far;
        m_near = m_far;
        far = std::min(2.0 * far, cfg.bracket_limit);
        m_far = probe.mass(sign * far);
    }

    if (too_much)
        out.w[z] = bracketed_root(probe, z, target, near, m_near, far, m_far, tol, noise);
    else
        out.w[z] = bracketed_root(probe, z, target, -far, m_far, -near, m_near, tol, noise);
    return out;
}

EquilibriumResult solve_eae(const MarketSpec& spec, const SurplusMatrix& phi, const EaeConfig& cfg) {
    require_valid(spec);
    check_dimensions(spec, phi);
    cfg.validate();

    TaxScheme w = cfg.initial_taxes.value_or(TaxScheme::zeros(spec.num_regions()));
    check_dimensions(spec, w);
    std::vector<std::size_t> constrained;
    for (std::size_t z = 0; z < spec.num_regions(); ++z) {
        if (is_constrained(spec, z))
            constrained.push_back(z);
        else
            w.w[z] = 0.0;
    }

    IpfpState warm;
    long inner_iterations = 0;
    long sweeps = 0;
    bool settled = constrained.empty();
    while (!settled && sweeps < cfg.max_sweeps) {
        ++sweeps;
        double change = 0.0;
        for (std::size_t z : constrained) {
            const double before = w.w[z];
            w = outer_step(w, z, spec, phi, cfg, &warm, &inner_iterations);
            change = std::max(change, std::abs(w.w[z] - before));
        }
        if (change > cfg.tax_tolerance) continue;
        const ChooSiowKernel kernel = build_kernel(phi, w, spec);
        warm = ipfp(spec, kernel, cfg.inner, &warm);
        inner_iterations += warm.iterations;
        const auto mass = region_masses(spec, kernel, warm);
        settled = true;
        for (std::size_t z : constrained)
            settled = settled && mass[z] >= spec.lower[z] - cfg.constraint_tolerance &&
                      mass[z] <= spec.upper[z] + cfg.constraint_tolerance;
    }

    const ChooSiowKernel kernel = build_kernel(phi, w, spec);
    IpfpState state = ipfp(spec, kernel, cfg.inner, &warm);
    inner_iterations += state.iterations;
    EquilibriumResult result = assemble_ae_result(spec, phi, w, kernel, state, cfg.inner);

    const KKTReport kkt = verify_kkt(result, spec, phi, cfg.constraint_tolerance);
    auto& d = result.diagnostics;
    d.dual_value = kkt.dual_value;
    d.primal_value = kkt.primal_value;
    d.duality_gap = kkt.duality_gap;
    d.max_kkt_residual = kkt.max_residual();
    d.inner_iterations = inner_iterations;
    d.outer_iterations = sweeps;
    d.converged = settled && state.converged && kkt.pass;
    return result;
}

}  // namespace regmatch
