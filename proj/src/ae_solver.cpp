#include "regmatch/ae_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "regmatch/logit.hpp"

namespace regmatch {

namespace {

constexpr double kMaxHalfSurplus = 700.0;

// Positive root of t^2 + s t - c = 0, written to avoid cancellation.
inline double positive_root(double s, double c) { return 2.0 * c / (s + std::sqrt(s * s + 4.0 * c)); }

}  // namespace

void IpfpConfig::validate() const {
    if (!(population_tolerance > 0.0)) throw RangeError("population tolerance must be positive");
    if (max_iterations < 1) throw RangeError("max_iterations must be at least 1");
}

ChooSiowKernel build_kernel(const SurplusMatrix& phi, const TaxScheme& w, const MarketSpec& spec) {
    check_dimensions(spec, phi);
    check_dimensions(spec, w);
    const std::size_t N = spec.num_workers(), M = spec.num_slots();
    ChooSiowKernel k{Matrix(N, M), Matrix(N, M)};
    for (std::size_t x = 0; x < N; ++x) {
        for (std::size_t y = 0; y < M; ++y) {
            const double half = 0.5 * (phi.phi(x, y) - w.w[spec.region_of[y]]);
            if (!std::isfinite(half)) throw RangeError("surplus or tax is not finite");
            if (half > kMaxHalfSurplus) throw RangeError("(Phi - w) / 2 exceeds 700; kernel would overflow");
            k.log_K(x, y) = half;
            k.K(x, y) = std::max(std::exp(half), std::numeric_limits<double>::min());
        }
    }
    return k;
}

IpfpState ipfp(const MarketSpec& spec, const ChooSiowKernel& kernel, const IpfpConfig& cfg, const IpfpState* warm) {
    cfg.validate();
    const std::size_t N = spec.num_workers(), M = spec.num_slots();
    const Matrix& K = kernel.K;
    if (K.rows != N || K.cols != M) throw DimensionError("kernel dimensions do not match the market");

    IpfpState st;
    if (warm && warm->a.size() == N && warm->b.size() == M) {
        st.a = warm->a;
        st.b = warm->b;
    } else {
        st.a.resize(N);
        st.b.resize(M);
        for (std::size_t x = 0; x < N; ++x) st.a[x] = std::sqrt(0.5 * spec.n[x]);
        for (std::size_t y = 0; y < M; ++y) st.b[y] = std::sqrt(0.5 * spec.m[y]);
    }

    std::vector<double> col_sum(M), row_sum(N);
    for (;;) {
        // slot side: b_y^2 + b_y sum_x a_x K_xy = m_y
        std::fill(col_sum.begin(), col_sum.end(), 0.0);
        for (std::size_t x = 0; x < N; ++x) {
            const double ax = st.a[x];
            const double* row = &K.data[x * M];
            for (std::size_t y = 0; y < M; ++y) col_sum[y] += ax * row[y];
        }
        for (std::size_t y = 0; y < M; ++y) st.b[y] = positive_root(col_sum[y], spec.m[y]);
        ++st.iterations;

        double residual = 0.0;
        for (std::size_t x = 0; x < N; ++x) {
            const double* row = &K.data[x * M];
            double s = 0.0;
            for (std::size_t y = 0; y < M; ++y) s += row[y] * st.b[y];
            row_sum[x] = s;
            residual = std::max(residual, std::abs(st.a[x] * (st.a[x] + s) - spec.n[x]));
        }
        st.residual = residual;
        if (residual <= cfg.population_tolerance) {
            st.converged = true;
            break;
        }
        if (st.iterations >= cfg.max_iterations) break;
        for (std::size_t x = 0; x < N; ++x) st.a[x] = positive_root(row_sum[x], spec.n[x]);
    }
    return st;
}

Matching matching_from_state(const MarketSpec& spec, const ChooSiowKernel& kernel, const IpfpState& state) {
    const std::size_t N = spec.num_workers(), M = spec.num_slots();
    Matching mu{Matrix(N, M), std::vector<double>(N), std::vector<double>(M)};
    for (std::size_t x = 0; x < N; ++x) {
        mu.unmatched_workers[x] = state.a[x] * state.a[x];
        for (std::size_t y = 0; y < M; ++y) mu.matched(x, y) = state.a[x] * state.b[y] * kernel.K(x, y);
    }
    for (std::size_t y = 0; y < M; ++y) mu.unmatched_slots[y] = state.b[y] * state.b[y];
    return mu;
}

std::vector<double> region_masses(const MarketSpec& spec, const ChooSiowKernel& kernel, const IpfpState& state) {
    const std::size_t N = spec.num_workers(), M = spec.num_slots();
    std::vector<double> col(M, 0.0);
    for (std::size_t x = 0; x < N; ++x)
        for (std::size_t y = 0; y < M; ++y) col[y] += state.a[x] * kernel.K(x, y);
    std::vector<double> mass(spec.num_regions(), 0.0);
    for (std::size_t y = 0; y < M; ++y) mass[spec.region_of[y]] += col[y] * state.b[y];
    return mass;
}

EquilibriumResult assemble_ae_result(const MarketSpec& spec, const SurplusMatrix& phi, const TaxScheme& w,
                                     const ChooSiowKernel& kernel, const IpfpState& state, const IpfpConfig& cfg) {
    const std::size_t N = spec.num_workers(), M = spec.num_slots();
    EquilibriumResult r;
    r.matching = matching_from_state(spec, kernel, state);
    r.taxes = w;
    r.utilities.U = Matrix(N, M);
    r.utilities.V = Matrix(N, M);
    std::vector<double> log_a(N), log_b(M);
    for (std::size_t x = 0; x < N; ++x) log_a[x] = std::log(state.a[x]);
    for (std::size_t y = 0; y < M; ++y) log_b[y] = std::log(state.b[y]);
    for (std::size_t x = 0; x < N; ++x) {
        for (std::size_t y = 0; y < M; ++y) {
            // U = log(mu_xy / mu_x0), V = log(mu_xy / mu_0y)
            r.utilities.U(x, y) = kernel.log_K(x, y) + log_b[y] - log_a[x];
            r.utilities.V(x, y) = kernel.log_K(x, y) + log_a[x] - log_b[y];
        }
    }

    auto& d = r.diagnostics;
    d.inner_iterations = state.iterations;
    d.outer_iterations = 0;
    d.dual_value = g_value(r.utilities.U, spec) + h_value(r.utilities.V, spec);
    double taxed_surplus = 0.0;
    for (std::size_t x = 0; x < N; ++x)
        for (std::size_t y = 0; y < M; ++y)
            taxed_surplus += r.matching.matched(x, y) * (phi.phi(x, y) - w.w[spec.region_of[y]]);
    d.primal_value = taxed_surplus + entropy(r.matching, spec);
    d.duality_gap = std::abs(d.dual_value - d.primal_value);
    d.max_kkt_residual = population_residual(r.matching, spec);
    d.converged = state.converged && d.max_kkt_residual <= cfg.population_tolerance;
    return r;
}

EquilibriumResult solve_ae(const MarketSpec& spec, const SurplusMatrix& phi, const TaxScheme& w,
                           const IpfpConfig& cfg, IpfpState* warm) {
    const ChooSiowKernel kernel = build_kernel(phi, w, spec);
    IpfpState state = ipfp(spec, kernel, cfg, warm);
    if (warm) *warm = state;
    return assemble_ae_result(spec, phi, w, kernel, state, cfg);
}

}  // namespace regmatch
