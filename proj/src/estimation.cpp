#include "regmatch/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "regmatch/optimize.hpp"

namespace regmatch {

namespace {

template <class F>
void for_each_cell(const Matching& mu, F&& f) {
    for (double v : mu.matched.data) f(v);
    for (double v : mu.unmatched_workers) f(v);
    for (double v : mu.unmatched_slots) f(v);
}

double total_mass(const Matching& mu) {
    double s = 0.0;
    for_each_cell(mu, [&](double v) { s += v; });
    return s;
}

bool same_shape(const Matching& a, const Matching& b) {
    return a.matched.rows == b.matched.rows && a.matched.cols == b.matched.cols &&
           a.unmatched_workers.size() == b.unmatched_workers.size() &&
           a.unmatched_slots.size() == b.unmatched_slots.size();
}

std::string describe(const std::vector<double>& lambda) {
    std::ostringstream s;
    s.precision(17);
    s << "(";
    for (std::size_t i = 0; i < lambda.size(); ++i) s << (i ? ", " : "") << lambda[i];
    s << ")";
    return s.str();
}

Matching simulate(const SurplusModel& model, const CovariateBasis& c, const TaxScheme& w, const MarketSpec& spec,
                  const IpfpConfig& inner) {
    EquilibriumResult r;
    try {
        r = solve_ae(spec, surplus_from_covariates(model, c), w, inner);
    } catch (const Error& e) {
        throw EstimationError("equilibrium solve failed at lambda = " + describe(model.lambda) + ": " + e.what(),
                              model.lambda);
    }
    if (!r.diagnostics.converged)
        throw EstimationError("equilibrium solve did not converge at lambda = " + describe(model.lambda), model.lambda);
    return r.matching;
}

}  // namespace

SurplusMatrix surplus_from_covariates(const SurplusModel& model, const CovariateBasis& c) {
    if (model.lambda.size() != c.dims)
        throw DimensionError("lambda has " + std::to_string(model.lambda.size()) + " coefficients, covariates have " +
                             std::to_string(c.dims));
    if (c.dims == 0) throw DimensionError("covariate basis must have at least one dimension");
    SurplusMatrix phi{Matrix(c.rows, c.cols)};
    for (std::size_t x = 0; x < c.rows; ++x) {
        for (std::size_t y = 0; y < c.cols; ++y) {
            double s = 0.0;
            for (std::size_t k = 0; k < c.dims; ++k) s += model.lambda[k] * c(x, y, k);
            phi.phi(x, y) = s;
        }
    }
    return phi;
}

double kl_divergence(const Matching& observed, const Matching& simulated) {
    if (!same_shape(observed, simulated)) throw DimensionError("observed and simulated matchings differ in shape");
    const double obs_total = total_mass(observed), sim_total = total_mass(simulated);
    std::vector<double> p, q;
    for_each_cell(observed, [&](double v) { p.push_back(v / obs_total); });
    for_each_cell(simulated, [&](double v) { q.push_back(v / sim_total); });
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0) throw RangeError("matching masses must be nonnegative");
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) throw RangeError("simulated matching has zero mass where the observed one is positive");
        d += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(d, 0.0);
}

double log_likelihood(const SurplusModel& model, const CovariateBasis& c, const Matching& observed, const TaxScheme& w,
                      const MarketSpec& spec, const IpfpConfig& inner) {
    check_dimensions(spec, observed);
    const Matching mu = simulate(model, c, w, spec, inner);
    const double total = total_mass(mu);
    std::vector<double> q;
    for_each_cell(mu, [&](double v) { q.push_back(v); });
    double ll = 0.0;
    std::size_t i = 0;
    for_each_cell(observed, [&](double v) { ll += v * std::log(q[i++] / total); });
    return ll;
}

EstimationResult estimate(const Matching& observed, const CovariateBasis& c, const TaxScheme& w,
                          const MarketSpec& spec, const EstimationConfig& cfg) {
    check_dimensions(spec, observed);
    check_dimensions(spec, w);
    if (c.rows != spec.num_workers() || c.cols != spec.num_slots())
        throw DimensionError("covariate basis does not match the market dimensions");
    if (!(cfg.kl_tolerance > 0.0) || cfg.max_outer_evals < 1) throw RangeError("invalid estimation configuration");
    for_each_cell(observed, [](double v) {
        if (!(v > 0.0)) throw RangeError("observed matching must be strictly positive in every cell");
    });

    std::vector<double> lambda0 = cfg.initial_lambda.value_or(std::vector<double>(c.dims, 0.0));
    if (lambda0.size() != c.dims) throw DimensionError("initial lambda has the wrong length");

    auto objective = [&](const std::vector<double>& lambda) {
        return kl_divergence(observed, simulate(SurplusModel{lambda}, c, w, spec, cfg.inner));
    };

    optimize::Minimum best;
    EstimationResult out;
    if (cfg.optimizer == Optimizer::nelder_mead) {
        best = optimize::nelder_mead(objective, lambda0, cfg.kl_tolerance, cfg.max_outer_evals);
        out.report.optimizer = "nelder_mead";
    } else {
        best = optimize::finite_difference_bfgs(objective, lambda0, cfg.kl_tolerance, cfg.max_outer_evals);
        out.report.optimizer = "finite_difference_bfgs";
    }
    out.model.lambda = best.x;
    out.report.kl_trace = best.trace;
    out.report.final_kl = best.value;
    out.report.evaluations = best.evaluations;
    out.report.converged = best.reached_target;
    return out;
}

}  // namespace regmatch
