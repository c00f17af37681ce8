#include <doctest.h>

#include <cmath>

#include "regmatch/ae_solver.hpp"
#include "regmatch/estimation.hpp"
#include "regmatch/experiments.hpp"
#include "regmatch/optimize.hpp"

using namespace regmatch;

namespace {

struct Synthetic {
    MarketSpec spec;
    CovariateBasis basis;
    Matching observed;
};

Synthetic synthetic(const std::vector<double>& lambda, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Synthetic s;
    s.spec = MarketSpec{{"x1", "x2", "x3"}, {"y1", "y2", "y3", "y4"}, {"z1", "z2"}, {0.3, 0.4, 0.3},
                        {0.25, 0.25, 0.2, 0.3}, {0, 0, 1, 1}, {kInfinity, kInfinity}, {0.0, 0.0}};
    s.basis = CovariateBasis(3, 4, lambda.size());
    for (double& v : s.basis.data) v = rng.normal();
    const auto phi = surplus_from_covariates(SurplusModel{lambda}, s.basis);
    s.observed = solve_ae(s.spec, phi, TaxScheme::zeros(2), IpfpConfig{1e-14, 100000}).matching;
    return s;
}

}  // namespace

TEST_SUITE("estimation") {
    TEST_CASE("linear surplus from covariates") {
        CovariateBasis c(1, 2, 2);
        c(0, 0, 0) = 1.0, c(0, 0, 1) = 2.0, c(0, 1, 0) = -1.0, c(0, 1, 1) = 0.5;
        const auto phi = surplus_from_covariates(SurplusModel{{2.0, -1.0}}, c);
        CHECK(phi.phi(0, 0) == doctest::Approx(0.0));
        CHECK(phi.phi(0, 1) == doctest::Approx(-2.5));
        CHECK_THROWS_AS(surplus_from_covariates(SurplusModel{{1.0}}, c), DimensionError);
    }

    TEST_CASE("divergence is zero on identical matchings and positive otherwise") {
        const auto s = synthetic({1.0, -0.5}, 1);
        CHECK(kl_divergence(s.observed, s.observed) == 0.0);
        const auto other = solve_ae(s.spec, surplus_from_covariates(SurplusModel{{0.5, 0.0}}, s.basis),
                                    TaxScheme::zeros(2)).matching;
        CHECK(kl_divergence(s.observed, other) > 1e-4);
        Matching zero = other;
        zero.matched(0, 0) = 0.0;
        CHECK_THROWS_AS(kl_divergence(s.observed, zero), RangeError);
    }

    TEST_CASE("the true coefficients maximize the likelihood") {
        const std::vector<double> truth{1.0, -0.5};
        const auto s = synthetic(truth, 2);
        const double at_truth = log_likelihood(SurplusModel{truth}, s.basis, s.observed, TaxScheme::zeros(2), s.spec);
        for (std::size_t k = 0; k < 2; ++k) {
            for (double d : {-1e-2, 1e-2}) {
                auto l = truth;
                l[k] += d;
                CHECK(log_likelihood(SurplusModel{l}, s.basis, s.observed, TaxScheme::zeros(2), s.spec) < at_truth);
            }
        }
    }

    TEST_CASE("round trip recovers the coefficients with both optimizers") {
        const std::vector<double> truth{1.0, -0.5};
        const auto s = synthetic(truth, 3);
        for (Optimizer opt : {Optimizer::nelder_mead, Optimizer::finite_difference_bfgs}) {
            EstimationConfig cfg;
            cfg.optimizer = opt;
            const auto fit = estimate(s.observed, s.basis, TaxScheme::zeros(2), s.spec, cfg);
            CHECK(fit.report.converged);
            CHECK(fit.report.final_kl <= 1e-10);
            for (std::size_t k = 0; k < 2; ++k) CHECK(fit.model.lambda[k] == doctest::Approx(truth[k]).epsilon(1e-3));
            for (std::size_t i = 1; i < fit.report.kl_trace.size(); ++i)
                CHECK(fit.report.kl_trace[i] <= fit.report.kl_trace[i - 1]);
        }
    }

    TEST_CASE("estimation errors are typed") {
        const auto s = synthetic({1.0, -0.5}, 4);
        Matching bad = s.observed;
        bad.matched(1, 1) = 0.0;
        CHECK_THROWS_AS(estimate(bad, s.basis, TaxScheme::zeros(2), s.spec), RangeError);
        CHECK_THROWS_AS(estimate(s.observed, CovariateBasis(2, 4, 2), TaxScheme::zeros(2), s.spec), DimensionError);
        EstimationConfig cfg;
        cfg.initial_lambda = std::vector<double>{2000.0, 0.0};
        CovariateBasis ones(3, 4, 2);
        for (double& v : ones.data) v = 1.0;
        CHECK_THROWS_AS(estimate(s.observed, ones, TaxScheme::zeros(2), s.spec, cfg), EstimationError);
    }

    TEST_CASE("optimizers minimize a quadratic") {
        auto f = [](const std::vector<double>& x) { return (x[0] - 1) * (x[0] - 1) + 10 * (x[1] + 2) * (x[1] + 2); };
        const auto nm = optimize::nelder_mead(f, {0.0, 0.0}, 1e-14, 5000);
        CHECK(nm.x[0] == doctest::Approx(1.0).epsilon(1e-5));
        CHECK(nm.x[1] == doctest::Approx(-2.0).epsilon(1e-5));
        const auto bf = optimize::finite_difference_bfgs(f, {0.0, 0.0}, 1e-14, 5000);
        CHECK(bf.x[0] == doctest::Approx(1.0).epsilon(1e-5));
        CHECK(bf.reached_target);
    }
}
