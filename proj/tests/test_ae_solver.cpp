#include <doctest.h>

#include <cmath>

#include "regmatch/ae_solver.hpp"
#include "regmatch/experiments.hpp"
#include "regmatch/logit.hpp"
#include "oracles.hpp"

using namespace regmatch;

TEST_SUITE("ae_solver") {
    TEST_CASE("fixed-tax equilibrium agrees with gradient descent on the dual") {
        SplitMix64 rng(2024);
        for (int trial = 0; trial < 8; ++trial) {
            auto [spec, phi] = oracle::random_market(rng, 2 + trial % 3, 2 + (trial * 7) % 4, 1 + trial % 3);
            std::vector<double> w(spec.num_regions());
            for (double& v : w) v = rng.normal();
            const auto r = solve_ae(spec, phi, TaxScheme{w});
            REQUIRE(r.diagnostics.converged);
            const auto e = oracle::descent_equilibrium(spec, phi.phi, w);
            for (std::size_t i = 0; i < e.mu.data.size(); ++i)
                CHECK(r.matching.matched.data[i] == doctest::Approx(e.mu.data[i]).epsilon(1e-8));
            for (std::size_t x = 0; x < spec.num_workers(); ++x)
                CHECK(r.matching.unmatched_workers[x] == doctest::Approx(e.mu_x0[x]).epsilon(1e-8));
        }
    }

    TEST_CASE("equilibrium conditions hold exactly in the utilities") {
        auto [spec, phi] = example1_market();
        const TaxScheme w{{0.7, -0.2}};
        const auto r = solve_ae(spec, phi, w);
        REQUIRE(r.diagnostics.converged);
        CHECK(population_residual(r.matching, spec) <= 1e-10);
        for (std::size_t x = 0; x < 2; ++x)
            for (std::size_t y = 0; y < 3; ++y) {
                const double net = phi.phi(x, y) - w.w[spec.region_of[y]];
                CHECK(r.utilities.U(x, y) + r.utilities.V(x, y) == doctest::Approx(net).epsilon(1e-13));
            }
        // mu = grad G(U) on the worker side
        const Matrix p = g_gradient(r.utilities.U, spec);
        for (std::size_t x = 0; x < 2; ++x)
            for (std::size_t y = 0; y < 3; ++y) CHECK(p(x, y + 1) == doctest::Approx(r.matching.matched(x, y)).epsilon(1e-9));
        CHECK(r.diagnostics.duality_gap <= 1e-9);
    }

    TEST_CASE("single pair solves the quadratic in closed form") {
        // mu^2 = (n - mu)(m - mu) exp(Phi - w)
        MarketSpec spec{{"x"}, {"y"}, {"z"}, {1.0}, {2.0}, {0}, {kInfinity}, {0.0}};
        SurplusMatrix phi{Matrix(1, 1)};
        phi.phi(0, 0) = 1.3;
        const auto r = solve_ae(spec, phi, TaxScheme{{0.4}});
        const double e = std::exp(1.3 - 0.4), n = 1.0, m = 2.0;
        // (e - 1) mu^2 - e (n + m) mu + e n m = 0, smaller root
        const double a = e - 1.0, b = -e * (n + m), c = e * n * m;
        const double mu = (-b - std::sqrt(b * b - 4 * a * c)) / (2 * a);
        CHECK(r.matching.matched(0, 0) == doctest::Approx(mu).epsilon(1e-9));
    }

    TEST_CASE("warm start reaches the same equilibrium") {
        auto [spec, phi] = gen_jrmp_market(5);
        IpfpState warm;
        const auto first = solve_ae(spec, phi, TaxScheme{{1.0, -0.1, 0.0}}, {}, &warm);
        const auto again = solve_ae(spec, phi, TaxScheme{{1.5, -0.1, 0.0}}, {}, &warm);
        const auto cold = solve_ae(spec, phi, TaxScheme{{1.5, -0.1, 0.0}});
        CHECK(first.diagnostics.converged);
        for (std::size_t i = 0; i < cold.matching.matched.data.size(); ++i)
            CHECK(again.matching.matched.data[i] == doctest::Approx(cold.matching.matched.data[i]).epsilon(1e-9));
    }

    TEST_CASE("matched mass falls as a region's tax rises") {
        auto [spec, phi] = example1_market();
        double prev = 1e9;
        for (double t = -3.0; t <= 3.0; t += 0.5) {
            const auto r = solve_ae(spec, phi, TaxScheme{{t, 0.0}});
            const double mass = region_mass(r.matching, 0, spec);
            CHECK(mass < prev);
            prev = mass;
        }
    }

    TEST_CASE("overflowing surplus and bad configurations are rejected") {
        auto [spec, phi] = example1_market();
        auto huge = phi;
        huge.phi(0, 0) = 2000.0;
        CHECK_THROWS_AS(solve_ae(spec, huge, TaxScheme::zeros(2)), RangeError);
        CHECK_THROWS_AS(solve_ae(spec, phi, TaxScheme::zeros(3)), DimensionError);
        CHECK_THROWS_AS(solve_ae(spec, phi, TaxScheme::zeros(2), IpfpConfig{-1.0, 10}), RangeError);
    }

    TEST_CASE("iteration cap reports non-convergence instead of throwing") {
        auto [spec, phi] = gen_jrmp_market(1);
        const auto r = solve_ae(spec, phi, TaxScheme::zeros(3), IpfpConfig{1e-15, 2});
        CHECK_FALSE(r.diagnostics.converged);
    }
}
