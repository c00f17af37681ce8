#include <doctest.h>

#include <cmath>

#include "regmatch/eae_solver.hpp"
#include "regmatch/experiments.hpp"
#include "regmatch/welfare.hpp"
#include "oracles.hpp"

using namespace regmatch;

namespace {

MarketSpec single_pair(double upper, double lower) {
    return MarketSpec{{"x"}, {"y"}, {"z"}, {1.0}, {1.0}, {0}, {upper}, {lower}};
}

}  // namespace

TEST_SUITE("eae_solver") {
    TEST_CASE("worked example reproduces the reported tax") {
        auto [spec, phi] = example1_market();
        const auto r = solve_eae(spec, phi);
        CHECK(r.diagnostics.converged);
        CHECK(r.taxes.w[0] == doctest::Approx(0.5825).epsilon(0.005 / 0.5825));
        CHECK(r.taxes.w[1] == 0.0);
        // The urban ceiling binds; the rural region is slack on both sides.
        CHECK(region_mass(r.matching, 0, spec) == doctest::Approx(0.5).epsilon(1e-8));
    }

    TEST_CASE("single pair: ceiling and floor taxes are +-2 log 3") {
        SurplusMatrix phi{Matrix(1, 1)};
        const auto up = solve_eae(single_pair(0.25, 0.0), phi);
        CHECK(up.taxes.w[0] == doctest::Approx(2 * std::log(3.0)).epsilon(1e-9));
        CHECK(up.matching.matched(0, 0) == doctest::Approx(0.25).epsilon(1e-9));
        const auto down = solve_eae(single_pair(kInfinity, 0.75), phi);
        CHECK(down.taxes.w[0] == doctest::Approx(-2 * std::log(3.0)).epsilon(1e-9));
    }

    TEST_CASE("agrees with the subgradient-bisection oracle on random markets") {
        SplitMix64 rng(99);
        for (int trial = 0; trial < 5; ++trial) {
            auto [spec, phi] = oracle::random_market(rng, 2 + trial % 2, 3 + trial % 2, 2 + trial % 2);
            const auto r = solve_eae(spec, phi);
            REQUIRE(r.diagnostics.converged);
            const auto w = oracle::bisection_taxes(spec, phi.phi);
            for (std::size_t z = 0; z < w.size(); ++z) CHECK(r.taxes.w[z] == doctest::Approx(w[z]).epsilon(1e-6));
        }
    }

    TEST_CASE("converged solutions pass the verifier and close the duality gap") {
        SplitMix64 rng(5);
        for (int trial = 0; trial < 15; ++trial) {
            auto [spec, phi] = oracle::random_market(rng, 1 + trial % 5, 1 + (trial * 3) % 5, 1 + trial % 3);
            const auto r = solve_eae(spec, phi);
            REQUIRE(r.diagnostics.converged);
            const auto k = verify_kkt(r, spec, phi, 1e-6);
            CHECK(k.pass);
            CHECK(k.quota_violation <= 1e-8);
            CHECK(std::abs(r.diagnostics.primal_value - r.diagnostics.dual_value) <=
                  1e-6 * (1 + std::abs(r.diagnostics.dual_value)));
            // Only constrained regions carry a tax, with the sign of the binding side.
            const auto mass = region_masses(r.matching, spec);
            for (std::size_t z = 0; z < spec.num_regions(); ++z) {
                if (r.taxes.w[z] > 0) CHECK(mass[z] == doctest::Approx(spec.upper[z]).epsilon(1e-7));
                if (r.taxes.w[z] < 0) CHECK(mass[z] == doctest::Approx(spec.lower[z]).epsilon(1e-7));
            }
        }
    }

    TEST_CASE("starting point does not matter") {
        SplitMix64 rng(17);
        auto [spec, phi] = oracle::random_market(rng, 3, 4, 3);
        const auto ref = solve_eae(spec, phi);
        for (int k = 0; k < 6; ++k) {
            EaeConfig cfg;
            cfg.initial_taxes = TaxScheme{{3 * rng.normal(), 3 * rng.normal(), 3 * rng.normal()}};
            const auto r = solve_eae(spec, phi, cfg);
            for (std::size_t z = 0; z < 3; ++z) CHECK(r.taxes.w[z] == doctest::Approx(ref.taxes.w[z]).epsilon(1e-7));
        }
    }

    TEST_CASE("slack quotas leave the zero-tax equilibrium untouched") {
        auto [spec, phi] = example1_market();
        spec.upper = {0.9, 0.9};
        spec.lower = {0.0, 0.0};
        const auto r = solve_eae(spec, phi);
        const auto ae = solve_ae(spec, phi, TaxScheme::zeros(2));
        CHECK(r.taxes.w == std::vector<double>{0.0, 0.0});
        CHECK(r.matching == ae.matching);
    }

    TEST_CASE("quotas beyond the tax bracket are infeasible") {
        SurplusMatrix phi{Matrix(1, 1)};
        phi.phi(0, 0) = -100.0;  // a floor of 0.5 needs a subsidy near 100
        CHECK_THROWS_AS(solve_eae(single_pair(kInfinity, 0.5), phi), InfeasibleError);
        phi.phi(0, 0) = 100.0;   // a ceiling of 0.001 needs a tax near 114
        CHECK_THROWS_AS(solve_eae(single_pair(1e-3, 0.0), phi), InfeasibleError);
    }

    TEST_CASE("one outer step on the bound of a violated region") {
        auto [spec, phi] = example1_market();
        const auto w = outer_step(TaxScheme::zeros(2), 0, spec, phi, EaeConfig{});
        CHECK(w.w[0] > 0.0);
        const auto r = solve_ae(spec, phi, w);
        CHECK(region_mass(r.matching, 0, spec) == doctest::Approx(0.5).epsilon(1e-8));
        CHECK_THROWS_AS(outer_step(TaxScheme::zeros(2), 2, spec, phi, EaeConfig{}), DimensionError);
    }

    TEST_CASE("the verifier catches a perturbed solution") {
        auto [spec, phi] = example1_market();
        auto r = solve_eae(spec, phi);
        r.taxes.w[0] += 0.05;
        CHECK_FALSE(verify_kkt(r, spec, phi, 1e-6).pass);
        auto s = solve_eae(spec, phi);
        s.matching.matched(0, 0) += 1e-3;
        CHECK_FALSE(verify_kkt(s, spec, phi, 1e-6).pass);
    }
}
