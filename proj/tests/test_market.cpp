#include <doctest.h>

#include "regmatch/experiments.hpp"
#include "regmatch/market.hpp"

using namespace regmatch;

TEST_SUITE("market") {
    TEST_CASE("worked example validates and reports region masses") {
        auto [spec, phi] = example1_market();
        CHECK(validate_market(spec).ok());
        CHECK_NOTHROW(check_dimensions(spec, phi));
        CHECK(spec.region_index("z2") == 1);
        CHECK_THROWS_AS(spec.region_index("nowhere"), SchemaError);

        Matching mu{Matrix(2, 3), {0.1, 0.1}, {0.0, 0.05, 0.15}};
        mu.matched.data = {0.1, 0.1, 0.2, 0.2, 0.15, 0.05};
        CHECK(region_mass(mu, 0, spec) == doctest::Approx(0.55));
        CHECK(region_mass(mu, "z2", spec) == doctest::Approx(0.25));
        const auto all = region_masses(mu, spec);
        CHECK(all.size() == 2);
        CHECK(population_residual(mu, spec) == doctest::Approx(0.0).epsilon(1e-15));
    }

    TEST_CASE("every violated invariant is listed") {
        auto [spec, phi] = example1_market();
        spec.n[0] = -1.0;
        spec.lower[0] = 0.7;  // above the ceiling 0.5 and the region capacity 0.6
        spec.region_of[2] = 5;
        const auto report = validate_market(spec);
        CHECK_FALSE(report.ok());
        CHECK(report.violations.size() >= 3);
        CHECK_THROWS_AS(require_valid(spec), SchemaError);
    }

    TEST_CASE("floors exceeding the worker mass are rejected") {
        auto [spec, phi] = example1_market();
        spec.upper = {kInfinity, kInfinity};
        spec.n = {0.4, 0.4};
        spec.lower = {0.5, 0.35};
        CHECK_FALSE(validate_market(spec).ok());
    }

    TEST_CASE("duplicate identifiers and non-positive ceilings are rejected") {
        auto [spec, phi] = example1_market();
        auto dup = spec;
        dup.slot_types[1] = "y1";
        CHECK_FALSE(validate_market(dup).ok());
        auto zero_cap = spec;
        zero_cap.upper[1] = 0.0;
        CHECK_FALSE(validate_market(zero_cap).ok());
    }

    TEST_CASE("dimension checks") {
        auto [spec, phi] = example1_market();
        CHECK_THROWS_AS(check_dimensions(spec, SurplusMatrix{Matrix(3, 2)}), DimensionError);
        CHECK_THROWS_AS(check_dimensions(spec, TaxScheme{{0.0}}), DimensionError);
        Matching bad{Matrix(2, 3), {0.0}, {0.0, 0.0, 0.0}};
        CHECK_THROWS_AS(check_dimensions(spec, bad), DimensionError);
    }
}
