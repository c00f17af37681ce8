#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "regmatch/experiments.hpp"

using namespace regmatch;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_SUITE("experiments") {
    TEST_CASE("SplitMix64 reference outputs and normal moments") {
        SplitMix64 rng(0);
        CHECK(rng.next() == 0xE220A8397B1DCDAFULL);
        CHECK(rng.next() == 0x6E789E6AA1B965F4ULL);

        SplitMix64 g(42);
        const int n = 200'000;
        double s = 0.0, ss = 0.0;
        for (int i = 0; i < n; ++i) {
            const double v = g.normal();
            s += v;
            ss += v * v;
        }
        CHECK(std::abs(s / n) < 0.01);
        CHECK(ss / n == doctest::Approx(1.0).epsilon(0.01));
        for (int i = 0; i < 1000; ++i) {
            const double u = g.uniform();
            CHECK((u >= 0.0 && u < 1.0));
        }
    }

    TEST_CASE("named sub-streams are distinct and reproducible") {
        CHECK(derive_seed(1, "market", 0) == derive_seed(1, "market", 0));
        CHECK(derive_seed(1, "market", 0) != derive_seed(1, "market", 1));
        CHECK(derive_seed(1, "market", 0) != derive_seed(1, "noise", 0));
        CHECK(derive_seed(1, "market", 0) != derive_seed(2, "market", 0));
    }

    TEST_CASE("default grids have the documented sizes") {
        const JrmpConfig cfg;
        CHECK(cfg.floor_grid.size() == 7);
        CHECK(cfg.upper_grid.size() == 41);
        CHECK(cfg.cap_grid.size() == 41);
        CHECK(cfg.urban_tax_grid.size() == 21);
        CHECK(cfg.rural_tax_grid.size() == 21);
        CHECK(cfg.floor_grid.back() == 0.4);
        CHECK(cfg.rural_tax_grid.front() == -0.2);
        CHECK_THROWS_AS(stepped_grid(0, 1, 0), RangeError);
    }

    TEST_CASE("generated markets are admissible and seed-determined") {
        for (std::uint64_t s = 0; s < 5; ++s) {
            const auto [spec, phi] = gen_jrmp_market(s);
            CHECK(validate_market(spec).ok());
            CHECK(gen_jrmp_market(s).second == phi);
        }
        CHECK_FALSE(gen_jrmp_market(0).second == gen_jrmp_market(1).second);
        const auto [big, bphi] = gen_scaling_market(10, 50, 1);
        CHECK(validate_market(big).ok());
        CHECK(big.num_slots() == 500);
        CHECK(bphi.phi.data.size() == 5000);
        CHECK(big.lower[7] == doctest::Approx(0.3 / 50));
    }

    TEST_CASE("sweep output is identical for any number of threads") {
        JrmpConfig cfg;
        cfg.replications = 3;
        cfg.floor_grid = {0.2, 0.35};
        cfg.jobs = 1;
        const auto one = run_lower_bound_sweep(cfg);
        cfg.jobs = 3;
        const auto many = run_lower_bound_sweep(cfg);
        const auto dir = std::filesystem::temp_directory_path() / "regmatch_exp_tests";
        std::filesystem::create_directories(dir);
        write_panels_csv(one, dir / "a.csv");
        write_panels_csv(many, dir / "b.csv");
        CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
        CHECK(one.cells.size() == 6);
        const auto header = slurp(dir / "a.csv").substr(0, 31);
        CHECK(header.rfind("floor,policy,metric,mean,stderr", 0) == 0);
    }

    TEST_CASE("efficient taxes in the sweep: no urban tax, rural subsidies, tight floors") {
        JrmpConfig cfg;
        cfg.replications = 2;
        const auto data = run_lower_bound_sweep(cfg);
        for (const auto& cell : data.cells) {
            const auto& e = cell.policies[1];
            REQUIRE(e.policy == Policy::eae);
            CHECK(e.converged);
            CHECK(e.taxes[0] == 0.0);
            for (std::size_t z = 1; z < 3; ++z) {
                CHECK(e.taxes[z] <= 0.0);
                if (e.taxes[z] < 0.0) CHECK(e.region_mass[z] == doctest::Approx(cell.floor).epsilon(1e-7));
            }
        }
    }

    TEST_CASE("smallest scaling cell converges") {
        ScalingConfig cfg;
        cfg.worker_type_counts = {10};
        cfg.region_counts = {5};
        cfg.trials = 2;
        const auto rows = bench_eae(cfg);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].converged);
        CHECK(rows[0].mean_seconds > 0.0);
    }

    TEST_CASE("number formatting round-trips") {
        for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) CHECK(std::stod(format_number(v)) == v);
        CHECK(format_number(0.25) == "0.25");
    }
}
