#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "regmatch/estimation.hpp"
#include "regmatch/experiments.hpp"
#include "regmatch/io.hpp"

using namespace regmatch;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "regmatch");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "regmatch_cli_tests";
    fs::create_directories(dir);
    return dir / name;
}

const std::string kExample = std::string(REGMATCH_TEST_DATA) + "/example1.json";

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("solve-eae then verify on the worked example") {
        const auto out = scratch("eae.json");
        const auto r = run({"solve-eae", "--market", kExample, "--out", out.string()});
        CHECK(r.code == 0);
        const auto doc = io::read_json(out);
        CHECK(doc["w"][0].get<double>() == doctest::Approx(0.5825).epsilon(0.01));
        CHECK(doc["w"][1].get<double>() == 0.0);
        CHECK(doc["metadata"]["tolerances"]["kkt"].get<double>() == 1e-6);
        CHECK(doc["welfare"].contains("gamma_offset"));
        CHECK(doc["kkt"]["pass"].get<bool>());

        const auto v = run({"verify", "--market", kExample, "--result", out.string()});
        CHECK(v.code == 0);
        CHECK(v.out.find("kkt pass") != std::string::npos);
    }

    TEST_CASE("verify fails on a tampered result") {
        const auto out = scratch("tampered.json");
        REQUIRE(run({"solve-eae", "--market", kExample, "--out", out.string()}).code == 0);
        auto doc = io::read_json(out);
        doc["w"][0] = 0.1;
        io::write_json(doc, out);
        CHECK(run({"verify", "--market", kExample, "--result", out.string()}).code == 2);
    }

    TEST_CASE("solve-ae with taxes and tolerance overrides") {
        const auto taxes = scratch("w.json"), out = scratch("ae.json");
        std::ofstream(taxes) << R"({"w": {"z1": 0.5}})";
        const auto r = run({"solve-ae", "--market", kExample, "--taxes", taxes.string(), "--tol-pop", "1e-12",
                            "--out", out.string()});
        CHECK(r.code == 0);
        const auto doc = io::read_json(out);
        CHECK(doc["w"][0].get<double>() == 0.5);
        CHECK(doc["metadata"]["tolerances"]["population"].get<double>() == 1e-12);
    }

    TEST_CASE("usage errors exit with 1") {
        CHECK(run({}).code == 1);
        CHECK(run({"solve-eae", "--market", kExample, "--out", scratch("x.json").string(), "--bogus", "1"}).code == 1);
        CHECK(run({"solve-eae", "--market", "/nonexistent.json", "--out", scratch("x.json").string()}).code == 1);
        CHECK(run({"solve-eae", "--market", kExample}).code == 1);  // no --out
        CHECK(run({"counterfactual", "--market", kExample, "--policy", "magic", "--out", scratch("x.json").string()}).code == 1);
        const auto h = run({"--help"});
        CHECK(h.code == 0);
        const auto sub = run({"experiment", "--help"});
        for (const char* flag : {"--seeds", "--seed", "--floors", "--jobs", "--out", "--tol-pop", "--tol-tax", "--tol-kkt"})
            CHECK(sub.out.find(flag) != std::string::npos);
    }

    TEST_CASE("unattainable quota exits with 3") {
        const auto market = scratch("tight.json");
        MarketSpec spec{{"x"}, {"y"}, {"z"}, {1.0}, {1.0}, {0}, {kInfinity}, {0.5}};
        SurplusMatrix phi{Matrix(1, 1)};
        phi.phi(0, 0) = -100.0;
        io::save_market(spec, market, phi);
        const auto r = run({"solve-eae", "--market", market.string(), "--out", scratch("t.json").string()});
        CHECK(r.code == 3);
        CHECK_FALSE(r.err.empty());
    }

    TEST_CASE("counterfactual policies and infeasible floors") {
        const auto out = scratch("cf.json");
        CHECK(run({"counterfactual", "--market", kExample, "--policy", "eae", "--floors", "z2=0.35", "--out", out.string()}).code == 0);
        const auto doc = io::read_json(out);
        CHECK(doc["policy"] == "eae");
        CHECK(doc["region_mass"][1].get<double>() == doctest::Approx(0.35).epsilon(1e-7));
        CHECK(run({"counterfactual", "--market", kExample, "--policy", "cap_reduced", "--urban", "z1", "--floors", "z2=0.38",
                   "--grid", "0.05:0.1:0.05", "--out", out.string()}).code == 3);
        CHECK(run({"counterfactual", "--market", kExample, "--policy", "bbae", "--floors", "0.2", "--grid", "0:2:0.5;-0.2:0:0.1",
                   "--out", out.string()}).code == 0);
    }

    TEST_CASE("estimate from files") {
        const auto market = scratch("est_market.json"), obs = scratch("obs.json"), cov = scratch("cov.json"),
                   out = scratch("est.json");
        auto [spec, phi] = example1_market();
        spec.upper = {kInfinity, kInfinity};
        spec.lower = {0.0, 0.0};
        io::save_market(spec, market);
        io::json c = io::json::array();
        SplitMix64 rng(1);
        CovariateBasis basis(2, 3, 2);
        for (std::size_t x = 0; x < 2; ++x) {
            io::json row = io::json::array();
            for (std::size_t y = 0; y < 3; ++y) {
                basis(x, y, 0) = rng.normal(), basis(x, y, 1) = rng.normal();
                row.push_back(io::json::array({basis(x, y, 0), basis(x, y, 1)}));
            }
            c.push_back(row);
        }
        io::write_json(io::json{{"covariates", c}}, cov);
        const auto truth = surplus_from_covariates(SurplusModel{{0.8, 0.3}}, basis);
        const auto mu = solve_ae(spec, truth, TaxScheme::zeros(2), IpfpConfig{1e-14, 100000});
        io::save_result(mu, obs);
        const auto r = run({"estimate", "--market", market.string(), "--observed", obs.string(), "--covariates",
                            cov.string(), "--out", out.string()});
        CHECK(r.code == 0);
        const auto doc = io::read_json(out);
        CHECK(doc["lambda"][0].get<double>() == doctest::Approx(0.8).epsilon(1e-3));
        CHECK(doc["lambda"][1].get<double>() == doctest::Approx(0.3).epsilon(1e-3));
    }

    TEST_CASE("experiment output is byte-identical across runs and thread counts") {
        const auto a = scratch("pa.csv"), b = scratch("pb.csv"), la = scratch("la.csv"), lb = scratch("lb.csv");
        CHECK(run({"experiment", "--seeds", "3", "--seed", "9", "--floors", "0.2,0.35", "--jobs", "1", "--out", a.string(),
                   "--locus", la.string()}).code == 0);
        CHECK(run({"experiment", "--seeds", "3", "--seed", "9", "--floors", "0.2,0.35", "--jobs", "3", "--out", b.string(),
                   "--locus", lb.string()}).code == 0);
        CHECK(slurp(a) == slurp(b));
        CHECK(slurp(la) == slurp(lb));
        CHECK(slurp(la).rfind("floor,policy,tax,avg_subsidy\n", 0) == 0);
    }

    TEST_CASE("bench writes one row per cell") {
        const auto out = scratch("bench.csv");
        CHECK(run({"bench", "--workers", "10", "--regions", "5", "--trials", "1", "--out", out.string()}).code == 0);
        const auto text = slurp(out);
        CHECK(text.rfind("num_worker_types,num_regions,mean_seconds,converged\n10,5,", 0) == 0);
    }
}
