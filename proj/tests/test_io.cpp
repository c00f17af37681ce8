#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "regmatch/ae_solver.hpp"
#include "regmatch/experiments.hpp"
#include "regmatch/io.hpp"

using namespace regmatch;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "regmatch_io_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_SUITE("io") {
    TEST_CASE("market round trip keeps every field, infinite ceilings included") {
        auto [spec, phi] = example1_market();
        spec.upper[1] = kInfinity;
        const auto path = scratch("market.json");
        io::save_market(spec, path, phi);
        CHECK(io::load_market(path) == spec);
        const auto back = io::load_surplus(path);
        REQUIRE(back.has_value());
        CHECK(*back == phi);
    }

    TEST_CASE("fixture file matches the in-code worked example") {
        const auto [spec, phi] = example1_market();
        const auto path = fs::path(REGMATCH_TEST_DATA) / "example1.json";
        CHECK(io::load_market(path) == spec);
        CHECK(*io::load_surplus(path) == phi);
    }

    TEST_CASE("result round trip is exact") {
        auto [spec, phi] = example1_market();
        const auto r = solve_ae(spec, phi, TaxScheme{{0.3, -0.1}});
        const auto path = scratch("result.json");
        io::save_result(r, path, io::json{{"note", "kept"}});
        CHECK(io::load_result(path) == r);
        CHECK(io::read_json(path)["note"] == "kept");
    }

    TEST_CASE("taxes load from an array or a region-keyed object") {
        auto [spec, phi] = example1_market();
        const auto a = scratch("w_array.json"), o = scratch("w_object.json"), bad = scratch("w_bad.json");
        write_text(a, R"({"w": [0.5, -0.25]})");
        write_text(o, R"({"w": {"z2": -0.25}})");
        write_text(bad, R"({"w": [0.5]})");
        CHECK(io::load_taxes(a, spec).w == std::vector<double>{0.5, -0.25});
        CHECK(io::load_taxes(o, spec).w == std::vector<double>{0.0, -0.25});
        CHECK_THROWS_AS(io::load_taxes(bad, spec), DimensionError);
    }

    TEST_CASE("malformed documents raise typed errors") {
        const auto broken = scratch("broken.json"), missing = scratch("missing_region.json");
        write_text(broken, "{\n  \"n\": [0.5,\n  oops ]\n}\n");
        try {
            io::read_json(broken);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find(":3:") != std::string::npos);
        }
        write_text(missing, R"({"worker_types": ["x"], "slot_types": ["y1", "y2"], "regions": ["z"],
                                "n": [1], "m": [1, 1], "region_of": {"y1": "z"}})");
        CHECK_THROWS_AS(io::load_market(missing), SchemaError);
        CHECK_THROWS_AS(io::read_json(scratch("does_not_exist.json")), ParseError);
    }
}
