#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "regmatch/counterfactuals.hpp"
#include "regmatch/eae_solver.hpp"
#include "regmatch/market.hpp"

namespace regmatch {

/** SplitMix64 stream with Box-Muller normals.
 *
 * Uniforms take the top 53 bits of each output; every normal consumes two uniforms and uses the
 * cosine branch only, so the sequence is fully determined by the seed on any IEEE-754 platform.
 */
class SplitMix64 {
    public:
        explicit SplitMix64(std::uint64_t seed) : state_{seed} {}

        std::uint64_t next();
        /// Uniform on [0, 1).
        double uniform();
        double normal();

    private:
        std::uint64_t state_;
};

/// Independent sub-stream seed for (base, name, index); used to fan a single --seed out to components.
std::uint64_t derive_seed(std::uint64_t base, std::string_view name, std::uint64_t index = 0);

/// start, start + step, ..., stop (inclusive, decimal-rounded to 1e-9).
std::vector<double> stepped_grid(double start, double stop, double step);

/// Two worker types, three slot types, two regions with the ceilings and floors of the worked example.
std::pair<MarketSpec, SurplusMatrix> example1_market();

/// Residency market: 10 doctor types, 6 hospital types in one urban and two rural regions, no quotas.
std::pair<MarketSpec, SurplusMatrix> gen_jrmp_market(std::uint64_t seed);

/// Scaling market: 10 hospital types per region, floors 0.3 / |Z| on every region, Phi = 2 + N(0, 1).
std::pair<MarketSpec, SurplusMatrix> gen_scaling_market(std::size_t num_worker_types, std::size_t num_regions,
                                                        std::uint64_t seed, std::size_t hospitals_per_region = 10);

struct JrmpConfig {
    std::vector<std::uint64_t> seeds;  ///< one market per seed; derived from base_seed when empty
    std::uint64_t base_seed = 0;
    std::size_t replications = 30;
    std::vector<double> floor_grid = stepped_grid(0.10, 0.40, 0.05);
    std::vector<double> upper_grid = stepped_grid(0.10, 0.50, 0.01);
    std::vector<double> cap_grid = stepped_grid(0.050, 0.25, 0.005);
    std::vector<double> urban_tax_grid = stepped_grid(0.0, 10.0, 0.5);
    std::vector<double> rural_tax_grid = stepped_grid(-0.2, 0.0, 0.01);
    BbaeCriterion bbae_criterion = BbaeCriterion::social_welfare;
    unsigned jobs = 1;
    EaeConfig eae;

    std::vector<std::uint64_t> market_seeds() const;
    void validate() const;
};

/// One policy on one (seed, floor) cell.
struct PolicySummary {
    Policy policy = Policy::unconstrained;
    bool feasible = false;
    bool converged = false;
    bool grid_monotone = true;
    double social_welfare = 0.0;
    double agent_welfare = 0.0;
    double pm_surplus = 0.0;
    double urban_mass = 0.0;
    double rural_mass = 0.0;       ///< summed over the rural regions
    std::vector<double> region_mass;
    std::vector<double> taxes;
    std::vector<double> search_parameter;
};

struct SweepCell {
    std::uint64_t seed = 0;
    double floor = 0.0;
    std::vector<PolicySummary> policies;  ///< unconstrained, eae, eae_upper_bound, cap_reduced, bbae
    OrderingReport ordering;
};

struct PanelRow {
    double floor = 0.0;
    Policy policy = Policy::unconstrained;
    std::string metric;
    double mean = 0.0;
    double stderr_ = 0.0;
};

struct LocusRow {
    double floor = 0.0;
    Policy policy = Policy::unconstrained;
    double tax = 0.0;          ///< mean urban tax
    double avg_subsidy = 0.0;  ///< mean over rural regions of -w_z
};

struct PanelData {
    std::vector<SweepCell> cells;  ///< replication-major, floors ascending within a replication
    std::vector<PanelRow> panels;  ///< over cells where the policy met the floors; the unconstrained baseline always counts
    std::vector<LocusRow> locus;
};

/// The five policies at every floor level of every replication, plus per-floor means and standard errors.
PanelData run_lower_bound_sweep(const JrmpConfig& cfg);

/// All five policies of one replication across the floor grid.
std::vector<SweepCell> run_replication(std::uint64_t seed, const JrmpConfig& cfg);

struct ScalingConfig {
    std::vector<std::size_t> worker_type_counts{10, 20};
    std::vector<std::size_t> region_counts = [] {
        std::vector<std::size_t> v;
        for (std::size_t z = 5; z <= 100; z += 5) v.push_back(z);
        return v;
    }();
    std::size_t hospitals_per_region = 10;
    std::size_t trials = 10;
    std::uint64_t base_seed = 0;
    EaeConfig eae;
    double kkt_tolerance = 1e-6;
};

struct BenchRow {
    std::size_t num_worker_types = 0;
    std::size_t num_regions = 0;
    double mean_seconds = 0.0;
    bool converged = false;  ///< every trial converged and passed verify_kkt
};

std::vector<BenchRow> bench_eae(const ScalingConfig& cfg);

void write_panels_csv(const PanelData& data, const std::filesystem::path& path);
void write_locus_csv(const PanelData& data, const std::filesystem::path& path);
void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path);

/// Shortest text that reads back to the same double; used by every CSV writer.
std::string format_number(double v);

}  // namespace regmatch
