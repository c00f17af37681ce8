#include "regmatch/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numbers>
#include <thread>

namespace regmatch {

std::uint64_t SplitMix64::next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view name, std::uint64_t index) {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    SplitMix64 mix(base ^ h);
    mix.next();
    SplitMix64 out(mix.next() ^ (index * 0xD1B54A32D192ED03ULL));
    return out.next();
}

std::vector<double> stepped_grid(double start, double stop, double step) {
    if (!(step > 0.0) || stop < start) throw RangeError("grid needs step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(std::round((start + step * static_cast<double>(i)) * 1e9) / 1e9);
    return out;
}

std::pair<MarketSpec, SurplusMatrix> example1_market() {
    MarketSpec spec{{"x1", "x2"}, {"y1", "y2", "y3"}, {"z1", "z2"}, {0.5, 0.5}, {0.3, 0.3, 0.4}, {0, 0, 1},
                    {0.5, 0.4},   {0.1, 0.05}};
    SurplusMatrix phi{Matrix(2, 3)};
    phi.phi.data = {2.0, 1.5, 1.0, 1.5, 2.0, 1.0};
    return {spec, phi};
}

std::pair<MarketSpec, SurplusMatrix> gen_jrmp_market(std::uint64_t seed) {
    constexpr std::size_t N = 10, M = 6;
    MarketSpec spec;
    for (std::size_t x = 0; x < N; ++x) spec.worker_types.push_back("x" + std::to_string(x + 1));
    for (std::size_t y = 0; y < M; ++y) spec.slot_types.push_back("y" + std::to_string(y + 1));
    spec.regions = {"z1", "z2", "z3"};
    spec.n.assign(N, 0.1);
    spec.m.assign(M, 0.25);
    spec.region_of = {0, 0, 1, 1, 2, 2};
    spec.upper.assign(3, kInfinity);
    spec.lower.assign(3, 0.0);

    SplitMix64 rng(seed);
    SurplusMatrix phi{Matrix(N, M)};
    for (std::size_t x = 0; x < N; ++x)
        for (std::size_t y = 0; y < M; ++y) phi.phi(x, y) = (spec.region_of[y] == 0 ? 2.0 : 0.5) + rng.normal();
    return {spec, phi};
}

std::pair<MarketSpec, SurplusMatrix> gen_scaling_market(std::size_t num_worker_types, std::size_t num_regions,
                                                        std::uint64_t seed, std::size_t hospitals_per_region) {
    if (num_worker_types == 0 || num_regions == 0 || hospitals_per_region == 0)
        throw RangeError("scaling market needs positive counts");
    const std::size_t N = num_worker_types, L = num_regions, M = L * hospitals_per_region;
    MarketSpec spec;
    for (std::size_t x = 0; x < N; ++x) spec.worker_types.push_back("x" + std::to_string(x + 1));
    for (std::size_t y = 0; y < M; ++y) spec.slot_types.push_back("y" + std::to_string(y + 1));
    for (std::size_t z = 0; z < L; ++z) spec.regions.push_back("z" + std::to_string(z + 1));
    spec.n.assign(N, 1.0 / static_cast<double>(N));
    spec.m.assign(M, 1.5 / static_cast<double>(M));
    for (std::size_t y = 0; y < M; ++y) spec.region_of.push_back(y / hospitals_per_region);
    spec.upper.assign(L, kInfinity);
    spec.lower.assign(L, 0.3 / static_cast<double>(L));

    SplitMix64 rng(seed);
    SurplusMatrix phi{Matrix(N, M)};
    for (double& v : phi.phi.data) v = 2.0 + rng.normal();
    return {spec, phi};
}

std::vector<std::uint64_t> JrmpConfig::market_seeds() const {
    if (!seeds.empty()) return seeds;
    std::vector<std::uint64_t> out;
    for (std::size_t r = 0; r < replications; ++r) out.push_back(derive_seed(base_seed, "market", r));
    return out;
}

void JrmpConfig::validate() const {
    if (seeds.empty() && replications == 0) throw RangeError("sweep needs at least one replication");
    for (double f : floor_grid)
        if (!(f >= 0.0 && f <= 0.5)) throw RangeError("floor levels must lie in [0, 0.5]");
    eae.validate();
}

namespace {

constexpr Policy kPolicies[] = {Policy::unconstrained, Policy::eae, Policy::eae_upper_bound, Policy::cap_reduced,
                                Policy::bbae};

PolicySummary summarize(const PolicyResult& r, const PolicyRoles& roles) {
    PolicySummary s;
    s.policy = r.policy;
    s.feasible = r.feasible;
    s.converged = r.equilibrium.diagnostics.converged;
    s.grid_monotone = r.grid_monotone;
    s.social_welfare = r.welfare.social;
    s.agent_welfare = r.welfare.worker_side + r.welfare.slot_side;
    s.pm_surplus = r.welfare.pm_surplus;
    s.region_mass = r.region_mass;
    for (std::size_t z : roles.urban) s.urban_mass += r.region_mass[z];
    for (std::size_t z : roles.rural) s.rural_mass += r.region_mass[z];
    s.taxes = r.equilibrium.taxes.w;
    s.search_parameter = r.search_parameter;
    return s;
}

template <class F>
PolicySummary guarded(Policy p, F&& run) {
    try {
        return run();
    } catch (const Error&) {
        PolicySummary s;
        s.policy = p;
        return s;
    }
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mu) * (x - mu);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

/// Runs task(i) for i in [0, count) on up to `jobs` threads; the first exception is rethrown.
template <class Task>
void parallel_for(std::size_t count, unsigned jobs, Task&& task) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<SweepCell> run_replication(std::uint64_t seed, const JrmpConfig& cfg) {
    auto [spec, phi] = gen_jrmp_market(seed);
    const PolicyRoles roles{{0}, {1, 2}};
    const double tol = cfg.eae.constraint_tolerance;

    std::vector<PolicyResult> ub, caps;
    std::vector<TaxGridPoint> tax_points;
    try {
        ub = upper_bound_candidates(spec, phi, roles, cfg.upper_grid, cfg.eae);
    } catch (const Error&) {
    }
    try {
        caps = cap_candidates(spec, phi, roles, cfg.cap_grid, cfg.eae);
    } catch (const Error&) {
    }
    tax_points = evaluate_tax_grid(spec, phi,
                                   tax_grid_product({cfg.urban_tax_grid, cfg.rural_tax_grid, cfg.rural_tax_grid}),
                                   cfg.eae);

    std::vector<SweepCell> cells;
    for (double floor : cfg.floor_grid) {
        const std::vector<double> floors{0.0, floor, floor};
        SweepCell cell;
        cell.seed = seed;
        cell.floor = floor;
        std::vector<PolicyResult> results;
        auto keep = [&](PolicyResult r) {
            auto s = summarize(r, roles);
            results.push_back(std::move(r));
            return s;
        };
        cell.policies.push_back(guarded(Policy::unconstrained, [&] { return keep(unconstrained_policy(spec, phi, floors, cfg.eae)); }));
        cell.policies.push_back(guarded(Policy::eae, [&] { return keep(eae_policy(spec, phi, floors, cfg.eae)); }));
        cell.policies.push_back(guarded(Policy::eae_upper_bound, [&] {
            if (ub.empty()) throw Error("no upper-bound candidates");
            return keep(select_loosest(ub, floors, tol));
        }));
        cell.policies.push_back(guarded(Policy::cap_reduced, [&] {
            if (caps.empty()) throw Error("no capacity candidates");
            return keep(select_loosest(caps, floors, tol));
        }));
        cell.policies.push_back(
            guarded(Policy::bbae, [&] { return keep(select_bbae(tax_points, spec, phi, floors, cfg.eae, cfg.bbae_criterion)); }));
        cell.ordering = welfare_ordering_check(results);
        cells.push_back(std::move(cell));
    }
    return cells;
}

PanelData run_lower_bound_sweep(const JrmpConfig& cfg) {
    cfg.validate();
    const auto seeds = cfg.market_seeds();
    std::vector<std::vector<SweepCell>> per_rep(seeds.size());
    parallel_for(seeds.size(), cfg.jobs, [&](std::size_t r) { per_rep[r] = run_replication(seeds[r], cfg); });

    PanelData data;
    for (const auto& rep : per_rep) data.cells.insert(data.cells.end(), rep.begin(), rep.end());

    static const char* metrics[] = {"social_welfare", "agent_welfare", "pm_surplus", "urban_mass", "rural_mass"};
    for (std::size_t f = 0; f < cfg.floor_grid.size(); ++f) {
        const double floor = cfg.floor_grid[f];
        for (std::size_t p = 0; p < std::size(kPolicies); ++p) {
            std::vector<const PolicySummary*> ok;
            for (const auto& rep : per_rep)
                if (rep[f].policies[p].feasible || kPolicies[p] == Policy::unconstrained)
                    ok.push_back(&rep[f].policies[p]);
            if (ok.empty()) continue;
            for (const char* metric : metrics) {
                std::vector<double> v;
                for (const auto* s : ok) {
                    const std::string_view m = metric;
                    v.push_back(m == "social_welfare" ? s->social_welfare
                                : m == "agent_welfare" ? s->agent_welfare
                                : m == "pm_surplus"    ? s->pm_surplus
                                : m == "urban_mass"    ? s->urban_mass
                                                       : s->rural_mass);
                }
                data.panels.push_back({floor, kPolicies[p], metric, mean_of(v), stderr_of(v)});
            }
            std::vector<double> tax, subsidy;
            for (const auto* s : ok) {
                tax.push_back(s->taxes[0]);
                subsidy.push_back(-0.5 * (s->taxes[1] + s->taxes[2]));
            }
            data.locus.push_back({floor, kPolicies[p], mean_of(tax), mean_of(subsidy)});
        }
    }
    return data;
}

std::vector<BenchRow> bench_eae(const ScalingConfig& cfg) {
    std::vector<BenchRow> rows;
    std::uint64_t cell = 0;
    for (std::size_t nx : cfg.worker_type_counts) {
        for (std::size_t nz : cfg.region_counts) {
            BenchRow row{nx, nz, 0.0, true};
            for (std::size_t t = 0; t < cfg.trials; ++t) {
                auto [spec, phi] = gen_scaling_market(nx, nz, derive_seed(cfg.base_seed, "bench", cell * 1000 + t),
                                                      cfg.hospitals_per_region);
                const auto start = std::chrono::steady_clock::now();
                bool ok = false;
                try {
                    const auto r = solve_eae(spec, phi, cfg.eae);
                    ok = r.diagnostics.converged && verify_kkt(r, spec, phi, cfg.kkt_tolerance).pass;
                } catch (const Error&) {
                    ok = false;
                }
                row.mean_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                row.converged = row.converged && ok;
            }
            if (cfg.trials > 0) row.mean_seconds /= static_cast<double>(cfg.trials);
            rows.push_back(row);
            ++cell;
        }
    }
    return rows;
}

std::string format_number(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

}  // namespace

void write_panels_csv(const PanelData& data, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "floor,policy,metric,mean,stderr\n";
    for (const auto& r : data.panels)
        out << format_number(r.floor) << ',' << policy_name(r.policy) << ',' << r.metric << ',' << format_number(r.mean)
            << ',' << format_number(r.stderr_) << '\n';
}

void write_locus_csv(const PanelData& data, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "floor,policy,tax,avg_subsidy\n";
    for (const auto& r : data.locus)
        out << format_number(r.floor) << ',' << policy_name(r.policy) << ',' << format_number(r.tax) << ','
            << format_number(r.avg_subsidy) << '\n';
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "num_worker_types,num_regions,mean_seconds,converged\n";
    for (const auto& r : rows)
        out << r.num_worker_types << ',' << r.num_regions << ',' << format_number(r.mean_seconds) << ','
            << (r.converged ? "true" : "false") << '\n';
}

}  // namespace regmatch
