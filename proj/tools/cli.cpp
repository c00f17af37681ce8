#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>

#include "regmatch/counterfactuals.hpp"
#include "regmatch/estimation.hpp"
#include "regmatch/experiments.hpp"
#include "regmatch/io.hpp"
#include "regmatch/welfare.hpp"

namespace regmatch::cli {

namespace {

using io::json;

struct Options {
    std::string market, phi, taxes, observed, covariates, result, out, locus;
    std::string floors, grid, policy = "eae", urban, rural, optimizer = "nelder_mead";
    std::string workers = "10,20", regions = "5:100:5";
    std::uint64_t seed = 0;
    std::size_t seeds = 30, trials = 10;
    unsigned jobs = 1;
    double tol_pop = IpfpConfig{}.population_tolerance;
    double tol_tax = EaeConfig{}.tax_tolerance;
    double tol_kkt = 1e-6;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep))
        if (!item.empty()) parts.push_back(item);
    return parts;
}

double to_number(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ParseError("'" + s + "' is not a number");
    }
    if (used != s.size()) throw ParseError("'" + s + "' is not a number");
    return v;
}

/// "a:b:c" is an inclusive stepped range, anything else a comma-separated list.
std::vector<double> parse_values(const std::string& s) {
    if (s.find(':') != std::string::npos) {
        const auto parts = split(s, ':');
        if (parts.size() != 3) throw ParseError("range '" + s + "' must be start:stop:step");
        return stepped_grid(to_number(parts[0]), to_number(parts[1]), to_number(parts[2]));
    }
    std::vector<double> out;
    for (const auto& p : split(s, ',')) out.push_back(to_number(p));
    if (out.empty()) throw ParseError("empty value list");
    return out;
}

std::vector<std::size_t> parse_regions(const std::string& s, const MarketSpec& spec) {
    std::vector<std::size_t> out;
    for (const auto& name : split(s, ',')) out.push_back(spec.region_index(name));
    return out;
}

EaeConfig eae_config(const Options& o) {
    EaeConfig cfg;
    cfg.inner.population_tolerance = o.tol_pop;
    cfg.tax_tolerance = o.tol_tax;
    cfg.validate();
    return cfg;
}

json tolerances(const Options& o) {
    return json{{"population", o.tol_pop}, {"tax", o.tol_tax}, {"kkt", o.tol_kkt}};
}

SurplusMatrix surplus_for(const Options& o, const MarketSpec& spec) {
    std::optional<SurplusMatrix> phi;
    if (!o.phi.empty()) {
        phi = io::load_surplus(o.phi);
        if (!phi) throw SchemaError(o.phi + ": no 'phi' field");
    } else {
        phi = io::load_surplus(o.market);
        if (!phi) throw SchemaError("no surplus matrix: pass --phi or add 'phi' to the market file");
    }
    check_dimensions(spec, *phi);
    return *phi;
}

json welfare_json(const WelfareBreakdown& w, const MarketSpec& spec) {
    return json{{"social", w.social},           {"worker_side", w.worker_side},
                {"slot_side", w.slot_side},     {"pm_surplus", w.pm_surplus},
                {"entropy", w.entropy_term},    {"match_surplus", w.match_surplus},
                {"gamma_offset", gamma_offset(spec)}};
}

json kkt_json(const KKTReport& k) {
    return json{{"population_residual", k.population_residual},
                {"noblocking_min_slack", k.noblocking_min_slack},
                {"binding_residual", k.binding_residual},
                {"clearing_residual", k.clearing_residual},
                {"quota_violation", k.quota_violation},
                {"complementary_slackness_residual", k.complementary_slackness_residual},
                {"duality_gap", std::isfinite(k.duality_gap) ? json(k.duality_gap) : json(nullptr)},
                {"pass", k.pass}};
}

void print_kkt(const KKTReport& k, std::ostream& out) {
    out << "population_residual " << k.population_residual << "\n"
        << "noblocking_min_slack " << k.noblocking_min_slack << "\n"
        << "binding_residual " << k.binding_residual << "\n"
        << "clearing_residual " << k.clearing_residual << "\n"
        << "quota_violation " << k.quota_violation << "\n"
        << "complementary_slackness_residual " << k.complementary_slackness_residual << "\n"
        << "duality_gap " << k.duality_gap << "\n"
        << "kkt " << (k.pass ? "pass" : "fail") << "\n";
}

void require_out(const Options& o) {
    if (o.out.empty()) throw ParseError("--out is required");
}

int write_equilibrium(const std::string& command, const EquilibriumResult& r, const MarketSpec& spec,
                      const SurplusMatrix& phi, const Options& o, std::ostream& out) {
    const KKTReport kkt = verify_kkt(r, spec, phi, o.tol_kkt);
    json extra{{"welfare", welfare_json(welfare_breakdown(r, phi, spec), spec)},
               {"kkt", kkt_json(kkt)},
               {"metadata", {{"command", command}, {"tolerances", tolerances(o)}}}};
    io::save_result(r, o.out, extra);
    out << command << ": converged=" << (r.diagnostics.converged ? "true" : "false") << " w=[";
    for (std::size_t z = 0; z < r.taxes.w.size(); ++z) out << (z ? ", " : "") << r.taxes.w[z];
    out << "]\n";
    return r.diagnostics.converged ? ok : not_converged;
}

int cmd_solve_ae(const Options& o, std::ostream& out) {
    require_out(o);
    const MarketSpec spec = io::load_market(o.market);
    const SurplusMatrix phi = surplus_for(o, spec);
    const TaxScheme w = o.taxes.empty() ? TaxScheme::zeros(spec.num_regions()) : io::load_taxes(o.taxes, spec);
    const EaeConfig cfg = eae_config(o);
    return write_equilibrium("solve-ae", solve_ae(spec, phi, w, cfg.inner), spec, phi, o, out);
}

int cmd_solve_eae(const Options& o, std::ostream& out) {
    require_out(o);
    const MarketSpec spec = io::load_market(o.market);
    const SurplusMatrix phi = surplus_for(o, spec);
    return write_equilibrium("solve-eae", solve_eae(spec, phi, eae_config(o)), spec, phi, o, out);
}

int cmd_verify(const Options& o, std::ostream& out) {
    if (o.result.empty()) throw ParseError("--result is required");
    const MarketSpec spec = io::load_market(o.market);
    const SurplusMatrix phi = surplus_for(o, spec);
    const EquilibriumResult r = io::load_result(o.result);
    check_dimensions(spec, r.taxes);
    check_dimensions(spec, r.matching);
    const KKTReport k = verify_kkt(r, spec, phi, o.tol_kkt);
    print_kkt(k, out);
    return k.pass ? ok : not_converged;
}

CovariateBasis load_covariates(const std::string& path) {
    const json doc = io::read_json(path);
    if (!doc.is_object() || !doc.contains("covariates")) throw SchemaError(path + ": missing 'covariates'");
    const json& c = doc["covariates"];
    if (!c.is_array() || c.empty() || !c[0].is_array() || c[0].empty() || !c[0][0].is_array())
        throw SchemaError(path + ": 'covariates' must be an array [x][y][k]");
    CovariateBasis basis(c.size(), c[0].size(), c[0][0].size());
    for (std::size_t x = 0; x < basis.rows; ++x) {
        if (!c[x].is_array() || c[x].size() != basis.cols) throw SchemaError(path + ": ragged covariate rows");
        for (std::size_t y = 0; y < basis.cols; ++y) {
            const json& cell = c[x][y];
            if (!cell.is_array() || cell.size() != basis.dims) throw SchemaError(path + ": ragged covariate cells");
            for (std::size_t k = 0; k < basis.dims; ++k) {
                if (!cell[k].is_number()) throw SchemaError(path + ": covariates must be numbers");
                basis(x, y, k) = cell[k].get<double>();
            }
        }
    }
    return basis;
}

int cmd_estimate(const Options& o, std::ostream& out) {
    require_out(o);
    if (o.observed.empty() || o.covariates.empty()) throw ParseError("--observed and --covariates are required");
    const MarketSpec spec = io::load_market(o.market);
    const json obs_doc = io::read_json(o.observed);
    const Matching observed = io::matching_from_json(obs_doc.contains("mu") ? obs_doc["mu"] : obs_doc);
    const CovariateBasis basis = load_covariates(o.covariates);
    const TaxScheme w = o.taxes.empty() ? TaxScheme::zeros(spec.num_regions()) : io::load_taxes(o.taxes, spec);

    EstimationConfig cfg;
    if (o.optimizer == "bfgs")
        cfg.optimizer = Optimizer::finite_difference_bfgs;
    else if (o.optimizer != "nelder_mead")
        throw ParseError("--optimizer must be nelder_mead or bfgs");
    cfg.inner.population_tolerance = std::min(cfg.inner.population_tolerance, o.tol_pop);

    const EstimationResult fit = estimate(observed, basis, w, spec, cfg);
    json doc{{"lambda", fit.model.lambda},
             {"kl_trace", fit.report.kl_trace},
             {"final_kl", fit.report.final_kl},
             {"evaluations", fit.report.evaluations},
             {"converged", fit.report.converged},
             {"optimizer", fit.report.optimizer},
             {"metadata",
              {{"command", "estimate"},
               {"tolerances", tolerances(o)},
               {"kl_tolerance", cfg.kl_tolerance},
               {"inner_population_tolerance", cfg.inner.population_tolerance}}}};
    io::write_json(doc, o.out);
    out << "estimate: final_kl=" << fit.report.final_kl << " converged=" << (fit.report.converged ? "true" : "false")
        << "\n";
    return fit.report.converged ? ok : not_converged;
}

Policy parse_policy(const std::string& s) {
    for (Policy p : {Policy::unconstrained, Policy::eae, Policy::eae_upper_bound, Policy::cap_reduced, Policy::bbae})
        if (policy_name(p) == s) return p;
    throw ParseError("unknown policy '" + s + "'");
}

/// "z2=0.2,z3=0.2" sets named floors; a bare number applies to every rural region.
std::vector<double> parse_floors(const std::string& s, const MarketSpec& spec, const PolicyRoles& roles) {
    std::vector<double> floors(spec.num_regions(), 0.0);
    if (s.empty()) return floors;
    if (s.find('=') == std::string::npos) {
        const double v = to_number(s);
        for (std::size_t z : roles.rural) floors[z] = v;
        return floors;
    }
    for (const auto& item : split(s, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ParseError("floor '" + item + "' must be region=value");
        floors[spec.region_index(item.substr(0, eq))] = to_number(item.substr(eq + 1));
    }
    return floors;
}

json policy_json(const PolicyResult& r, const SurplusMatrix& phi, const Options& o) {
    json doc = io::result_to_json(r.equilibrium);
    doc["policy"] = std::string(policy_name(r.policy));
    doc["search_parameter"] = r.search_parameter;
    doc["feasible"] = r.feasible;
    doc["grid_monotone"] = r.grid_monotone;
    doc["selection_objective"] = r.selection_objective;
    doc["region_mass"] = r.region_mass;
    doc["welfare"] = welfare_json(r.welfare, r.market);
    doc["kkt"] = kkt_json(verify_kkt(r.equilibrium, r.market, phi, o.tol_kkt));
    doc["metadata"] = {{"command", "counterfactual"}, {"tolerances", tolerances(o)}};
    return doc;
}

int cmd_counterfactual(const Options& o, std::ostream& out) {
    require_out(o);
    const MarketSpec spec = io::load_market(o.market);
    const SurplusMatrix phi = surplus_for(o, spec);
    const Policy policy = parse_policy(o.policy);
    const EaeConfig cfg = eae_config(o);

    PolicyRoles roles;
    roles.urban = parse_regions(o.urban.empty() ? spec.regions.front() : o.urban, spec);
    if (!o.rural.empty()) {
        roles.rural = parse_regions(o.rural, spec);
    } else {
        for (std::size_t z = 0; z < spec.num_regions(); ++z)
            if (std::find(roles.urban.begin(), roles.urban.end(), z) == roles.urban.end()) roles.rural.push_back(z);
    }
    const std::vector<double> floors = parse_floors(o.floors, spec, roles);

    PolicyResult r;
    switch (policy) {
    case Policy::unconstrained:
        r = unconstrained_policy(spec, phi, floors, cfg);
        break;
    case Policy::eae:
        r = eae_policy(spec, phi, floors, cfg);
        break;
    case Policy::eae_upper_bound:
        r = eae_upper_bound(spec, phi, roles, floors, parse_values(o.grid.empty() ? "0.10:0.50:0.01" : o.grid), cfg);
        break;
    case Policy::cap_reduced:
        r = cap_reduced_ae(spec, phi, roles, floors, parse_values(o.grid.empty() ? "0.05:0.25:0.005" : o.grid), cfg);
        break;
    case Policy::bbae: {
        // One value list per region in region order, separated by ';'. Default: urban 0:10:0.5, rural -0.2:0:0.01.
        std::vector<std::vector<double>> per_region;
        if (o.grid.empty()) {
            for (std::size_t z = 0; z < spec.num_regions(); ++z) {
                const bool urban = std::find(roles.urban.begin(), roles.urban.end(), z) != roles.urban.end();
                const bool rural = std::find(roles.rural.begin(), roles.rural.end(), z) != roles.rural.end();
                per_region.push_back(urban ? parse_values("0:10:0.5")
                                     : rural ? parse_values("-0.2:0:0.01")
                                             : std::vector<double>{0.0});
            }
        } else {
            for (const auto& part : split(o.grid, ';')) per_region.push_back(parse_values(part));
            if (per_region.size() != spec.num_regions())
                throw ParseError("--grid for bbae needs one ';'-separated value list per region");
        }
        r = bbae(spec, phi, floors, tax_grid_product(per_region), cfg);
        break;
    }
    }
    io::write_json(policy_json(r, phi, o), o.out);
    out << "counterfactual " << policy_name(r.policy) << ": feasible=" << (r.feasible ? "true" : "false")
        << " social_welfare=" << r.welfare.social << "\n";
    if (!r.feasible) return infeasible;
    return r.equilibrium.diagnostics.converged ? ok : not_converged;
}

std::string sibling(const std::string& path, const std::string& name) {
    const std::filesystem::path p(path);
    return (p.parent_path() / name).string();
}

int cmd_experiment(const Options& o, std::ostream& out) {
    require_out(o);
    JrmpConfig cfg;
    cfg.base_seed = o.seed;
    cfg.replications = o.seeds;
    cfg.jobs = o.jobs;
    cfg.eae = eae_config(o);
    if (!o.floors.empty()) cfg.floor_grid = parse_values(o.floors);

    const PanelData data = run_lower_bound_sweep(cfg);
    write_panels_csv(data, o.out);
    write_locus_csv(data, o.locus.empty() ? sibling(o.out, "locus.csv") : o.locus);

    std::size_t held = 0, incomplete = 0, unconverged = 0;
    for (const auto& c : data.cells) {
        held += c.ordering.holds;
        incomplete += !c.ordering.complete;
        for (const auto& p : c.policies)
            if (p.policy == Policy::eae && !p.converged) ++unconverged;
    }
    out << "experiment: " << data.cells.size() << " cells, welfare ordering held in " << held << ", incomplete "
        << incomplete << ", unconverged EAE " << unconverged << "\n";
    return unconverged == 0 ? ok : not_converged;
}

int cmd_bench(const Options& o, std::ostream& out) {
    require_out(o);
    ScalingConfig cfg;
    cfg.worker_type_counts.clear();
    for (double v : parse_values(o.workers)) cfg.worker_type_counts.push_back(static_cast<std::size_t>(v));
    cfg.region_counts.clear();
    for (double v : parse_values(o.regions)) cfg.region_counts.push_back(static_cast<std::size_t>(v));
    cfg.trials = o.trials;
    cfg.base_seed = o.seed;
    cfg.eae = eae_config(o);
    cfg.kkt_tolerance = o.tol_kkt;
    const auto rows = bench_eae(cfg);
    write_bench_csv(rows, o.out);
    const bool all = std::all_of(rows.begin(), rows.end(), [](const BenchRow& r) { return r.converged; });
    out << "bench: " << rows.size() << " cells, all converged=" << (all ? "true" : "false") << "\n";
    return all ? ok : not_converged;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Regional-constraint matching markets: equilibria, estimation and policy experiments", "regmatch"};
    app.require_subcommand(1);

    auto add_tolerances = [&](CLI::App* sub) {
        sub->add_option("--tol-pop", o.tol_pop, "population residual tolerance of the inner solve")->capture_default_str();
        sub->add_option("--tol-tax", o.tol_tax, "tax change tolerance of the outer loop")->capture_default_str();
        sub->add_option("--tol-kkt", o.tol_kkt, "tolerance of the equilibrium verifier")->capture_default_str();
    };
    auto add_market = [&](CLI::App* sub) {
        sub->add_option("--market", o.market, "market JSON file")->required()->check(CLI::ExistingFile);
        sub->add_option("--phi", o.phi, "JSON file with a 'phi' surplus matrix (overrides the market's)")
            ->check(CLI::ExistingFile);
    };

    auto* ae = app.add_subcommand("solve-ae", "equilibrium at fixed taxes");
    add_market(ae);
    ae->add_option("--taxes", o.taxes, "JSON file with 'w' (array or region object); zero when absent")
        ->check(CLI::ExistingFile);
    ae->add_option("--out", o.out, "result JSON");
    add_tolerances(ae);

    auto* eae = app.add_subcommand("solve-eae", "equilibrium with the taxes that enforce the regional quotas");
    add_market(eae);
    eae->add_option("--out", o.out, "result JSON");
    add_tolerances(eae);

    auto* est = app.add_subcommand("estimate", "fit linear surplus coefficients to an observed matching");
    est->add_option("--market", o.market, "market JSON file")->required()->check(CLI::ExistingFile);
    est->add_option("--observed", o.observed, "matching JSON (or a result file with 'mu')")->check(CLI::ExistingFile);
    est->add_option("--covariates", o.covariates, "JSON with 'covariates' [x][y][k]")->check(CLI::ExistingFile);
    est->add_option("--taxes", o.taxes, "taxes in force when the data were observed")->check(CLI::ExistingFile);
    est->add_option("--optimizer", o.optimizer, "nelder_mead or bfgs")->capture_default_str();
    est->add_option("--out", o.out, "estimate JSON");
    add_tolerances(est);

    auto* cf = app.add_subcommand("counterfactual", "one policy on one market");
    add_market(cf);
    cf->add_option("--policy", o.policy, "unconstrained, eae, eae_upper_bound, cap_reduced or bbae")
        ->capture_default_str();
    cf->add_option("--floors", o.floors, "target floors: 'z2=0.2,z3=0.2', or one value for every rural region");
    cf->add_option("--grid", o.grid,
                   "search grid: 'start:stop:step' or a list; for bbae one list per region separated by ';'");
    cf->add_option("--urban", o.urban, "comma-separated urban regions (default: the first region)");
    cf->add_option("--rural", o.rural, "comma-separated rural regions (default: all non-urban regions)");
    cf->add_option("--out", o.out, "policy result JSON");
    add_tolerances(cf);

    auto* ex = app.add_subcommand("experiment", "floor sweep over random residency markets");
    ex->add_option("--seeds", o.seeds, "number of market replications")->capture_default_str();
    ex->add_option("--seed", o.seed, "base seed; each market uses a derived sub-stream")->capture_default_str();
    ex->add_option("--floors", o.floors, "floor levels 'start:stop:step' or a list (default 0.10:0.40:0.05)");
    ex->add_option("--jobs", o.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    ex->add_option("--out", o.out, "panels CSV");
    ex->add_option("--locus", o.locus, "locus CSV (default: locus.csv next to --out)");
    add_tolerances(ex);

    auto* bn = app.add_subcommand("bench", "EAE wall-clock over growing markets");
    bn->add_option("--workers", o.workers, "worker type counts")->capture_default_str();
    bn->add_option("--regions", o.regions, "region counts")->capture_default_str();
    bn->add_option("--trials", o.trials, "markets per cell")->capture_default_str();
    bn->add_option("--seed", o.seed, "base seed")->capture_default_str();
    bn->add_option("--out", o.out, "bench CSV");
    add_tolerances(bn);

    auto* vf = app.add_subcommand("verify", "re-check a result file against its market");
    add_market(vf);
    vf->add_option("--result", o.result, "result JSON")->required()->check(CLI::ExistingFile);
    vf->add_option("--tol-kkt", o.tol_kkt, "tolerance of the equilibrium verifier")->capture_default_str();

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return usage_error;
    }

    try {
        if (ae->parsed()) return cmd_solve_ae(o, out);
        if (eae->parsed()) return cmd_solve_eae(o, out);
        if (est->parsed()) return cmd_estimate(o, out);
        if (cf->parsed()) return cmd_counterfactual(o, out);
        if (ex->parsed()) return cmd_experiment(o, out);
        if (bn->parsed()) return cmd_bench(o, out);
        if (vf->parsed()) return cmd_verify(o, out);
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << "\n";
        return infeasible;
    } catch (const EstimationError& e) {
        err << "estimation failed: " << e.what() << "\n";
        return not_converged;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return usage_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return usage_error;
    }
    return usage_error;
}

}  // namespace regmatch::cli
