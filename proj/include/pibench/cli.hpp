#pragma once

#include "pibench/concentrability.hpp"
#include "pibench/harness.hpp"
#include "pibench/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace pibench::cli {

enum ExitCode { Ok = 0, BadInput = 1, Internal = 2 };

namespace detail {

/// Applies a JSON object of {flag-name: value} onto parsed options, overriding them.
inline void apply_config(CLI::App& sub, const std::filesystem::path& path) {
    const io::Json j = io::read_json(path);
    pibench::detail::require(j.is_object(), "config: expected a JSON object");
    auto text = [](const io::Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    for (const auto& [key, value] : j.items()) {
        std::string flag = key;
        for (char& ch : flag)
            if (ch == '_') ch = '-';
        CLI::Option* opt = sub.get_option_no_throw("--" + flag);
        pibench::detail::require(opt != nullptr && flag != "config", "config: unknown key '" + key + "'");
        opt->clear();
        if (value.is_array())
            for (const auto& v : value) opt->add_result(text(v));
        else
            opt->add_result(text(value));
        opt->run_callback();
    }
}

inline StateDistribution uniform_for(const FiniteMdp& mdp) { return StateDistribution::uniform(mdp.n_states()); }

} // namespace detail

struct GarnetArgs {
    GarnetSpec spec;
    std::string mdp_out = "mdp.json";
    std::string features_out = "features.json";
};

struct RunArgs {
    std::string mdp;
    std::string features;
    std::string scheme = "api";
    double alpha = 0.1;
    int m = 1;
    double rho = 0.1;
    int iters = 100;
    double noise = 0.1;
    std::string noise_mode = "vmax";
    std::uint64_t seed = 0;
    std::string csv = "trace.csv";
    std::string json;
};

struct ConcArgs {
    std::string mdp;
    std::vector<int> m{2, 5};
    double tol = 1e-6; ///< relative to V_max
    std::string out = "report.json";
};

struct BoundsArgs {
    std::string trace;
    std::string report;
    std::string scheme = "api";
    int m = 1;
    std::string out = "bounds.csv";
};

inline int cmd_garnet(const GarnetArgs& a, std::ostream& out) {
    const GarnetInstance g = generate(a.spec);
    io::write_json(a.mdp_out, io::to_json(g.mdp));
    io::write_json(a.features_out, io::to_json(g.features));
    out << "wrote " << a.mdp_out << " and " << a.features_out << "\n";
    return Ok;
}

inline int cmd_run(const RunArgs& a, std::ostream& out) {
    const FiniteMdp mdp = io::mdp_from_json(io::read_json(a.mdp));
    AlgoConfig cfg;
    cfg.scheme = scheme_from_string(a.scheme);
    cfg.alpha = a.alpha;
    cfg.m = a.m;
    cfg.rho_stop = a.rho;
    cfg.max_iterations = a.iters;
    cfg.greedy.noise = a.noise;
    cfg.greedy.scale = noise_scale_from_string(a.noise_mode);
    if (!a.features.empty()) cfg.greedy.features = io::features_from_json(io::read_json(a.features));
    RandomStream rng(a.seed);
    const RunTrace trace = run(mdp, cfg, rng);
    io::write_text(a.csv, io::trace_csv(trace.records));
    if (!a.json.empty()) io::write_json(a.json, io::to_json(trace));
    out << "scheme " << a.scheme << ": " << trace.records.size() << " iterations, termination "
        << io::to_string(trace.termination);
    if (!trace.records.empty()) out << ", final loss " << io::format_double(trace.records.back().loss);
    out << "\n";
    return Ok;
}

inline int cmd_grid(const GridSpec& spec, const std::string& dir, bool check, std::ostream& out) {
    const GridResults res = run_grid(spec);
    write_grid_outputs(res, dir);
    out << "grid: " << res.instances.size() << " instances x " << spec.algorithms.size() << " algorithms, "
        << res.failures() << " failed runs, written to " << dir << "\n";
    if (!check) return Ok;
    const QualitativeReport q = qualitative_checks(res);
    if (!q.note.empty()) {
        out << "qualitative checks skipped: " << q.note << "\n";
        return Ok;
    }
    out << "api worse than psdp: " << q.api_worse_than_psdp << "/" << q.instances << (q.api_check ? " PASS" : " FAIL")
        << "\n";
    out << "nspi monotone in m: " << q.nspi_monotone << "/" << q.instances << (q.nspi_check ? " PASS" : " FAIL")
        << "\n";
    out << "spread by branching:";
    for (const auto& [b, s] : q.spread_by_branching) out << " b=" << b << ":" << io::format_double(s);
    out << (q.spread_check ? " PASS" : " FAIL") << "\n";
    return Ok;
}

/// Recomputes every stats.csv of a grid directory from its losses.csv files.
inline int cmd_stats(const std::string& dir, std::ostream& out) {
    namespace fs = std::filesystem;
    pibench::detail::require(fs::is_directory(dir), "stats: '" + dir + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.path().filename() == "losses.csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
        std::map<long, std::map<long, std::vector<double>>> by_run;
        std::istringstream in(io::read_text(f));
        std::string line;
        std::getline(in, line);
        pibench::detail::require(line == "mdp,run,k,loss", "stats: unexpected header in " + f.string());
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto cols = io::split(line, ',');
            pibench::detail::require(cols.size() == 4, "stats: malformed row in " + f.string());
            auto index = [](const std::string& c) { return static_cast<long>(io::parse_double(c)); };
            auto& curve = by_run[index(cols[0])][index(cols[1])];
            pibench::detail::require(index(cols[2]) == static_cast<long>(curve.size()) + 1,
                                     "stats: iterations out of order in " + f.string());
            curve.push_back(io::parse_double(cols[3]));
        }
        LossCube cube;
        for (auto& [mdp, runs] : by_run) {
            cube.emplace_back();
            for (auto& [run, curve] : runs) cube.back().push_back(std::move(curve));
        }
        const std::string algorithm = f.parent_path().filename().string();
        const std::string instance = f.parent_path().parent_path().filename().string();
        io::write_text(f.parent_path() / "stats.csv", stats_csv(instance, algorithm, compute_stats(cube)));
    }
    out << "recomputed " << files.size() << " stats files\n";
    return Ok;
}

inline int cmd_conc(const ConcArgs& a, std::ostream& out) {
    const FiniteMdp mdp = io::mdp_from_json(io::read_json(a.mdp));
    const OptimalSolution opt = optimal_value(mdp, 1e-8 * mdp.v_max());
    const auto mu = detail::uniform_for(mdp), nu = detail::uniform_for(mdp);
    const ConcentrabilityReport rep = aggregate_constants(mdp, opt.policy, mu, nu, a.m, a.tol * mdp.v_max());
    io::write_json(a.out, io::to_json(rep));
    bool all = true;
    out << "relation,m,lhs,rhs,holds\n";
    for (int m : rep.m_values)
        for (const auto& h : check_hierarchy(rep, m)) {
            out << h.relation << "," << m << "," << io::format_double(h.lhs) << "," << io::format_double(h.rhs) << ","
                << (h.holds ? "yes" : "no") << "\n";
            all = all && h.holds;
        }
    return all ? Ok : Internal;
}

/// Joins a trace with a report; ExactCoeff bound of the matching scheme per iteration.
inline int cmd_bounds(const BoundsArgs& a, std::ostream& out) {
    const auto records = io::parse_trace_csv(io::read_text(a.trace));
    const ConcentrabilityReport rep = io::report_from_json(io::read_json(a.report));
    const Scheme scheme = scheme_from_string(a.scheme);
    std::vector<double> eps, alpha;
    std::string csv = "k,loss,bound,slack\n";
    int failures = 0;
    for (const auto& r : records) {
        eps.push_back(r.epsilon);
        alpha.push_back(r.alpha);
        const int k = static_cast<int>(eps.size());
        double bound = 0.0;
        switch (scheme) {
        case Scheme::API: bound = bound_nspi(rep, eps, k, 1, rep.v_max, NspiBound::ExactCoeff); break;
        case Scheme::NSPI: bound = bound_nspi(rep, eps, k, a.m, rep.v_max, NspiBound::ExactCoeff); break;
        case Scheme::PSDPInf: bound = bound_psdp(rep, eps, k, rep.v_max, PsdpBound::ExactCoeff); break;
        case Scheme::APIAlpha:
            bound = bound_conservative(rep, eps, alpha, rep.v_max, ConservativeBound::APIalpha);
            break;
        default: bound = bound_conservative(rep, eps, alpha, rep.v_max, ConservativeBound::CPIlike); break;
        }
        const double slack = bound - r.loss;
        if (slack < -1e-8 * rep.v_max) ++failures;
        csv += std::to_string(r.k) + "," + io::format_double(r.loss) + "," + io::format_double(bound) + "," +
               io::format_double(slack) + "\n";
    }
    io::write_text(a.out, csv);
    out << "bounds: " << records.size() << " iterations, " << failures << " domination failures "
        << (failures == 0 ? "PASS" : "FAIL") << "\n";
    return failures == 0 ? Ok : Internal;
}

/**
 * Entry point: garnet | run | grid | stats | conc | bounds.
 * Exit 0 on success, 1 on invalid input or usage errors, 2 on a violated internal invariant.
 */
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Approximate policy iteration workbench on finite MDPs"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    GarnetArgs ga;
    auto* garnet = app.add_subcommand("garnet", "Generate a Garnet MDP and its feature matrix");
    garnet->add_option("--states", ga.spec.n_states, "Number of states")->capture_default_str();
    garnet->add_option("--actions", ga.spec.n_actions, "Number of actions")->capture_default_str();
    garnet->add_option("--branching", ga.spec.branching, "Successors per (state, action)")->capture_default_str();
    garnet->add_option("--features", ga.spec.n_features, "Feature columns p")->capture_default_str();
    garnet->add_option("--gamma", ga.spec.gamma, "Discount factor")->capture_default_str();
    garnet->add_option("--seed", ga.spec.seed, "Seed")->capture_default_str();
    garnet->add_option("--mdp-out", ga.mdp_out, "MDP JSON output")->capture_default_str();
    garnet->add_option("--features-out", ga.features_out, "Features JSON output")->capture_default_str();

    RunArgs ra;
    auto* runc = app.add_subcommand("run", "Run one algorithm on a stored MDP");
    runc->add_option("--mdp", ra.mdp, "MDP JSON file")->required();
    runc->add_option("--features", ra.features, "Feature JSON file; omitted means no projection");
    runc->add_option("--scheme", ra.scheme, "api | api-alpha | cpi | cpi-plus | cpi-alpha | psdp | nspi")
        ->capture_default_str();
    runc->add_option("--alpha", ra.alpha, "Fixed step of api-alpha / cpi-alpha")->capture_default_str();
    runc->add_option("--m", ra.m, "NSPI period")->capture_default_str();
    runc->add_option("--rho", ra.rho, "CPI stopping threshold")->capture_default_str();
    runc->add_option("--iters", ra.iters, "Maximum iterations")->capture_default_str();
    runc->add_option("--noise", ra.noise, "Greedy noise amplitude iota")->capture_default_str();
    runc->add_option("--noise-mode", ra.noise_mode, "vmax: amplitude iota*V_max; unit: amplitude iota")
        ->capture_default_str();
    runc->add_option("--seed", ra.seed, "Noise seed")->capture_default_str();
    runc->add_option("--csv", ra.csv, "Trace CSV output")->capture_default_str();
    runc->add_option("--json", ra.json, "Trace JSON output (with policy digests)");

    GridSpec gs;
    std::string grid_out = "grid_out";
    bool grid_check = false;
    auto* grid = app.add_subcommand("grid", "Run the experiment grid and write curves");
    grid->add_option("--n-states", gs.n_states, "State counts")->capture_default_str();
    grid->add_option("--n-actions", gs.n_actions, "Action counts")->capture_default_str();
    grid->add_option("--branching", gs.branching, "Branching factors")->capture_default_str();
    grid->add_option("--feature-fraction", gs.feature_fraction, "p = fraction * n_states")->capture_default_str();
    grid->add_option("--gamma", gs.gamma, "Discount factor")->capture_default_str();
    grid->add_option("--noise", gs.noise, "Greedy noise amplitude iota")->capture_default_str();
    std::string grid_noise_mode = "vmax";
    grid->add_option("--noise-mode", grid_noise_mode, "vmax | unit")->capture_default_str();
    grid->add_option("--n-mdps", gs.n_mdps, "MDPs per instance")->capture_default_str();
    grid->add_option("--n-runs", gs.n_runs, "Runs per MDP")->capture_default_str();
    grid->add_option("--n-iterations", gs.n_iterations, "Iterations per run")->capture_default_str();
    grid->add_option("--master-seed", gs.master_seed, "Master seed")->capture_default_str();
    grid->add_option("--mu", gs.mu, "uniform | state0")->capture_default_str();
    grid->add_option("--nu", gs.nu, "uniform | state0")->capture_default_str();
    grid->add_option("--workers", gs.workers, "Worker threads, 0 = hardware concurrency")->capture_default_str();
    grid->add_option("--out", grid_out, "Output directory")->capture_default_str();
    grid->add_flag("--check", grid_check, "Evaluate the qualitative checks");
    std::string grid_config;
    grid->add_option("--config", grid_config, "Grid spec JSON; its keys override the flags");

    std::string stats_dir;
    auto* stats = app.add_subcommand("stats", "Recompute stats.csv files from stored losses");
    stats->add_option("--dir", stats_dir, "Grid output directory")->required();

    ConcArgs ca;
    auto* conc = app.add_subcommand("conc", "Concentrability report and hierarchy table (uniform mu, nu)");
    conc->add_option("--mdp", ca.mdp, "MDP JSON file")->required();
    conc->add_option("--m", ca.m, "Periods m for the m-dependent constants")->capture_default_str();
    conc->add_option("--tol", ca.tol, "Tail tolerance relative to V_max")->capture_default_str();
    conc->add_option("--out", ca.out, "Report JSON output")->capture_default_str();

    BoundsArgs ba;
    auto* bounds = app.add_subcommand("bounds", "Compare a trace with its ExactCoeff bound");
    bounds->add_option("--trace", ba.trace, "Trace CSV")->required();
    bounds->add_option("--report", ba.report, "Report JSON")->required();
    bounds->add_option("--scheme", ba.scheme, "Scheme that produced the trace")->capture_default_str();
    bounds->add_option("--m", ba.m, "NSPI period")->capture_default_str();
    bounds->add_option("--out", ba.out, "Loss/bound CSV output")->capture_default_str();

    std::string config;
    for (CLI::App* sub : {garnet, runc, stats, conc, bounds})
        sub->add_option("--config", config, "JSON object of flag values; overrides the flags");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return Ok;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return Ok;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        err << app.help();
        return BadInput;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        if (!config.empty()) detail::apply_config(*sub, config);
        if (sub == garnet) return cmd_garnet(ga, out);
        if (sub == runc) return cmd_run(ra, out);
        if (sub == grid) {
            gs.noise_scale = noise_scale_from_string(grid_noise_mode);
            if (!grid_config.empty()) apply_json(gs, io::read_json(grid_config));
            return cmd_grid(gs, grid_out, grid_check, out);
        }
        if (sub == stats) return cmd_stats(stats_dir, out);
        if (sub == conc) return cmd_conc(ca, out);
        return cmd_bounds(ba, out);
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << "\n";
        return BadInput;
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << "\n";
        return BadInput;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return BadInput;
    } catch (const InternalError& e) {
        err << "internal error: " << e.what() << "\n";
        return Internal;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return Internal;
    }
}

} // namespace pibench::cli
