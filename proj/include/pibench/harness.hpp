#pragma once

#include "pibench/algorithms.hpp"
#include "pibench/garnet.hpp"
#include "pibench/io.hpp"
#include "pibench/stats.hpp"
#include "pibench/svg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace pibench {

/// One algorithm column of the grid. The name keys output directories and RNG substreams.
struct AlgorithmSpec {
    std::string name;
    Scheme scheme = Scheme::API;
    double alpha = 0.1;
    int m = 1;
    double rho = 0.1;
};

/// API, API(0.1), CPI+, CPI(0.1), PSDP_inf, NSPI(5), NSPI(10), NSPI(30).
inline std::vector<AlgorithmSpec> default_algorithms() {
    return {{"api", Scheme::API, 1.0, 1, 0.0},          {"api-alpha-0.1", Scheme::APIAlpha, 0.1, 1, 0.0},
            {"cpi-plus", Scheme::CPIPlus, 0.1, 1, 0.1}, {"cpi-alpha-0.1", Scheme::CPIAlpha, 0.1, 1, 0.0},
            {"psdp", Scheme::PSDPInf, 1.0, 1, 0.0},     {"nspi-5", Scheme::NSPI, 1.0, 5, 0.0},
            {"nspi-10", Scheme::NSPI, 1.0, 10, 0.0},    {"nspi-30", Scheme::NSPI, 1.0, 30, 0.0}};
}

struct GridSpec {
    std::vector<int> n_states{20, 50};
    std::vector<int> n_actions{2, 5};
    std::vector<int> branching{1, 2, 10};
    double feature_fraction = 0.1;
    double gamma = 0.99;
    double noise = 0.1;
    NoiseScale noise_scale = NoiseScale::AbsoluteVmax;
    int n_mdps = 5;
    int n_runs = 5;
    int n_iterations = 60;
    std::vector<AlgorithmSpec> algorithms = default_algorithms();
    std::uint64_t master_seed = 0;
    std::string mu = "uniform"; ///< "uniform" or "state0"
    std::string nu = "uniform";
    int workers = 0; ///< 0: hardware concurrency

    void validate() const {
        using detail::require;
        require(!n_states.empty() && !n_actions.empty() && !branching.empty(), "grid: parameter lists are empty");
        require(n_mdps >= 1 && n_runs >= 1 && n_iterations >= 1, "grid: counts must be at least 1");
        require(!algorithms.empty(), "grid: no algorithms");
        require(feature_fraction > 0.0 && feature_fraction <= 1.0, "grid: feature_fraction must lie in (0,1]");
        require(workers >= 0, "grid: workers must be nonnegative");
        for (const std::string& d : {mu, nu})
            require(d == "uniform" || d == "state0", "grid: unknown distribution selector '" + d + "'");
        std::set<std::string> names;
        for (const auto& a : algorithms) {
            require(!a.name.empty() && a.name.find('/') == std::string::npos, "grid: bad algorithm name");
            require(names.insert(a.name).second, "grid: duplicate algorithm name '" + a.name + "'");
        }
        for (int n : n_states)
            for (int b : branching) {
                GarnetSpec g{n, n_actions.front(), b, features_for(n), gamma, 0};
                g.validate();
            }
        for (int a : n_actions) require(a >= 1, "grid: n_actions must be positive");
    }

    int features_for(int states) const { return std::max(1, static_cast<int>(std::lround(feature_fraction * states))); }
};

struct InstanceKey {
    int n_states = 0;
    int n_actions = 0;
    int branching = 0;

    std::string name() const {
        return "S" + std::to_string(n_states) + "_A" + std::to_string(n_actions) + "_B" + std::to_string(branching);
    }
    int get(const std::string& key) const {
        if (key == "n_states") return n_states;
        if (key == "n_actions") return n_actions;
        if (key == "branching") return branching;
        throw InvalidInput("unknown condition key '" + key + "'");
    }
};

struct RunResult {
    bool ok = false;
    std::string error;
    std::vector<IterationRecord> records;
    Termination termination = Termination::MaxIter;
    std::vector<double> losses; ///< length n_iterations, early stops held at their last loss
};

struct GridResults {
    GridSpec spec;
    std::vector<InstanceKey> instances;
    std::vector<std::vector<std::uint64_t>> mdp_seeds;                  ///< [instance][mdp]
    std::vector<std::vector<std::vector<std::vector<RunResult>>>> runs; ///< [instance][algo][mdp][run]

    LossCube cube(std::size_t inst, std::size_t algo) const {
        LossCube out;
        for (const auto& mdp : runs[inst][algo]) {
            std::vector<std::vector<double>> ok;
            for (const auto& r : mdp)
                if (r.ok) ok.push_back(r.losses);
            out.push_back(std::move(ok));
        }
        return out;
    }
    StatCurves stats(std::size_t inst, std::size_t algo) const { return compute_stats(cube(inst, algo)); }
    std::size_t failures() const {
        std::size_t n = 0;
        for (const auto& i : runs)
            for (const auto& a : i)
                for (const auto& m : a)
                    for (const auto& r : m) n += r.ok ? 0 : 1;
        return n;
    }
};

namespace detail {

inline std::uint64_t name_tag(const std::string& name) {
    Digest d;
    d.add(name.data(), name.size());
    return d.value();
}

inline StateDistribution select_distribution(const std::string& which, int n) {
    return which == "state0" ? StateDistribution::delta(n, 0) : StateDistribution::uniform(n);
}

inline AlgoConfig algo_config(const AlgorithmSpec& a, const GridSpec& spec) {
    AlgoConfig cfg;
    cfg.scheme = a.scheme;
    cfg.alpha = a.alpha;
    cfg.m = a.m;
    cfg.rho_stop = a.rho;
    cfg.max_iterations = spec.n_iterations;
    return cfg;
}

} // namespace detail

/// Grid substream seeds: the MDP of (instance, mdp) and the noise of (instance, mdp, run, algorithm name).
inline std::uint64_t grid_mdp_seed(std::uint64_t master, std::size_t inst, std::size_t mdp) {
    return derive_seed(master, {0, inst, mdp});
}

inline RandomStream grid_run_stream(std::uint64_t master, std::size_t inst, std::size_t mdp, std::size_t run,
                                    const std::string& algorithm) {
    return RandomStream::derive(master, {1, inst, mdp, run, detail::name_tag(algorithm)});
}

inline std::vector<InstanceKey> grid_instances(const GridSpec& spec) {
    std::vector<InstanceKey> out;
    for (int s : spec.n_states)
        for (int a : spec.n_actions)
            for (int b : spec.branching) out.push_back({s, a, b});
    return out;
}

/**
 * Runs every (instance, mdp, run, algorithm) cell. Jobs are (instance, mdp)
 * pairs spread over worker threads; each writes only its own result slots,
 * so the output does not depend on scheduling. A failing run is recorded
 * with its error message and left out of the statistics.
 */
inline GridResults run_grid(const GridSpec& spec) {
    spec.validate();
    GridResults res;
    res.spec = spec;
    res.instances = grid_instances(spec);
    const std::size_t n_inst = res.instances.size();
    const std::size_t n_alg = spec.algorithms.size();
    res.mdp_seeds.assign(n_inst, std::vector<std::uint64_t>(spec.n_mdps));
    res.runs.assign(n_inst, std::vector<std::vector<std::vector<RunResult>>>(
                                n_alg, std::vector<std::vector<RunResult>>(spec.n_mdps, std::vector<RunResult>(spec.n_runs))));

    auto job = [&](std::size_t inst, std::size_t j) {
        const InstanceKey& key = res.instances[inst];
        const std::uint64_t seed = grid_mdp_seed(spec.master_seed, inst, j);
        res.mdp_seeds[inst][j] = seed;
        auto fail_all = [&](const std::string& why) {
            for (std::size_t a = 0; a < n_alg; ++a)
                for (auto& r : res.runs[inst][a][j]) r.error = why;
        };
        std::optional<GarnetInstance> garnet;
        std::optional<ValueFunction> v_star;
        double initial_loss = 0.0;
        std::optional<StateDistribution> mu, nu;
        try {
            garnet = generate({key.n_states, key.n_actions, key.branching, spec.features_for(key.n_states), spec.gamma,
                               seed});
            v_star = optimal_value(garnet->mdp, 1e-8 * garnet->mdp.v_max()).value;
            mu = detail::select_distribution(spec.mu, key.n_states);
            nu = detail::select_distribution(spec.nu, key.n_states);
            const auto pi0 = StationaryPolicy::constant(key.n_states, key.n_actions, 0);
            initial_loss = expected_value(*mu, ValueFunction(v_star->values -
                                                             evaluate_stationary(garnet->mdp, pi0).values));
        } catch (const std::exception& e) {
            fail_all(std::string("mdp setup: ") + e.what());
            return;
        }
        for (std::size_t a = 0; a < n_alg; ++a) {
            AlgoConfig cfg = detail::algo_config(spec.algorithms[a], spec);
            cfg.mu = mu;
            cfg.nu = nu;
            cfg.greedy = GreedyConfig{spec.noise, spec.noise_scale, garnet->features};
            for (int r = 0; r < spec.n_runs; ++r) {
                RunResult& out = res.runs[inst][a][j][r];
                try {
                    RandomStream rng = grid_run_stream(spec.master_seed, inst, j, r, spec.algorithms[a].name);
                    RunTrace trace = run(garnet->mdp, cfg, rng, *v_star);
                    out.losses.reserve(spec.n_iterations);
                    for (const auto& rec : trace.records) out.losses.push_back(rec.loss);
                    const double hold = out.losses.empty() ? initial_loss : out.losses.back();
                    out.losses.resize(spec.n_iterations, hold);
                    out.records = std::move(trace.records);
                    out.termination = trace.termination;
                    out.ok = true;
                } catch (const std::exception& e) {
                    out = RunResult{};
                    out.error = e.what();
                }
            }
        }
    };

    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t i = 0; i < n_inst; ++i)
        for (int j = 0; j < spec.n_mdps; ++j) jobs.emplace_back(i, j);
    unsigned workers = spec.workers > 0 ? static_cast<unsigned>(spec.workers) : std::thread::hardware_concurrency();
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t idx; (idx = next.fetch_add(1)) < jobs.size();) job(jobs[idx].first, jobs[idx].second);
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return res;
}

/// Statistics over all instances whose `key` equals each value; one StatCurves per algorithm.
inline std::map<int, std::vector<StatCurves>> conditioned_stats(const GridResults& res, const std::string& key) {
    std::map<int, std::vector<LossCube>> pools;
    for (std::size_t i = 0; i < res.instances.size(); ++i) {
        auto& pool = pools[res.instances[i].get(key)];
        pool.resize(res.spec.algorithms.size());
        for (std::size_t a = 0; a < res.spec.algorithms.size(); ++a) {
            LossCube c = res.cube(i, a);
            pool[a].insert(pool[a].end(), c.begin(), c.end());
        }
    }
    std::map<int, std::vector<StatCurves>> out;
    for (auto& [value, cubes] : pools)
        for (const auto& c : cubes) out[value].push_back(compute_stats(c));
    return out;
}

inline constexpr const char* kStatsHeader = "instance,algorithm,k,mean,std_mean,mean_std,std_std";

inline std::string stats_csv_rows(const std::string& instance, const std::string& algorithm, const StatCurves& s) {
    std::string out;
    for (std::size_t k = 0; k < s.size(); ++k)
        out += instance + "," + algorithm + "," + std::to_string(k + 1) + "," + io::format_double(s.mean[k]) + "," +
               io::format_double(s.std_mean[k]) + "," + io::format_double(s.mean_std[k]) + "," +
               io::format_double(s.std_std[k]) + "\n";
    return out;
}

inline std::string stats_csv(const std::string& instance, const std::string& algorithm, const StatCurves& s) {
    return std::string(kStatsHeader) + "\n" + stats_csv_rows(instance, algorithm, s);
}

inline io::Json to_json(const AlgorithmSpec& a) {
    return {{"name", a.name}, {"scheme", to_string(a.scheme)}, {"alpha", a.alpha}, {"m", a.m}, {"rho", a.rho}};
}

inline io::Json to_json(const GridSpec& g) {
    io::Json algs = io::Json::array();
    for (const auto& a : g.algorithms) algs.push_back(to_json(a));
    return {{"n_states", g.n_states},
            {"n_actions", g.n_actions},
            {"branching", g.branching},
            {"feature_fraction", g.feature_fraction},
            {"gamma", g.gamma},
            {"noise", g.noise},
            {"noise_mode", g.noise_scale == NoiseScale::AbsoluteVmax ? "vmax" : "unit"},
            {"n_mdps", g.n_mdps},
            {"n_runs", g.n_runs},
            {"n_iterations", g.n_iterations},
            {"algorithms", algs},
            {"master_seed", g.master_seed},
            {"mu", g.mu},
            {"nu", g.nu},
            {"workers", g.workers}};
}

inline NoiseScale noise_scale_from_string(const std::string& s) {
    if (s == "vmax") return NoiseScale::AbsoluteVmax;
    if (s == "unit") return NoiseScale::AbsoluteUnit;
    throw InvalidInput("unknown noise mode '" + s + "' (expected vmax or unit)");
}

inline AlgorithmSpec algorithm_from_json(const io::Json& j) {
    AlgorithmSpec a;
    a.name = io::field<std::string>(j, "name", "algorithm");
    a.scheme = scheme_from_string(io::field<std::string>(j, "scheme", "algorithm"));
    if (j.contains("alpha")) a.alpha = io::field<double>(j, "alpha", "algorithm");
    if (j.contains("m")) a.m = io::field<int>(j, "m", "algorithm");
    if (j.contains("rho")) a.rho = io::field<double>(j, "rho", "algorithm");
    return a;
}

/// Overlays the keys present in j onto spec; unknown keys are rejected.
inline void apply_json(GridSpec& g, const io::Json& j) {
    detail::require(j.is_object(), "grid spec: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "n_states") g.n_states = io::field<std::vector<int>>(j, "n_states", "grid");
        else if (key == "n_actions") g.n_actions = io::field<std::vector<int>>(j, "n_actions", "grid");
        else if (key == "branching") g.branching = io::field<std::vector<int>>(j, "branching", "grid");
        else if (key == "feature_fraction") g.feature_fraction = io::field<double>(j, "feature_fraction", "grid");
        else if (key == "gamma") g.gamma = io::field<double>(j, "gamma", "grid");
        else if (key == "noise") g.noise = io::field<double>(j, "noise", "grid");
        else if (key == "noise_mode") g.noise_scale = noise_scale_from_string(io::field<std::string>(j, "noise_mode", "grid"));
        else if (key == "n_mdps") g.n_mdps = io::field<int>(j, "n_mdps", "grid");
        else if (key == "n_runs") g.n_runs = io::field<int>(j, "n_runs", "grid");
        else if (key == "n_iterations") g.n_iterations = io::field<int>(j, "n_iterations", "grid");
        else if (key == "master_seed") g.master_seed = io::field<std::uint64_t>(j, "master_seed", "grid");
        else if (key == "mu") g.mu = io::field<std::string>(j, "mu", "grid");
        else if (key == "nu") g.nu = io::field<std::string>(j, "nu", "grid");
        else if (key == "workers") g.workers = io::field<int>(j, "workers", "grid");
        else if (key == "algorithms") {
            detail::require(value.is_array(), "grid spec: algorithms must be an array");
            g.algorithms.clear();
            for (const auto& a : value) g.algorithms.push_back(algorithm_from_json(a));
        } else {
            throw InvalidInput("grid spec: unknown key '" + key + "'");
        }
    }
}

/**
 * Writes instance/algorithm/{trace_m<i>_r<j>.csv, losses.csv, stats.csv, curve.svg},
 * conditioned/<key>=<value>/<algorithm>/{stats.csv, curve.svg} and manifest.json.
 */
inline void write_grid_outputs(const GridResults& res, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const auto& algs = res.spec.algorithms;
    io::Json failures = io::Json::array();
    for (std::size_t i = 0; i < res.instances.size(); ++i) {
        const std::string inst = res.instances[i].name();
        std::vector<StatCurves> curves;
        for (std::size_t a = 0; a < algs.size(); ++a) {
            const fs::path adir = dir / inst / algs[a].name;
            std::string losses = "mdp,run,k,loss\n";
            for (std::size_t j = 0; j < res.runs[i][a].size(); ++j)
                for (std::size_t r = 0; r < res.runs[i][a][j].size(); ++r) {
                    const RunResult& run = res.runs[i][a][j][r];
                    if (!run.ok) {
                        failures.push_back({{"instance", inst}, {"algorithm", algs[a].name}, {"mdp", j}, {"run", r},
                                            {"error", run.error}});
                        continue;
                    }
                    io::write_text(adir / ("trace_m" + std::to_string(j) + "_r" + std::to_string(r) + ".csv"),
                                   io::trace_csv(run.records));
                    for (std::size_t k = 0; k < run.losses.size(); ++k)
                        losses += std::to_string(j) + "," + std::to_string(r) + "," + std::to_string(k + 1) + "," +
                                  io::format_double(run.losses[k]) + "\n";
                }
            io::write_text(adir / "losses.csv", losses);
            curves.push_back(res.stats(i, a));
            io::write_text(adir / "stats.csv", stats_csv(inst, algs[a].name, curves.back()));
        }
        std::vector<const StatCurves*> ptrs;
        for (const auto& c : curves) ptrs.push_back(&c);
        const PlotRange range = plot_range(ptrs);
        for (std::size_t a = 0; a < algs.size(); ++a)
            io::write_text(dir / inst / algs[a].name / "curve.svg",
                           render_curve_svg(curves[a], range, inst + " " + algs[a].name));
    }

    for (const std::string key : {"n_states", "n_actions", "branching"}) {
        for (const auto& [value, curves] : conditioned_stats(res, key)) {
            const std::string label = key + "=" + std::to_string(value);
            std::vector<const StatCurves*> ptrs;
            for (const auto& c : curves) ptrs.push_back(&c);
            const PlotRange range = plot_range(ptrs);
            for (std::size_t a = 0; a < algs.size(); ++a) {
                const fs::path adir = dir / "conditioned" / label / algs[a].name;
                io::write_text(adir / "stats.csv", stats_csv(label, algs[a].name, curves[a]));
                io::write_text(adir / "curve.svg", render_curve_svg(curves[a], range, label + " " + algs[a].name));
            }
        }
    }

    io::Json seeds = io::Json::object();
    for (std::size_t i = 0; i < res.instances.size(); ++i) seeds[res.instances[i].name()] = res.mdp_seeds[i];
    io::Json manifest = {{"tool", "pibench"},
                         {"version", "1.0.0"},
                         {"grid", to_json(res.spec)},
                         {"iterations", "k = 1..n_iterations inclusive; early CPI stops hold their last loss"},
                         {"mdp_seeds", seeds},
                         {"run_substream", "derive_seed(master_seed, {1, instance, mdp, run, fnv1a(algorithm name)})"},
                         {"failures", failures}};
    io::write_json(dir / "manifest.json", manifest);
}

struct QualitativeReport {
    std::size_t instances = 0;
    std::size_t api_worse_than_psdp = 0;
    std::size_t nspi_monotone = 0;
    std::map<int, double> spread_by_branching; ///< max - min over algorithms of pooled final mean loss
    bool api_check = false;
    bool nspi_check = false;
    bool spread_check = false;
    std::string note;
};

/**
 * Compares final-window mean losses: (a) API above PSDP_inf on >= 70% of
 * instances; (b) API = NSPI(1) >= NSPI(5) >= NSPI(10) >= NSPI(30) on >= 70%;
 * (c) the across-algorithm spread of branching-pooled final losses strictly
 * decreases along increasing branching.
 */
inline QualitativeReport qualitative_checks(const GridResults& res, std::size_t window = 20, double threshold = 0.7) {
    QualitativeReport q;
    const auto& algs = res.spec.algorithms;
    auto find = [&](Scheme s, int m) -> std::optional<std::size_t> {
        for (std::size_t a = 0; a < algs.size(); ++a)
            if (algs[a].scheme == s && (s != Scheme::NSPI || algs[a].m == m)) return a;
        return std::nullopt;
    };
    const auto api = find(Scheme::API, 1), psdp = find(Scheme::PSDPInf, 1);
    const auto n5 = find(Scheme::NSPI, 5), n10 = find(Scheme::NSPI, 10), n30 = find(Scheme::NSPI, 30);
    if (!api || !psdp || !n5 || !n10 || !n30) {
        q.note = "grid lacks one of api, psdp, nspi m=5/10/30";
        return q;
    }
    window = std::min<std::size_t>(window, static_cast<std::size_t>(res.spec.n_iterations));
    q.instances = res.instances.size();
    for (std::size_t i = 0; i < res.instances.size(); ++i) {
        auto final_loss = [&](std::size_t a) { return tail_mean(res.stats(i, a), window); };
        const double l_api = final_loss(*api);
        if (l_api > final_loss(*psdp)) ++q.api_worse_than_psdp;
        const double l5 = final_loss(*n5), l10 = final_loss(*n10), l30 = final_loss(*n30);
        if (l_api >= l5 && l5 >= l10 && l10 >= l30) ++q.nspi_monotone;
    }
    const double need = threshold * static_cast<double>(q.instances);
    q.api_check = static_cast<double>(q.api_worse_than_psdp) >= need;
    q.nspi_check = static_cast<double>(q.nspi_monotone) >= need;

    for (const auto& [b, curves] : conditioned_stats(res, "branching")) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& c : curves) {
            const double l = tail_mean(c, window);
            lo = std::min(lo, l);
            hi = std::max(hi, l);
        }
        q.spread_by_branching[b] = hi - lo;
    }
    q.spread_check = q.spread_by_branching.size() >= 2;
    double previous = std::numeric_limits<double>::infinity();
    for (const auto& [b, spread] : q.spread_by_branching) {
        q.spread_check = q.spread_check && spread < previous;
        previous = spread;
    }
    return q;
}

} // namespace pibench
