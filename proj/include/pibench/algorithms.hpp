#pragma once

#include "pibench/approx_greedy.hpp"
#include "pibench/operators.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pibench {

enum class Scheme { API, APIAlpha, CPI, CPIPlus, CPIAlpha, PSDPInf, NSPI };

inline std::string to_string(Scheme scheme) {
    switch (scheme) {
    case Scheme::API: return "api";
    case Scheme::APIAlpha: return "api-alpha";
    case Scheme::CPI: return "cpi";
    case Scheme::CPIPlus: return "cpi-plus";
    case Scheme::CPIAlpha: return "cpi-alpha";
    case Scheme::PSDPInf: return "psdp";
    case Scheme::NSPI: return "nspi";
    }
    return "unknown";
}

inline Scheme scheme_from_string(const std::string& name) {
    for (Scheme s : {Scheme::API, Scheme::APIAlpha, Scheme::CPI, Scheme::CPIPlus, Scheme::CPIAlpha, Scheme::PSDPInf,
                     Scheme::NSPI})
        if (to_string(s) == name) return s;
    throw InvalidInput("unknown scheme '" + name + "'");
}

inline bool is_cpi_family(Scheme s) { return s == Scheme::CPI || s == Scheme::CPIPlus || s == Scheme::CPIAlpha; }

struct AlgoConfig {
    Scheme scheme = Scheme::API;
    double alpha = 0.1;     ///< fixed step of API(alpha) / CPI(alpha)
    int m = 1;              ///< NSPI period
    double rho_stop = 0.1;  ///< CPI / CPI+ stopping threshold
    int max_iterations = 100;
    std::optional<StateDistribution> nu; ///< uniform when absent
    std::optional<StateDistribution> mu; ///< uniform when absent
    GreedyConfig greedy;
    /// pi_0 for stationary schemes and the fill of the NSPI ring; all-action-0 when absent.
    std::optional<StationaryPolicy> initial_policy;
};

struct IterationRecord {
    int k = 0;
    double epsilon = 0.0;    ///< vs. the distribution the greedy step was called with
    double epsilon_nu = 0.0; ///< vs. nu
    double alpha = 1.0;
    double eta = 0.0;  ///< nu v of the output policy
    double loss = 0.0; ///< mu (v_* - v) of the output policy
    std::optional<double> advantage;    ///< CPI family
    std::optional<double> horizon_loss; ///< PSDP: mu (v_* - v_{sigma_k})
    std::uint64_t policy_digest = 0;

    bool operator==(const IterationRecord&) const = default;
};

enum class Termination { MaxIter, CPIStopped };

struct RunTrace {
    Scheme scheme = Scheme::API;
    std::vector<IterationRecord> records;
    std::variant<StationaryPolicy, PolicyStack> final_policy = StationaryPolicy::constant(1, 1);
    Termination termination = Termination::MaxIter;
    std::optional<double> stop_epsilon;   ///< CPI stop: epsilon of the rejected greedy call
    std::optional<double> stop_advantage; ///< CPI stop: its advantage
};

namespace detail {

struct RunContext {
    const FiniteMdp& mdp;
    const AlgoConfig& cfg;
    const ValueFunction& v_star;
    StateDistribution nu;
    StateDistribution mu;

    RunContext(const FiniteMdp& m, const AlgoConfig& c, const ValueFunction& vs)
        : mdp(m), cfg(c), v_star(vs), nu(c.nu ? *c.nu : StateDistribution::uniform(m.n_states())),
          mu(c.mu ? *c.mu : StateDistribution::uniform(m.n_states())) {
        require(c.max_iterations >= 1, "algorithm: max_iterations must be at least 1");
        require(vs.size() == m.n_states(), "algorithm: optimal value has the wrong size");
        check_distribution(m, nu);
        check_distribution(m, mu);
    }

    StationaryPolicy initial() const {
        if (cfg.initial_policy) {
            check_policy(mdp, *cfg.initial_policy);
            return *cfg.initial_policy;
        }
        return StationaryPolicy::constant(mdp.n_states(), mdp.n_actions(), 0);
    }

    double loss(const ValueFunction& v) const {
        return expected_value(mu, ValueFunction(v_star.values - v.values));
    }
};

inline void check_scheme(const AlgoConfig& cfg, Scheme expected) {
    require(cfg.scheme == expected, "algorithm: config scheme is " + to_string(cfg.scheme) + ", expected " +
                                        to_string(expected));
}

/// Shared loop of API and API(alpha): greedy under nu, then a full or alpha-weighted step.
inline RunTrace run_stationary_nu(const RunContext& ctx, RandomStream& rng, double step) {
    RunTrace trace;
    trace.scheme = ctx.cfg.scheme;
    StationaryPolicy pi = ctx.initial();
    ValueFunction v = evaluate_stationary(ctx.mdp, pi);
    for (int k = 1; k <= ctx.cfg.max_iterations; ++k) {
        GreedyOutcome out = approx_greedy(ctx.mdp, ctx.cfg.greedy, ctx.nu, ctx.nu, v, rng);
        pi = step == 1.0 ? std::move(out.policy) : mix(pi, out.policy, step);
        v = evaluate_stationary(ctx.mdp, pi);
        IterationRecord rec;
        rec.k = k;
        rec.epsilon = out.epsilon;
        rec.epsilon_nu = out.epsilon;
        rec.alpha = step;
        rec.eta = expected_value(ctx.nu, v);
        rec.loss = ctx.loss(v);
        rec.policy_digest = digest(pi);
        trace.records.push_back(rec);
    }
    trace.final_policy = pi;
    return trace;
}

/// CPI stepsize (1-gamma)(A - rho/3) / (4 gamma V_max), clipped into (0,1].
inline double cpi_stepsize(double advantage, double rho, double gamma, double v_max) {
    const double alpha = (1.0 - gamma) * (advantage - rho / 3.0) / (4.0 * gamma * v_max);
    ensure(alpha > 0.0, "cpi: nonpositive stepsize");
    return std::min(alpha, 1.0);
}

/// Shared loop of the CPI family: greedy under d_{pi_k,nu}, exact advantage, then a conservative step.
inline RunTrace run_conservative(const RunContext& ctx, RandomStream& rng) {
    const Scheme scheme = ctx.cfg.scheme;
    const bool adaptive = scheme != Scheme::CPIAlpha;
    if (adaptive) require(ctx.cfg.rho_stop > 0.0, "cpi: rho must be positive");
    else require(ctx.cfg.alpha > 0.0 && ctx.cfg.alpha <= 1.0, "cpi(alpha): alpha must lie in (0,1]");

    const FiniteMdp& mdp = ctx.mdp;
    RunTrace trace;
    trace.scheme = scheme;
    StationaryPolicy pi = ctx.initial();
    ValueFunction v = evaluate_stationary(mdp, pi);
    for (int k = 1; k <= ctx.cfg.max_iterations; ++k) {
        const StateDistribution d = occupancy(mdp, pi, ctx.nu);
        GreedyOutcome out = approx_greedy(mdp, ctx.cfg.greedy, d, d, v, rng);
        const double eps_nu = measure_epsilon(mdp, ctx.nu, v, out.policy);
        const ValueFunction improved = bellman_apply(mdp, out.policy, v);
        const double advantage = expected_value(d, ValueFunction(improved.values - v.values));

        double alpha = ctx.cfg.alpha;
        StationaryPolicy next = pi;
        ValueFunction next_value;
        if (adaptive) {
            if (advantage <= 2.0 * ctx.cfg.rho_stop / 3.0) {
                trace.termination = Termination::CPIStopped;
                trace.stop_epsilon = out.epsilon;
                trace.stop_advantage = advantage;
                break;
            }
            alpha = cpi_stepsize(advantage, ctx.cfg.rho_stop, mdp.gamma(), mdp.v_max());
        }
        if (scheme == Scheme::CPIPlus) {
            // Ladder alpha * 2^i capped at 1; keep climbing while nu v does not decrease.
            double best_eta = 0.0;
            bool have_best = false;
            for (double step = alpha;; step *= 2.0) {
                const double candidate = std::min(step, 1.0);
                StationaryPolicy mixed = mix(pi, out.policy, candidate);
                ValueFunction value = evaluate_stationary(mdp, mixed);
                const double eta = expected_value(ctx.nu, value);
                if (have_best && eta < best_eta) break;
                have_best = true;
                best_eta = eta;
                alpha = candidate;
                next = std::move(mixed);
                next_value = std::move(value);
                if (candidate >= 1.0) break;
            }
        } else {
            next = mix(pi, out.policy, alpha);
            next_value = evaluate_stationary(mdp, next);
        }
        pi = std::move(next);
        v = std::move(next_value);

        IterationRecord rec;
        rec.k = k;
        rec.epsilon = out.epsilon;
        rec.epsilon_nu = eps_nu;
        rec.alpha = alpha;
        rec.eta = expected_value(ctx.nu, v);
        rec.loss = ctx.loss(v);
        rec.advantage = advantage;
        rec.policy_digest = digest(pi);
        trace.records.push_back(rec);
    }
    trace.final_policy = pi;
    return trace;
}

} // namespace detail

/// API: pi_{k+1} = G(nu, v_{pi_k}).
inline RunTrace run_api(const FiniteMdp& mdp, const AlgoConfig& cfg, RandomStream& rng, const ValueFunction& v_star) {
    detail::check_scheme(cfg, Scheme::API);
    return detail::run_stationary_nu(detail::RunContext(mdp, cfg, v_star), rng, 1.0);
}

/// API(alpha): pi_{k+1} = (1-alpha) pi_k + alpha G(nu, v_{pi_k}).
inline RunTrace run_api_alpha(const FiniteMdp& mdp, const AlgoConfig& cfg, RandomStream& rng,
                              const ValueFunction& v_star) {
    detail::check_scheme(cfg, Scheme::APIAlpha);
    detail::require(cfg.alpha > 0.0 && cfg.alpha <= 1.0, "api(alpha): alpha must lie in (0,1]");
    return detail::run_stationary_nu(detail::RunContext(mdp, cfg, v_star), rng, cfg.alpha);
}

/// CPI with the adaptive stepsize and the 2 rho / 3 advantage stopping rule.
inline RunTrace run_cpi(const FiniteMdp& mdp, const AlgoConfig& cfg, RandomStream& rng, const ValueFunction& v_star) {
    detail::check_scheme(cfg, Scheme::CPI);
    return detail::run_conservative(detail::RunContext(mdp, cfg, v_star), rng);
}

/// CPI+ : CPI whose step is line-searched on alpha 2^i by exact nu-values.
inline RunTrace run_cpi_plus(const FiniteMdp& mdp, const AlgoConfig& cfg, RandomStream& rng,
                             const ValueFunction& v_star) {
    detail::check_scheme(cfg, Scheme::CPIPlus);
    return detail::run_conservative(detail::RunContext(mdp, cfg, v_star), rng);
}

/// CPI(alpha): fixed step, no stopping rule.
inline RunTrace run_cpi_alpha(const FiniteMdp& mdp, const AlgoConfig& cfg, RandomStream& rng,
                              const ValueFunction& v_star) {
    detail::check_scheme(cfg, Scheme::CPIAlpha);
    return detail::run_conservative(detail::RunContext(mdp, cfg, v_star), rng);
}

/**
 * PSDP_inf: greedy against v_{sigma_k} and push onto a growing stack.
 * The loss is that of the looping policy (sigma_k)^inf; horizon_loss keeps
 * the loss of the finite-horizon value v_{sigma_k} the greedy step saw.
 */
inline RunTrace run_psdp_inf(const FiniteMdp& mdp, const AlgoConfig& cfg, RandomStream& rng,
                             const ValueFunction& v_star) {
    detail::check_scheme(cfg, Scheme::PSDPInf);
    const detail::RunContext ctx(mdp, cfg, v_star);
    RunTrace trace;
    trace.scheme = cfg.scheme;
    PolicyStack stack(PolicyStack::Interpretation::FiniteHorizon);
    ValueFunction horizon_value = evaluate_finite_horizon(mdp, stack);
    // One period of the loop, grown at the head in the same order evaluate_periodic composes it.
    Vector loop_reward = mdp.rewards();
    Matrix loop_kernel;
    for (int k = 1; k <= cfg.max_iterations; ++k) {
        GreedyOutcome out = approx_greedy(mdp, cfg.greedy, ctx.nu, ctx.nu, horizon_value, rng);
        horizon_value = bellman_apply(mdp, out.policy, horizon_value);
        const Matrix discounted = mdp.gamma() * policy_kernel(mdp, out.policy);
        if (k == 1) {
            loop_kernel = discounted;
        } else {
            loop_reward = mdp.rewards() + discounted * loop_reward;
            loop_kernel = discounted * loop_kernel;
        }
        stack.push_front(std::move(out.policy));
        const ValueFunction loop_value = detail::periodic_fixed_point(mdp, stack, loop_reward, loop_kernel);
        IterationRecord rec;
        rec.k = k;
        rec.epsilon = out.epsilon;
        rec.epsilon_nu = out.epsilon;
        rec.alpha = 1.0;
        rec.eta = expected_value(ctx.nu, loop_value);
        rec.loss = ctx.loss(loop_value);
        rec.horizon_loss = ctx.loss(horizon_value);
        rec.policy_digest = digest(stack);
        trace.records.push_back(rec);
    }
    trace.final_policy = stack.as(PolicyStack::Interpretation::Periodic);
    return trace;
}

/// NSPI(m): greedy against the m-periodic loop over the m newest policies.
inline RunTrace run_nspi(const FiniteMdp& mdp, const AlgoConfig& cfg, RandomStream& rng, const ValueFunction& v_star) {
    detail::check_scheme(cfg, Scheme::NSPI);
    detail::require(cfg.m >= 1, "nspi: m must be at least 1");
    const detail::RunContext ctx(mdp, cfg, v_star);
    RunTrace trace;
    trace.scheme = cfg.scheme;
    const StationaryPolicy init = ctx.initial();
    PolicyStack ring(PolicyStack::Interpretation::Periodic);
    for (int i = 0; i < cfg.m; ++i) ring.push_back(init);
    ValueFunction v = evaluate_periodic(mdp, ring);
    for (int k = 1; k <= cfg.max_iterations; ++k) {
        GreedyOutcome out = approx_greedy(mdp, cfg.greedy, ctx.nu, ctx.nu, v, rng);
        ring.push_front(std::move(out.policy));
        ring.pop_back();
        v = evaluate_periodic(mdp, ring);
        IterationRecord rec;
        rec.k = k;
        rec.epsilon = out.epsilon;
        rec.epsilon_nu = out.epsilon;
        rec.alpha = 1.0;
        rec.eta = expected_value(ctx.nu, v);
        rec.loss = ctx.loss(v);
        rec.policy_digest = digest(ring);
        trace.records.push_back(rec);
    }
    trace.final_policy = ring;
    return trace;
}

/// Dispatches on cfg.scheme.
inline RunTrace run(const FiniteMdp& mdp, const AlgoConfig& cfg, RandomStream& rng, const ValueFunction& v_star) {
    switch (cfg.scheme) {
    case Scheme::API: return run_api(mdp, cfg, rng, v_star);
    case Scheme::APIAlpha: return run_api_alpha(mdp, cfg, rng, v_star);
    case Scheme::CPI: return run_cpi(mdp, cfg, rng, v_star);
    case Scheme::CPIPlus: return run_cpi_plus(mdp, cfg, rng, v_star);
    case Scheme::CPIAlpha: return run_cpi_alpha(mdp, cfg, rng, v_star);
    case Scheme::PSDPInf: return run_psdp_inf(mdp, cfg, rng, v_star);
    case Scheme::NSPI: return run_nspi(mdp, cfg, rng, v_star);
    }
    throw InvalidInput("unknown scheme");
}

inline RunTrace run(const FiniteMdp& mdp, const AlgoConfig& cfg, RandomStream& rng) {
    return run(mdp, cfg, rng, optimal_value(mdp, 1e-8 * mdp.v_max()).value);
}

/**
 * Adds a terminal absorbing zero-reward state (index n) and a stop action
 * (index n_actions) that jumps to it from every state. With positive rewards
 * and a ring of stop policies, NSPI with m >= iterations replays PSDP_inf.
 */
inline FiniteMdp augment_with_stop_action(const FiniteMdp& mdp) {
    const int n = mdp.n_states();
    std::vector<Matrix> transitions;
    for (int a = 0; a <= mdp.n_actions(); ++a) {
        Matrix p = Matrix::Zero(n + 1, n + 1);
        if (a < mdp.n_actions()) p.topLeftCorner(n, n) = mdp.transition(a);
        else p.col(n).setOnes();
        p(n, n) = 1.0;
        transitions.push_back(std::move(p));
    }
    Vector rewards = Vector::Zero(n + 1);
    rewards.head(n) = mdp.rewards();
    return FiniteMdp(std::move(transitions), std::move(rewards), mdp.gamma(), mdp.r_max());
}

} // namespace pibench
