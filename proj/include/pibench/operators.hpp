#pragma once

#include "pibench/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace pibench {

namespace detail {

inline void check_policy(const FiniteMdp& mdp, const StationaryPolicy& pi) {
    require(pi.n_states() == mdp.n_states() && pi.n_actions() == mdp.n_actions(),
            "policy shape does not match the mdp");
}

inline void check_value(const FiniteMdp& mdp, const ValueFunction& v) {
    require(v.size() == mdp.n_states(), "value function size does not match the mdp");
}

inline void check_distribution(const FiniteMdp& mdp, const StateDistribution& d) {
    require(d.size() == mdp.n_states(), "distribution size does not match the mdp");
}

/// Solves (I - G) v = rhs for a discounted kernel G (spectral radius < 1).
inline Vector solve_fixed_point(const Matrix& discounted_kernel, const Vector& rhs) {
    const auto n = discounted_kernel.rows();
    Matrix a = Matrix::Identity(n, n) - discounted_kernel;
    Vector v = a.partialPivLu().solve(rhs);
    for (Eigen::Index s = 0; s < n; ++s) ensure(std::isfinite(v(s)), "linear solve produced non-finite values");
    return v;
}

} // namespace detail

/// P_pi(s,.) = sum_a probs(s,a) P_a(s,.).
inline Matrix policy_kernel(const FiniteMdp& mdp, const StationaryPolicy& pi) {
    detail::check_policy(mdp, pi);
    const int n = mdp.n_states();
    Matrix kernel = Matrix::Zero(n, n);
    for (int a = 0; a < mdp.n_actions(); ++a) {
        const Matrix& p = mdp.transition(a);
        for (int s = 0; s < n; ++s) {
            const double w = pi.probs()(s, a);
            if (w != 0.0) kernel.row(s) += w * p.row(s);
        }
    }
    return kernel;
}

/// T_pi v = r + gamma P_pi v.
inline ValueFunction bellman_apply(const FiniteMdp& mdp, const StationaryPolicy& pi, const ValueFunction& v) {
    detail::check_policy(mdp, pi);
    detail::check_value(mdp, v);
    const int n = mdp.n_states();
    Vector expected = Vector::Zero(n);
    for (int a = 0; a < mdp.n_actions(); ++a) {
        const Vector next = mdp.transition(a) * v.values;
        for (int s = 0; s < n; ++s) expected(s) += pi.probs()(s, a) * next(s);
    }
    return ValueFunction(mdp.rewards() + mdp.gamma() * expected);
}

struct GreedyResult {
    ValueFunction value;
    StationaryPolicy policy;
};

/// Action values Q(s,a) = r(s) + gamma (P_a v)(s).
inline Matrix action_values(const FiniteMdp& mdp, const ValueFunction& v) {
    detail::check_value(mdp, v);
    Matrix q(mdp.n_states(), mdp.n_actions());
    for (int a = 0; a < mdp.n_actions(); ++a)
        q.col(a) = mdp.rewards() + mdp.gamma() * (mdp.transition(a) * v.values);
    return q;
}

/// (T v, greedy policy); ties go to the smallest action index.
inline GreedyResult bellman_optimal(const FiniteMdp& mdp, const ValueFunction& v) {
    const Matrix q = action_values(mdp, v);
    const int n = mdp.n_states();
    Vector best(n);
    std::vector<int> actions(n, 0);
    for (int s = 0; s < n; ++s) {
        best(s) = q(s, 0);
        for (int a = 1; a < mdp.n_actions(); ++a)
            if (q(s, a) > best(s)) {
                best(s) = q(s, a);
                actions[s] = a;
            }
    }
    return {ValueFunction(std::move(best)), StationaryPolicy::deterministic(mdp.n_actions(), actions)};
}

inline double sup_norm(const Vector& x) { return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff(); }

/// Exact value of a stationary policy by dense solve of (I - gamma P_pi) v = r.
inline ValueFunction evaluate_stationary(const FiniteMdp& mdp, const StationaryPolicy& pi) {
    const Matrix discounted = mdp.gamma() * policy_kernel(mdp, pi);
    ValueFunction v(detail::solve_fixed_point(discounted, mdp.rewards()));
    const double residual = sup_norm(v.values - bellman_apply(mdp, pi, v).values);
    detail::ensure(residual <= 1e-8 * mdp.v_max(),
                   "evaluate_stationary: residual " + std::to_string(residual) + " exceeds tolerance");
    return v;
}

/// v_sigma = T_head ... T_tail r; an empty stack yields r.
inline ValueFunction evaluate_finite_horizon(const FiniteMdp& mdp, const PolicyStack& stack) {
    detail::require(stack.interpretation() == PolicyStack::Interpretation::FiniteHorizon,
                    "evaluate_finite_horizon: stack must be finite-horizon");
    ValueFunction v(mdp.rewards());
    for (auto it = stack.policies().rbegin(); it != stack.policies().rend(); ++it)
        v = bellman_apply(mdp, *it, v);
    return v;
}

namespace detail {

/// Solves v = reward + compound v and checks the residual under the stack's operators.
inline ValueFunction periodic_fixed_point(const FiniteMdp& mdp, const PolicyStack& stack, const Vector& reward,
                                          const Matrix& compound) {
    ValueFunction v(solve_fixed_point(compound, reward));
    ValueFunction image = v;
    for (auto back = stack.policies().rbegin(); back != stack.policies().rend(); ++back)
        image = bellman_apply(mdp, *back, image);
    const double residual = sup_norm(v.values - image.values);
    ensure(residual <= 1e-8 * mdp.v_max(),
           "evaluate_periodic: residual " + std::to_string(residual) + " exceeds tolerance");
    return v;
}

} // namespace detail

/**
 * Value of the periodic policy that loops over the stack forever.
 *
 * Composing the operators tail to head gives one period as v -> R + G v with
 * G = gamma^m P_head ... P_tail; the fixed point is solved densely. A period
 * of one reduces to exactly the arithmetic of evaluate_stationary.
 */
inline ValueFunction evaluate_periodic(const FiniteMdp& mdp, const PolicyStack& stack) {
    detail::require(stack.interpretation() == PolicyStack::Interpretation::Periodic,
                    "evaluate_periodic: stack must be periodic");
    detail::require(!stack.empty(), "evaluate_periodic: period must be at least one");
    const auto& policies = stack.policies();
    auto it = policies.rbegin();
    Vector reward = mdp.rewards();
    Matrix compound = mdp.gamma() * policy_kernel(mdp, *it);
    for (++it; it != policies.rend(); ++it) {
        const Matrix discounted = mdp.gamma() * policy_kernel(mdp, *it);
        reward = mdp.rewards() + discounted * reward;
        compound = discounted * compound;
    }
    return detail::periodic_fixed_point(mdp, stack, reward, compound);
}

struct OptimalSolution {
    ValueFunction value;
    StationaryPolicy policy;
    int iterations = 0;
};

/**
 * Exact policy iteration from the all-action-0 policy.
 *
 * An action is only replaced when another one improves Q by more than
 * 1e-12 V_max, so rounding-level ties cannot make the policy cycle.
 */
inline OptimalSolution optimal_value(const FiniteMdp& mdp, double tol) {
    detail::require(tol > 0.0, "optimal_value: tolerance must be positive");
    const double switch_margin = 1e-12 * mdp.v_max();
    const double cap = std::pow(static_cast<double>(mdp.n_actions()), mdp.n_states()) + 1.0;
    std::vector<int> actions(mdp.n_states(), 0);
    StationaryPolicy pi = StationaryPolicy::deterministic(mdp.n_actions(), actions);
    for (int iter = 1;; ++iter) {
        detail::ensure(iter <= cap, "optimal_value: iteration cap exceeded");
        ValueFunction v = evaluate_stationary(mdp, pi);
        const Matrix q = action_values(mdp, v);
        bool changed = false;
        for (int s = 0; s < mdp.n_states(); ++s) {
            int best = actions[s];
            for (int a = 0; a < mdp.n_actions(); ++a)
                if (q(s, a) > q(s, best) + switch_margin) best = a;
            if (best != actions[s]) {
                actions[s] = best;
                changed = true;
            }
        }
        if (!changed) {
            const double residual = sup_norm(v.values - bellman_optimal(mdp, v).value.values);
            detail::ensure(residual <= tol, "optimal_value: Bellman residual " + std::to_string(residual) +
                                                " exceeds tolerance");
            return {std::move(v), std::move(pi), iter};
        }
        pi = StationaryPolicy::deterministic(mdp.n_actions(), actions);
    }
}

/// d_{pi,nu} = (1 - gamma) nu (I - gamma P_pi)^{-1}.
inline StateDistribution occupancy(const FiniteMdp& mdp, const StationaryPolicy& pi, const StateDistribution& nu) {
    detail::check_distribution(mdp, nu);
    const Matrix discounted = mdp.gamma() * policy_kernel(mdp, pi);
    Vector d = detail::solve_fixed_point(discounted.transpose(), (1.0 - mdp.gamma()) * nu.mass());
    for (Eigen::Index s = 0; s < d.size(); ++s) {
        detail::ensure(d(s) >= -1e-12, "occupancy: negative mass");
        d(s) = std::max(d(s), 0.0);
    }
    const double total = d.sum();
    detail::ensure(std::abs(total - 1.0) <= 1e-10, "occupancy: mass does not sum to 1");
    return StateDistribution(d / total);
}

/// (1 - alpha) base + alpha new_pi, statewise.
inline StationaryPolicy mix(const StationaryPolicy& base, const StationaryPolicy& new_pi, double alpha) {
    detail::require(alpha >= 0.0 && alpha <= 1.0, "mix: alpha must lie in [0,1]");
    detail::require(base.n_states() == new_pi.n_states() && base.n_actions() == new_pi.n_actions(),
                    "mix: policy shapes disagree");
    Matrix probs = (1.0 - alpha) * base.probs() + alpha * new_pi.probs();
    // Re-normalize rows to absorb rounding so the result passes validation.
    for (Eigen::Index s = 0; s < probs.rows(); ++s) {
        const double sum = probs.row(s).sum();
        if (sum != 1.0) probs.row(s) /= sum;
    }
    return StationaryPolicy(std::move(probs));
}

/// nu x = E_{s ~ nu}[x(s)].
inline double expected_value(const StateDistribution& dist, const ValueFunction& v) {
    detail::require(dist.size() == v.size(), "expected_value: size mismatch");
    double total = 0.0;
    for (int s = 0; s < v.size(); ++s) total += dist(s) * v(s);
    return total;
}

} // namespace pibench
