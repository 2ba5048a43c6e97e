#pragma once

#include "pibench/garnet.hpp"
#include "pibench/operators.hpp"
#include "pibench/rng.hpp"

#include <optional>

namespace pibench {

enum class NoiseScale {
    AbsoluteVmax, ///< amplitude = noise * V_max
    AbsoluteUnit, ///< amplitude = noise
};

/**
 * Controlled-error greedy step: greedy(Pi_{Phi,rho}(v + u)), u ~ U(-A, A) iid.
 * Without features the projection is the identity and is skipped.
 */
struct GreedyConfig {
    double noise = 0.1;
    NoiseScale scale = NoiseScale::AbsoluteVmax;
    std::optional<FeatureMatrix> features;

    double amplitude(const FiniteMdp& mdp) const {
        detail::require(noise >= 0.0, "greedy: noise amplitude must be nonnegative");
        return scale == NoiseScale::AbsoluteVmax ? noise * mdp.v_max() : noise;
    }

    static GreedyConfig exact() { return GreedyConfig{0.0, NoiseScale::AbsoluteVmax, std::nullopt}; }
};

struct ProjectionResult {
    ValueFunction value;
    bool regularized = false; ///< Gram matrix was singular; ridge 1e-10 I was added
};

/// Phi w with w = argmin sum_s rho(s) (v(s) - (Phi w)(s))^2, via the normal equations.
inline ProjectionResult weighted_projection(const FeatureMatrix& phi, const StateDistribution& rho,
                                            const ValueFunction& v) {
    detail::require(phi.n_states() == rho.size() && rho.size() == v.size(), "projection: size mismatch");
    const Matrix& f = phi.phi();
    const Matrix weighted = rho.mass().asDiagonal() * f;
    Matrix gram = f.transpose() * weighted;
    const Vector rhs = weighted.transpose() * v.values;

    int support = 0;
    for (int s = 0; s < rho.size(); ++s) support += rho(s) > 0.0 ? 1 : 0;

    bool regularized = support < phi.n_features();
    Eigen::LLT<Matrix> llt;
    if (!regularized) {
        llt.compute(gram);
        regularized = llt.info() != Eigen::Success;
    }
    if (regularized) {
        gram += 1e-10 * Matrix::Identity(gram.rows(), gram.cols());
        llt.compute(gram);
        detail::ensure(llt.info() == Eigen::Success, "projection: regularized Gram matrix is not positive definite");
    }
    const Vector w = llt.solve(rhs);
    return {ValueFunction(f * w), regularized};
}

/// dist (T v - T_pi v); rounding-level negatives in [-1e-10, 0) are clamped to 0.
inline double measure_epsilon(const FiniteMdp& mdp, const StateDistribution& dist, const ValueFunction& v,
                              const StationaryPolicy& pi) {
    detail::check_distribution(mdp, dist);
    const Vector gap = bellman_optimal(mdp, v).value.values - bellman_apply(mdp, pi, v).values;
    double eps = 0.0;
    for (int s = 0; s < gap.size(); ++s) eps += dist(s) * gap(s);
    detail::ensure(eps >= -1e-10, "measure_epsilon: greedy gap is negative");
    return eps < 0.0 ? 0.0 : eps;
}

struct GreedyOutcome {
    StationaryPolicy policy;
    double epsilon = 0.0; ///< measured against the guarantee distribution
    ValueFunction projected_value;
    bool regularized = false;
};

/**
 * One call to the approximate greedy operator.
 *
 * Noise is drawn fresh on every call: n_states uniforms from rng, state order.
 * rho weights the projection; guarantee_dist is where epsilon is measured.
 */
inline GreedyOutcome approx_greedy(const FiniteMdp& mdp, const GreedyConfig& cfg, const StateDistribution& rho,
                                   const StateDistribution& guarantee_dist, const ValueFunction& v,
                                   RandomStream& rng) {
    detail::check_value(mdp, v);
    detail::check_distribution(mdp, rho);
    const double amplitude = cfg.amplitude(mdp);
    Vector noisy = v.values;
    for (int s = 0; s < mdp.n_states(); ++s) noisy(s) += amplitude * (2.0 * rng.uniform01() - 1.0);

    ProjectionResult estimate{ValueFunction(std::move(noisy)), false};
    if (cfg.features) {
        detail::require(cfg.features->n_states() == mdp.n_states(), "greedy: feature rows do not match states");
        estimate = weighted_projection(*cfg.features, rho, estimate.value);
    }
    StationaryPolicy policy = bellman_optimal(mdp, estimate.value).policy;
    const double eps = measure_epsilon(mdp, guarantee_dist, v, policy);
    return {std::move(policy), eps, std::move(estimate.value), estimate.regularized};
}

} // namespace pibench
