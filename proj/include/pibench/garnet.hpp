#pragma once

#include "pibench/mdp.hpp"
#include "pibench/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

namespace pibench {

/// Parameters of a Garnet instance G(n_states, n_actions, branching, n_features).
struct GarnetSpec {
    int n_states = 50;
    int n_actions = 2;
    int branching = 2;
    int n_features = 5;
    double gamma = 0.99;
    std::uint64_t seed = 0;

    void validate() const {
        detail::require(n_states >= 1 && n_actions >= 1, "garnet: sizes must be positive");
        detail::require(branching >= 1 && branching <= n_states, "garnet: need 1 <= branching <= n_states");
        detail::require(n_features >= 1 && n_features <= n_states, "garnet: need 1 <= n_features <= n_states");
        detail::require(gamma > 0.0 && gamma < 1.0, "garnet: discount must lie in (0,1)");
    }
};

/// n_states x p features with entries in [0,1] and full column rank.
class FeatureMatrix {
  public:
    explicit FeatureMatrix(Matrix phi) : phi_(std::move(phi)) {
        detail::require(phi_.rows() > 0 && phi_.cols() > 0, "features: empty matrix");
        detail::require(phi_.cols() <= phi_.rows(), "features: more columns than states");
        detail::require(column_rank(phi_) == phi_.cols(), "features: columns are linearly dependent");
    }

    static Eigen::Index column_rank(const Matrix& phi) {
        Eigen::ColPivHouseholderQR<Matrix> qr(phi);
        return qr.rank();
    }

    int n_states() const { return static_cast<int>(phi_.rows()); }
    int n_features() const { return static_cast<int>(phi_.cols()); }
    const Matrix& phi() const { return phi_; }

  private:
    Matrix phi_;
};

struct GarnetInstance {
    FiniteMdp mdp;
    FeatureMatrix features;
};

namespace detail {

/// b probabilities from the gaps between b-1 sorted uniform cut points; redrawn on a zero gap.
inline std::vector<double> cut_point_probabilities(RandomStream& rng, int b) {
    std::vector<double> cuts(b - 1);
    std::vector<double> probs(b);
    for (;;) {
        for (double& c : cuts) c = rng.uniform01();
        std::sort(cuts.begin(), cuts.end());
        double previous = 0.0;
        bool positive = true;
        for (int t = 0; t < b; ++t) {
            const double next = t + 1 < b ? cuts[t] : 1.0;
            probs[t] = next - previous;
            positive = positive && probs[t] > 0.0;
            previous = next;
        }
        if (positive) return probs;
    }
}

} // namespace detail

/**
 * Generates a Garnet MDP and its features from spec.seed.
 *
 * Draw order on the substream derive(seed, {0}): for s, then a: b distinct
 * successors by partial Fisher-Yates over 0..n-1, then b-1 cut points; after
 * all rows, rewards r(s) ~ U[0,1). Features come from derive(seed, {1, attempt})
 * row by row; a rank-deficient draw moves on to the next attempt.
 */
inline GarnetInstance generate(const GarnetSpec& spec) {
    spec.validate();
    const int n = spec.n_states;
    const int b = spec.branching;
    RandomStream rng = RandomStream::derive(spec.seed, {0});

    std::vector<Matrix> transitions(spec.n_actions, Matrix::Zero(n, n));
    std::vector<int> order(n);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < spec.n_actions; ++a) {
            std::iota(order.begin(), order.end(), 0);
            for (int t = 0; t < b; ++t) {
                const int j = t + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - t)));
                std::swap(order[t], order[j]);
            }
            const std::vector<double> probs = detail::cut_point_probabilities(rng, b);
            for (int t = 0; t < b; ++t) transitions[a](s, order[t]) = probs[t];
        }
    }
    Vector rewards(n);
    for (int s = 0; s < n; ++s) rewards(s) = rng.uniform01();

    Matrix phi(n, spec.n_features);
    for (std::uint64_t attempt = 0;; ++attempt) {
        RandomStream feature_rng = RandomStream::derive(spec.seed, {1, attempt});
        for (int s = 0; s < n; ++s)
            for (int j = 0; j < spec.n_features; ++j) phi(s, j) = feature_rng.uniform01();
        if (FeatureMatrix::column_rank(phi) == spec.n_features) break;
        detail::ensure(attempt < 1000, "garnet: could not draw full-rank features");
    }

    return {FiniteMdp(std::move(transitions), std::move(rewards), spec.gamma, 1.0), FeatureMatrix(std::move(phi))};
}

} // namespace pibench
