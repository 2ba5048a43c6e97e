#pragma once

#include "pibench/types.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

namespace pibench {

/// Loss curves of one (instance, algorithm): losses[mdp][run][k-1].
using LossCube = std::vector<std::vector<std::vector<double>>>;

/**
 * Four curves over k: E[L], Std[E[L|M]], E[Std[L|M]], Std[Std[L|M]].
 * Inner statistics are over runs of one MDP, outer ones over MDPs.
 */
struct StatCurves {
    std::vector<double> mean;
    std::vector<double> std_mean;
    std::vector<double> mean_std;
    std::vector<double> std_std;

    std::size_t size() const { return mean.size(); }
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

/// Sample mean and unbiased standard deviation; a single sample has std 0.
inline MeanStd mean_std(const std::vector<double>& xs) {
    detail::require(!xs.empty(), "statistics: empty sample");
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    if (xs.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

/// MDPs without runs are ignored; every run must cover the same iterations.
inline StatCurves compute_stats(const LossCube& losses) {
    std::size_t length = 0;
    bool any = false;
    for (const auto& mdp : losses)
        for (const auto& run : mdp) {
            detail::require(!run.empty(), "statistics: empty loss curve");
            detail::require(!any || run.size() == length, "statistics: loss curves differ in length");
            length = run.size();
            any = true;
        }
    detail::require(any, "statistics: no runs");

    StatCurves out;
    for (std::size_t k = 0; k < length; ++k) {
        std::vector<double> means;
        std::vector<double> stds;
        for (const auto& mdp : losses) {
            if (mdp.empty()) continue;
            std::vector<double> xs;
            xs.reserve(mdp.size());
            for (const auto& run : mdp) xs.push_back(run[k]);
            const MeanStd inner = mean_std(xs);
            means.push_back(inner.mean);
            stds.push_back(inner.std);
        }
        const MeanStd outer_mean = mean_std(means);
        const MeanStd outer_std = mean_std(stds);
        out.mean.push_back(outer_mean.mean);
        out.std_mean.push_back(outer_mean.std);
        out.mean_std.push_back(outer_std.mean);
        out.std_std.push_back(outer_std.std);
    }
    return out;
}

/// Mean of E[L] over the last `window` iterations.
inline double tail_mean(const StatCurves& s, std::size_t window) {
    detail::require(window >= 1 && window <= s.size(), "tail_mean: window out of range");
    double sum = 0.0;
    for (std::size_t k = s.size() - window; k < s.size(); ++k) sum += s.mean[k];
    return sum / static_cast<double>(window);
}

} // namespace pibench
