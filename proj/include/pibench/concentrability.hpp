#pragma once

#include "pibench/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pibench {

/// A coefficient in [1, inf) or the explicit infinity sentinel.
class Coefficient {
  public:
    static Coefficient finite(double value) {
        detail::require(std::isfinite(value), "coefficient: finite value expected");
        return Coefficient(value, false);
    }
    static Coefficient infinity() { return Coefficient(0.0, true); }

    bool is_infinite() const { return infinite_; }
    double value() const {
        detail::require(!infinite_, "coefficient: value() on an infinite coefficient");
        return value_;
    }
    /// +inf for the sentinel; for arithmetic in bounds only.
    double as_double() const { return infinite_ ? std::numeric_limits<double>::infinity() : value_; }

    bool operator==(const Coefficient&) const = default;

  private:
    Coefficient(double v, bool inf) : value_(v), infinite_(inf) {}
    double value_;
    bool infinite_;
};

namespace detail {

/// (clamped, raw) ratio max_s w(s)/nu(s); infinite when w puts mass where nu has none.
inline std::pair<Coefficient, double> density_ratio(const Vector& w, const StateDistribution& nu) {
    double raw = 0.0;
    for (int s = 0; s < nu.size(); ++s) {
        if (nu(s) > 0.0) raw = std::max(raw, w(s) / nu(s));
        else if (w(s) > 0.0) return {Coefficient::infinity(), std::numeric_limits<double>::infinity()};
    }
    return {Coefficient::finite(std::max(1.0, raw)), raw};
}

inline void check_pair(const FiniteMdp& mdp, const StateDistribution& mu, const StateDistribution& nu) {
    check_distribution(mdp, mu);
    check_distribution(mdp, nu);
}

} // namespace detail

/// Worst-case i-step mass w_i(s) = max over deterministic policy sequences of (mu P_1 ... P_i)(s).
inline std::vector<Vector> worst_case_masses(const FiniteMdp& mdp, const StateDistribution& mu, int max_i) {
    detail::require(max_i >= 0, "coefficients: index must be nonnegative");
    detail::check_distribution(mdp, mu);
    const int n = mdp.n_states();
    // X(s, s') = max probability of standing at s' after t steps started from s.
    Matrix x = Matrix::Identity(n, n);
    std::vector<Vector> masses;
    masses.reserve(max_i + 1);
    masses.push_back(mu.mass());
    for (int t = 1; t <= max_i; ++t) {
        Matrix next = mdp.transition(0) * x;
        for (int a = 1; a < mdp.n_actions(); ++a) next = next.cwiseMax(mdp.transition(a) * x);
        x = std::move(next);
        masses.push_back(x.transpose() * mu.mass());
    }
    return masses;
}

struct CoefficientTable {
    std::vector<Coefficient> clamped;
    std::vector<double> raw; ///< before clamping to 1 (inf for the sentinel)
};

/// c(0..max_i).
inline CoefficientTable c_table(const FiniteMdp& mdp, const StateDistribution& mu, const StateDistribution& nu,
                                int max_i) {
    detail::check_pair(mdp, mu, nu);
    CoefficientTable table;
    for (const Vector& w : worst_case_masses(mdp, mu, max_i)) {
        auto [c, raw] = detail::density_ratio(w, nu);
        table.clamped.push_back(c);
        table.raw.push_back(raw);
    }
    return table;
}

/// c_{pi_*}(0..max_i) from the powers mu P_{pi_*}^i.
inline CoefficientTable c_pistar_table(const FiniteMdp& mdp, const StationaryPolicy& pistar,
                                       const StateDistribution& mu, const StateDistribution& nu, int max_i) {
    detail::require(max_i >= 0, "coefficients: index must be nonnegative");
    detail::check_pair(mdp, mu, nu);
    const Matrix kernel_t = policy_kernel(mdp, pistar).transpose();
    CoefficientTable table;
    Vector w = mu.mass();
    for (int i = 0; i <= max_i; ++i) {
        if (i > 0) w = kernel_t * w;
        auto [c, raw] = detail::density_ratio(w, nu);
        table.clamped.push_back(c);
        table.raw.push_back(raw);
    }
    return table;
}

inline Coefficient c_coeff(const FiniteMdp& mdp, const StateDistribution& mu, const StateDistribution& nu, int i) {
    detail::require(i >= 0, "c_coeff: index must be nonnegative");
    return c_table(mdp, mu, nu, i).clamped.back();
}

inline Coefficient c_pistar_coeff(const FiniteMdp& mdp, const StationaryPolicy& pistar, const StateDistribution& mu,
                                  const StateDistribution& nu, int i) {
    detail::require(i >= 0, "c_pistar_coeff: index must be nonnegative");
    return c_pistar_table(mdp, pistar, mu, nu, i).clamped.back();
}

/// A truncated series with a certified bound on the omitted tail.
struct Aggregate {
    Coefficient value = Coefficient::finite(1.0);
    double tail = 0.0;

    double upper() const { return value.as_double() + tail; }
};

struct ConcentrabilityReport {
    double gamma = 0.0;
    double v_max = 0.0;
    double tolerance = 0.0;
    double cap = 0.0;         ///< max_s 1/nu(s); dominates every c(i) and c_pi*(i)
    int truncation_index = 0; ///< series are summed over indices 0..I_max-1
    std::vector<int> m_values;
    CoefficientTable c;
    CoefficientTable c_pistar;
    std::map<int, Aggregate> C1;                  ///< C^(1,k), k in {0} and m_values
    std::map<std::pair<int, int>, Aggregate> C2;  ///< C^(2,m,k), (1,0), (m,0), (m,m)
    Aggregate C1_pistar;
    Coefficient C_pistar = Coefficient::finite(1.0);
    double C_pistar_raw = 0.0;

    const Aggregate& C1k(int k) const {
        auto it = C1.find(k);
        detail::require(it != C1.end(), "report: C^(1,k) not computed for k=" + std::to_string(k));
        return it->second;
    }
    const Aggregate& C2mk(int m, int k) const {
        auto it = C2.find({m, k});
        detail::require(it != C2.end(), "report: C^(2,m,k) not computed for this (m,k)");
        return it->second;
    }
};

namespace detail {

inline double c1_tail(double cap, double gamma, int I) { return cap * std::pow(gamma, I); }

/// Certified tail of (1-g)(1-g^m) sum_{l>=I} (1 + floor(l/m)) g^l c(l) with c <= cap.
inline double c2_tail(double cap, double gamma, int m, int I) {
    const double gi = std::pow(gamma, I);
    const double one_minus = 1.0 - gamma;
    const double plain = gi / one_minus;
    const double weighted = gi * (I * one_minus + gamma) / (one_minus * one_minus);
    return one_minus * (1.0 - std::pow(gamma, m)) * cap * (plain + weighted / m);
}

inline Aggregate make_aggregate(bool infinite, double sum, double tail) {
    return {infinite ? Coefficient::infinity() : Coefficient::finite(std::max(1.0, sum)), tail};
}

/// (1-g) sum_{i<I} g^i c(i+k).
inline Aggregate series_c1(const CoefficientTable& t, double gamma, int k, int I, double tail) {
    double sum = 0.0;
    double g = 1.0;
    for (int i = 0; i < I; ++i, g *= gamma) {
        if (t.clamped[i + k].is_infinite()) return make_aggregate(true, 0.0, tail);
        sum += g * t.clamped[i + k].value();
    }
    return make_aggregate(false, (1.0 - gamma) * sum, tail);
}

/// (1-g)(1-g^m) sum_{l<I} (1 + floor(l/m)) g^l c(l+k).
inline Aggregate series_c2(const CoefficientTable& t, double gamma, int m, int k, int I, double tail) {
    double sum = 0.0;
    double g = 1.0;
    for (int l = 0; l < I; ++l, g *= gamma) {
        if (t.clamped[l + k].is_infinite()) return make_aggregate(true, 0.0, tail);
        sum += (1.0 + l / m) * g * t.clamped[l + k].value();
    }
    return make_aggregate(false, (1.0 - gamma) * (1.0 - std::pow(gamma, m)) * sum, tail);
}

} // namespace detail

/// Smallest I with every aggregate tail certificate <= tol.
inline int truncation_index(double cap, double gamma, const std::vector<int>& m_values, double tol) {
    detail::require(tol > 0.0, "truncation: tolerance must be positive");
    int I = 0;
    auto ok = [&](int i) {
        if (detail::c1_tail(cap, gamma, i) > tol) return false;
        if (detail::c2_tail(cap, gamma, 1, i) > tol) return false;
        for (int m : m_values)
            if (detail::c2_tail(cap, gamma, m, i) > tol) return false;
        return true;
    };
    while (!ok(I)) ++I;
    return I;
}

/**
 * All concentrability constants for (mu, nu) with series truncated at I_max.
 *
 * I_max is the smallest index whose tail certificates are within tol unless
 * i_max overrides it (the tails are then reported for that index).
 */
inline ConcentrabilityReport aggregate_constants(const FiniteMdp& mdp, const StationaryPolicy& pistar,
                                                 const StateDistribution& mu, const StateDistribution& nu,
                                                 std::vector<int> m_values, double tol,
                                                 std::optional<int> i_max = std::nullopt) {
    detail::check_pair(mdp, mu, nu);
    detail::check_policy(mdp, pistar);
    for (int s = 0; s < nu.size(); ++s) detail::require(nu(s) > 0.0, "aggregate_constants: nu needs full support");
    for (int m : m_values) detail::require(m >= 1, "aggregate_constants: m must be at least 1");
    std::sort(m_values.begin(), m_values.end());
    m_values.erase(std::unique(m_values.begin(), m_values.end()), m_values.end());

    const double gamma = mdp.gamma();
    ConcentrabilityReport rep;
    rep.gamma = gamma;
    rep.v_max = mdp.v_max();
    rep.tolerance = tol;
    rep.m_values = m_values;
    rep.cap = 1.0 / nu.mass().minCoeff();
    const int I = i_max ? *i_max : truncation_index(rep.cap, gamma, m_values, tol);
    detail::require(I >= 1, "aggregate_constants: truncation index must be positive");
    rep.truncation_index = I;

    const int max_m = m_values.empty() ? 0 : m_values.back();
    rep.c = c_table(mdp, mu, nu, I + max_m);
    rep.c_pistar = c_pistar_table(mdp, pistar, mu, nu, I);

    const double t1 = detail::c1_tail(rep.cap, gamma, I);
    rep.C1[0] = detail::series_c1(rep.c, gamma, 0, I, t1);
    rep.C1_pistar = detail::series_c1(rep.c_pistar, gamma, 0, I, t1);
    rep.C2[{1, 0}] = detail::series_c2(rep.c, gamma, 1, 0, I, detail::c2_tail(rep.cap, gamma, 1, I));
    for (int m : m_values) {
        rep.C1[m] = detail::series_c1(rep.c, gamma, m, I, t1);
        const double t2 = detail::c2_tail(rep.cap, gamma, m, I);
        rep.C2[{m, 0}] = detail::series_c2(rep.c, gamma, m, 0, I, t2);
        rep.C2[{m, m}] = detail::series_c2(rep.c, gamma, m, m, I, t2);
    }

    const StateDistribution d = occupancy(mdp, pistar, mu);
    auto [cp, raw] = detail::density_ratio(d.mass(), nu);
    rep.C_pistar = cp;
    rep.C_pistar_raw = raw;
    return rep;
}

struct HierarchyCheck {
    std::string relation;
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

/**
 * Order relations between the constants. Each compares the truncated left
 * side with the right side's upper value (truncated + tail), plus 1e-9.
 */
inline std::vector<HierarchyCheck> check_hierarchy(const ConcentrabilityReport& rep, int m) {
    detail::require(m >= 1, "check_hierarchy: m must be at least 1");
    const double g = rep.gamma;
    const double gm = std::pow(g, m);
    std::vector<HierarchyCheck> out;
    auto add = [&](std::string name, double lhs, double rhs) {
        out.push_back({std::move(name), lhs, rhs, lhs <= rhs + 1e-9});
    };
    const Aggregate& c10 = rep.C1k(0);
    const Aggregate& c1m = rep.C1k(m);
    const Aggregate& c2m0 = rep.C2mk(m, 0);
    const Aggregate& c2mm = rep.C2mk(m, m);
    const Aggregate& c210 = rep.C2mk(1, 0);

    add("C_pi* <= C^(1)_pi*", rep.C_pistar.as_double(), rep.C1_pistar.upper());
    add("C^(1)_pi* <= C^(1,0)", rep.C1_pistar.value.as_double(), c10.upper());
    add("C^(1,m) <= C^(2,m,m)/(1-g^m)", c1m.value.as_double(), c2mm.upper() / (1.0 - gm));
    add("C^(1,m) <= C^(1,0)/g^m", c1m.value.as_double(), c10.upper() / gm);
    add("C^(2,m,m) <= C^(2,m,0)/g^m", c2mm.value.as_double(), c2m0.upper() / gm);
    add("C^(2,m,0) <= (1-g^m)/(1-g) C^(2,1,0)", c2m0.value.as_double(), (1.0 - gm) / (1.0 - g) * c210.upper());

    // Lower bound: (1-g)(1-g^m)[sum_{i<m} g^i c(i) + (1/(m+1)) sum_{i>=m} (i+1) g^i c(i)] <= C^(2,m,0).
    double head = 0.0;
    double rest = 0.0;
    bool infinite = false;
    double gi = 1.0;
    for (int i = 0; i < rep.truncation_index; ++i, gi *= g) {
        const Coefficient& c = rep.c.clamped[i];
        if (c.is_infinite()) {
            infinite = true;
            break;
        }
        if (i < m) head += gi * c.value();
        else rest += (i + 1) * gi * c.value();
    }
    const double lower = infinite ? std::numeric_limits<double>::infinity()
                                  : (1.0 - g) * (1.0 - gm) * (head + rest / (m + 1));
    add("partial-sum lower bound <= C^(2,m,0)", lower, c2m0.upper());
    return out;
}

enum class PsdpBound { ExactCoeff, Cpistar };
enum class NspiBound { ExactCoeff, Blocked, Mixed };
enum class ConservativeBound { CPIlike, APIalpha, CPIstop };

namespace detail {

inline void check_eps(const std::vector<double>& eps, int k) {
    require(k >= 1 && static_cast<int>(eps.size()) >= k, "bound: need at least k errors");
    for (int j = 0; j < k; ++j) require(eps[j] >= 0.0, "bound: errors must be nonnegative");
}

/// c(i), or the cap past the end of the table.
inline double coeff_or_cap(const CoefficientTable& t, double cap, int i) {
    return i < static_cast<int>(t.clamped.size()) ? t.clamped[i].as_double() : cap;
}

/// sum_{j>=0} g^{i+jm} c(i+jm), table terms plus a closed-form capped remainder.
inline double periodic_series(const CoefficientTable& t, double cap, double gamma, int i, int m) {
    const int size = static_cast<int>(t.clamped.size());
    double sum = 0.0;
    int idx = i;
    for (; idx < size; idx += m) sum += std::pow(gamma, idx) * t.clamped[idx].as_double();
    return sum + cap * std::pow(gamma, idx) / (1.0 - std::pow(gamma, m));
}

/// eps_p with 1-based p; zero outside 1..k.
inline double eps_at(const std::vector<double>& eps, int p, int k) { return p >= 1 && p <= k ? eps[p - 1] : 0.0; }

} // namespace detail

/// Bound on mu(v_* - v_{(sigma_k)^inf}) for PSDP_inf; eps[j-1] is eps_j.
inline double bound_psdp(const ConcentrabilityReport& rep, const std::vector<double>& eps, int k, double v_max,
                         PsdpBound variant) {
    detail::check_eps(eps, k);
    const double g = rep.gamma;
    const double looping = 2.0 * std::pow(g, k) * v_max;
    double sum = 0.0;
    if (variant == PsdpBound::ExactCoeff) {
        for (int i = 0; i < k; ++i)
            if (eps[k - i - 1] > 0.0)
                sum += std::pow(g, i) * detail::coeff_or_cap(rep.c_pistar, rep.cap, i) * eps[k - i - 1];
    } else {
        double total = 0.0;
        for (int j = 0; j < k; ++j) total += eps[j];
        sum = total > 0.0 ? rep.C_pistar.as_double() / (1.0 - g) * total : 0.0;
    }
    return sum + looping;
}

/// Bound on mu(v_* - v_{(sigma_k^m)^inf}) for NSPI(m); m = 1 gives the API bound.
inline double bound_nspi(const ConcentrabilityReport& rep, const std::vector<double>& eps, int k, int m, double v_max,
                         NspiBound variant) {
    detail::check_eps(eps, k);
    detail::require(m >= 1, "bound_nspi: m must be at least 1");
    const double g = rep.gamma;
    const double initial = std::pow(g, k) * v_max;
    double sum = 0.0;
    switch (variant) {
    case NspiBound::ExactCoeff:
        for (int i = 0; i < k; ++i)
            if (eps[k - i - 1] > 0.0) sum += eps[k - i - 1] * detail::periodic_series(rep.c, rep.cap, g, i, m);
        break;
    case NspiBound::Blocked: {
        double blocks = 0.0;
        const int last = (k - 1 + m - 1) / m; // ceil((k-1)/m)
        for (int l = 0; l <= last; ++l) {
            double worst = 0.0;
            for (int p = k - (l + 1) * m + 1; p <= k - l * m; ++p) worst = std::max(worst, detail::eps_at(eps, p, k));
            blocks += worst;
        }
        if (blocks > 0.0) sum = detail::periodic_series(rep.c, rep.cap, g, 0, 1) * blocks;
        break;
    }
    case NspiBound::Mixed: {
        double total = 0.0;
        for (int j = 0; j < k; ++j) total += eps[j];
        if (total > 0.0) sum = rep.C_pistar.as_double() / (1.0 - g) * total;
        for (int i = 0; i < k; ++i)
            if (eps[k - i - 1] > 0.0) sum += eps[k - i - 1] * detail::periodic_series(rep.c, rep.cap, g, i + m, m);
        break;
    }
    }
    return sum + initial;
}

/**
 * Bounds for conservative schemes after k = eps.size() steps.
 * CPIlike expects errors measured against d_{pi_k,nu}, APIalpha against nu.
 * CPIstop uses only eps.back() (the error at the stopping call) and rho.
 */
inline double bound_conservative(const ConcentrabilityReport& rep, const std::vector<double>& eps,
                                 const std::vector<double>& alpha, double v_max, ConservativeBound flavor,
                                 double rho = 0.0) {
    const int k = static_cast<int>(eps.size());
    detail::check_eps(eps, k);
    const double g = rep.gamma;
    if (flavor == ConservativeBound::CPIstop) {
        detail::require(rho >= 0.0, "bound_conservative: rho must be nonnegative");
        return rep.C_pistar.as_double() / ((1.0 - g) * (1.0 - g)) * (eps.back() + rho);
    }
    detail::require(alpha.size() == eps.size(), "bound_conservative: sequences are not aligned");
    double weighted = 0.0;
    double steps = 0.0;
    for (int j = 0; j < k; ++j) {
        detail::require(alpha[j] >= 0.0 && alpha[j] <= 1.0, "bound_conservative: stepsizes must lie in [0,1]");
        weighted += alpha[j] * eps[j];
        steps += alpha[j];
    }
    const double scale = flavor == ConservativeBound::CPIlike ? (1.0 - g) * (1.0 - g) : 1.0 - g;
    const double head = weighted > 0.0 ? rep.C1k(0).upper() / scale * weighted : 0.0;
    return head + std::exp(-(1.0 - g) * steps) * v_max;
}

} // namespace pibench
