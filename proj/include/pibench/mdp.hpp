#pragma once

#include "pibench/types.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <string>
#include <utility>
#include <vector>

namespace pibench {

/**
 * Finite discounted MDP with state-only rewards.
 *
 * transitions[a] is the n_states x n_states kernel of action a; row s holds
 * P(.|s,a). Construction validates row-stochasticity (1e-12), |r| <= r_max
 * and 0 < gamma < 1, so every instance in circulation is well formed.
 */
class FiniteMdp {
  public:
    FiniteMdp(std::vector<Matrix> transitions, Vector rewards, double gamma, double r_max)
        : transitions_(std::move(transitions)), rewards_(std::move(rewards)), gamma_(gamma),
          r_max_(r_max) {
        using detail::require;
        require(!transitions_.empty(), "mdp: need at least one action");
        const auto n = rewards_.size();
        require(n > 0, "mdp: need at least one state");
        require(gamma_ > 0.0 && gamma_ < 1.0, "mdp: discount must lie in (0,1)");
        require(r_max_ > 0.0 && std::isfinite(r_max_), "mdp: r_max must be positive");
        for (Eigen::Index s = 0; s < n; ++s) {
            require(std::isfinite(rewards_(s)), "mdp: non-finite reward");
            require(std::abs(rewards_(s)) <= r_max_, "mdp: |r(s)| exceeds r_max");
        }
        for (std::size_t a = 0; a < transitions_.size(); ++a) {
            const Matrix& p = transitions_[a];
            require(p.rows() == n && p.cols() == n, "mdp: transition matrix has wrong shape");
            for (Eigen::Index s = 0; s < n; ++s) {
                double sum = 0.0;
                for (Eigen::Index t = 0; t < n; ++t) {
                    require(std::isfinite(p(s, t)) && p(s, t) >= 0.0,
                            "mdp: transition probabilities must be nonnegative");
                    sum += p(s, t);
                }
                require(std::abs(sum - 1.0) <= 1e-12, "mdp: transition row does not sum to 1");
            }
        }
    }

    int n_states() const { return static_cast<int>(rewards_.size()); }
    int n_actions() const { return static_cast<int>(transitions_.size()); }
    const Matrix& transition(int action) const { return transitions_.at(action); }
    const std::vector<Matrix>& transitions() const { return transitions_; }
    const Vector& rewards() const { return rewards_; }
    double gamma() const { return gamma_; }
    double r_max() const { return r_max_; }
    double v_max() const { return r_max_ / (1.0 - gamma_); }

  private:
    std::vector<Matrix> transitions_;
    Vector rewards_;
    double gamma_;
    double r_max_;
};

/// A real function on states.
struct ValueFunction {
    Vector values;

    ValueFunction() = default;
    explicit ValueFunction(Vector v) : values(std::move(v)) {}

    int size() const { return static_cast<int>(values.size()); }
    double operator()(int s) const { return values(s); }
};

/// Probability mass over states (nonnegative, sums to 1 within 1e-12).
class StateDistribution {
  public:
    explicit StateDistribution(Vector mass, double tolerance = 1e-12) : mass_(std::move(mass)) {
        detail::require(mass_.size() > 0, "distribution: empty");
        double sum = 0.0;
        for (Eigen::Index s = 0; s < mass_.size(); ++s) {
            detail::require(std::isfinite(mass_(s)) && mass_(s) >= 0.0,
                            "distribution: mass must be nonnegative");
            sum += mass_(s);
        }
        detail::require(std::abs(sum - 1.0) <= tolerance, "distribution: mass does not sum to 1");
    }

    static StateDistribution uniform(int n) {
        detail::require(n > 0, "distribution: empty");
        return StateDistribution(Vector::Constant(n, 1.0 / n));
    }

    static StateDistribution delta(int n, int s) {
        detail::require(s >= 0 && s < n, "distribution: state out of range");
        Vector m = Vector::Zero(n);
        m(s) = 1.0;
        return StateDistribution(std::move(m));
    }

    int size() const { return static_cast<int>(mass_.size()); }
    const Vector& mass() const { return mass_; }
    double operator()(int s) const { return mass_(s); }

  private:
    Vector mass_;
};

/**
 * Stationary (possibly stochastic) policy: probs(s,a) = P(a|s).
 * Deterministic policies are the 0/1 special case.
 */
class StationaryPolicy {
  public:
    explicit StationaryPolicy(Matrix probs) : probs_(std::move(probs)) {
        detail::require(probs_.rows() > 0 && probs_.cols() > 0, "policy: empty");
        for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
            double sum = 0.0;
            for (Eigen::Index a = 0; a < probs_.cols(); ++a) {
                detail::require(std::isfinite(probs_(s, a)) && probs_(s, a) >= 0.0,
                                "policy: probabilities must be nonnegative");
                sum += probs_(s, a);
            }
            detail::require(std::abs(sum - 1.0) <= 1e-12, "policy: row does not sum to 1");
        }
    }

    static StationaryPolicy deterministic(int n_actions, const std::vector<int>& actions) {
        detail::require(!actions.empty(), "policy: empty");
        Matrix probs = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
        for (std::size_t s = 0; s < actions.size(); ++s) {
            detail::require(actions[s] >= 0 && actions[s] < n_actions, "policy: action out of range");
            probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
        }
        return StationaryPolicy(std::move(probs));
    }

    static StationaryPolicy constant(int n_states, int n_actions, int action = 0) {
        return deterministic(n_actions, std::vector<int>(n_states, action));
    }

    int n_states() const { return static_cast<int>(probs_.rows()); }
    int n_actions() const { return static_cast<int>(probs_.cols()); }
    const Matrix& probs() const { return probs_; }

    bool is_deterministic() const {
        for (Eigen::Index s = 0; s < probs_.rows(); ++s)
            for (Eigen::Index a = 0; a < probs_.cols(); ++a)
                if (probs_(s, a) != 0.0 && probs_(s, a) != 1.0) return false;
        return true;
    }

    /// Action of a deterministic policy at state s.
    int action(int s) const {
        for (Eigen::Index a = 0; a < probs_.cols(); ++a)
            if (probs_(s, a) == 1.0) return static_cast<int>(a);
        throw InvalidInput("policy: action() requires a deterministic row");
    }

    std::vector<int> actions() const {
        std::vector<int> out(n_states());
        for (int s = 0; s < n_states(); ++s) out[s] = action(s);
        return out;
    }

    bool operator==(const StationaryPolicy& other) const { return probs_ == other.probs_; }

  private:
    Matrix probs_;
};

/**
 * Ordered sequence of deterministic policies, head first.
 *
 * FiniteHorizon: sigma = head, next, ..., tail executed once, in that order.
 * Periodic: the same sequence looped forever.
 */
class PolicyStack {
  public:
    enum class Interpretation { FiniteHorizon, Periodic };

    explicit PolicyStack(Interpretation interpretation) : interpretation_(interpretation) {}

    PolicyStack(Interpretation interpretation, std::vector<StationaryPolicy> head_first)
        : interpretation_(interpretation) {
        for (auto& p : head_first) push_back(std::move(p));
    }

    Interpretation interpretation() const { return interpretation_; }
    std::size_t size() const { return policies_.size(); }
    bool empty() const { return policies_.empty(); }
    const StationaryPolicy& operator[](std::size_t i) const { return policies_[i]; }
    const StationaryPolicy& head() const { return policies_.front(); }
    const std::deque<StationaryPolicy>& policies() const { return policies_; }

    /// New policy becomes the first one executed.
    void push_front(StationaryPolicy p) {
        check(p);
        policies_.push_front(std::move(p));
    }

    void push_back(StationaryPolicy p) {
        check(p);
        policies_.push_back(std::move(p));
    }

    void pop_back() { policies_.pop_back(); }

    PolicyStack as(Interpretation interpretation) const {
        PolicyStack copy = *this;
        copy.interpretation_ = interpretation;
        return copy;
    }

  private:
    void check(const StationaryPolicy& p) const {
        detail::require(p.is_deterministic(), "policy stack: members must be deterministic");
        if (!policies_.empty())
            detail::require(p.n_states() == policies_.front().n_states() &&
                                p.n_actions() == policies_.front().n_actions(),
                            "policy stack: member shapes disagree");
    }

    Interpretation interpretation_;
    std::deque<StationaryPolicy> policies_;
};

/// 64-bit FNV-1a digest of raw bytes; used to fingerprint policies in traces.
class Digest {
  public:
    void add(const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001B3ULL;
        }
    }
    void add(const Matrix& m) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                const double x = m(r, c);
                add(&x, sizeof x);
            }
    }
    std::uint64_t value() const { return state_; }

  private:
    std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

inline std::uint64_t digest(const StationaryPolicy& pi) {
    Digest d;
    d.add(pi.probs());
    return d.value();
}

/// Head-first concatenation; a one-policy stack digests like its member.
inline std::uint64_t digest(const PolicyStack& stack) {
    Digest d;
    for (const auto& p : stack.policies()) d.add(p.probs());
    return d.value();
}

} // namespace pibench
