#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pibench;

namespace {

AlgoConfig config(Scheme scheme, int iterations, GreedyConfig greedy = GreedyConfig::exact()) {
    AlgoConfig cfg;
    cfg.scheme = scheme;
    cfg.max_iterations = iterations;
    cfg.greedy = std::move(greedy);
    return cfg;
}

GreedyConfig noisy(const GarnetInstance& g) { return GreedyConfig{0.1, NoiseScale::AbsoluteVmax, g.features}; }

RunTrace run_seeded(const FiniteMdp& mdp, const AlgoConfig& cfg, const ValueFunction& v_star, std::uint64_t seed) {
    RandomStream rng(seed);
    return run(mdp, cfg, rng, v_star);
}

// Two states; at s0 action 1 moves to the rewarding absorbing s1, action 0 stays.
FiniteMdp reach_goal(double gamma) {
    Matrix stay(2, 2), go(2, 2);
    stay << 1, 0, 0, 1;
    go << 0, 1, 0, 1;
    Vector r(2);
    r << 0.0, 1.0;
    return FiniteMdp({stay, go}, r, gamma, 1.0);
}

} // namespace

TEST(Scheme, NamesRoundTrip) {
    for (Scheme s : {Scheme::API, Scheme::APIAlpha, Scheme::CPI, Scheme::CPIPlus, Scheme::CPIAlpha, Scheme::PSDPInf,
                     Scheme::NSPI})
        EXPECT_EQ(scheme_from_string(to_string(s)), s);
    EXPECT_THROW(scheme_from_string("pi"), InvalidInput);
}

TEST(Api, NoiselessMatchesExactPolicyIteration) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const GarnetInstance g = generate({15, 3, 2, 2, 0.95, seed});
        const ValueFunction v_star = optimal_value(g.mdp, 1e-8 * g.mdp.v_max()).value;
        const RunTrace t = run_seeded(g.mdp, config(Scheme::API, 12), v_star, seed);
        StationaryPolicy pi = StationaryPolicy::constant(15, 3);
        for (const auto& rec : t.records) {
            pi = bellman_optimal(g.mdp, evaluate_stationary(g.mdp, pi)).policy;
            EXPECT_EQ(rec.policy_digest, digest(pi));
            EXPECT_EQ(rec.epsilon, 0.0);
        }
    }
}

TEST(Api, SingleStateConvergesImmediately) {
    const FiniteMdp mdp({Matrix::Ones(1, 1), Matrix::Ones(1, 1)}, Vector::Constant(1, 0.5), 0.9, 1.0);
    const RunTrace t = run_seeded(mdp, config(Scheme::API, 3), optimal_value(mdp, 1e-10).value, 1);
    ASSERT_EQ(t.records.size(), 3u);
    EXPECT_NEAR(t.records[0].loss, 0.0, 1e-12);
}

TEST(Reductions, NspiOneAndFullStepAlphaEqualApi) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const GarnetInstance g = generate({12, 2, 3, 2, 0.99, seed});
        const ValueFunction v_star = optimal_value(g.mdp, 1e-8 * g.mdp.v_max()).value;
        const RunTrace api = run_seeded(g.mdp, config(Scheme::API, 20, noisy(g)), v_star, seed);
        AlgoConfig nspi = config(Scheme::NSPI, 20, noisy(g));
        nspi.m = 1;
        EXPECT_EQ(run_seeded(g.mdp, nspi, v_star, seed).records, api.records);
        AlgoConfig full = config(Scheme::APIAlpha, 20, noisy(g));
        full.alpha = 1.0;
        const RunTrace alpha_one = run_seeded(g.mdp, full, v_star, seed);
        ASSERT_EQ(alpha_one.records.size(), api.records.size());
        for (std::size_t i = 0; i < api.records.size(); ++i) {
            EXPECT_EQ(alpha_one.records[i].policy_digest, api.records[i].policy_digest);
            EXPECT_EQ(alpha_one.records[i].loss, api.records[i].loss);
        }
    }
}

TEST(ApiAlpha, OldActionMassDecaysGeometrically) {
    const FiniteMdp mdp = reach_goal(0.9);
    AlgoConfig cfg = config(Scheme::APIAlpha, 6);
    cfg.alpha = 0.1;
    const RunTrace t = run_seeded(mdp, cfg, optimal_value(mdp, 1e-10).value, 0);
    const auto& pi = std::get<StationaryPolicy>(t.final_policy);
    // Greedy always picks action 1 at s0, so the initial action keeps (1-alpha)^k.
    EXPECT_NEAR(pi.probs()(0, 0), std::pow(0.9, 6), 1e-12);
    EXPECT_NEAR(pi.probs()(0, 0) + pi.probs()(0, 1), 1.0, 1e-12);
    for (const auto& r : t.records) EXPECT_EQ(r.alpha, 0.1);
}

TEST(Cpi, StepsizeFormula) {
    EXPECT_NEAR(detail::cpi_stepsize(0.06, 0.06, 0.99, 100.0), 1.0101010101e-6, 1e-15);
    EXPECT_EQ(detail::cpi_stepsize(1e6, 0.1, 0.5, 2.0), 1.0);
    EXPECT_THROW(detail::cpi_stepsize(0.01, 0.06, 0.99, 100.0), InternalError);
}

TEST(Cpi, StopsImmediatelyFromOptimalPolicy) {
    const GarnetInstance g = generate({10, 2, 2, 1, 0.9, 3});
    const OptimalSolution opt = optimal_value(g.mdp, 1e-10);
    AlgoConfig cfg = config(Scheme::CPI, 10);
    cfg.initial_policy = opt.policy;
    const RunTrace t = run_seeded(g.mdp, cfg, opt.value, 0);
    EXPECT_TRUE(t.records.empty());
    EXPECT_EQ(t.termination, Termination::CPIStopped);
    EXPECT_NEAR(*t.stop_advantage, 0.0, 1e-12);
}

TEST(Cpi, MonotoneProgressAndIterationCap) {
    for (Scheme scheme : {Scheme::CPI, Scheme::CPIPlus}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const GarnetInstance g = generate({8, 2, 2, 1, 0.9, seed});
            const double vmax = g.mdp.v_max(), gamma = g.mdp.gamma(), rho = 0.5;
            const OptimalSolution opt = optimal_value(g.mdp, 1e-10);
            AlgoConfig cfg = config(scheme, 100000, noisy(g));
            cfg.rho_stop = rho;
            const RunTrace t = run_seeded(g.mdp, cfg, opt.value, seed);
            const double cap = 72.0 * gamma * vmax * vmax / (rho * rho);
            EXPECT_EQ(t.termination, Termination::CPIStopped);
            EXPECT_LE(static_cast<double>(t.records.size()), cap);
            const auto pi0 = StationaryPolicy::constant(8, 2);
            double eta = expected_value(StateDistribution::uniform(8), evaluate_stationary(g.mdp, pi0));
            for (const auto& r : t.records) {
                EXPECT_GT(r.eta - eta, rho * rho / (72.0 * gamma * vmax) - 1e-10);
                EXPECT_GT(*r.advantage, 2.0 * rho / 3.0);
                eta = r.eta;
            }
        }
    }
}

TEST(CpiPlus, LineSearchDominatesBaseStep) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const GarnetInstance g = generate({10, 3, 2, 2, 0.95, seed});
        const ValueFunction v_star = optimal_value(g.mdp, 1e-10).value;
        const GreedyConfig greedy{0.05, NoiseScale::AbsoluteVmax, std::nullopt};
        AlgoConfig base = config(Scheme::CPI, 1, greedy);
        AlgoConfig plus = config(Scheme::CPIPlus, 1, greedy);
        base.rho_stop = plus.rho_stop = 1e-3;
        const RunTrace a = run_seeded(g.mdp, base, v_star, seed);
        const RunTrace b = run_seeded(g.mdp, plus, v_star, seed);
        // Same first greedy call, so both stop or both step.
        ASSERT_EQ(a.records.size(), b.records.size());
        if (a.records.empty()) continue;
        EXPECT_GE(b.records[0].eta, a.records[0].eta - 1e-12);
        EXPECT_GE(b.records[0].alpha, a.records[0].alpha);
    }
}

TEST(CpiPlus, PicksCapOnMonotoneExample) {
    const FiniteMdp mdp = reach_goal(0.9);
    const auto nu = StateDistribution::uniform(2);
    // Oracle: nu v of the mixture is increasing over a fine alpha grid.
    const auto stay = StationaryPolicy::constant(2, 2, 0), go = StationaryPolicy::constant(2, 2, 1);
    double previous = -1.0;
    for (int i = 0; i <= 100; ++i) {
        const double value = expected_value(nu, evaluate_stationary(mdp, mix(stay, go, i / 100.0)));
        ASSERT_GT(value, previous);
        previous = value;
    }
    const RunTrace t = run_seeded(mdp, config(Scheme::CPIPlus, 1), optimal_value(mdp, 1e-10).value, 0);
    ASSERT_EQ(t.records.size(), 1u);
    EXPECT_EQ(t.records[0].alpha, 1.0);
}

TEST(CpiAlpha, FullStepNoiselessIsPolicyIteration) {
    const GarnetInstance g = generate({12, 3, 2, 2, 0.95, 9});
    const ValueFunction v_star = optimal_value(g.mdp, 1e-10).value;
    AlgoConfig cfg = config(Scheme::CPIAlpha, 10);
    cfg.alpha = 1.0;
    const RunTrace cpi = run_seeded(g.mdp, cfg, v_star, 0);
    const RunTrace api = run_seeded(g.mdp, config(Scheme::API, 10), v_star, 0);
    ASSERT_EQ(cpi.records.size(), 10u);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(cpi.records[i].policy_digest, api.records[i].policy_digest);
}

TEST(CpiAlpha, MatchesApiAlphaWhenOccupancyEqualsNu) {
    const FiniteMdp mdp({Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1)}, Vector::Constant(1, 0.7), 0.9,
                        1.0);
    const ValueFunction v_star = optimal_value(mdp, 1e-10).value;
    GreedyConfig g{0.1, NoiseScale::AbsoluteVmax, std::nullopt};
    AlgoConfig a = config(Scheme::CPIAlpha, 8, g), b = config(Scheme::APIAlpha, 8, g);
    const RunTrace ta = run_seeded(mdp, a, v_star, 4), tb = run_seeded(mdp, b, v_star, 4);
    ASSERT_EQ(ta.records.size(), tb.records.size());
    for (std::size_t i = 0; i < ta.records.size(); ++i) {
        EXPECT_EQ(ta.records[i].policy_digest, tb.records[i].policy_digest);
        EXPECT_EQ(ta.records[i].epsilon, tb.records[i].epsilon);
        EXPECT_EQ(ta.records[i].loss, tb.records[i].loss);
    }
}

TEST(Psdp, FirstGreedyIsAgainstReward) {
    const GarnetInstance g = generate({10, 3, 2, 1, 0.9, 5});
    const RunTrace t = run_seeded(g.mdp, config(Scheme::PSDPInf, 1), optimal_value(g.mdp, 1e-10).value, 0);
    PolicyStack expected(PolicyStack::Interpretation::FiniteHorizon);
    expected.push_front(bellman_optimal(g.mdp, ValueFunction(g.mdp.rewards())).policy);
    EXPECT_EQ(t.records[0].policy_digest, digest(expected));
}

TEST(Psdp, NoiselessDeterministicLossDecaysAndStackGrows) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const GarnetInstance g = generate({10, 3, 1, 1, 0.9, seed});
        const ValueFunction v_star = optimal_value(g.mdp, 1e-10).value;
        const RunTrace t = run_seeded(g.mdp, config(Scheme::PSDPInf, 40), v_star, 0);
        for (const auto& r : t.records) {
            const double envelope = std::pow(g.mdp.gamma(), r.k) * g.mdp.v_max();
            EXPECT_LE(r.loss, 2.0 * envelope + 1e-9);
            EXPECT_LE(*r.horizon_loss, envelope + 1e-9);
            // Looping never loses more than the truncated tail.
            EXPECT_LE(r.loss, *r.horizon_loss + envelope + 1e-9);
        }
        EXPECT_EQ(std::get<PolicyStack>(t.final_policy).size(), 40u);
    }
}

TEST(Psdp, LoopValueMatchesPeriodicEvaluation) {
    const GarnetInstance g = generate({9, 2, 3, 2, 0.95, 8});
    const ValueFunction v_star = optimal_value(g.mdp, 1e-10).value;
    AlgoConfig cfg = config(Scheme::PSDPInf, 15, noisy(g));
    const RunTrace t = run_seeded(g.mdp, cfg, v_star, 2);
    const auto& stack = std::get<PolicyStack>(t.final_policy);
    const ValueFunction loop = evaluate_periodic(g.mdp, stack);
    const double loss = expected_value(StateDistribution::uniform(9), ValueFunction(v_star.values - loop.values));
    EXPECT_NEAR(t.records.back().loss, loss, 1e-9);
}

TEST(Nspi, RingKeepsLengthM) {
    const GarnetInstance g = generate({10, 2, 2, 1, 0.9, 1});
    for (int m : {1, 3, 7}) {
        AlgoConfig cfg = config(Scheme::NSPI, 5, noisy(g));
        cfg.m = m;
        const RunTrace t = run_seeded(g.mdp, cfg, optimal_value(g.mdp, 1e-10).value, 3);
        EXPECT_EQ(std::get<PolicyStack>(t.final_policy).size(), static_cast<std::size_t>(m));
        EXPECT_EQ(t.records.size(), 5u);
    }
    AlgoConfig bad = config(Scheme::NSPI, 5);
    bad.m = 0;
    EXPECT_THROW(run_seeded(g.mdp, bad, optimal_value(g.mdp, 1e-10).value, 3), InvalidInput);
}

TEST(Nspi, AugmentedReplaysPsdp) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const GarnetInstance g = generate({4, 2, 2, 1, 0.9, seed});
        const int iters = 6;
        const FiniteMdp aug = augment_with_stop_action(g.mdp);
        Vector mu_mass = Vector::Constant(5, 0.25);
        mu_mass(4) = 0.0;
        AlgoConfig nspi = config(Scheme::NSPI, iters);
        nspi.m = iters;
        nspi.mu = StateDistribution(mu_mass);
        nspi.nu = StateDistribution(mu_mass);
        nspi.initial_policy = StationaryPolicy::constant(5, 3, 2);
        const RunTrace a = run_seeded(aug, nspi, optimal_value(aug, 1e-10).value, 0);
        const RunTrace p = run_seeded(g.mdp, config(Scheme::PSDPInf, iters), optimal_value(g.mdp, 1e-10).value, 0);
        // While a stop policy remains in the ring, the loop ends in the terminal state: finite-horizon value.
        // At k = m the ring holds exactly the PSDP stack and the loop is (sigma_k)^inf.
        for (int k = 0; k < iters; ++k) {
            EXPECT_EQ(a.records[k].epsilon, p.records[k].epsilon);
            const double expected = k + 1 < iters ? *p.records[k].horizon_loss : p.records[k].loss;
            EXPECT_NEAR(a.records[k].loss, expected, 1e-9) << "k=" << k + 1;
        }
    }
}

TEST(Traces, DeterministicAndWellFormed) {
    const GarnetInstance g = generate({12, 3, 2, 2, 0.99, 6});
    const ValueFunction v_star = optimal_value(g.mdp, 1e-8 * g.mdp.v_max()).value;
    for (Scheme s : {Scheme::API, Scheme::APIAlpha, Scheme::CPI, Scheme::CPIPlus, Scheme::CPIAlpha, Scheme::PSDPInf,
                     Scheme::NSPI}) {
        AlgoConfig cfg = config(s, 15, noisy(g));
        cfg.m = 4;
        const RunTrace a = run_seeded(g.mdp, cfg, v_star, 77), b = run_seeded(g.mdp, cfg, v_star, 77);
        EXPECT_EQ(a.records, b.records) << to_string(s);
        EXPECT_LE(a.records.size(), 15u);
        for (const auto& r : a.records) {
            EXPECT_GE(r.epsilon, 0.0);
            EXPECT_GE(r.epsilon_nu, 0.0);
            EXPECT_GE(r.loss, -1e-9);
        }
    }
}

TEST(Config, RejectsBadParameters) {
    const GarnetInstance g = generate({5, 2, 2, 1, 0.9, 0});
    const ValueFunction v_star = optimal_value(g.mdp, 1e-10).value;
    AlgoConfig cfg = config(Scheme::APIAlpha, 3);
    cfg.alpha = 0.0;
    EXPECT_THROW(run_seeded(g.mdp, cfg, v_star, 0), InvalidInput);
    cfg = config(Scheme::CPI, 3);
    cfg.rho_stop = 0.0;
    EXPECT_THROW(run_seeded(g.mdp, cfg, v_star, 0), InvalidInput);
    cfg = config(Scheme::API, 0);
    EXPECT_THROW(run_seeded(g.mdp, cfg, v_star, 0), InvalidInput);
    RandomStream rng(0);
    EXPECT_THROW(run_api(g.mdp, config(Scheme::PSDPInf, 2), rng, v_star), InvalidInput);
}

TEST(Augmentation, StopActionIsTerminal) {
    const GarnetInstance g = generate({3, 2, 2, 1, 0.9, 0});
    const FiniteMdp aug = augment_with_stop_action(g.mdp);
    EXPECT_EQ(aug.n_states(), 4);
    EXPECT_EQ(aug.n_actions(), 3);
    for (int s = 0; s < 4; ++s) EXPECT_EQ(aug.transition(2)(s, 3), 1.0);
    EXPECT_EQ(aug.rewards()(3), 0.0);
    EXPECT_EQ(aug.transition(0).topLeftCorner(3, 3), g.mdp.transition(0));
}
