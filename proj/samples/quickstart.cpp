// Generates a small Garnet MDP, runs API and PSDP_inf with noisy projected
// greedy steps, and prints the final losses next to their ExactCoeff bounds.
#include "pibench/pibench.hpp"

#include <cstdio>

int main() {
    using namespace pibench;
    const GarnetInstance g = generate({20, 2, 2, 2, 0.99, 7});
    const OptimalSolution opt = optimal_value(g.mdp, 1e-8 * g.mdp.v_max());
    const auto uniform = StateDistribution::uniform(g.mdp.n_states());
    const ConcentrabilityReport rep = aggregate_constants(g.mdp, opt.policy, uniform, uniform, {1}, 1e-6 * g.mdp.v_max());

    for (Scheme scheme : {Scheme::API, Scheme::PSDPInf}) {
        AlgoConfig cfg;
        cfg.scheme = scheme;
        cfg.max_iterations = 30;
        cfg.greedy = GreedyConfig{0.1, NoiseScale::AbsoluteVmax, g.features};
        RandomStream rng = RandomStream::derive(7, {static_cast<std::uint64_t>(scheme)});
        const RunTrace trace = run(g.mdp, cfg, rng, opt.value);

        std::vector<double> eps;
        for (const auto& r : trace.records) eps.push_back(r.epsilon);
        const int k = static_cast<int>(eps.size());
        const double bound = scheme == Scheme::API
                                 ? bound_nspi(rep, eps, k, 1, g.mdp.v_max(), NspiBound::ExactCoeff)
                                 : bound_psdp(rep, eps, k, g.mdp.v_max(), PsdpBound::ExactCoeff);
        std::printf("%-5s k=%d loss=%.4f bound=%.4f\n", to_string(scheme).c_str(), k, trace.records.back().loss, bound);
        if (trace.records.back().loss > bound + 1e-8 * g.mdp.v_max()) return 1;
    }
    std::printf("C_pi*=%.4f  C^(1,0)=%.4f  C^(2,1,0)=%.4f\n", rep.C_pistar.as_double(), rep.C1k(0).upper(),
                rep.C2mk(1, 0).upper());
    return 0;
}
