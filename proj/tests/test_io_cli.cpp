#include "test_util.hpp"

#include "pibench/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <limits>
#include <sstream>

using namespace pibench;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

CliResult cli_run(std::vector<std::string> args) {
    args.insert(args.begin(), "pibench");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliResult r;
    r.code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

class CliFiles : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("pibench_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

} // namespace

TEST(Format, ShortestRoundTrip) {
    RandomStream rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double x = (rng.uniform01() - 0.5) * std::pow(10.0, static_cast<int>(rng.below(40)) - 20);
        EXPECT_EQ(io::parse_double(io::format_double(x)), x);
    }
    EXPECT_EQ(io::format_double(0.1), "0.1");
    EXPECT_EQ(io::format_double(2.0), "2");
    EXPECT_THROW(io::parse_double("1.5x"), InvalidInput);
    EXPECT_THROW(io::parse_double(""), InvalidInput);
    EXPECT_EQ(io::hex64(255), "00000000000000ff");
}

TEST(Json, MdpFeaturesPolicyRoundTrip) {
    const GarnetInstance g = generate({7, 3, 2, 3, 0.95, 11});
    const FiniteMdp mdp = io::mdp_from_json(io::Json::parse(io::to_json(g.mdp).dump()));
    EXPECT_EQ(mdp.gamma(), g.mdp.gamma());
    EXPECT_EQ(mdp.r_max(), g.mdp.r_max());
    EXPECT_EQ(mdp.rewards(), g.mdp.rewards());
    for (int a = 0; a < 3; ++a) EXPECT_EQ(mdp.transition(a), g.mdp.transition(a));
    EXPECT_EQ(io::features_from_json(io::to_json(g.features)).phi(), g.features.phi());

    RandomStream rng(2);
    const StationaryPolicy pi = pibench::testing::random_stochastic(7, 3, rng);
    EXPECT_EQ(io::policy_from_json(io::Json::parse(io::to_json(pi).dump())).probs(), pi.probs());
}

TEST(Json, StackRoundTripKeepsOrderAndInterpretation) {
    const auto a = StationaryPolicy::constant(4, 2, 0), b = StationaryPolicy::constant(4, 2, 1);
    for (auto kind : {PolicyStack::Interpretation::Periodic, PolicyStack::Interpretation::FiniteHorizon}) {
        const PolicyStack s(kind, {a, b, b});
        const PolicyStack back = io::stack_from_json(io::to_json(s));
        EXPECT_EQ(back.interpretation(), kind);
        ASSERT_EQ(back.policies().size(), 3u);
        EXPECT_EQ(back.policies()[0].probs(), a.probs());
        EXPECT_EQ(back.policies()[2].probs(), b.probs());
    }
    io::Json bad = io::to_json(PolicyStack(PolicyStack::Interpretation::Periodic, {a}));
    bad["interpretation"] = "cyclic";
    EXPECT_THROW(io::stack_from_json(bad), InvalidInput);
}

TEST(Json, MalformedModelsAreRejected) {
    io::Json j = io::to_json(generate({4, 2, 2, 2, 0.9, 1}).mdp);
    io::Json wrong_count = j;
    wrong_count["n_actions"] = 3;
    EXPECT_THROW(io::mdp_from_json(wrong_count), InvalidInput);
    io::Json not_stochastic = j;
    not_stochastic["transitions"][0][0][0] = 5.0;
    EXPECT_THROW(io::mdp_from_json(not_stochastic), InvalidInput);
    io::Json wrong_type = j;
    wrong_type["gamma"] = "high";
    EXPECT_THROW(io::mdp_from_json(wrong_type), InvalidInput);
}

TEST(Json, ReportRoundTripWithInfiniteEntries) {
    const GarnetInstance g = generate({6, 2, 2, 2, 0.9, 5});
    const auto uniform = StateDistribution::uniform(6);
    const auto opt = optimal_value(g.mdp, 1e-10);
    ConcentrabilityReport rep = aggregate_constants(g.mdp, opt.policy, uniform, uniform, {2, 5}, 1e-6);
    rep.C_pistar = Coefficient::infinity();
    rep.C_pistar_raw = std::numeric_limits<double>::infinity();
    rep.c.clamped[1] = Coefficient::infinity();
    rep.c.raw[1] = std::numeric_limits<double>::infinity();

    const io::Json j = io::to_json(rep);
    EXPECT_EQ(j.at("C_pistar"), "inf");
    const ConcentrabilityReport back = io::report_from_json(io::Json::parse(j.dump()));
    EXPECT_TRUE(back.C_pistar.is_infinite());
    EXPECT_TRUE(back.c.clamped[1].is_infinite());
    EXPECT_EQ(back.C2.size(), rep.C2.size());
    EXPECT_EQ(io::to_json(back), j);
}

TEST(TraceCsv, RoundTripsEveryColumn) {
    const GarnetInstance g = generate({8, 2, 2, 2, 0.9, 3});
    AlgoConfig cfg;
    cfg.scheme = Scheme::CPIPlus;
    cfg.rho_stop = 1e-3;
    cfg.max_iterations = 6;
    cfg.greedy = GreedyConfig{0.02, NoiseScale::AbsoluteVmax, std::nullopt};
    RandomStream rng(4);
    RunTrace trace = run(g.mdp, cfg, rng);
    ASSERT_FALSE(trace.records.empty());
    ASSERT_TRUE(trace.records.front().advantage.has_value());
    const auto back = io::parse_trace_csv(io::trace_csv(trace.records));
    ASSERT_EQ(back.size(), trace.records.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        IterationRecord expected = trace.records[i];
        expected.policy_digest = 0;
        expected.horizon_loss.reset();
        EXPECT_EQ(back[i], expected);
    }
    EXPECT_THROW(io::parse_trace_csv("k,loss\n1,2\n"), InvalidInput);
    EXPECT_THROW(io::parse_trace_csv(std::string(io::kTraceHeader) + "\n1,2,3\n"), InvalidInput);
}

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(cli_run({}).code, 1);
    EXPECT_EQ(cli_run({"teleport"}).code, 1);
    EXPECT_EQ(cli_run({"garnet", "--no-such-flag"}).code, 1);
    EXPECT_EQ(cli_run({"run"}).code, 1);
    EXPECT_EQ(cli_run({"garnet", "--states", "many"}).code, 1);
    EXPECT_EQ(cli_run({"--help"}).code, 0);
}

TEST_F(CliFiles, MissingOrInvalidInputsExitOne) {
    const CliResult r = cli_run({"run", "--mdp", path("absent.json")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("error"), std::string::npos);
    EXPECT_EQ(cli_run({"garnet", "--states", "5", "--branching", "9", "--mdp-out", path("m.json")}).code, 1);
    ASSERT_EQ(cli_run({"garnet", "--states", "5", "--features", "1", "--mdp-out", path("m.json"), "--features-out",
                       path("f.json")})
                  .code,
              0);
    EXPECT_EQ(cli_run({"run", "--mdp", path("m.json"), "--scheme", "value-iteration", "--csv", path("t.csv")}).code,
              1);
    EXPECT_EQ(cli_run({"run", "--mdp", path("m.json"), "--noise-mode", "relative", "--csv", path("t.csv")}).code, 1);
    EXPECT_EQ(cli_run({"stats", "--dir", path("nowhere")}).code, 1);
}

TEST_F(CliFiles, RunMatchesLibraryTrace) {
    ASSERT_EQ(cli_run({"garnet", "--states", "9", "--actions", "3", "--branching", "2", "--features", "3", "--seed",
                       "8", "--mdp-out", path("m.json"), "--features-out", path("f.json")})
                  .code,
              0);
    const CliResult r = cli_run({"run", "--mdp", path("m.json"), "--features", path("f.json"), "--scheme", "nspi",
                                 "--m", "4", "--iters", "12", "--noise", "0.05", "--seed", "21", "--csv",
                                 path("t.csv"), "--json", path("t.json")});
    ASSERT_EQ(r.code, 0) << r.err;

    const GarnetInstance g = generate({9, 3, 2, 3, 0.99, 8});
    AlgoConfig cfg;
    cfg.scheme = Scheme::NSPI;
    cfg.m = 4;
    cfg.max_iterations = 12;
    cfg.greedy = GreedyConfig{0.05, NoiseScale::AbsoluteVmax, g.features};
    RandomStream rng(21);
    const RunTrace trace = run(g.mdp, cfg, rng);
    EXPECT_EQ(io::read_text(path("t.csv")), io::trace_csv(trace.records));
    const io::Json j = io::read_json(path("t.json"));
    EXPECT_EQ(j.at("records").size(), 12u);
    EXPECT_EQ(j.at("records")[11].at("policy_digest"), io::hex64(trace.records[11].policy_digest));
    EXPECT_EQ(j.at("final_policy").at("interpretation"), "periodic");
}

TEST_F(CliFiles, ConfigFileOverridesFlags) {
    ASSERT_EQ(cli_run({"garnet", "--states", "6", "--features", "2", "--mdp-out", path("m.json"), "--features-out",
                       path("f.json")})
                  .code,
              0);
    io::write_json(path("cfg.json"), {{"iters", 3}, {"scheme", "psdp"}, {"noise", 0.0}});
    ASSERT_EQ(cli_run({"run", "--mdp", path("m.json"), "--iters", "40", "--csv", path("t.csv"), "--config",
                       path("cfg.json")})
                  .code,
              0);
    EXPECT_EQ(io::parse_trace_csv(io::read_text(path("t.csv"))).size(), 3u);
    io::write_json(path("bad.json"), {{"iterations", 3}});
    EXPECT_EQ(cli_run({"run", "--mdp", path("m.json"), "--csv", path("t.csv"), "--config", path("bad.json")}).code, 1);
}

TEST_F(CliFiles, GarnetRunConcBoundsChain) {
    ASSERT_EQ(cli_run({"garnet", "--states", "8", "--actions", "2", "--branching", "3", "--features", "2", "--gamma",
                       "0.9", "--seed", "5", "--mdp-out", path("m.json"), "--features-out", path("f.json")})
                  .code,
              0);
    const CliResult conc = cli_run({"conc", "--mdp", path("m.json"), "--m", "2", "3", "--out", path("r.json")});
    ASSERT_EQ(conc.code, 0) << conc.out << conc.err;
    EXPECT_EQ(conc.out.rfind("relation,m,lhs,rhs,holds\n", 0), 0u);
    EXPECT_EQ(conc.out.find(",no\n"), std::string::npos);
    const ConcentrabilityReport rep = io::report_from_json(io::read_json(path("r.json")));
    EXPECT_EQ(rep.m_values, (std::vector<int>{2, 3}));

    struct Case {
        std::string scheme, m;
    };
    for (const Case& c : {Case{"api", "1"}, Case{"api-alpha", "1"}, Case{"cpi-plus", "1"}, Case{"psdp", "1"},
                          Case{"nspi", "3"}}) {
        ASSERT_EQ(cli_run({"run", "--mdp", path("m.json"), "--features", path("f.json"), "--scheme", c.scheme, "--m",
                           c.m, "--rho", "0.01", "--iters", "15", "--noise", "0.05", "--csv", path("t.csv")})
                      .code,
                  0);
        const CliResult b = cli_run({"bounds", "--trace", path("t.csv"), "--report", path("r.json"), "--scheme",
                                     c.scheme, "--m", c.m, "--out", path("b.csv")});
        EXPECT_EQ(b.code, 0) << c.scheme << ": " << b.out << b.err;
        EXPECT_NE(b.out.find("PASS"), std::string::npos);
        const std::string csv = io::read_text(path("b.csv"));
        EXPECT_EQ(csv.rfind("k,loss,bound,slack\n", 0), 0u);
    }

    // A loss above its bound is reported with exit code 2.
    auto records = io::parse_trace_csv(io::read_text(path("t.csv")));
    records.back().loss = 10.0 * rep.v_max;
    io::write_text(path("bad.csv"), io::trace_csv(records));
    const CliResult bad = cli_run({"bounds", "--trace", path("bad.csv"), "--report", path("r.json"), "--scheme",
                                   "nspi", "--m", "3", "--out", path("b.csv")});
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}

TEST_F(CliFiles, GridThenStatsRecomputesIdenticalFiles) {
    const CliResult g = cli_run({"grid", "--n-states", "10", "--n-actions", "2", "--branching", "1", "2", "--n-mdps",
                                 "2", "--n-runs", "2", "--n-iterations", "5", "--workers", "2", "--out", path("g")});
    ASSERT_EQ(g.code, 0) << g.err;
    EXPECT_NE(g.out.find("0 failed runs"), std::string::npos);
    const fs::path stats = dir_ / "g" / "S10_A2_B2" / "psdp" / "stats.csv";
    const std::string before = io::read_text(stats);
    fs::remove(stats);
    const CliResult s = cli_run({"stats", "--dir", path("g")});
    ASSERT_EQ(s.code, 0) << s.err;
    EXPECT_EQ(s.out, "recomputed 16 stats files\n");
    EXPECT_EQ(io::read_text(stats), before);
}

TEST_F(CliFiles, GridCheckPrintsThreeVerdicts) {
    const CliResult g = cli_run({"grid", "--n-states", "10", "--n-actions", "2", "--branching", "1", "2", "--n-mdps",
                                 "1", "--n-runs", "1", "--n-iterations", "4", "--out", path("g"), "--check"});
    ASSERT_EQ(g.code, 0) << g.err;
    EXPECT_NE(g.out.find("api worse than psdp: "), std::string::npos);
    EXPECT_NE(g.out.find("nspi monotone in m: "), std::string::npos);
    EXPECT_NE(g.out.find("spread by branching: b=1:"), std::string::npos);
}
