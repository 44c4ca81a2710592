#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "survband/errors.hpp"
#include "survband/hazardnet.hpp"
#include "survband/survest.hpp"

using namespace survband;

namespace {

Dataset from_obs(const std::vector<oracle::Obs>& obs) {
    std::vector<SurvRecord> recs;
    for (std::size_t i = 0; i < obs.size(); ++i)
        recs.push_back({{static_cast<double>(i) * 0.1 - 0.2}, obs[i].time, obs[i].event});
    return Dataset({"x"}, recs);
}

}  // namespace

TEST(Breslow, HandNelsonAalen) {
    const Dataset ds = from_obs({{1, true}, {2, true}, {3, true}});
    const BreslowBaseline b = breslow_fit(ds, *constant_g(0.0));
    ASSERT_EQ(b.increments.size(), 3u);
    EXPECT_NEAR(b.increments[0], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(b.increments[1], 1.0 / 2.0, 1e-15);
    EXPECT_NEAR(b.increments[2], 1.0, 1e-15);
    const auto H = b.cumulative();
    EXPECT_NEAR(H[1], 5.0 / 6.0, 1e-15);
    EXPECT_NEAR(H[2], 11.0 / 6.0, 1e-15);
}

TEST(Breslow, TiesShareDenominator) {
    const Dataset ds = from_obs({{1, true}, {1, true}, {1, false}, {2, true}});
    const BreslowBaseline b = breslow_fit(ds, *constant_g(0.0));
    ASSERT_EQ(b.event_times, (std::vector<double>{1, 2}));
    EXPECT_NEAR(b.increments[0], 2.0 / 4.0, 1e-15);
    EXPECT_NEAR(b.increments[1], 1.0, 1e-15);
}

TEST(Breslow, MatchesNelsonAalenOnRandomData) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> t(1, 6);
    std::bernoulli_distribution d(0.6);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<oracle::Obs> obs(2 + trial % 15);
        for (auto& o : obs) o = {static_cast<double>(t(rng)), d(rng)};
        obs[0].event = true;
        const BreslowBaseline b = breslow_fit(from_obs(obs), *constant_g(0.0));
        const auto na = oracle::nelson_aalen(obs);
        ASSERT_EQ(b.event_times.size(), na.size());
        std::size_t k = 0;
        for (const auto& [time, inc] : na) {
            EXPECT_EQ(b.event_times[k], time);
            EXPECT_NEAR(b.increments[k], inc, 1e-12);
            ++k;
        }
    }
}

TEST(Breslow, ConstantShiftCancelsInCumulativeHazard) {
    const Dataset ds = from_obs({{1, true}, {2, false}, {2.5, true}, {4, true}});
    const TimeGrid grid({1.0, 2.0, 3.0, 4.0});
    const std::vector<double> x{0.3};
    const BreslowBaseline b0 = breslow_fit(ds, *constant_g(0.0));
    const BreslowBaseline b1 = breslow_fit(ds, *constant_g(1.3));
    for (std::size_t k = 0; k < b0.increments.size(); ++k)
        EXPECT_NEAR(b1.increments[k], b0.increments[k] * std::exp(-1.3), 1e-15);
    const SurvCurve s0 = survival_curve(b0, *constant_g(0.0), x, grid);
    const SurvCurve s1 = survival_curve(b1, *constant_g(1.3), x, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_NEAR(s0[k], s1[k], 1e-14);
}

TEST(Breslow, MultisetRowsCountTwice) {
    const Dataset ds = from_obs({{1, true}, {2, true}});
    const std::vector<std::size_t> rows{0, 1, 1};
    const BreslowBaseline b = breslow_fit(ds, rows, *constant_g(0.0));
    EXPECT_NEAR(b.increments[0], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(b.increments[1], 2.0 / 2.0, 1e-15);
}

TEST(Breslow, NoEventsIsContractError) {
    const Dataset ds = from_obs({{1, true}, {2, false}});
    const std::vector<std::size_t> rows{1};
    EXPECT_THROW(breslow_fit(ds, rows, *constant_g(0.0)), ContractError);
}

TEST(Breslow, ClampsExtremeRisk) {
    const Dataset ds = from_obs({{1, true}, {2, true}});
    const BreslowBaseline b = breslow_fit(ds, *constant_g(1e6));
    EXPECT_TRUE(std::isfinite(b.increments[0]));
    EXPECT_NEAR(b.increments[1], std::exp(-kMaxAbsG), 1e-25);
}

TEST(SurvivalCurve, HandValues) {
    const Dataset ds = from_obs({{1, true}, {2, true}, {3, true}});
    const BreslowBaseline b = breslow_fit(ds, *constant_g(0.0));
    const SurvCurve s = survival_curve(b, *constant_g(0.0), std::vector<double>{42.0}, TimeGrid({0.5, 1, 2, 3}));
    EXPECT_EQ(s[0], 1.0);
    EXPECT_NEAR(s[1], std::exp(-1.0 / 3.0), 1e-15);
    EXPECT_NEAR(s[2], std::exp(-5.0 / 6.0), 1e-15);
    EXPECT_NEAR(s[3], std::exp(-11.0 / 6.0), 1e-15);
}

TEST(SurvivalCurve, BeyondLastEventPolicy) {
    const Dataset ds = from_obs({{1, true}, {2, true}, {5, false}});
    const BreslowBaseline b = breslow_fit(ds, *constant_g(0.0));
    const TimeGrid grid({1.0, 2.0, 4.0});
    const std::vector<double> x{0.0};
    EXPECT_THROW(survival_curve(b, *constant_g(0.0), x, grid), ContractError);
    const SurvCurve held = survival_curve(b, *constant_g(0.0), x, grid, BeyondLastEvent::hold);
    EXPECT_EQ(held[2], held[1]);
}

TEST(SurvivalCurve, TimeVaryingRiskUsesEventTimes) {
    const Dataset ds = from_obs({{1, true}, {2, true}, {3, true}});
    const auto g = callable_g([](double t, std::span<const double>) { return 0.1 * t; });
    const BreslowBaseline b = breslow_fit(ds, *g);
    const SurvCurve s = survival_curve(b, *g, std::vector<double>{0.0}, TimeGrid({3.0}));
    double H = 0;
    for (std::size_t e = 0; e < 3; ++e) H += b.increments[e] * std::exp(0.1 * b.event_times[e]);
    EXPECT_NEAR(s[0], std::exp(-H), 1e-15);
    EXPECT_NEAR(b.increments[0], 1.0 / (3 * std::exp(0.1)), 1e-15);
}

TEST(SurvivalCurve, InvariantToRecordOrder) {
    std::vector<oracle::Obs> obs{{3, true}, {1, false}, {2, true}, {2, true}, {4, true}};
    std::vector<SurvRecord> a, b;
    for (std::size_t i = 0; i < obs.size(); ++i) a.push_back({{0.1 * i}, obs[i].time, obs[i].event});
    b.assign(a.rbegin(), a.rend());
    const auto g = callable_g([](double t, std::span<const double> x) { return x[0] - 0.05 * t; });
    const TimeGrid grid({1.5, 2.5, 3.5});
    const std::vector<double> x{0.2};
    const SurvCurve sa = survival_curve(breslow_fit(Dataset({"x"}, a), *g), *g, x, grid);
    const SurvCurve sb = survival_curve(breslow_fit(Dataset({"x"}, b), *g), *g, x, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_NEAR(sa[k], sb[k], 1e-15);
}

TEST(SurvivalCurve, BatchedMatchesSingle) {
    const Dataset ds = from_obs({{1, true}, {2, false}, {3, true}, {3.5, true}});
    const auto g = callable_g([](double t, std::span<const double> x) { return 0.5 * x[0] * t; });
    const BreslowBaseline b = breslow_fit(ds, *g);
    Eigen::MatrixXd xs(1, 3);
    xs << -1.0, 0.0, 2.0;
    const TimeGrid grid({0.5, 1.0, 3.0, 3.5});
    const auto curves = survival_curves(b, *g, xs, grid);
    for (int i = 0; i < 3; ++i) {
        const SurvCurve one = survival_curve(b, *g, std::vector<double>{xs(0, i)}, grid);
        for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_EQ(curves[i][k], one[k]);
    }
}

TEST(Ensemble, MeanOfMembers) {
    const auto e = ensemble_g({constant_g(1.0), constant_g(2.0), constant_g(3.0)});
    EXPECT_EQ((*e)(4.0, std::vector<double>{0.0}), 2.0);
    EXPECT_EQ(e->ensemble_size(), 3u);
    EXPECT_THROW(ensemble_g({}), ContractError);
}

TEST(Ensemble, SingleMemberIsIdentityAndMeanIsBounded) {
    Rng rng(4);
    NetConfig c;
    c.layer_width = 8;
    std::vector<GFunctionPtr> members;
    for (int m = 0; m < 4; ++m) members.push_back(net_g(HazardNet::init(c, 3, rng)));
    const auto single = ensemble_g({members[0]});
    const auto all = ensemble_g(members);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int k = 0; k < 50; ++k) {
        const std::vector<double> x{u(rng), u(rng)};
        const double t = u(rng) + 3;
        EXPECT_EQ((*single)(t, x), (*members[0])(t, x));
        double lo = 1e300, hi = -1e300;
        for (const auto& m : members) {
            lo = std::min(lo, (*m)(t, x));
            hi = std::max(hi, (*m)(t, x));
        }
        const double v = (*all)(t, x);
        EXPECT_GE(v, lo - 1e-12);
        EXPECT_LE(v, hi + 1e-12);
    }
}

TEST(NetG, AppliesTimeStandardization) {
    Rng rng(8);
    NetConfig c;
    c.layer_width = 4;
    HazardNet net = HazardNet::init(c, 2, rng);
    Standardization s;
    s.features = {{0.0, 1.0}};
    s.time = {5.0, 2.0};
    net.set_scaling(s);
    const auto g = net_g(net);
    const std::vector<double> x{0.4};
    EXPECT_EQ((*g)(9.0, x), net.forward(2.0, x, Mode::infer));
    EXPECT_EQ((*g)(9.0, x), net.g(9.0, x));
}
