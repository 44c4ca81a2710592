#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "survband/errors.hpp"
#include "survband/hazardnet.hpp"
#include "survband/simgen.hpp"

using namespace survband;

namespace {

struct Fixture {
    Dataset ds;
    SplitPlan plan;
};

Fixture setting1(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    SimulatedData sim = generate(make_setting(1), n, rng);
    Rng srng(seed + 1);
    SplitPlan plan = split(sim.data, 0.8, srng);
    const auto features = all_rows(sim.data.dim());
    return {standardize(sim.data, features, plan.train), plan};
}

NetConfig quick_config() {
    NetConfig c;
    c.learning_rate = 0.01;
    c.patience = 5;
    c.max_epochs = 60;
    c.seed = 17;
    return c;
}

}  // namespace

TEST(Train, ValidationLossImproves) {
    const Fixture f = setting1(1000, 1);
    NetConfig c = quick_config();
    c.hidden_layers = 2;
    c.layer_width = 32;
    c.n_controls = 8;
    const TrainResult r = train(f.ds, f.plan, c);
    const auto& h = r.report.valid_loss_history;
    ASSERT_EQ(h.size(), r.report.epochs_run);
    EXPECT_LE(h[r.report.best_epoch - 1], r.report.initial_valid_loss);
    EXPECT_EQ(*std::min_element(h.begin(), h.end()), h[r.report.best_epoch - 1]);
    EXPECT_EQ(r.report.normalization, "batch");
}

TEST(Train, Deterministic) {
    const Fixture f = setting1(300, 2);
    const NetConfig c = quick_config();
    const TrainResult a = train(f.ds, f.plan, c);
    const TrainResult b = train(f.ds, f.plan, c);
    EXPECT_TRUE(a.net == b.net);
    EXPECT_EQ(a.report.valid_loss_history, b.report.valid_loss_history);
    EXPECT_EQ(a.report.train_loss_history, b.report.train_loss_history);
    EXPECT_EQ(a.report.best_epoch, b.report.best_epoch);
}

TEST(Train, NeverTouchesValidationRows) {
    const Fixture f = setting1(400, 3);
    const TrainResult r = train(f.ds, f.plan, quick_config());
    const std::set<std::size_t> valid(f.plan.valid.begin(), f.plan.valid.end());
    ASSERT_FALSE(r.report.gradient_rows.empty());
    for (auto row : r.report.gradient_rows) EXPECT_EQ(valid.count(row), 0u);
}

TEST(Train, StopsAtPatienceOrCap) {
    const Fixture f = setting1(300, 4);
    NetConfig c = quick_config();
    c.max_epochs = 3;
    c.patience = 100;
    const TrainResult r = train(f.ds, f.plan, c);
    EXPECT_EQ(r.report.epochs_run, 3u);
    EXPECT_FALSE(r.report.stopped_early);
    c.max_epochs = 500;
    c.patience = 2;
    const TrainResult s = train(f.ds, f.plan, c);
    EXPECT_TRUE(s.report.stopped_early);
    EXPECT_EQ(s.report.epochs_run, s.report.best_epoch + 3);
}

TEST(Train, ValidationWithoutEventsIsConfigError) {
    std::vector<SurvRecord> recs;
    for (int i = 0; i < 10; ++i) recs.push_back({{static_cast<double>(i)}, 1.0 + i, i < 8});
    const Dataset ds({"x"}, recs);
    const std::vector<std::size_t> train_rows{0, 1, 2, 3, 4, 5, 6, 7}, valid_rows{8, 9};
    EXPECT_THROW(train(ds, train_rows, valid_rows, quick_config()), ConfigError);
}

TEST(Train, BootstrapMultisetAccepted) {
    const Fixture f = setting1(300, 5);
    Rng rng(9);
    const auto resample = bootstrap_resample(f.plan.train, rng);
    const TrainResult r = train(f.ds, resample, f.plan.valid, quick_config());
    EXPECT_GE(r.report.epochs_run, 1u);
    const std::set<std::size_t> in_sample(resample.begin(), resample.end());
    for (auto row : r.report.gradient_rows) EXPECT_EQ(in_sample.count(row), 1u);
}

TEST(Train, WithoutBatchNormReportsIt) {
    const Fixture f = setting1(300, 6);
    NetConfig c = quick_config();
    c.batch_norm = false;
    const TrainResult r = train(f.ds, f.plan, c);
    EXPECT_EQ(r.report.normalization, "none");
    EXPECT_FALSE(r.net.batch_norm());
}
