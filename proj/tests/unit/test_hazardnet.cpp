#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "survband/errors.hpp"
#include "survband/hazardnet.hpp"
#include "survband/simgen.hpp"

using namespace survband;

namespace {

NetConfig small_config(std::size_t layers, std::size_t width, bool bn) {
    NetConfig c;
    c.hidden_layers = layers;
    c.layer_width = width;
    c.dropout_rate = 0.0;
    c.batch_norm = bn;
    return c;
}

// Random case-control batch with `events` groups of 1 + controls columns.
CaseControlBatch random_batch(std::size_t input_dim, std::size_t events, std::size_t controls, Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    CaseControlBatch b;
    const auto cols = static_cast<Eigen::Index>(events * (controls + 1));
    b.inputs.resize(static_cast<Eigen::Index>(input_dim), cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < b.inputs.rows(); ++r) b.inputs(r, c) = z(rng);
    for (std::size_t e = 0; e < events; ++e) b.offsets.push_back((e + 1) * (controls + 1));
    b.rows.assign(static_cast<std::size_t>(cols), 0);
    return b;
}

// Perturb BN affine parameters and running stats away from their init values
// so the check exercises them.
HazardNet randomized(HazardNet net, Rng& rng) {
    std::normal_distribution<double> z(0.0, 0.3);
    Eigen::VectorXd p = net.parameters();
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) += z(rng);
    net.set_parameters(p);
    std::vector<HiddenLayer> hidden = net.hidden();
    if (net.batch_norm())
        for (auto& h : hidden) {
            for (Eigen::Index i = 0; i < h.running_mean.size(); ++i) {
                h.running_mean(i) = z(rng);
                h.running_var(i) = 0.5 + std::abs(z(rng));
            }
        }
    return HazardNet(hidden, net.output(), net.dropout_rate(), net.batch_norm());
}

double max_relative_gradient_error(const HazardNet& net, const CaseControlBatch& batch, Mode mode) {
    const LossGradient lg = ccl_loss_gradient(net, batch, mode);
    const Eigen::VectorXd p0 = net.parameters();
    std::vector<double> p(p0.data(), p0.data() + p0.size());
    auto f = [&](const std::vector<double>& q) {
        HazardNet copy = net;
        copy.set_parameters(Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size())));
        return ccl_loss(copy, batch, mode);
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double num = oracle::central_difference(f, p, i, 1e-5);
        const double ana = lg.gradient(static_cast<Eigen::Index>(i));
        const double denom = std::max({std::abs(num), std::abs(ana), 1e-6});
        worst = std::max(worst, std::abs(num - ana) / denom);
    }
    return worst;
}

}  // namespace

TEST(NetConfig, ParseAndRoundTrip) {
    std::istringstream in("# comment\nlayer_width = 16\nlearning_rate=0.01 # trailing\nbatch_norm=false\n\n");
    const NetConfig c = parse_net_config(in);
    EXPECT_EQ(c.layer_width, 16u);
    EXPECT_EQ(c.learning_rate, 0.01);
    EXPECT_FALSE(c.batch_norm);
    EXPECT_EQ(c.hidden_layers, NetConfig{}.hidden_layers);
    std::stringstream buf;
    write_net_config(buf, c);
    const NetConfig d = parse_net_config(buf);
    EXPECT_EQ(d.layer_width, c.layer_width);
    EXPECT_EQ(d.learning_rate, c.learning_rate);
    EXPECT_EQ(d.batch_norm, c.batch_norm);
}

TEST(NetConfig, Errors) {
    std::istringstream unknown("widht=3\n");
    EXPECT_THROW(parse_net_config(unknown), ConfigError);
    std::istringstream zero_layers("hidden_layers=0\n");
    EXPECT_THROW(parse_net_config(zero_layers), ConfigError);
    std::istringstream bad_dropout("dropout_rate=1\n");
    EXPECT_THROW(parse_net_config(bad_dropout), ConfigError);
    std::istringstream junk("patience=3x\n");
    EXPECT_THROW(parse_net_config(junk), ConfigError);
}

TEST(HazardNetInit, KaimingVariance) {
    Rng rng(7);
    NetConfig c = small_config(1, 64, true);
    const HazardNet net = HazardNet::init(c, 4, rng);
    const auto& w = net.hidden()[0].weight;
    const double mean = w.mean();
    const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size());
    EXPECT_NEAR(var, 0.5, 0.1);
    EXPECT_TRUE(net.hidden()[0].bias.isZero());
}

TEST(HazardNetInit, DeterministicAndValidated) {
    Rng a(1), b(1);
    const NetConfig c = small_config(2, 8, true);
    EXPECT_TRUE(HazardNet::init(c, 4, a) == HazardNet::init(c, 4, b));
    Rng r(1);
    EXPECT_THROW(HazardNet::init(small_config(0, 8, true), 4, r), ConfigError);
}

TEST(HazardNetForward, ZeroWeightsGiveOutputBias) {
    Rng rng(1);
    HazardNet net = HazardNet::init(small_config(2, 5, true), 3, rng);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.parameter_count()));
    p(p.size() - 1) = 0.37;
    net.set_parameters(p);
    EXPECT_EQ(net.forward(0.4, std::vector<double>{1, -2}, Mode::infer), 0.37);
}

TEST(HazardNetForward, InferIsDeterministic) {
    Rng rng(2);
    NetConfig c = small_config(2, 8, true);
    c.dropout_rate = 0.5;
    const HazardNet net = HazardNet::init(c, 4, rng);
    const std::vector<double> x{0.1, 0.2, 0.3};
    EXPECT_EQ(net.forward(1.0, x, Mode::infer), net.forward(1.0, x, Mode::infer));
    EXPECT_THROW(net.forward(1.0, std::vector<double>{1.0}, Mode::infer), ContractError);
}

TEST(HazardNetForward, LinearPredictorThroughRectifierPair) {
    // relu(b.x) - relu(-b.x) = b.x, with the time weight 0.
    const Eigen::RowVector3d beta(0.44, 0.66, 0.88);
    HiddenLayer h;
    h.weight = Eigen::MatrixXd::Zero(2, 4);
    h.weight.block(0, 0, 1, 3) = beta;
    h.weight.block(1, 0, 1, 3) = -beta;
    h.bias = Eigen::VectorXd::Zero(2);
    OutputLayer out;
    out.weight = Eigen::RowVector2d(1.0, -1.0);
    const HazardNet net({h}, out, 0.0, false);
    EXPECT_NEAR(net.forward(5.0, std::vector<double>{1, 1, 1}, Mode::infer), 1.98, 1e-15);
}

TEST(HazardNetForward, BatchedMatchesSingle) {
    Rng rng(3);
    const HazardNet net = randomized(HazardNet::init(small_config(2, 6, true), 3, rng), rng);
    Eigen::MatrixXd in = Eigen::MatrixXd::Random(3, 5);
    const Eigen::RowVectorXd batched = net.forward(in, Mode::infer);
    for (Eigen::Index c = 0; c < 5; ++c) {
        const std::vector<double> x{in(0, c), in(1, c)};
        EXPECT_NEAR(batched(c), net.forward(in(2, c), x, Mode::infer), 1e-14);
    }
}

TEST(HazardNetForward, DropoutScalesKeptUnits) {
    Rng rng(4);
    NetConfig c = small_config(1, 200, false);
    c.dropout_rate = 0.5;
    const HazardNet net = HazardNet::init(c, 2, rng);
    Eigen::MatrixXd in = Eigen::MatrixXd::Constant(2, 4000, 0.7);
    ForwardCache cache;
    net.forward(in, Mode::train, &rng, &cache);
    const auto& mask = cache.layers[0].mask;
    EXPECT_NEAR(mask.mean(), 1.0, 0.01);
    for (Eigen::Index i = 0; i < 50; ++i) EXPECT_TRUE(mask(i) == 0.0 || mask(i) == 2.0);
    EXPECT_THROW(net.forward(in, Mode::train), ContractError);
}

TEST(CaseControlLoss, ZeroRiskOneControlIsLogTwo) {
    const std::vector<double> out(6, 0.0);
    const std::vector<std::size_t> offsets{0, 2, 4, 6};
    EXPECT_NEAR(case_control_loss(out, offsets), std::log(2.0), 1e-15);
}

TEST(CaseControlLoss, PerfectDiscriminationTendsToZero) {
    const std::vector<std::size_t> offsets{0, 3};
    EXPECT_LT(case_control_loss(std::vector<double>{50.0, 0.0, 0.0}, offsets), 1e-20);
    EXPECT_NEAR(case_control_loss(std::vector<double>{800.0, 0.0, 0.0}, offsets), 0.0, 1e-300);
    EXPECT_NEAR(case_control_loss(std::vector<double>{-800.0, 0.0, 0.0}, offsets), 800.0 + std::log(2.0), 1e-9);
}

TEST(CaseControlLoss, MatchesBruteForce) {
    Rng rng(9);
    std::normal_distribution<double> z(0.0, 1.5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<double>> groups;
        std::vector<double> flat;
        std::vector<std::size_t> offsets{0};
        for (int e = 0; e < 7; ++e) {
            std::vector<double> g(1 + static_cast<std::size_t>(trial % 4));
            for (auto& v : g) v = z(rng);
            flat.insert(flat.end(), g.begin(), g.end());
            offsets.push_back(flat.size());
            groups.push_back(g);
        }
        EXPECT_NEAR(case_control_loss(flat, offsets), oracle::naive_ccl(groups), 1e-10);
    }
}

TEST(CaseControlLoss, OutputGradientMatchesFiniteDifference) {
    const std::vector<double> out{0.3, -0.2, 1.1, 0.0, 0.5, -1.0};
    const std::vector<std::size_t> offsets{0, 3, 6};
    Eigen::RowVectorXd d;
    case_control_loss(out, offsets, &d);
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto f = [&](const std::vector<double>& v) { return case_control_loss(v, offsets); };
        EXPECT_NEAR(d(static_cast<Eigen::Index>(i)), oracle::central_difference(f, out, i, 1e-6), 1e-8);
    }
}

TEST(CaseControlLoss, ShiftInvariance) {
    Rng rng(10);
    const HazardNet net = randomized(HazardNet::init(small_config(2, 8, true), 4, rng), rng);
    const CaseControlBatch b = random_batch(4, 12, 5, rng);
    HazardNet shifted = net;
    Eigen::VectorXd p = shifted.parameters();
    p(p.size() - 1) += 3.7;
    shifted.set_parameters(p);
    EXPECT_LT(std::abs(ccl_loss(net, b, Mode::infer) - ccl_loss(shifted, b, Mode::infer)), 1e-10);
}

TEST(Backward, FiniteDifferenceFrozenNormalization) {
    Rng rng(21);
    for (std::size_t layers : {1u, 2u, 3u}) {
        for (bool bn : {true, false}) {
            const HazardNet net = randomized(HazardNet::init(small_config(layers, 7, bn), 4, rng), rng);
            const CaseControlBatch b = random_batch(4, 10, 3, rng);
            EXPECT_LT(max_relative_gradient_error(net, b, Mode::infer), 1e-4) << layers << " layers, bn " << bn;
        }
    }
}

TEST(Backward, FiniteDifferenceBatchStatistics) {
    Rng rng(22);
    for (std::size_t layers : {1u, 2u}) {
        const HazardNet net = randomized(HazardNet::init(small_config(layers, 6, true), 3, rng), rng);
        const CaseControlBatch b = random_batch(3, 8, 4, rng);
        EXPECT_LT(max_relative_gradient_error(net, b, Mode::train), 1e-4) << layers << " layers";
    }
}

TEST(Backward, SymmetricBatchHasZeroOutputBiasGradient) {
    Rng rng(23);
    const HazardNet net = HazardNet::init(small_config(2, 5, false), 3, rng);
    CaseControlBatch b;
    b.inputs = Eigen::MatrixXd::Constant(3, 6, 0.25);
    b.offsets = {0, 3, 6};
    const LossGradient lg = ccl_loss_gradient(net, b, Mode::infer);
    EXPECT_NEAR(lg.loss, std::log(3.0), 1e-14);
    EXPECT_NEAR(lg.gradient(lg.gradient.size() - 1), 0.0, 1e-15);
}

TEST(Backward, DeadRectifierGetsZeroGradient) {
    Rng rng(24);
    HazardNet base = HazardNet::init(small_config(1, 4, false), 3, rng);
    std::vector<HiddenLayer> hidden = base.hidden();
    hidden[0].weight.row(2).setZero();
    hidden[0].bias(2) = -1.0;  // unit 2 never fires
    const HazardNet net(hidden, base.output(), 0.0, false);
    const CaseControlBatch b = random_batch(3, 6, 3, rng);
    const LossGradient lg = ccl_loss_gradient(net, b, Mode::infer);
    // Column-major W (4 x 3): row 2 lives at indices 2, 6, 10; its bias at 12 + 2.
    for (Eigen::Index i : {2, 6, 10, 14}) EXPECT_EQ(lg.gradient(i), 0.0);
    EXPECT_EQ(lg.gradient(16 + 2), 0.0);  // output weight of the dead unit
}

TEST(RiskSetSampler, ControlsComeFromRiskSetExcludingCase) {
    std::vector<SurvRecord> recs;
    for (int i = 0; i < 12; ++i) recs.push_back({{static_cast<double>(i)}, static_cast<double>(i % 5), i % 3 != 0});
    const Dataset ds({"x"}, recs);
    const auto rows = all_rows(ds.size());
    const RiskSetSampler s(ds, rows);
    Rng rng(1);
    const CaseControlBatch b = s.make_batch(s.event_positions(), 6, rng);
    for (std::size_t e = 0; e < b.events(); ++e) {
        const std::size_t case_row = b.rows[b.offsets[e]];
        ASSERT_TRUE(ds[case_row].event);
        for (std::size_t c = b.offsets[e] + 1; c < b.offsets[e + 1]; ++c) {
            EXPECT_NE(b.rows[c], case_row);
            EXPECT_GE(ds[b.rows[c]].time, ds[case_row].time);
            EXPECT_EQ(b.inputs(1, static_cast<Eigen::Index>(c)), b.inputs(1, static_cast<Eigen::Index>(b.offsets[e])));
        }
    }
}

TEST(RiskSetSampler, LastSubjectHasNoControls) {
    const Dataset ds({"x"}, {{{0.0}, 1.0, false}, {{1.0}, 2.0, true}});
    const auto rows = all_rows(2);
    const RiskSetSampler s(ds, rows);
    Rng rng(1);
    const CaseControlBatch b = s.make_batch(s.event_positions(), 4, rng);
    EXPECT_EQ(b.events(), 1u);
    EXPECT_EQ(b.events_without_controls, 1u);
    EXPECT_EQ(b.offsets[1], 1u);
    EXPECT_EQ(case_control_loss(std::vector<double>{0.3}, b.offsets), 0.0);
}

TEST(EarlyStopping, PatienceOneIncreasingLoss) {
    EarlyStopping s(1);
    EXPECT_FALSE(s.observe(1.0));
    EXPECT_FALSE(s.observe(1.1));
    EXPECT_TRUE(s.observe(1.2));
    EXPECT_EQ(s.best_epoch(), 1u);
}

TEST(EarlyStopping, ImprovementResetsCounter) {
    EarlyStopping s(2);
    EXPECT_FALSE(s.observe(3.0));
    EXPECT_FALSE(s.observe(3.5));
    EXPECT_FALSE(s.observe(2.0));
    EXPECT_TRUE(s.improved_last());
    EXPECT_FALSE(s.observe(2.0));  // ties do not count as improvement
    EXPECT_FALSE(s.observe(2.5));
    EXPECT_TRUE(s.observe(2.6));
    EXPECT_EQ(s.best_epoch(), 3u);
    EXPECT_EQ(s.best_loss(), 2.0);
}
