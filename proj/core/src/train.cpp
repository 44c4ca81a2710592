#include <algorithm>
#include <cmath>

#include "survband/errors.hpp"
#include "survband/hazardnet.hpp"

namespace survband {

namespace {

struct Adam {
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    Eigen::VectorXd m, v;
    long step = 0;

    explicit Adam(Eigen::Index size) : m(Eigen::VectorXd::Zero(size)), v(Eigen::VectorXd::Zero(size)) {}

    void apply(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
        ++step;
        m = kBeta1 * m + (1.0 - kBeta1) * grad;
        v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
        params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
    }
};

}  // namespace

TrainResult train(const Dataset& ds, std::span<const std::size_t> train_rows,
                  std::span<const std::size_t> valid_rows, const NetConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    RiskSetSampler train_set(ds, train_rows);
    RiskSetSampler valid_set(ds, valid_rows);
    if (train_set.event_positions().empty()) throw ConfigError("training set has no events");
    if (valid_set.event_positions().empty())
        throw ConfigError("validation set has no events; validation loss is undefined");

    HazardNet net = HazardNet::init(cfg, ds.dim() + 1, rng);
    net.set_scaling(ds.standardization());

    // One fixed control draw for the whole run so epochs are compared on the
    // same validation objective.
    const CaseControlBatch valid_batch = valid_set.make_batch(valid_set.event_positions(), cfg.n_controls, rng);

    TrainResult result;
    TrainReport& report = result.report;
    report.normalization = cfg.batch_norm ? "batch" : "none";
    report.initial_valid_loss = ccl_loss(net, valid_batch, Mode::infer);
    report.events_without_controls = valid_batch.events_without_controls;

    std::vector<char> touched(ds.size(), 0);
    std::vector<std::size_t> events = train_set.event_positions();
    Adam adam(static_cast<Eigen::Index>(net.parameter_count()));
    EarlyStopping stopping(cfg.patience);
    HazardNet best = net;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(events.begin(), events.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < events.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(events.size(), begin + cfg.batch_size);
            std::span<const std::size_t> chunk(events.data() + begin, end - begin);
            CaseControlBatch batch = train_set.make_batch(chunk, cfg.n_controls, rng);
            report.events_without_controls += batch.events_without_controls;
            for (auto r : batch.rows) touched[r] = 1;

            ForwardCache cache;
            LossGradient lg = ccl_loss_gradient(net, batch, Mode::train, &rng, &cache);
            if (!std::isfinite(lg.loss) || !lg.gradient.allFinite())
                throw Error("training diverged at epoch " + std::to_string(epoch));
            net.update_running_stats(cache);
            Eigen::VectorXd params = net.parameters();
            adam.apply(params, lg.gradient, cfg.learning_rate);
            net.set_parameters(params);
            loss_sum += lg.loss * static_cast<double>(chunk.size());
        }
        report.train_loss_history.push_back(loss_sum / static_cast<double>(events.size()));

        const double vloss = ccl_loss(net, valid_batch, Mode::infer);
        if (!std::isfinite(vloss)) throw Error("validation loss is not finite at epoch " + std::to_string(epoch));
        report.valid_loss_history.push_back(vloss);
        report.epochs_run = epoch;
        const bool stop = stopping.observe(vloss);
        if (stopping.improved_last()) best = net;
        if (stop) {
            report.stopped_early = true;
            break;
        }
    }

    report.best_epoch = stopping.best_epoch();
    for (std::size_t r = 0; r < touched.size(); ++r)
        if (touched[r]) report.gradient_rows.push_back(r);
    result.net = std::move(best);
    return result;
}

TrainResult train(const Dataset& ds, const SplitPlan& plan, const NetConfig& cfg) {
    return train(ds, plan.train, plan.valid, cfg);
}

}  // namespace survband
