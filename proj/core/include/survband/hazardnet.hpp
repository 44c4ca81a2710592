#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "survband/dataset.hpp"
#include "survband/rng.hpp"

namespace survband {

struct NetConfig {
    std::size_t hidden_layers = 2;
    std::size_t layer_width = 32;
    double dropout_rate = 0.1;
    double learning_rate = 1e-3;
    std::size_t batch_size = 256;  // events per optimizer step
    std::size_t max_epochs = 1500;
    std::size_t patience = 15;
    std::size_t n_controls = 8;
    std::uint64_t seed = 0;
    bool batch_norm = true;

    // Throws ConfigError.
    void validate() const;
};

// Plain-text `key=value` lines named after the fields above; '#' starts a
// comment. Unknown keys are a ConfigError.
NetConfig parse_net_config(std::istream& in, NetConfig defaults = {});
NetConfig load_net_config(const std::string& path, NetConfig defaults = {});
void write_net_config(std::ostream& out, const NetConfig& cfg);

enum class Mode {
    train,  // dropout on, batch statistics
    infer,  // dropout off, running statistics
};

// Linear -> ReLU -> BatchNorm -> Dropout.
struct HiddenLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
    // Present only when batch normalization is enabled.
    Eigen::VectorXd gamma;
    Eigen::VectorXd beta;
    Eigen::VectorXd running_mean;
    Eigen::VectorXd running_var;
};

struct OutputLayer {
    Eigen::RowVectorXd weight;
    double bias = 0.0;
};

// Intermediate values of one batched forward pass, needed by backward().
struct ForwardCache {
    struct Layer {
        Eigen::MatrixXd input;    // activations entering the layer
        Eigen::MatrixXd pre;      // W a + b
        Eigen::MatrixXd rect;     // relu(pre)
        Eigen::MatrixXd normed;   // (rect - mean) * inv_std
        Eigen::VectorXd mean;     // statistics used for normalization
        Eigen::VectorXd var;
        Eigen::VectorXd inv_std;
        Eigen::MatrixXd mask;     // inverted-dropout multipliers; empty if unused
    };
    Mode mode = Mode::infer;
    std::vector<Layer> layers;
    Eigen::MatrixXd last;         // input of the output layer
};

// Multilayer perceptron for the log relative risk g(t, x). Inputs are the
// standardized covariates followed by the standardized time, one column per
// sample.
class HazardNet {
public:
    static constexpr double kBatchNormEps = 1e-5;
    static constexpr double kRunningMomentum = 0.9;

    HazardNet() = default;
    HazardNet(std::vector<HiddenLayer> hidden, OutputLayer output, double dropout_rate, bool batch_norm,
              Standardization scaling = {});

    // Kaiming-normal weights (variance 2 / fan_in), zero biases, unit gamma.
    // input_dim counts the time input, i.e. covariates + 1.
    static HazardNet init(const NetConfig& cfg, std::size_t input_dim, Rng& rng);

    std::size_t input_dim() const noexcept;
    std::size_t covariate_dim() const noexcept { return input_dim() - 1; }
    std::size_t hidden_layers() const noexcept { return hidden_.size(); }
    bool batch_norm() const noexcept { return batch_norm_; }
    double dropout_rate() const noexcept { return dropout_rate_; }
    const std::vector<HiddenLayer>& hidden() const noexcept { return hidden_; }
    const OutputLayer& output() const noexcept { return output_; }

    const Standardization& scaling() const noexcept { return scaling_; }
    void set_scaling(Standardization s) { scaling_ = std::move(s); }

    // Batched forward pass over (input_dim x n) inputs. Train mode needs an
    // rng when dropout is active. Pass a cache to enable backward().
    Eigen::RowVectorXd forward(const Eigen::MatrixXd& inputs, Mode mode, Rng* rng = nullptr,
                               ForwardCache* cache = nullptr) const;

    // One sample: standardized time and standardized covariates.
    double forward(double t_std, std::span<const double> x, Mode mode, Rng* rng = nullptr) const;

    // Inference-mode g at raw time t for standardized covariates.
    double g(double raw_t, std::span<const double> x_std) const;

    // Gradient of sum_k d_out[k] * output[k] w.r.t. every parameter, in the
    // order of parameters().
    Eigen::VectorXd backward(const ForwardCache& cache, const Eigen::RowVectorXd& d_out) const;

    // Exponential moving average of the batch statistics in `cache`.
    void update_running_stats(const ForwardCache& cache);

    // Trainable parameters flattened layer by layer: W (column-major), b,
    // [gamma, beta], then the output weights and bias.
    std::size_t parameter_count() const noexcept;
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);

    friend bool operator==(const HazardNet& a, const HazardNet& b);

private:
    std::vector<HiddenLayer> hidden_;
    OutputLayer output_;
    double dropout_rate_ = 0.0;
    bool batch_norm_ = false;
    Standardization scaling_;
};

// Each event contributes one case column followed by its sampled controls,
// all evaluated at the case's time: columns [offsets[e], offsets[e + 1]).
struct CaseControlBatch {
    Eigen::MatrixXd inputs;
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> rows;  // dataset record per column
    std::size_t events_without_controls = 0;

    std::size_t events() const noexcept { return offsets.size() - 1; }
};

// Mean over events of log(1 + sum_j exp(g_j - g_case)), evaluated with a
// log-sum-exp shift. Writes d loss / d output when d_outputs is non-null.
double case_control_loss(std::span<const double> outputs, std::span<const std::size_t> offsets,
                         Eigen::RowVectorXd* d_outputs = nullptr);

double ccl_loss(const HazardNet& net, const CaseControlBatch& batch, Mode mode, Rng* rng = nullptr);

struct LossGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;
};

// Forward in `mode`, loss and exact parameter gradient. The cache is
// returned through `cache` when provided (train uses it for running stats).
LossGradient ccl_loss_gradient(const HazardNet& net, const CaseControlBatch& batch, Mode mode,
                               Rng* rng = nullptr, ForwardCache* cache = nullptr);

// Risk sets over a multiset of dataset rows: for a case at sorted position p,
// the controls are drawn uniformly with replacement from positions
// q != p with time(q) >= time(p).
class RiskSetSampler {
public:
    RiskSetSampler(const Dataset& ds, std::span<const std::size_t> rows);

    std::size_t size() const noexcept { return sorted_rows_.size(); }
    // Sorted positions whose record is an event.
    const std::vector<std::size_t>& event_positions() const noexcept { return event_positions_; }
    std::size_t row(std::size_t position) const { return sorted_rows_[position]; }

    CaseControlBatch make_batch(std::span<const std::size_t> event_positions, std::size_t n_controls,
                                Rng& rng) const;

private:
    const Dataset* ds_;
    std::vector<std::size_t> sorted_rows_;
    std::vector<std::size_t> risk_begin_;  // first position with time >= own time
    std::vector<std::size_t> event_positions_;
};

// Validation loss bookkeeping: stop once more than `patience` consecutive
// epochs failed to improve on the best loss.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    // Feeds the loss of the next epoch (1-based). Returns true when training
    // should stop after this epoch.
    bool observe(double loss);

    bool improved_last() const noexcept { return improved_last_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }
    double best_loss() const noexcept { return best_loss_; }

private:
    std::size_t patience_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t since_best_ = 0;
    double best_loss_ = 0.0;
    bool improved_last_ = false;
};

struct TrainReport {
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;  // 1-based
    double initial_valid_loss = 0.0;
    std::vector<double> train_loss_history;
    std::vector<double> valid_loss_history;
    bool stopped_early = false;
    std::size_t events_without_controls = 0;
    std::string normalization;  // "batch" or "none"
    // Sorted distinct dataset rows that entered a gradient computation.
    std::vector<std::size_t> gradient_rows;
};

struct TrainResult {
    HazardNet net;
    TrainReport report;
};

// Adam on the case-control loss over `train_rows` (a multiset; bootstrap
// samples allowed), early stopping on the loss over `valid_rows` with one
// control draw fixed for the whole run. Returns the best-epoch parameters.
// All randomness comes from cfg.seed. The net's scaling is ds.standardization().
TrainResult train(const Dataset& ds, std::span<const std::size_t> train_rows,
                  std::span<const std::size_t> valid_rows, const NetConfig& cfg);
TrainResult train(const Dataset& ds, const SplitPlan& plan, const NetConfig& cfg);

}  // namespace survband
