#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "survband/bands.hpp"
#include "survband/dataset.hpp"
#include "survband/hazardnet.hpp"
#include "survband/simgen.hpp"
#include "survband/survest.hpp"

namespace survband {

// ---------------------------------------------------------------------------
// Ensemble-based bootstrap for one dataset

struct EnsembleBootstrapConfig {
    NetConfig net;
    std::size_t M = 20;  // ensemble runs on the training data
    std::size_t B = 100; // bootstrap runs on resampled training data
    // Use ensemble member 0 as the base estimate instead of an extra run.
    bool alias_base = true;
    std::size_t workers = 1;

    void validate() const;
};

struct FittedModel {
    std::shared_ptr<const HazardNet> net;
    GFunctionPtr g;
    BreslowBaseline baseline;
    TrainReport report;
};

// Everything needed to draw curves for new covariate vectors. Breslow
// baselines are fitted on the rows each network was trained on: the training
// portion for the base and ensemble fits, the resample for bootstrap fits.
struct EnsembleBootstrapFit {
    FittedModel base;
    GFunctionPtr center_g;
    BreslowBaseline center_baseline;
    std::vector<FittedModel> bootstrap;
    std::vector<std::shared_ptr<const HazardNet>> members;
    std::vector<TrainReport> member_reports;
    std::size_t training_runs = 0;
    // Validation rows that entered a gradient computation in any run; the
    // split rule requires zero.
    std::size_t validation_rows_touched = 0;
    double tau = 0.0;  // last event time of the training portion
};

// `ds` must already be standardized. Training seeds derive from `seed`:
// member m uses (seed, ensemble_fit, m), bootstrap b draws its resample from
// (seed, bootstrap_sample, b) and trains with (seed, bootstrap_fit, b).
EnsembleBootstrapFit fit_ensemble_bootstrap(const Dataset& ds, const SplitPlan& plan,
                                            const EnsembleBootstrapConfig& cfg, std::uint64_t seed);

// Base, center and bootstrap curves for each column of x_std on `grid`;
// beyond a baseline's last event time curves are held flat.
std::vector<BootstrapReplicates> replicate_curves(const EnsembleBootstrapFit& fit,
                                                  const Eigen::Ref<const Eigen::MatrixXd>& x_std,
                                                  const TimeGrid& grid);

// One band per (method, level) in methods-major order.
std::vector<BandResult> make_bands(const BootstrapReplicates& reps, const std::vector<BandMethod>& methods,
                                   const std::vector<double>& levels);

// ---------------------------------------------------------------------------
// Simulation coverage study

struct ExperimentConfig {
    int setting = 1;
    std::size_t n = 1000;
    NetConfig net;
    std::size_t M = 20;
    std::size_t B = 100;
    std::size_t R = 50;
    std::size_t n_test = 50;
    std::vector<double> levels{0.90, 0.95};
    std::vector<BandMethod> methods{BandMethod::naive, BandMethod::ks, BandMethod::prop_ks};
    std::uint64_t master_seed = 42;
    std::size_t workers = 1;
    double split_fraction = 0.8;
    bool alias_base = true;

    void validate() const;
};

// Raw-scale test covariates drawn from the setting's law with seed
// (master_seed, test_points); identical for every repetition.
std::vector<std::vector<double>> draw_test_points(const SimSetting& s, std::size_t n_test,
                                                  std::uint64_t master_seed);

struct RepetitionResult {
    std::size_t rep_id = 0;
    bool failed = false;
    std::string failure;
    // bands[i][j]: test point i, j indexes methods x levels (methods-major).
    std::vector<std::vector<BandResult>> bands;
    std::size_t training_runs = 0;
    std::size_t validation_rows_touched = 0;
    std::vector<std::size_t> epochs;  // per training run: members, then bootstrap
    double censoring_fraction = 0.0;
};

RepetitionResult run_repetition(const ExperimentConfig& cfg, std::size_t rep_id,
                                const std::vector<std::vector<double>>& test_points,
                                std::size_t inner_workers = 1);

struct CoverageRow {
    BandMethod method = BandMethod::ks;
    double level = 0.0;
    double coverage = 0.0;
    double mean_width = 0.0;
};

struct RepetitionDiagnostics {
    std::size_t rep_id = 0;
    bool failed = false;
    std::string failure;
    std::size_t training_runs = 0;
    double mean_epochs = 0.0;
    double censoring_fraction = 0.0;
};

struct CoverageReport {
    ExperimentConfig config;
    std::vector<CoverageRow> rows;
    std::size_t repetitions_ok = 0;
    std::size_t repetitions_failed = 0;
    std::vector<RepetitionDiagnostics> diagnostics;

    // False when more than 5% of the repetitions failed.
    bool acceptable() const noexcept;
    const CoverageRow& row(BandMethod method, double level) const;
};

// Coverage of repetition bands against the truth curves of the test points.
// Failed repetitions are counted but excluded. Grid mismatch throws.
CoverageReport coverage(const ExperimentConfig& cfg, const std::vector<RepetitionResult>& reps,
                        const std::vector<SurvCurve>& truths);

// Runs cfg.R repetitions (in parallel when cfg.workers > 1) and aggregates
// in repetition order.
CoverageReport run_experiment(const ExperimentConfig& cfg);

// Columns: method, level, coverage, mean_width, n, M, B, R, setting, seed.
void write_coverage_report(std::ostream& out, const CoverageReport& report);
void write_diagnostics(std::ostream& out, const CoverageReport& report);

// ---------------------------------------------------------------------------
// Real data

struct RealDataConfig {
    EnsembleBootstrapConfig fit;
    std::vector<double> levels{0.90, 0.95};
    std::vector<BandMethod> methods{BandMethod::naive, BandMethod::ks, BandMethod::prop_ks};
    std::vector<std::size_t> continuous_features;  // empty: all features
    double split_fraction = 0.8;
    std::size_t grid_points = 100;
    std::size_t folds = 10;
    std::uint64_t seed = 42;
};

// Grid of `points` equally spaced times tau/points, ..., tau.
TimeGrid grid_up_to(double tau, std::size_t points);

struct RealDataFit {
    Dataset ds;  // standardized on the training portion
    EnsembleBootstrapFit fit;
    TimeGrid grid;
};

// Split `rows` of `raw` into training and validation, standardize on the
// training portion and fit the ensemble and bootstrap networks.
RealDataFit fit_real_data(const Dataset& raw, const std::vector<std::size_t>& rows, const RealDataConfig& cfg,
                          std::uint64_t seed);

struct BandsOutput {
    TimeGrid grid;
    std::vector<std::size_t> test_rows;
    std::vector<std::vector<BandResult>> bands;  // per test row, methods x levels
    std::size_t training_runs = 0;
};

// Split, standardize on the training portion, fit, and build bands for the
// requested rows of `raw` on a grid up to the last training event time.
BandsOutput run_bands(const Dataset& raw, const RealDataConfig& cfg, const std::vector<std::size_t>& test_rows);

struct WidthRow {
    BandMethod method = BandMethod::ks;
    double level = 0.0;
    double mean_width = 0.0;
};

struct WidthReport {
    std::vector<WidthRow> rows;
    std::size_t folds = 0;
    std::size_t observations = 0;

    const WidthRow& row(BandMethod method, double level) const;
};

// K-fold protocol: each held-out fold is the test set, the rest is split
// into training and validation, and mean widths are averaged over all
// held-out points.
WidthReport run_width_study(const Dataset& raw, const RealDataConfig& cfg);

void write_width_report(std::ostream& out, const WidthReport& report);

}  // namespace survband
