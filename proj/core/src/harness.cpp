#include "survband/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "survband/errors.hpp"
#include "survband/parallel.hpp"

namespace survband {

namespace {

std::size_t count_overlap(const std::vector<std::size_t>& sorted_rows, const std::vector<std::size_t>& sorted_valid) {
    std::size_t n = 0;
    auto i = sorted_rows.begin();
    auto j = sorted_valid.begin();
    while (i != sorted_rows.end() && j != sorted_valid.end()) {
        if (*i < *j) ++i;
        else if (*j < *i) ++j;
        else {
            ++n;
            ++i;
            ++j;
        }
    }
    return n;
}

double last_event_time(const Dataset& ds, const std::vector<std::size_t>& rows) {
    double tau = -1.0;
    for (auto r : rows)
        if (ds[r].event) tau = std::max(tau, ds[r].time);
    if (tau <= 0.0) throw ConfigError("training portion has no event with positive time");
    return tau;
}

void check_levels(const std::vector<double>& levels) {
    if (levels.empty()) throw ConfigError("at least one confidence level is required");
    for (double l : levels)
        if (!(l > 0.0 && l < 1.0)) throw ConfigError("confidence levels must lie in (0, 1)");
}

std::vector<std::size_t> every_feature(const Dataset& ds, const std::vector<std::size_t>& listed) {
    if (!listed.empty()) return listed;
    return all_rows(ds.dim());
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(10);
    s << v;
    return s.str();
}

}  // namespace

void EnsembleBootstrapConfig::validate() const {
    net.validate();
    if (M < 1) throw ConfigError("M must be >= 1");
    if (B < 1) throw ConfigError("B must be >= 1");
}

EnsembleBootstrapFit fit_ensemble_bootstrap(const Dataset& ds, const SplitPlan& plan,
                                            const EnsembleBootstrapConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t extra_base = cfg.alias_base ? 0 : 1;
    const std::size_t members = cfg.M + extra_base;
    const std::size_t tasks = members + cfg.B;

    std::vector<TrainResult> results(tasks);
    std::vector<std::vector<std::size_t>> boot_rows(cfg.B);
    std::vector<BreslowBaseline> boot_baselines(cfg.B);
    std::vector<std::shared_ptr<const HazardNet>> nets(tasks);
    std::vector<GFunctionPtr> gs(tasks);

    parallel_for(tasks, cfg.workers, [&](std::size_t task) {
        NetConfig nc = cfg.net;
        if (task < members) {
            nc.seed = derive_seed(seed, Stream::ensemble_fit, task);
            results[task] = train(ds, plan.train, plan.valid, nc);
            nets[task] = std::make_shared<const HazardNet>(std::move(results[task].net));
            gs[task] = net_g(nets[task]);
        } else {
            const std::size_t b = task - members;
            Rng resample_rng(derive_seed(seed, Stream::bootstrap_sample, b));
            boot_rows[b] = bootstrap_resample(plan.train, resample_rng);
            nc.seed = derive_seed(seed, Stream::bootstrap_fit, b);
            results[task] = train(ds, boot_rows[b], plan.valid, nc);
            nets[task] = std::make_shared<const HazardNet>(std::move(results[task].net));
            gs[task] = net_g(nets[task]);
            boot_baselines[b] = breslow_fit(ds, boot_rows[b], *gs[task]);
        }
    });

    EnsembleBootstrapFit fit;
    fit.training_runs = tasks;
    fit.tau = last_event_time(ds, plan.train);

    std::vector<std::size_t> valid_sorted = plan.valid;
    std::sort(valid_sorted.begin(), valid_sorted.end());
    for (const auto& r : results) {
        auto touched = r.report.gradient_rows;
        std::sort(touched.begin(), touched.end());
        fit.validation_rows_touched += count_overlap(touched, valid_sorted);
    }

    // Base: member 0 when aliased, otherwise the extra run at index M.
    const std::size_t base_idx = cfg.alias_base ? 0 : cfg.M;
    fit.base.net = nets[base_idx];
    fit.base.g = gs[base_idx];
    fit.base.report = results[base_idx].report;
    fit.base.baseline = breslow_fit(ds, plan.train, *fit.base.g);

    std::vector<GFunctionPtr> ensemble(gs.begin(), gs.begin() + static_cast<std::ptrdiff_t>(cfg.M));
    fit.center_g = ensemble_g(std::move(ensemble));
    fit.center_baseline = breslow_fit(ds, plan.train, *fit.center_g);

    fit.members.assign(nets.begin(), nets.begin() + static_cast<std::ptrdiff_t>(cfg.M));
    for (std::size_t m = 0; m < members; ++m) fit.member_reports.push_back(results[m].report);
    fit.bootstrap.resize(cfg.B);
    for (std::size_t b = 0; b < cfg.B; ++b) {
        fit.bootstrap[b].net = nets[members + b];
        fit.bootstrap[b].g = gs[members + b];
        fit.bootstrap[b].baseline = std::move(boot_baselines[b]);
        fit.bootstrap[b].report = std::move(results[members + b].report);
    }
    return fit;
}

std::vector<BootstrapReplicates> replicate_curves(const EnsembleBootstrapFit& fit,
                                                  const Eigen::Ref<const Eigen::MatrixXd>& x_std,
                                                  const TimeGrid& grid) {
    const auto hold = BeyondLastEvent::hold;
    auto base = survival_curves(fit.base.baseline, *fit.base.g, x_std, grid, hold);
    auto center = survival_curves(fit.center_baseline, *fit.center_g, x_std, grid, hold);
    const auto m = static_cast<std::size_t>(x_std.cols());
    std::vector<BootstrapReplicates> reps(m);
    for (std::size_t i = 0; i < m; ++i) {
        reps[i].base = std::move(base[i]);
        reps[i].center = std::move(center[i]);
        reps[i].curves.reserve(fit.bootstrap.size());
    }
    for (const auto& boot : fit.bootstrap) {
        auto curves = survival_curves(boot.baseline, *boot.g, x_std, grid, hold);
        for (std::size_t i = 0; i < m; ++i) reps[i].curves.push_back(std::move(curves[i]));
    }
    return reps;
}

std::vector<BandResult> make_bands(const BootstrapReplicates& reps, const std::vector<BandMethod>& methods,
                                   const std::vector<double>& levels) {
    std::vector<BandResult> out;
    out.reserve(methods.size() * levels.size());
    for (auto method : methods)
        for (double level : levels) out.push_back(make_band(reps, method, 1.0 - level));
    return out;
}

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
    if (setting < 1 || setting > 5) throw ConfigError("setting must be 1..5");
    net.validate();
    if (M < 1 || B < 1 || R < 1) throw ConfigError("M, B and R must be >= 1");
    if (n_test < 1) throw ConfigError("n_test must be >= 1");
    if (n < 4) throw ConfigError("n is too small to split");
    check_levels(levels);
    if (methods.empty()) throw ConfigError("at least one band method is required");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
}

std::vector<std::vector<double>> draw_test_points(const SimSetting& s, std::size_t n_test,
                                                  std::uint64_t master_seed) {
    Rng rng(derive_seed(master_seed, Stream::test_points));
    std::vector<std::vector<double>> pts(n_test);
    for (auto& p : pts) p = draw_covariates(s, rng);
    return pts;
}

RepetitionResult run_repetition(const ExperimentConfig& cfg, std::size_t rep_id,
                                const std::vector<std::vector<double>>& test_points,
                                std::size_t inner_workers) {
    cfg.validate();
    RepetitionResult out;
    out.rep_id = rep_id;
    try {
        const SimSetting setting = make_setting(cfg.setting);
        const std::uint64_t rep_seed = derive_seed(cfg.master_seed, Stream::repetition, rep_id);

        Rng data_rng(derive_seed(rep_seed, Stream::data));
        SimulatedData sim = generate(setting, cfg.n, data_rng);
        out.censoring_fraction = sim.data.censoring_fraction();

        Rng split_rng(derive_seed(rep_seed, Stream::split));
        const SplitPlan plan = split(sim.data, cfg.split_fraction, split_rng);
        const auto features = all_rows(sim.data.dim());
        const Dataset ds = standardize(sim.data, features, plan.train);

        EnsembleBootstrapConfig fc;
        fc.net = cfg.net;
        fc.M = cfg.M;
        fc.B = cfg.B;
        fc.alias_base = cfg.alias_base;
        fc.workers = inner_workers;
        const EnsembleBootstrapFit fit = fit_ensemble_bootstrap(ds, plan, fc, rep_seed);
        out.training_runs = fit.training_runs;
        out.validation_rows_touched = fit.validation_rows_touched;
        for (const auto& r : fit.member_reports) out.epochs.push_back(r.epochs_run);
        for (const auto& b : fit.bootstrap) out.epochs.push_back(b.report.epochs_run);

        Eigen::MatrixXd xs(static_cast<Eigen::Index>(setting.dim), static_cast<Eigen::Index>(test_points.size()));
        for (std::size_t i = 0; i < test_points.size(); ++i) {
            if (test_points[i].size() != setting.dim) throw ContractError("test point has the wrong dimension");
            const auto z = ds.standardization().transform(test_points[i]);
            for (std::size_t j = 0; j < z.size(); ++j)
                xs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = z[j];
        }
        const auto reps = replicate_curves(fit, xs, setting.grid);
        out.bands.reserve(reps.size());
        for (const auto& r : reps) out.bands.push_back(make_bands(r, cfg.methods, cfg.levels));
    } catch (const std::exception& e) {
        out.failed = true;
        out.failure = e.what();
        out.bands.clear();
    }
    return out;
}

namespace {

// Per-repetition reduction: covered flag and width per (test point, band).
struct RepetitionSummary {
    bool failed = false;
    std::vector<std::vector<char>> covered;
    std::vector<std::vector<double>> width;
};

RepetitionSummary summarize(const RepetitionResult& rep, const std::vector<SurvCurve>& truths,
                            std::size_t bands_per_point) {
    RepetitionSummary s;
    s.failed = rep.failed;
    if (rep.failed) return s;
    if (rep.bands.size() != truths.size()) throw ContractError("repetition and truths disagree on test points");
    s.covered.resize(truths.size());
    s.width.resize(truths.size());
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (rep.bands[i].size() != bands_per_point) throw ContractError("unexpected number of bands");
        for (const auto& band : rep.bands[i]) {
            s.covered[i].push_back(covers(band, truths[i]) ? 1 : 0);
            s.width[i].push_back(band_width(band));
        }
    }
    return s;
}

CoverageReport aggregate(const ExperimentConfig& cfg, const std::vector<RepetitionSummary>& sums,
                         const std::vector<RepetitionDiagnostics>& diags) {
    CoverageReport report;
    report.config = cfg;
    report.diagnostics = diags;
    const std::size_t J = cfg.methods.size() * cfg.levels.size();
    std::vector<double> cov(J, 0.0), wid(J, 0.0);
    std::size_t cells = 0;
    for (const auto& s : sums) {
        if (s.failed) {
            ++report.repetitions_failed;
            continue;
        }
        ++report.repetitions_ok;
        for (std::size_t i = 0; i < s.covered.size(); ++i) {
            for (std::size_t j = 0; j < J; ++j) {
                cov[j] += s.covered[i][j];
                wid[j] += s.width[i][j];
            }
            ++cells;
        }
    }
    std::size_t j = 0;
    for (auto method : cfg.methods)
        for (double level : cfg.levels) {
            CoverageRow row;
            row.method = method;
            row.level = level;
            // Every test point sees the same repetitions, so the mean over
            // points of per-point coverage equals the pooled mean.
            row.coverage = cells ? cov[j] / static_cast<double>(cells) : 0.0;
            row.mean_width = cells ? wid[j] / static_cast<double>(cells) : 0.0;
            report.rows.push_back(row);
            ++j;
        }
    return report;
}

RepetitionDiagnostics diagnose(const RepetitionResult& r) {
    RepetitionDiagnostics d;
    d.rep_id = r.rep_id;
    d.failed = r.failed;
    d.failure = r.failure;
    d.training_runs = r.training_runs;
    d.censoring_fraction = r.censoring_fraction;
    if (!r.epochs.empty())
        d.mean_epochs = std::accumulate(r.epochs.begin(), r.epochs.end(), 0.0) / static_cast<double>(r.epochs.size());
    return d;
}

}  // namespace

bool CoverageReport::acceptable() const noexcept {
    const std::size_t total = repetitions_ok + repetitions_failed;
    return total > 0 && repetitions_ok > 0 &&
           static_cast<double>(repetitions_failed) <= 0.05 * static_cast<double>(total);
}

const CoverageRow& CoverageReport::row(BandMethod method, double level) const {
    for (const auto& r : rows)
        if (r.method == method && std::abs(r.level - level) < 1e-12) return r;
    throw ContractError("no report row for the requested method and level");
}

CoverageReport coverage(const ExperimentConfig& cfg, const std::vector<RepetitionResult>& reps,
                        const std::vector<SurvCurve>& truths) {
    const std::size_t J = cfg.methods.size() * cfg.levels.size();
    std::vector<RepetitionSummary> sums;
    std::vector<RepetitionDiagnostics> diags;
    for (const auto& r : reps) {
        sums.push_back(summarize(r, truths, J));
        diags.push_back(diagnose(r));
    }
    return aggregate(cfg, sums, diags);
}

CoverageReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const SimSetting setting = make_setting(cfg.setting);
    const auto test_points = draw_test_points(setting, cfg.n_test, cfg.master_seed);
    const TruthOracle oracle(setting);
    std::vector<SurvCurve> truths;
    for (const auto& x : test_points) truths.push_back(truth_curve(oracle, x, setting.grid));

    const std::size_t J = cfg.methods.size() * cfg.levels.size();
    const std::size_t outer = std::min(cfg.workers, cfg.R);
    const std::size_t inner = outer >= cfg.workers ? 1 : std::max<std::size_t>(1, cfg.workers / std::max<std::size_t>(1, outer));
    std::vector<RepetitionSummary> sums(cfg.R);
    std::vector<RepetitionDiagnostics> diags(cfg.R);
    parallel_for(cfg.R, outer, [&](std::size_t r) {
        RepetitionResult rep = run_repetition(cfg, r, test_points, inner);
        sums[r] = summarize(rep, truths, J);
        diags[r] = diagnose(rep);
    });
    return aggregate(cfg, sums, diags);
}

void write_coverage_report(std::ostream& out, const CoverageReport& report) {
    const auto& c = report.config;
    std::ostringstream s;
    s << "method,level,coverage,mean_width,n,M,B,R,setting,seed\n";
    for (const auto& r : report.rows) {
        s << to_string(r.method) << ',' << fmt(r.level) << ',' << fmt(r.coverage) << ',' << fmt(r.mean_width)
          << ',' << c.n << ',' << c.M << ',' << c.B << ',' << c.R << ',' << c.setting << ',' << c.master_seed
          << '\n';
    }
    out << s.str();
}

void write_diagnostics(std::ostream& out, const CoverageReport& report) {
    std::ostringstream s;
    s << "repetition,failed,training_runs,mean_epochs,censoring_fraction,failure\n";
    for (const auto& d : report.diagnostics) {
        std::string msg = d.failure;
        std::replace(msg.begin(), msg.end(), ',', ';');
        s << d.rep_id << ',' << (d.failed ? 1 : 0) << ',' << d.training_runs << ',' << fmt(d.mean_epochs) << ','
          << fmt(d.censoring_fraction) << ',' << msg << '\n';
    }
    out << s.str();
}

// ---------------------------------------------------------------------------

TimeGrid grid_up_to(double tau, std::size_t points) {
    if (!(tau > 0.0) || points < 1) throw ContractError("grid needs tau > 0 and at least one point");
    std::vector<double> pts(points);
    for (std::size_t k = 0; k < points; ++k)
        pts[k] = tau * static_cast<double>(k + 1) / static_cast<double>(points);
    pts.back() = tau;
    return TimeGrid(std::move(pts));
}

RealDataFit fit_real_data(const Dataset& raw, const std::vector<std::size_t>& rows, const RealDataConfig& cfg,
                          std::uint64_t seed) {
    check_levels(cfg.levels);
    Rng split_rng(derive_seed(seed, Stream::split));
    const SplitPlan local = split(rows.size(), cfg.split_fraction, split_rng);
    SplitPlan plan;
    plan.fraction = local.fraction;
    for (auto p : local.train) plan.train.push_back(rows[p]);
    for (auto p : local.valid) plan.valid.push_back(rows[p]);

    const auto features = every_feature(raw, cfg.continuous_features);
    RealDataFit out{standardize(raw, features, plan.train), {}, {}};
    out.fit = fit_ensemble_bootstrap(out.ds, plan, cfg.fit, seed);
    out.grid = grid_up_to(out.fit.tau, cfg.grid_points);
    return out;
}

BandsOutput run_bands(const Dataset& raw, const RealDataConfig& cfg, const std::vector<std::size_t>& test_rows) {
    check_levels(cfg.levels);
    for (auto r : test_rows)
        if (r >= raw.size()) throw ContractError("test row " + std::to_string(r) + " is out of range");
    const auto prepared = fit_real_data(raw, all_rows(raw.size()), cfg, cfg.seed);

    BandsOutput out;
    out.grid = prepared.grid;
    out.test_rows = test_rows;
    out.training_runs = prepared.fit.training_runs;
    const auto reps = replicate_curves(prepared.fit, prepared.ds.covariates(test_rows), prepared.grid);
    for (const auto& r : reps) out.bands.push_back(make_bands(r, cfg.methods, cfg.levels));
    return out;
}

const WidthRow& WidthReport::row(BandMethod method, double level) const {
    for (const auto& r : rows)
        if (r.method == method && std::abs(r.level - level) < 1e-12) return r;
    throw ContractError("no width row for the requested method and level");
}

WidthReport run_width_study(const Dataset& raw, const RealDataConfig& cfg) {
    check_levels(cfg.levels);
    if (cfg.folds < 2 || cfg.folds > raw.size()) throw ConfigError("fold count must lie in [2, n]");

    auto order = all_rows(raw.size());
    Rng fold_rng(derive_seed(cfg.seed, Stream::fold));
    std::shuffle(order.begin(), order.end(), fold_rng);
    std::vector<std::vector<std::size_t>> folds(cfg.folds);
    for (std::size_t k = 0; k < order.size(); ++k) folds[k % cfg.folds].push_back(order[k]);

    const std::size_t J = cfg.methods.size() * cfg.levels.size();
    std::vector<double> sum(J, 0.0);
    std::size_t points = 0;
    for (std::size_t f = 0; f < cfg.folds; ++f) {
        std::vector<std::size_t> rest;
        for (std::size_t g = 0; g < cfg.folds; ++g)
            if (g != f) rest.insert(rest.end(), folds[g].begin(), folds[g].end());
        std::sort(rest.begin(), rest.end());
        auto test = folds[f];
        std::sort(test.begin(), test.end());

        const auto prepared = fit_real_data(raw, rest, cfg, derive_seed(cfg.seed, Stream::fold, f + 1));
        const auto reps = replicate_curves(prepared.fit, prepared.ds.covariates(test), prepared.grid);
        for (const auto& r : reps) {
            const auto bands = make_bands(r, cfg.methods, cfg.levels);
            for (std::size_t j = 0; j < J; ++j) sum[j] += band_width(bands[j]);
            ++points;
        }
    }

    WidthReport report;
    report.folds = cfg.folds;
    report.observations = raw.size();
    std::size_t j = 0;
    for (auto method : cfg.methods)
        for (double level : cfg.levels) {
            report.rows.push_back({method, level, sum[j] / static_cast<double>(points)});
            ++j;
        }
    return report;
}

void write_width_report(std::ostream& out, const WidthReport& report) {
    std::ostringstream s;
    s << "method,level,mean_width,folds,n\n";
    for (const auto& r : report.rows)
        s << to_string(r.method) << ',' << fmt(r.level) << ',' << fmt(r.mean_width) << ',' << report.folds << ','
          << report.observations << '\n';
    out << s.str();
}

}  // namespace survband
