#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "survband/bands.hpp"
#include "survband/dataset.hpp"
#include "survband/errors.hpp"
#include "survband/harness.hpp"
#include "survband/hazardnet.hpp"
#include "survband/io.hpp"
#include "survband/simgen.hpp"

namespace fs = std::filesystem;
using namespace survband;

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<double> parse_levels(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw ConfigError("bad confidence level: " + item);
        out.push_back(v);
    }
    return out;
}

std::vector<BandMethod> parse_methods(const std::string& s) {
    std::vector<BandMethod> out;
    for (const auto& item : split_list(s)) out.push_back(parse_band_method(item));
    return out;
}

std::vector<std::size_t> parse_rows(const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(s)) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw ConfigError("bad row index: " + item);
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot open " + p.string() + " for writing");
    return out;
}

std::string level_tag(double level) {
    std::ostringstream s;
    s << static_cast<int>(level * 100 + 0.5);
    return s.str();
}

// Options shared by the real-data subcommands.
struct DataOptions {
    std::string data;
    std::string time_col = "time";
    std::string event_col = "event";
    std::string features;
    std::string continuous;
    std::string config;
    std::string levels = "0.90,0.95";
    std::string methods = "naive,ks,prop_ks";
    std::size_t M = 20;
    std::size_t B = 100;
    std::size_t workers = 1;
    std::size_t grid_points = 100;
    std::uint64_t seed = 42;

    void attach(CLI::App* app) {
        app->add_option("--data", data, "Delimited input file")->required()->check(CLI::ExistingFile);
        app->add_option("--time-col", time_col, "Observed-time column");
        app->add_option("--event-col", event_col, "Event indicator column (0/1)");
        app->add_option("--features", features, "Comma separated covariate columns")->required();
        app->add_option("--continuous", continuous,
                        "Comma separated features to standardize (default: all)");
        app->add_option("--config", config, "Network config file (key=value)")->check(CLI::ExistingFile);
        app->add_option("--levels", levels, "Comma separated confidence levels");
        app->add_option("--methods", methods, "Comma separated band methods: naive, ks, prop_ks");
        app->add_option("--M", M, "Ensemble size");
        app->add_option("--B", B, "Bootstrap replicates");
        app->add_option("--workers", workers, "Worker threads");
        app->add_option("--grid-points", grid_points, "Evaluation grid size");
        app->add_option("--seed", seed, "Master seed");
    }

    Schema schema() const { return {time_col, event_col, split_list(features)}; }

    RealDataConfig config_for(const Dataset& raw) const {
        RealDataConfig cfg;
        if (!config.empty()) cfg.fit.net = load_net_config(config);
        cfg.fit.M = M;
        cfg.fit.B = B;
        cfg.fit.workers = workers;
        cfg.levels = parse_levels(levels);
        cfg.methods = parse_methods(methods);
        cfg.grid_points = grid_points;
        cfg.seed = seed;
        for (const auto& name : split_list(continuous)) {
            const auto& names = raw.feature_names();
            const auto it = std::find(names.begin(), names.end(), name);
            if (it == names.end()) throw ConfigError("--continuous names unknown feature " + name);
            cfg.continuous_features.push_back(static_cast<std::size_t>(it - names.begin()));
        }
        return cfg;
    }
};

void export_bands(const fs::path& dir, std::size_t row, const std::vector<BandResult>& bands, bool svg) {
    for (const auto& band : bands) {
        const std::string stem =
            "row" + std::to_string(row) + "_" + std::string(to_string(band.method)) + "_" + level_tag(band.level);
        auto csv = open_out(dir / (stem + ".csv"));
        write_band_csv(csv, band);
        if (svg) {
            auto out = open_out(dir / (stem + ".svg"));
            write_band_svg(out, band, nullptr, "row " + std::to_string(row) + " " + std::string(to_string(band.method)));
        }
    }
}

int run(int argc, char** argv) {
    CLI::App app{"Bootstrap confidence bands for neural survival curves"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Draw a synthetic dataset from one of the five settings");
    int sim_setting = 1;
    std::size_t sim_n = 1000;
    std::uint64_t sim_seed = 42;
    std::string sim_out;
    sim->add_option("--setting", sim_setting, "Setting 1..5")->check(CLI::Range(1, 5));
    sim->add_option("--n", sim_n, "Number of records");
    sim->add_option("--seed", sim_seed, "Seed");
    sim->add_option("--out", sim_out, "Output CSV; a .meta sidecar is written next to it")->required();

    // coverage
    auto* cov = app.add_subcommand("coverage", "Monte Carlo coverage study on a synthetic setting");
    ExperimentConfig ec;
    std::string cov_levels = "0.90,0.95", cov_methods = "naive,ks,prop_ks", cov_config, cov_out, cov_diag;
    std::size_t controls = 0;
    bool no_alias = false;
    cov->add_option("--setting", ec.setting, "Setting 1..5")->check(CLI::Range(1, 5));
    cov->add_option("--n", ec.n, "Records per repetition");
    cov->add_option("--config", cov_config, "Network config file (key=value)")->check(CLI::ExistingFile);
    cov->add_option("--controls", controls, "Controls per event (overrides config)");
    cov->add_option("--M", ec.M, "Ensemble size");
    cov->add_option("--B", ec.B, "Bootstrap replicates");
    cov->add_option("--R", ec.R, "Repetitions");
    cov->add_option("--n-test", ec.n_test, "Test points");
    cov->add_option("--levels", cov_levels, "Comma separated confidence levels");
    cov->add_option("--methods", cov_methods, "Comma separated band methods");
    cov->add_option("--seed", ec.master_seed, "Master seed");
    cov->add_option("--workers", ec.workers, "Worker threads");
    cov->add_flag("--no-alias-base", no_alias, "Train a separate base network (M + B + 1 runs)");
    cov->add_option("--out", cov_out, "Report CSV")->required();
    cov->add_option("--diagnostics", cov_diag, "Per-repetition diagnostics CSV");

    // bands
    auto* bands = app.add_subcommand("bands", "Fit on a dataset and export bands for selected rows");
    DataOptions bands_opts;
    bands_opts.attach(bands);
    std::string test_rows, bands_out;
    bool svg = false;
    bands->add_option("--test-rows", test_rows, "Comma separated row indices")->required();
    bands->add_option("--out", bands_out, "Output directory")->required();
    bands->add_flag("--svg", svg, "Also write one SVG plot per band");

    // widths
    auto* widths = app.add_subcommand("widths", "K-fold mean band widths on a dataset");
    DataOptions widths_opts;
    widths_opts.attach(widths);
    std::size_t folds = 10;
    std::string widths_out;
    widths->add_option("--folds", folds, "Number of folds");
    widths->add_option("--out", widths_out, "Width report CSV")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "Fit ensemble and bootstrap networks and save a checkpoint");
    DataOptions fit_opts;
    fit_opts.attach(fit);
    std::string fit_out;
    fit->add_option("--out", fit_out, "Checkpoint file")->required();

    // predict
    auto* pred = app.add_subcommand("predict", "Bands for rows of a dataset from a saved checkpoint");
    std::string ckpt_path, pred_data, pred_rows, pred_out, pred_levels = "0.90,0.95",
                                                         pred_methods = "naive,ks,prop_ks";
    std::string pred_time = "time", pred_event = "event";
    std::size_t pred_grid = 100;
    bool pred_svg = false;
    pred->add_option("--checkpoint", ckpt_path, "Checkpoint from `fit`")->required()->check(CLI::ExistingFile);
    pred->add_option("--data", pred_data, "Delimited file containing the checkpoint's features")
        ->required()
        ->check(CLI::ExistingFile);
    pred->add_option("--time-col", pred_time, "Observed-time column");
    pred->add_option("--event-col", pred_event, "Event indicator column");
    pred->add_option("--test-rows", pred_rows, "Comma separated row indices")->required();
    pred->add_option("--levels", pred_levels, "Comma separated confidence levels");
    pred->add_option("--methods", pred_methods, "Comma separated band methods");
    pred->add_option("--grid-points", pred_grid, "Evaluation grid size");
    pred->add_option("--out", pred_out, "Output directory")->required();
    pred->add_flag("--svg", pred_svg, "Also write one SVG plot per band");

    CLI11_PARSE(app, argc, argv);

    if (*sim) {
        const SimSetting setting = make_setting(sim_setting);
        Rng rng(sim_seed);
        const SimulatedData data = generate(setting, sim_n, rng);
        auto out = open_out(sim_out);
        write_delimited(out, data.data);
        auto meta = open_out(sim_out + ".meta");
        write_simulation_meta(meta, {sim_setting, sim_seed, sim_n, data.data.event_count(),
                                     data.data.censoring_fraction()});
        std::cout << "wrote " << sim_n << " records (censoring " << data.data.censoring_fraction() << ") to "
                  << sim_out << "\n";
    } else if (*cov) {
        if (!cov_config.empty()) ec.net = load_net_config(cov_config, ec.net);
        if (controls) ec.net.n_controls = controls;
        ec.levels = parse_levels(cov_levels);
        ec.methods = parse_methods(cov_methods);
        ec.alias_base = !no_alias;
        const CoverageReport report = run_experiment(ec);
        auto out = open_out(cov_out);
        write_coverage_report(out, report);
        if (!cov_diag.empty()) {
            auto d = open_out(cov_diag);
            write_diagnostics(d, report);
        }
        write_coverage_report(std::cout, report);
        std::cout << "repetitions ok=" << report.repetitions_ok << " failed=" << report.repetitions_failed << "\n";
        if (!report.acceptable()) {
            std::cerr << "error: more than 5% of repetitions failed\n";
            return 3;
        }
    } else if (*bands) {
        const Dataset raw = load_delimited(bands_opts.data, bands_opts.schema());
        const auto cfg = bands_opts.config_for(raw);
        const auto rows = parse_rows(test_rows);
        const BandsOutput result = run_bands(raw, cfg, rows);
        for (std::size_t i = 0; i < rows.size(); ++i) export_bands(bands_out, rows[i], result.bands[i], svg);
        std::cout << "wrote bands for " << rows.size() << " rows to " << bands_out << " (" << result.training_runs
                  << " training runs)\n";
    } else if (*widths) {
        const Dataset raw = load_delimited(widths_opts.data, widths_opts.schema());
        auto cfg = widths_opts.config_for(raw);
        cfg.folds = folds;
        const WidthReport report = run_width_study(raw, cfg);
        auto out = open_out(widths_out);
        write_width_report(out, report);
        write_width_report(std::cout, report);
    } else if (*fit) {
        const Dataset raw = load_delimited(fit_opts.data, fit_opts.schema());
        const auto cfg = fit_opts.config_for(raw);
        RealDataFit fitted = fit_real_data(raw, all_rows(raw.size()), cfg, cfg.seed);
        Checkpoint ckpt{raw.feature_names(), fitted.ds.standardization(), std::move(fitted.fit)};
        save_checkpoint(fit_out, ckpt);
        std::cout << "saved checkpoint with " << ckpt.fit.members.size() << " members and "
                  << ckpt.fit.bootstrap.size() << " bootstrap networks to " << fit_out << "\n";
    } else if (*pred) {
        const Checkpoint ckpt = load_checkpoint(ckpt_path);
        const Dataset raw = load_delimited(pred_data, {pred_time, pred_event, ckpt.feature_names});
        const auto rows = parse_rows(pred_rows);
        const auto levels = parse_levels(pred_levels);
        const auto methods = parse_methods(pred_methods);
        Eigen::MatrixXd xs(static_cast<Eigen::Index>(raw.dim()), static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i] >= raw.size()) throw ContractError("test row " + std::to_string(rows[i]) + " is out of range");
            const auto z = ckpt.standardization.transform(raw[rows[i]].x);
            for (std::size_t j = 0; j < z.size(); ++j)
                xs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = z[j];
        }
        const TimeGrid grid = grid_up_to(ckpt.fit.tau, pred_grid);
        const auto reps = replicate_curves(ckpt.fit, xs, grid);
        for (std::size_t i = 0; i < rows.size(); ++i)
            export_bands(pred_out, rows[i], make_bands(reps[i], methods, levels), pred_svg);
        std::cout << "wrote bands for " << rows.size() << " rows to " << pred_out << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
