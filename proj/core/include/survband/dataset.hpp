#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "survband/rng.hpp"

namespace survband {

// One right-censored observation: covariates, observed time min(t*, c) and
// whether the event was observed.
struct SurvRecord {
    std::vector<double> x;
    double time = 0.0;
    bool event = false;
};

// Affine map v -> (v - mean) / sd. The identity map leaves a column untouched.
struct ColumnScale {
    double mean = 0.0;
    double sd = 1.0;

    double apply(double v) const noexcept { return (v - mean) / sd; }
    double invert(double z) const noexcept { return z * sd + mean; }
    bool is_identity() const noexcept { return mean == 0.0 && sd == 1.0; }
};

// Maps raw covariates/times to the scale the network sees. Always fitted on
// training rows and reused verbatim for validation, bootstrap and test points.
struct Standardization {
    std::vector<ColumnScale> features;
    ColumnScale time;

    std::vector<double> transform(std::span<const double> raw_x) const;
    double transform_time(double raw_t) const noexcept { return time.apply(raw_t); }
};

// Immutable after construction. Record times always stay on the observed
// (raw) scale so that time >= 0 holds; the time standardization is carried
// alongside and applied at the network input.
class Dataset {
public:
    Dataset() = default;
    // Throws ValidationError when records are empty, dimensions disagree,
    // a time is negative/non-finite or no record has an event.
    Dataset(std::vector<std::string> feature_names, std::vector<SurvRecord> records,
            Standardization standardization = {});

    std::size_t size() const noexcept { return records_.size(); }
    std::size_t dim() const noexcept { return feature_names_.size(); }
    const std::vector<SurvRecord>& records() const noexcept { return records_; }
    const SurvRecord& operator[](std::size_t i) const { return records_[i]; }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    const Standardization& standardization() const noexcept { return standardization_; }

    std::size_t event_count() const noexcept;
    double censoring_fraction() const noexcept;

    // Covariates of the given rows as a dim() x rows.size() matrix.
    Eigen::MatrixXd covariates(std::span<const std::size_t> rows) const;

private:
    std::vector<std::string> feature_names_;
    std::vector<SurvRecord> records_;
    Standardization standardization_;
};

// Column mapping for delimited-text ingestion.
struct Schema {
    std::string time_col;
    std::string event_col;
    std::vector<std::string> features;
};

// Comma separated, header row required, '.' decimal point. Rows are kept in
// file order and no standardization is applied.
Dataset read_delimited(std::istream& in, const Schema& schema);
Dataset load_delimited(const std::filesystem::path& path, const Schema& schema);

// Writes features..., time, event with a header row; round-trips through
// read_delimited with the matching schema.
void write_delimited(std::ostream& out, const Dataset& ds);

std::vector<std::size_t> all_rows(std::size_t n);

// Population-variance (divide by n) statistics of the listed feature columns
// and of the observed time, computed over fit_rows only.
Standardization fit_standardization(const Dataset& ds,
                                    std::span<const std::size_t> continuous_features,
                                    std::span<const std::size_t> fit_rows);

// Applies `scale` to the covariates. `scale` is composed with whatever
// standardization `ds` already carries so raw test points keep mapping
// correctly.
Dataset apply_standardization(const Dataset& ds, const Standardization& scale);

// Standardizes the listed features (and records the time scale) using
// statistics from fit_rows. Throws DegenerateFeatureError on zero variance.
Dataset standardize(const Dataset& ds, std::span<const std::size_t> continuous_features,
                    std::span<const std::size_t> fit_rows);
Dataset standardize(const Dataset& ds, std::span<const std::size_t> continuous_features);

// Disjoint train/validation partition.
struct SplitPlan {
    std::vector<std::size_t> train;
    std::vector<std::size_t> valid;
    double fraction = 0.8;
};

// Uniformly random partition with round(n * fraction) training rows. Both
// index lists are returned sorted.
SplitPlan split(std::size_t n, double fraction, Rng& rng);
inline SplitPlan split(const Dataset& ds, double fraction, Rng& rng) {
    return split(ds.size(), fraction, rng);
}

// |train| draws with replacement from `train`.
std::vector<std::size_t> bootstrap_resample(std::span<const std::size_t> train, Rng& rng);

}  // namespace survband
