#include "survband/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string_view>

#include "survband/errors.hpp"

namespace survband {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

double parse_number(std::string_view cell, std::size_t row, const std::string& column) {
    if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan")
        throw ParseError(row, "missing value in column '" + column + "'");
    if (cell.front() == '+') cell.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw ParseError(row, "non-numeric value '" + std::string(cell) + "' in column '" + column + "'");
    return v;
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
}

struct Moments {
    double mean = 0.0;
    double sd = 0.0;
};

template <class Get>
Moments population_moments(std::span<const std::size_t> rows, Get get) {
    Moments m;
    if (rows.empty()) return m;
    double sum = 0.0;
    for (auto r : rows) sum += get(r);
    m.mean = sum / static_cast<double>(rows.size());
    double ss = 0.0;
    for (auto r : rows) {
        double d = get(r) - m.mean;
        ss += d * d;
    }
    m.sd = std::sqrt(ss / static_cast<double>(rows.size()));
    return m;
}

}  // namespace

std::vector<double> Standardization::transform(std::span<const double> raw_x) const {
    std::vector<double> out(raw_x.begin(), raw_x.end());
    for (std::size_t j = 0; j < features.size() && j < out.size(); ++j) out[j] = features[j].apply(out[j]);
    return out;
}

Dataset::Dataset(std::vector<std::string> feature_names, std::vector<SurvRecord> records,
                 Standardization standardization)
    : feature_names_(std::move(feature_names)),
      records_(std::move(records)),
      standardization_(std::move(standardization)) {
    if (records_.empty()) throw ValidationError("dataset has no records");
    const std::size_t d = feature_names_.size();
    bool any_event = false;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        if (r.x.size() != d)
            throw ValidationError("record " + std::to_string(i) + " has dimension " +
                                  std::to_string(r.x.size()) + ", expected " + std::to_string(d));
        if (!std::isfinite(r.time) || r.time < 0.0)
            throw ValidationError("record " + std::to_string(i) + " has invalid time");
        any_event = any_event || r.event;
    }
    if (!any_event) throw ValidationError("dataset has no observed events");
    if (standardization_.features.empty()) standardization_.features.assign(d, ColumnScale{});
    if (standardization_.features.size() != d)
        throw ValidationError("standardization dimension does not match feature count");
}

std::size_t Dataset::event_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [](const SurvRecord& r) { return r.event; }));
}

double Dataset::censoring_fraction() const noexcept {
    if (records_.empty()) return 0.0;
    return 1.0 - static_cast<double>(event_count()) / static_cast<double>(records_.size());
}

Eigen::MatrixXd Dataset::covariates(std::span<const std::size_t> rows) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t c = 0; c < rows.size(); ++c) {
        const auto& x = records_.at(rows[c]).x;
        for (std::size_t j = 0; j < x.size(); ++j)
            out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = x[j];
    }
    return out;
}

Dataset read_delimited(std::istream& in, const Schema& schema) {
    if (schema.time_col.empty() || schema.event_col.empty())
        throw SchemaError("schema must name a time column and an event column");
    if (schema.features.empty()) throw SchemaError("schema must name at least one feature column");

    std::string line;
    if (!std::getline(in, line)) throw SchemaError("missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::vector<std::string> header;
    for (auto f : split_fields(line)) header.emplace_back(f);

    const std::size_t time_idx = find_column(header, schema.time_col);
    const std::size_t event_idx = find_column(header, schema.event_col);
    std::vector<std::size_t> feature_idx;
    feature_idx.reserve(schema.features.size());
    for (const auto& f : schema.features) feature_idx.push_back(find_column(header, f));

    std::vector<SurvRecord> records;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw ParseError(row, "expected " + std::to_string(header.size()) + " fields, found " +
                                      std::to_string(fields.size()));
        SurvRecord rec;
        rec.time = parse_number(fields[time_idx], row, schema.time_col);
        if (rec.time < 0.0) throw ValidationError("row " + std::to_string(row) + ": negative time");
        double ev = parse_number(fields[event_idx], row, schema.event_col);
        if (ev != 0.0 && ev != 1.0)
            throw ValidationError("row " + std::to_string(row) + ": event value must be 0 or 1");
        rec.event = ev == 1.0;
        rec.x.reserve(feature_idx.size());
        for (std::size_t k = 0; k < feature_idx.size(); ++k)
            rec.x.push_back(parse_number(fields[feature_idx[k]], row, schema.features[k]));
        records.push_back(std::move(rec));
        ++row;
    }
    return Dataset(schema.features, std::move(records));
}

Dataset load_delimited(const std::filesystem::path& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return read_delimited(in, schema);
}

void write_delimited(std::ostream& out, const Dataset& ds) {
    auto old_prec = out.precision(17);
    for (const auto& name : ds.feature_names()) out << name << ',';
    out << "time,event\n";
    for (const auto& r : ds.records()) {
        for (double v : r.x) out << v << ',';
        out << r.time << ',' << (r.event ? 1 : 0) << '\n';
    }
    out.precision(old_prec);
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

Standardization fit_standardization(const Dataset& ds,
                                    std::span<const std::size_t> continuous_features,
                                    std::span<const std::size_t> fit_rows) {
    if (fit_rows.empty()) throw ContractError("standardization needs at least one row");
    Standardization s;
    s.features.assign(ds.dim(), ColumnScale{});
    for (auto j : continuous_features) {
        if (j >= ds.dim()) throw ContractError("feature index out of range");
        auto m = population_moments(fit_rows, [&](std::size_t r) { return ds[r].x[j]; });
        if (!(m.sd > 0.0))
            throw DegenerateFeatureError("feature '" + ds.feature_names()[j] + "' has zero variance");
        s.features[j] = ColumnScale{m.mean, m.sd};
    }
    auto t = population_moments(fit_rows, [&](std::size_t r) { return ds[r].time; });
    if (!(t.sd > 0.0)) throw DegenerateFeatureError("observed times have zero variance");
    s.time = ColumnScale{t.mean, t.sd};
    return s;
}

Dataset apply_standardization(const Dataset& ds, const Standardization& scale) {
    if (scale.features.size() != ds.dim()) throw ContractError("standardization dimension mismatch");
    std::vector<SurvRecord> recs = ds.records();
    for (auto& r : recs)
        for (std::size_t j = 0; j < r.x.size(); ++j) r.x[j] = scale.features[j].apply(r.x[j]);

    // Compose with the existing map: raw -> old -> new.
    Standardization combined;
    const auto& old = ds.standardization();
    combined.features.resize(ds.dim());
    for (std::size_t j = 0; j < ds.dim(); ++j) {
        const auto& a = old.features[j];
        const auto& b = scale.features[j];
        combined.features[j] = b.is_identity() ? a : ColumnScale{a.mean + a.sd * b.mean, a.sd * b.sd};
    }
    // Record times are never rescaled, so the time scale is replaced outright.
    combined.time = scale.time;
    return Dataset(ds.feature_names(), std::move(recs), std::move(combined));
}

Dataset standardize(const Dataset& ds, std::span<const std::size_t> continuous_features,
                    std::span<const std::size_t> fit_rows) {
    return apply_standardization(ds, fit_standardization(ds, continuous_features, fit_rows));
}

Dataset standardize(const Dataset& ds, std::span<const std::size_t> continuous_features) {
    auto rows = all_rows(ds.size());
    return standardize(ds, continuous_features, rows);
}

SplitPlan split(std::size_t n, double fraction, Rng& rng) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ContractError("split fraction must lie in (0, 1)");
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
    if (n_train < 1 || n_train >= n)
        throw ContractError("split leaves an empty training or validation set");
    auto idx = all_rows(n);
    std::shuffle(idx.begin(), idx.end(), rng);
    SplitPlan plan;
    plan.fraction = fraction;
    plan.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    plan.valid.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(plan.train.begin(), plan.train.end());
    std::sort(plan.valid.begin(), plan.valid.end());
    return plan;
}

std::vector<std::size_t> bootstrap_resample(std::span<const std::size_t> train, Rng& rng) {
    if (train.empty()) throw ContractError("cannot resample an empty training set");
    std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
    std::vector<std::size_t> out(train.size());
    for (auto& v : out) v = train[pick(rng)];
    return out;
}

}  // namespace survband
