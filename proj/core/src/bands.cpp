#include "survband/bands.hpp"

#include <algorithm>
#include <cmath>

#include "survband/errors.hpp"

namespace survband {

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("alpha must lie in (0, 1)");
}

// Builds base -/+ half_width[k] clipped to [0, 1].
BandResult assemble(const BootstrapReplicates& reps, BandMethod method, double alpha, double critical,
                    const std::vector<double>& half_width) {
    BandResult band;
    band.grid = reps.base.grid();
    band.method = method;
    band.level = 1.0 - alpha;
    band.critical = critical;
    const std::size_t K = reps.base.size();
    band.lower.resize(K);
    band.base.resize(K);
    band.upper.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double b = reps.base[k];
        band.base[k] = b;
        band.lower[k] = std::max(b - half_width[k], 0.0);
        band.upper[k] = std::min(b + half_width[k], 1.0);
    }
    return band;
}

double sup_deviation(const SurvCurve& curve, const SurvCurve& reference) {
    double d = 0.0;
    for (std::size_t k = 0; k < curve.size(); ++k) d = std::max(d, std::abs(curve[k] - reference[k]));
    return d;
}

BandResult constant_width_band(const BootstrapReplicates& reps, double alpha, const SurvCurve& reference,
                               BandMethod method) {
    reps.validate();
    check_alpha(alpha);
    std::vector<double> d;
    d.reserve(reps.curves.size());
    for (const auto& c : reps.curves) d.push_back(sup_deviation(c, reference));
    const double critical = quantile(d, 1.0 - alpha);
    return assemble(reps, method, alpha, critical, std::vector<double>(reps.base.size(), critical));
}

}  // namespace

std::string_view to_string(BandMethod m) noexcept {
    switch (m) {
        case BandMethod::naive: return "naive";
        case BandMethod::ks: return "ks";
        case BandMethod::prop_ks: return "prop_ks";
    }
    return "unknown";
}

BandMethod parse_band_method(std::string_view name) {
    if (name == "naive") return BandMethod::naive;
    if (name == "ks") return BandMethod::ks;
    if (name == "prop_ks") return BandMethod::prop_ks;
    throw ContractError("unknown band method '" + std::string(name) + "'");
}

void BootstrapReplicates::validate() const {
    if (curves.empty()) throw ContractError("need at least one bootstrap curve");
    const auto& grid = base.grid();
    if (!(center.grid() == grid)) throw ContractError("center and base curves use different grids");
    for (const auto& c : curves)
        if (!(c.grid() == grid)) throw ContractError("bootstrap curves use different grids");
}

double quantile(std::span<const double> values, double p) {
    if (values.empty()) throw ContractError("quantile of an empty sequence");
    if (!(p >= 0.0 && p <= 1.0)) throw ContractError("quantile level must lie in [0, 1]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    // Smallest k (1-based) with k / n >= p; the slack absorbs rounding in
    // products such as (1 - 0.1) * 100.
    auto k = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
    k = std::clamp<std::size_t>(k, 1, sorted.size());
    return sorted[k - 1];
}

PointwiseCI pointwise_ci(std::span<const double> estimates, double center, double base, double alpha,
                         double beta) {
    if (!(alpha >= 0.0 && beta >= 0.0 && alpha + beta < 1.0))
        throw ContractError("need alpha, beta >= 0 and alpha + beta < 1");
    std::vector<double> dev(estimates.begin(), estimates.end());
    for (auto& v : dev) v -= center;
    const double nu_low = quantile(dev, alpha);
    const double nu_high = quantile(dev, 1.0 - beta);
    return PointwiseCI{base - nu_high, base - nu_low, 1.0 - alpha - beta};
}

double proportional_weight(double s) noexcept {
    const double t = std::clamp(s, 0.01, 0.99);
    return std::sqrt(t * (1.0 - t));
}

BandResult ks_band(const BootstrapReplicates& reps, double alpha) {
    return constant_width_band(reps, alpha, reps.center, BandMethod::ks);
}

BandResult naive_band(const BootstrapReplicates& reps, double alpha) {
    return constant_width_band(reps, alpha, reps.base, BandMethod::naive);
}

BandResult prop_ks_band(const BootstrapReplicates& reps, double alpha) {
    reps.validate();
    check_alpha(alpha);
    std::vector<double> d;
    d.reserve(reps.curves.size());
    for (const auto& c : reps.curves) {
        double sup = 0.0;
        // Each replicate is scaled by its own weight.
        for (std::size_t k = 0; k < c.size(); ++k)
            sup = std::max(sup, std::abs(c[k] - reps.center[k]) / proportional_weight(c[k]));
        d.push_back(sup);
    }
    const double critical = quantile(d, 1.0 - alpha);
    std::vector<double> half(reps.base.size());
    for (std::size_t k = 0; k < half.size(); ++k) half[k] = proportional_weight(reps.base[k]) * critical;
    return assemble(reps, BandMethod::prop_ks, alpha, critical, half);
}

BandResult make_band(const BootstrapReplicates& reps, BandMethod method, double alpha) {
    switch (method) {
        case BandMethod::naive: return naive_band(reps, alpha);
        case BandMethod::ks: return ks_band(reps, alpha);
        case BandMethod::prop_ks: return prop_ks_band(reps, alpha);
    }
    throw ContractError("unknown band method");
}

double band_width(const BandResult& band) {
    if (band.lower.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < band.lower.size(); ++k) sum += band.upper[k] - band.lower[k];
    return sum / (2.0 * static_cast<double>(band.lower.size()));
}

bool covers(const BandResult& band, const SurvCurve& truth) {
    if (!(truth.grid() == band.grid)) throw ContractError("truth and band use different grids");
    for (std::size_t k = 0; k < truth.size(); ++k)
        if (truth[k] < band.lower[k] || truth[k] > band.upper[k]) return false;
    return true;
}

}  // namespace survband
