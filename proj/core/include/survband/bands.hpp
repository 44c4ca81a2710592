#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "survband/curves.hpp"

namespace survband {

enum class BandMethod { naive, ks, prop_ks };

std::string_view to_string(BandMethod m) noexcept;
// Accepts "naive", "ks", "prop_ks". Throws ContractError otherwise.
BandMethod parse_band_method(std::string_view name);

// Bootstrap curves together with the ensemble centre and the single-run base
// estimate, all on one grid.
struct BootstrapReplicates {
    std::vector<SurvCurve> curves;
    SurvCurve center;
    SurvCurve base;

    // Throws ContractError when B == 0 or grids differ.
    void validate() const;
};

// Band bounds are plain grid-aligned vectors: a proportional band need not be
// monotone even though the curve it surrounds is.
struct BandResult {
    TimeGrid grid;
    std::vector<double> lower;
    std::vector<double> base;
    std::vector<double> upper;
    BandMethod method = BandMethod::ks;
    double level = 0.0;     // 1 - alpha
    double critical = 0.0;  // d or d^p
};

struct PointwiseCI {
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.0;
};

// Type-1 empirical quantile: the smallest sorted value whose empirical CDF is
// >= p. p outside [0, 1] or empty input throws ContractError.
double quantile(std::span<const double> values, double p);

// Percentile interval [base - nu_{1-beta}, base - nu_{alpha}] where the nu are
// quantiles of estimates - center. Level is 1 - alpha - beta.
PointwiseCI pointwise_ci(std::span<const double> estimates, double center, double base, double alpha,
                         double beta);

// [S*(1 - S*)]^{1/2} with S* = S truncated to [0.01, 0.99].
double proportional_weight(double s) noexcept;

// Constant-width band around base, critical value from sup |curve_b - center|.
BandResult ks_band(const BootstrapReplicates& reps, double alpha);

// Variable-width band base -/+ W(base) d^p with d^p from
// sup |curve_b - center| / W(curve_b).
BandResult prop_ks_band(const BootstrapReplicates& reps, double alpha);

// ks_band with deviations measured against base instead of the ensemble center.
BandResult naive_band(const BootstrapReplicates& reps, double alpha);

BandResult make_band(const BootstrapReplicates& reps, BandMethod method, double alpha);

// (1 / (2|T|)) sum_t (upper - lower).
double band_width(const BandResult& band);

// lower <= truth <= upper at every grid point (closed interval).
bool covers(const BandResult& band, const SurvCurve& truth);

}  // namespace survband
