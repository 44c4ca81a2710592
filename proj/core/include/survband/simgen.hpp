#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "survband/curves.hpp"
#include "survband/dataset.hpp"
#include "survband/rng.hpp"

namespace survband {

enum class SettingId { s1 = 1, s2 = 2, s3 = 3, s4 = 4, s5 = 5 };

enum class CovariateLaw {
    uniform_pm1,      // x_j ~ U[-1, 1] i.i.d.
    gaussian_copula,  // equicorrelated (0.5) normal copula, margins scaled to [0, 2]
};

// One of the five generative laws h(t|x) = h0(t) exp{g(t, x)} with
// exponential + administrative right censoring.
struct SimSetting {
    SettingId id = SettingId::s1;
    std::size_t dim = 3;
    std::vector<double> beta;  // S1-S3 only
    std::string baseline_hazard;
    double censor_rate = 1.0 / 30.0;
    double admin_cutoff = 30.0;
    CovariateLaw covariate_law = CovariateLaw::uniform_pm1;
    TimeGrid grid;
};

SimSetting make_setting(SettingId id);
// Accepts 1..5; throws ContractError otherwise.
SimSetting make_setting(int id);

// Log relative risk g(t, x). Throws ContractError on a dimension mismatch.
double g_eval(const SimSetting& s, double t, std::span<const double> x);

// H0(t) = integral of h0 over [0, t].
double baseline_cumulative_hazard(const SimSetting& s, double t);

// H(t | x) = integral of h0(s) exp{g(s, x)} over [0, t], closed form.
double cumulative_hazard(const SimSetting& s, double t, std::span<const double> x);

// Solves H(t* | x) = -ln u in closed form. u must lie in (0, 1).
double sample_event_time(const SimSetting& s, std::span<const double> x, double u);

std::vector<double> draw_covariates(const SimSetting& s, Rng& rng);

// Exact truth for one setting.
class TruthOracle {
public:
    TruthOracle() = default;
    explicit TruthOracle(SimSetting setting) : setting_(std::move(setting)) {}

    const SimSetting& setting() const noexcept { return setting_; }
    double g(double t, std::span<const double> x) const { return g_eval(setting_, t, x); }
    double H0(double t) const { return baseline_cumulative_hazard(setting_, t); }
    double survival(double t, std::span<const double> x) const;

private:
    SimSetting setting_;
};

struct SimulatedData {
    Dataset data;
    TruthOracle oracle;
    // Uncensored event times t*, in record order.
    std::vector<double> latent_event_times;
};

// Each record i uses its own substream seeded from (rng(), i).
SimulatedData generate(const SimSetting& s, std::size_t n, Rng& rng);

// Same as generate but every record shares the covariate vector x.
SimulatedData generate_at(const SimSetting& s, std::span<const double> x, std::size_t n, Rng& rng);

// S_true on the grid for covariates x (raw scale).
SurvCurve truth_curve(const TruthOracle& oracle, std::span<const double> x, const TimeGrid& grid);

}  // namespace survband
