#include "survband/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "survband/errors.hpp"

namespace survband {

namespace {

constexpr double kS1Beta[] = {0.44, 0.66, 0.88};

double linear_part(std::span<const double> x) {
    return kS1Beta[0] * x[0] + kS1Beta[1] * x[1] + kS1Beta[2] * x[2];
}

double quadratic_part(std::span<const double> x) {
    const double x1 = x[0], x2 = x[1], x3 = x[2];
    return 2.0 / 3.0 * (x1 * x1 + x3 * x3 + x1 * x2 + x1 * x3 + x2 * x3);
}

// S3: g(t, x) = a(x) + b(x) t.
double s3_a(std::span<const double> x) { return linear_part(x) + quadratic_part(x) + x[2]; }

// b(x) = {0.2(x1 + x2) + 0.5 x1 x2}^2, reading the printed (x0, x1) as the
// first two covariates.
double s3_b(std::span<const double> x) {
    const double v = 0.2 * (x[0] + x[1]) + 0.5 * x[0] * x[1];
    return v * v;
}

double s45_inner(std::span<const double> x) {
    const double x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3], x5 = x[4];
    return x1 * x1 * x2 * x2 * x2 + std::log(x3 + 1.0) + std::sqrt(x4 * x5 + 1.0) + std::exp(x5 / 2.0);
}

void check_dim(const SimSetting& s, std::span<const double> x) {
    if (x.size() != s.dim)
        throw ContractError("setting expects " + std::to_string(s.dim) + " covariates, got " +
                            std::to_string(x.size()));
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

SimulatedData generate_impl(const SimSetting& s, std::optional<std::span<const double>> fixed_x,
                            std::size_t n, Rng& rng) {
    if (n < 1) throw ContractError("generate needs n >= 1");
    const std::uint64_t base = rng();
    std::vector<SurvRecord> records;
    records.reserve(n);
    std::vector<double> latent;
    latent.reserve(n);
    std::exponential_distribution<double> censor(s.censor_rate);
    for (std::size_t i = 0; i < n; ++i) {
        Rng r(derive_seed(base, Stream::data, i));
        SurvRecord rec;
        if (fixed_x) {
            rec.x.assign(fixed_x->begin(), fixed_x->end());
        } else {
            rec.x = draw_covariates(s, r);
        }
        const double t_star = sample_event_time(s, rec.x, uniform_open01(r));
        const double c = std::min(censor(r), s.admin_cutoff);
        rec.event = t_star <= c;
        rec.time = rec.event ? t_star : c;
        latent.push_back(t_star);
        records.push_back(std::move(rec));
    }

    std::vector<std::string> names;
    for (std::size_t j = 0; j < s.dim; ++j) names.push_back("x" + std::to_string(j + 1));
    // A sample with no events at all is astronomically unlikely for n of any
    // practical size; Dataset rejects it.
    return SimulatedData{Dataset(std::move(names), std::move(records)), TruthOracle(s), std::move(latent)};
}

}  // namespace

SimSetting make_setting(SettingId id) {
    SimSetting s;
    s.id = id;
    switch (id) {
        case SettingId::s1:
        case SettingId::s2:
        case SettingId::s3:
            s.dim = 3;
            s.beta.assign(std::begin(kS1Beta), std::end(kS1Beta));
            s.baseline_hazard = id == SettingId::s3 ? "h0(t) = 0.02" : "h0(t) = 0.1";
            s.censor_rate = 1.0 / 30.0;
            s.admin_cutoff = 30.0;
            s.covariate_law = CovariateLaw::uniform_pm1;
            s.grid = TimeGrid::uniform(0.1, 27.0, 0.1);
            break;
        case SettingId::s4:
        case SettingId::s5:
            s.dim = 5;
            s.baseline_hazard = "h0(t) = 0.1 t";
            s.censor_rate = id == SettingId::s4 ? 1.0 / 28.0 : 1.0 / 45.0;
            s.admin_cutoff = 34.0;
            s.covariate_law = CovariateLaw::gaussian_copula;
            s.grid = TimeGrid::uniform(2.0, 34.0, 0.1);
            break;
        default:
            throw ContractError("unknown simulation setting");
    }
    return s;
}

SimSetting make_setting(int id) {
    if (id < 1 || id > 5) throw ContractError("simulation setting must be 1..5");
    return make_setting(static_cast<SettingId>(id));
}

double g_eval(const SimSetting& s, double t, std::span<const double> x) {
    check_dim(s, x);
    switch (s.id) {
        case SettingId::s1: return linear_part(x);
        case SettingId::s2: return linear_part(x) + quadratic_part(x);
        case SettingId::s3: return s3_a(x) + s3_b(x) * t;
        case SettingId::s4: return s45_inner(x) - 8.2;
        case SettingId::s5: {
            const double v = s45_inner(x);
            return v * v / 20.0 - 6.0;
        }
    }
    throw ContractError("unknown simulation setting");
}

double baseline_cumulative_hazard(const SimSetting& s, double t) {
    switch (s.id) {
        case SettingId::s1:
        case SettingId::s2: return 0.1 * t;
        case SettingId::s3: return 0.02 * t;
        case SettingId::s4:
        case SettingId::s5: return 0.05 * t * t;
    }
    throw ContractError("unknown simulation setting");
}

double cumulative_hazard(const SimSetting& s, double t, std::span<const double> x) {
    check_dim(s, x);
    if (s.id == SettingId::s3) {
        const double a = s3_a(x);
        const double b = s3_b(x);
        // 0.02 e^a (e^{bt} - 1) / b, continuous at b = 0.
        const double bt = b * t;
        const double factor = bt == 0.0 ? t : std::expm1(bt) / b;
        return 0.02 * std::exp(a) * factor;
    }
    return baseline_cumulative_hazard(s, t) * std::exp(g_eval(s, t, x));
}

double sample_event_time(const SimSetting& s, std::span<const double> x, double u) {
    if (!(u > 0.0 && u < 1.0)) throw ContractError("inverse-transform draw must lie in (0, 1)");
    check_dim(s, x);
    const double target = -std::log(u);
    switch (s.id) {
        case SettingId::s1:
        case SettingId::s2: return target / (0.1 * std::exp(g_eval(s, 0.0, x)));
        case SettingId::s3: {
            const double scaled = target / (0.02 * std::exp(s3_a(x)));
            const double b = s3_b(x);
            // b >= 0, so the log argument 1 + b * scaled is always positive.
            return b == 0.0 ? scaled : std::log1p(b * scaled) / b;
        }
        case SettingId::s4:
        case SettingId::s5: return std::sqrt(target / (0.05 * std::exp(g_eval(s, 0.0, x))));
    }
    throw ContractError("unknown simulation setting");
}

std::vector<double> draw_covariates(const SimSetting& s, Rng& rng) {
    std::vector<double> x(s.dim);
    if (s.covariate_law == CovariateLaw::uniform_pm1) {
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (auto& v : x) v = unif(rng);
        return x;
    }
    // Equicorrelation rho = 0.5: z_j = sqrt(rho) w_0 + sqrt(1 - rho) w_j.
    std::normal_distribution<double> normal(0.0, 1.0);
    const double shared = normal(rng);
    const double root = std::sqrt(0.5);
    for (auto& v : x) v = 2.0 * std_normal_cdf(root * shared + root * normal(rng));
    return x;
}

double TruthOracle::survival(double t, std::span<const double> x) const {
    if (t <= 0.0) return 1.0;
    return std::exp(-cumulative_hazard(setting_, t, x));
}

SimulatedData generate(const SimSetting& s, std::size_t n, Rng& rng) {
    return generate_impl(s, std::nullopt, n, rng);
}

SimulatedData generate_at(const SimSetting& s, std::span<const double> x, std::size_t n, Rng& rng) {
    check_dim(s, x);
    return generate_impl(s, x, n, rng);
}

SurvCurve truth_curve(const TruthOracle& oracle, std::span<const double> x, const TimeGrid& grid) {
    std::vector<double> v;
    v.reserve(grid.size());
    double prev = 1.0;
    for (double t : grid.points()) {
        // exp is monotone but guard against a last-ulp wobble from expm1 in S3.
        prev = std::min(prev, oracle.survival(t, x));
        v.push_back(prev);
    }
    return SurvCurve(grid, std::move(v));
}

}  // namespace survband
