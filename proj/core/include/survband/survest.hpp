#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "survband/curves.hpp"
#include "survband/dataset.hpp"
#include "survband/hazardnet.hpp"

namespace survband {

// Log relative risk g(t, x) on raw time and standardized covariates.
// Implementations must be safe to call concurrently.
class GFunction {
public:
    virtual ~GFunction() = default;

    // out[k] = g(times[k], covariates.col(k)).
    virtual Eigen::VectorXd evaluate(std::span<const double> times,
                                     const Eigen::Ref<const Eigen::MatrixXd>& covariates) const = 0;

    // 1 for a single run, M for an ensemble of M runs.
    virtual std::size_t ensemble_size() const noexcept { return 1; }

    double operator()(double t, std::span<const double> x) const;
};

using GFunctionPtr = std::shared_ptr<const GFunction>;

GFunctionPtr constant_g(double value);
GFunctionPtr callable_g(std::function<double(double, std::span<const double>)> fn);
GFunctionPtr net_g(std::shared_ptr<const HazardNet> net);
GFunctionPtr net_g(HazardNet net);

// Pointwise arithmetic mean of the members. Throws ContractError when empty.
GFunctionPtr ensemble_g(std::vector<GFunctionPtr> members);

// Values of g are clamped to this range before exponentiation.
inline constexpr double kMaxAbsG = 30.0;

// Step-function cumulative baseline hazard.
struct BreslowBaseline {
    std::vector<double> event_times;  // distinct, increasing
    std::vector<double> increments;   // >= 0, one per event time

    double last_event_time() const { return event_times.back(); }
    std::vector<double> cumulative() const;
};

// increment at each distinct event time t = (#events at t) /
// sum_{j : t_j >= t} exp{g(t, x_j)} over the given rows (a multiset).
// Throws ContractError when the rows contain no event.
BreslowBaseline breslow_fit(const Dataset& ds, std::span<const std::size_t> rows, const GFunction& g);
BreslowBaseline breslow_fit(const Dataset& ds, const GFunction& g);

// What to do with grid points after the last event time of the baseline.
enum class BeyondLastEvent {
    reject,  // ContractError
    hold,    // keep the curve flat (right-continuous step, no further jumps)
};

// S(t|x) = exp{-sum_{t_i <= t} dH0(t_i) exp g(t_i, x)} on the grid, x standardized.
SurvCurve survival_curve(const BreslowBaseline& baseline, const GFunction& g, std::span<const double> x,
                         const TimeGrid& grid, BeyondLastEvent policy = BeyondLastEvent::reject);

// Same for many covariate vectors (columns of xs) with one g evaluation call.
std::vector<SurvCurve> survival_curves(const BreslowBaseline& baseline, const GFunction& g,
                                       const Eigen::Ref<const Eigen::MatrixXd>& xs, const TimeGrid& grid,
                                       BeyondLastEvent policy = BeyondLastEvent::reject);

}  // namespace survband
