#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace survband {

// Strictly increasing, finite, positive evaluation times. Copies share the
// underlying storage.
class TimeGrid {
public:
    TimeGrid();
    explicit TimeGrid(std::vector<double> points);

    // first, first + step, ... up to `last` (inclusive, to within step/1000).
    // Points are computed as first + k * step, never by accumulation.
    static TimeGrid uniform(double first, double last, double step);

    std::span<const double> points() const noexcept { return *points_; }
    std::size_t size() const noexcept { return points_->size(); }
    bool empty() const noexcept { return points_->empty(); }
    double operator[](std::size_t k) const { return (*points_)[k]; }
    double tau() const { return points_->back(); }

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) noexcept {
        return a.points_ == b.points_ || *a.points_ == *b.points_;
    }

private:
    std::shared_ptr<const std::vector<double>> points_;
};

// A survival function sampled on a grid: values in [0, 1], non-increasing.
class SurvCurve {
public:
    SurvCurve() = default;
    // Throws ContractError if the invariants do not hold.
    SurvCurve(TimeGrid grid, std::vector<double> values);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t k) const { return values_[k]; }

private:
    TimeGrid grid_;
    std::vector<double> values_;
};

// Pointwise arithmetic mean of curves sharing one grid.
SurvCurve mean_curve(std::span<const SurvCurve> curves);

}  // namespace survband
