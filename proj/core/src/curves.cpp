#include "survband/curves.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "survband/errors.hpp"

namespace survband {

TimeGrid::TimeGrid() : points_(std::make_shared<const std::vector<double>>()) {}

TimeGrid::TimeGrid(std::vector<double> points) {
    for (std::size_t k = 0; k < points.size(); ++k) {
        if (!std::isfinite(points[k]) || points[k] <= 0.0)
            throw ContractError("time grid points must be finite and positive");
        if (k > 0 && !(points[k] > points[k - 1]))
            throw ContractError("time grid must be strictly increasing");
    }
    points_ = std::make_shared<const std::vector<double>>(std::move(points));
}

TimeGrid TimeGrid::uniform(double first, double last, double step) {
    if (!(step > 0.0) || last < first) throw ContractError("invalid uniform grid specification");
    std::vector<double> pts;
    for (std::size_t k = 0;; ++k) {
        double t = first + static_cast<double>(k) * step;
        if (t > last + step * 1e-3) break;
        pts.push_back(t);
    }
    return TimeGrid(std::move(pts));
}

SurvCurve::SurvCurve(TimeGrid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw ContractError("curve length does not match its grid");
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (!(values_[k] >= 0.0 && values_[k] <= 1.0))
            throw ContractError("survival value outside [0, 1] at grid index " + std::to_string(k));
        if (k > 0 && values_[k] > values_[k - 1])
            throw ContractError("survival curve increases at grid index " + std::to_string(k));
    }
}

SurvCurve mean_curve(std::span<const SurvCurve> curves) {
    if (curves.empty()) throw ContractError("mean of zero curves");
    const auto& grid = curves.front().grid();
    std::vector<double> acc(grid.size(), 0.0);
    for (const auto& c : curves) {
        if (!(c.grid() == grid)) throw ContractError("curves do not share a grid");
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += c[k];
    }
    const double inv = 1.0 / static_cast<double>(curves.size());
    for (auto& v : acc) v = std::min(1.0, v * inv);
    return SurvCurve(grid, std::move(acc));
}

}  // namespace survband
