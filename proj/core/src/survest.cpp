#include "survband/survest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "survband/errors.hpp"

namespace survband {

namespace {

class ConstantG final : public GFunction {
public:
    explicit ConstantG(double v) : value_(v) {}
    Eigen::VectorXd evaluate(std::span<const double> times,
                             const Eigen::Ref<const Eigen::MatrixXd>&) const override {
        return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(times.size()), value_);
    }

private:
    double value_;
};

class CallableG final : public GFunction {
public:
    explicit CallableG(std::function<double(double, std::span<const double>)> fn) : fn_(std::move(fn)) {}
    Eigen::VectorXd evaluate(std::span<const double> times,
                             const Eigen::Ref<const Eigen::MatrixXd>& xs) const override {
        Eigen::VectorXd out(static_cast<Eigen::Index>(times.size()));
        std::vector<double> x(static_cast<std::size_t>(xs.rows()));
        for (std::size_t k = 0; k < times.size(); ++k) {
            for (Eigen::Index j = 0; j < xs.rows(); ++j)
                x[static_cast<std::size_t>(j)] = xs(j, static_cast<Eigen::Index>(k));
            out(static_cast<Eigen::Index>(k)) = fn_(times[k], x);
        }
        return out;
    }

private:
    std::function<double(double, std::span<const double>)> fn_;
};

class NetG final : public GFunction {
public:
    explicit NetG(std::shared_ptr<const HazardNet> net) : net_(std::move(net)) {
        if (!net_) throw ContractError("null network");
    }
    Eigen::VectorXd evaluate(std::span<const double> times,
                             const Eigen::Ref<const Eigen::MatrixXd>& xs) const override {
        const auto d = static_cast<Eigen::Index>(net_->covariate_dim());
        if (xs.rows() != d) throw ContractError("covariate dimension does not match the network");
        if (static_cast<std::size_t>(xs.cols()) != times.size())
            throw ContractError("times and covariates disagree in length");
        Eigen::MatrixXd in(d + 1, xs.cols());
        in.topRows(d) = xs;
        const auto& ts = net_->scaling().time;
        for (std::size_t k = 0; k < times.size(); ++k) in(d, static_cast<Eigen::Index>(k)) = ts.apply(times[k]);
        return net_->forward(in, Mode::infer).transpose();
    }

private:
    std::shared_ptr<const HazardNet> net_;
};

class EnsembleG final : public GFunction {
public:
    explicit EnsembleG(std::vector<GFunctionPtr> members) : members_(std::move(members)) {
        if (members_.empty()) throw ContractError("ensemble needs at least one member");
        for (const auto& m : members_)
            if (!m) throw ContractError("null ensemble member");
    }
    Eigen::VectorXd evaluate(std::span<const double> times,
                             const Eigen::Ref<const Eigen::MatrixXd>& xs) const override {
        Eigen::VectorXd acc = members_.front()->evaluate(times, xs);
        for (std::size_t m = 1; m < members_.size(); ++m) acc += members_[m]->evaluate(times, xs);
        return acc / static_cast<double>(members_.size());
    }
    std::size_t ensemble_size() const noexcept override { return members_.size(); }

private:
    std::vector<GFunctionPtr> members_;
};

double clamped_exp(double g) { return std::exp(std::clamp(g, -kMaxAbsG, kMaxAbsG)); }

}  // namespace

double GFunction::operator()(double t, std::span<const double> x) const {
    Eigen::Map<const Eigen::VectorXd> col(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::MatrixXd xs = col;
    return evaluate(std::span<const double>(&t, 1), xs)(0);
}

GFunctionPtr constant_g(double value) { return std::make_shared<ConstantG>(value); }

GFunctionPtr callable_g(std::function<double(double, std::span<const double>)> fn) {
    return std::make_shared<CallableG>(std::move(fn));
}

GFunctionPtr net_g(std::shared_ptr<const HazardNet> net) { return std::make_shared<NetG>(std::move(net)); }

GFunctionPtr net_g(HazardNet net) { return net_g(std::make_shared<const HazardNet>(std::move(net))); }

GFunctionPtr ensemble_g(std::vector<GFunctionPtr> members) {
    return std::make_shared<EnsembleG>(std::move(members));
}

std::vector<double> BreslowBaseline::cumulative() const {
    std::vector<double> out(increments.size());
    std::partial_sum(increments.begin(), increments.end(), out.begin());
    return out;
}

BreslowBaseline breslow_fit(const Dataset& ds, std::span<const std::size_t> rows, const GFunction& g) {
    std::vector<std::size_t> sorted(rows.begin(), rows.end());
    for (auto r : sorted)
        if (r >= ds.size()) throw ContractError("row index out of range");
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](std::size_t a, std::size_t b) { return ds[a].time < ds[b].time; });
    const Eigen::MatrixXd xs = ds.covariates(sorted);
    const std::size_t n = sorted.size();

    BreslowBaseline out;
    std::vector<double> times;
    for (std::size_t begin = 0; begin < n;) {
        const double t = ds[sorted[begin]].time;
        std::size_t end = begin;
        std::size_t events = 0;
        while (end < n && ds[sorted[end]].time == t) {
            events += ds[sorted[end]].event ? 1 : 0;
            ++end;
        }
        if (events > 0) {
            // Risk set {j : t_j >= t} is the sorted suffix starting at `begin`.
            const auto at_risk = static_cast<Eigen::Index>(n - begin);
            times.assign(static_cast<std::size_t>(at_risk), t);
            Eigen::VectorXd gv = g.evaluate(times, xs.rightCols(at_risk));
            double denom = 0.0;
            for (Eigen::Index k = 0; k < gv.size(); ++k) denom += clamped_exp(gv(k));
            out.event_times.push_back(t);
            out.increments.push_back(static_cast<double>(events) / denom);
        }
        begin = end;
    }
    if (out.event_times.empty()) throw ContractError("Breslow fit needs at least one event");
    return out;
}

BreslowBaseline breslow_fit(const Dataset& ds, const GFunction& g) {
    auto rows = all_rows(ds.size());
    return breslow_fit(ds, rows, g);
}

std::vector<SurvCurve> survival_curves(const BreslowBaseline& baseline, const GFunction& g,
                                       const Eigen::Ref<const Eigen::MatrixXd>& xs, const TimeGrid& grid,
                                       BeyondLastEvent policy) {
    if (baseline.event_times.empty()) throw ContractError("empty baseline");
    if (grid.empty()) throw ContractError("empty time grid");
    if (policy == BeyondLastEvent::reject && grid.tau() > baseline.last_event_time())
        throw ContractError("grid extends beyond the last event time of the baseline");

    // Event times that can contribute on this grid.
    const auto used = static_cast<std::size_t>(
        std::upper_bound(baseline.event_times.begin(), baseline.event_times.end(), grid.tau()) -
        baseline.event_times.begin());
    const auto m = static_cast<std::size_t>(xs.cols());

    Eigen::VectorXd gv;
    if (used > 0 && m > 0) {
        std::vector<double> times(used * m);
        Eigen::MatrixXd cols(xs.rows(), static_cast<Eigen::Index>(used * m));
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t e = 0; e < used; ++e) {
                const std::size_t c = i * used + e;
                times[c] = baseline.event_times[e];
                cols.col(static_cast<Eigen::Index>(c)) = xs.col(static_cast<Eigen::Index>(i));
            }
        gv = g.evaluate(times, cols);
    }

    std::vector<SurvCurve> curves;
    curves.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> values(grid.size());
        double H = 0.0;
        std::size_t e = 0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            while (e < used && baseline.event_times[e] <= grid[k]) {
                H += baseline.increments[e] * clamped_exp(gv(static_cast<Eigen::Index>(i * used + e)));
                ++e;
            }
            values[k] = std::exp(-H);
        }
        curves.emplace_back(grid, std::move(values));
    }
    return curves;
}

SurvCurve survival_curve(const BreslowBaseline& baseline, const GFunction& g, std::span<const double> x,
                         const TimeGrid& grid, BeyondLastEvent policy) {
    Eigen::Map<const Eigen::VectorXd> col(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::MatrixXd xs = col;
    return std::move(survival_curves(baseline, g, xs, grid, policy).front());
}

}  // namespace survband
