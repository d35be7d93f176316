#pragma once

// Space-time grids for the 1-d value function and the population trajectory
// sharing the same uniform time grid.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <vector>

#include "emfg/detail/log.hpp"
#include "emfg/ensemble.hpp"
#include "emfg/error.hpp"

namespace emfg {

struct GridSpec {
    double x_lo = -1.0;
    double x_hi = 1.0;
    std::size_t nx = 101;
    double horizon = 1.0;
    std::size_t steps = 100;

    double dx() const { return (x_hi - x_lo) / static_cast<double>(nx - 1); }
    double dt() const { return horizon / static_cast<double>(steps); }
    double x(std::size_t i) const { return i + 1 == nx ? x_hi : x_lo + dx() * static_cast<double>(i); }
    double t(std::size_t m) const { return m == steps ? horizon : dt() * static_cast<double>(m); }

    void validate() const {
        require(nx >= 3, ErrorCode::invalid_argument, "grid needs nx >= 3");
        require(steps >= 1, ErrorCode::invalid_argument, "grid needs at least one time step");
        require(x_hi > x_lo && std::isfinite(x_lo) && std::isfinite(x_hi), ErrorCode::invalid_argument,
                "grid domain must be a finite nonempty interval");
        require(horizon > 0.0 && std::isfinite(horizon), ErrorCode::invalid_argument, "horizon must be positive");
    }
};

/// Counts out-of-domain gradient queries; more than 1% clamped escalates.
class ClampCounter {
public:
    void record(bool clamped) {
        ++queries_;
        if (clamped) ++clamped_;
    }
    std::size_t queries() const { return queries_; }
    std::size_t clamped() const { return clamped_; }
    void check() const {
        if (queries_ > 0 && 100 * clamped_ > queries_) {
            std::ostringstream msg;
            msg << clamped_ << " of " << queries_ << " gradient queries fell outside the grid; enlarge the domain";
            throw Error(ErrorCode::domain_too_small, msg.str());
        }
    }

private:
    std::size_t queries_ = 0;
    std::size_t clamped_ = 0;
};

namespace detail {

/// Locates x in a uniform grid: returns the left cell index and the fraction in [0, 1].
inline std::pair<std::size_t, double> locate(double x_lo, double dx, std::size_t nx, double x) {
    const double s = (x - x_lo) / dx;
    if (!(s > 0.0)) return {0, 0.0};
    const double last = static_cast<double>(nx - 1);
    if (s >= last) return {nx - 2, 1.0};
    const auto i = static_cast<std::size_t>(s);
    return {i, s - static_cast<double>(i)};
}

inline double interp(std::span<const double> values, double x_lo, double dx, double x) {
    const auto [i, w] = locate(x_lo, dx, values.size(), x);
    return (1.0 - w) * values[i] + w * values[i + 1];
}

/// Central differences inside, one-sided at the two ends.
inline void differentiate(std::span<const double> u, double dx, std::span<double> g) {
    const std::size_t n = u.size();
    g[0] = (u[1] - u[0]) / dx;
    g[n - 1] = (u[n - 1] - u[n - 2]) / dx;
    for (std::size_t i = 1; i + 1 < n; ++i) g[i] = (u[i + 1] - u[i - 1]) / (2.0 * dx);
}

} // namespace detail

/// One time slice of a value function (the iteration variable Phi of the fixed-point map).
class GridSlice {
public:
    GridSlice() = default;
    GridSlice(double x_lo, double x_hi, std::vector<double> values)
        : x_lo_(x_lo), x_hi_(x_hi), values_(std::move(values)), gradient_(values_.size()) {
        require(values_.size() >= 3, ErrorCode::invalid_argument, "grid slice needs at least 3 nodes");
        detail::differentiate(values_, dx(), gradient_);
    }

    double x_lo() const { return x_lo_; }
    double x_hi() const { return x_hi_; }
    std::size_t nx() const { return values_.size(); }
    double dx() const { return (x_hi_ - x_lo_) / static_cast<double>(values_.size() - 1); }
    double x(std::size_t i) const { return i + 1 == nx() ? x_hi_ : x_lo_ + dx() * static_cast<double>(i); }
    std::span<const double> values() const { return values_; }
    std::span<const double> gradient() const { return gradient_; }

    double value_at(double x) const { return detail::interp(values_, x_lo_, dx(), x); }

    /// Linear interpolation of the grid gradient; out-of-domain queries are clamped and logged.
    double gradient_at(double x, ClampCounter* counter = nullptr) const {
        const bool outside = x < x_lo_ || x > x_hi_;
        if (counter != nullptr) counter->record(outside);
        if (outside) {
            std::ostringstream msg;
            msg << "gradient query at x=" << x << " clamped to [" << x_lo_ << ", " << x_hi_ << "]";
            log::debug(msg.str());
        }
        return detail::interp(gradient_, x_lo_, dx(), std::clamp(x, x_lo_, x_hi_));
    }

    double sup_distance(const GridSlice& other) const {
        require(other.nx() == nx(), ErrorCode::invalid_argument, "slices live on different grids");
        double d = 0.0;
        for (std::size_t i = 0; i < nx(); ++i) d = std::max(d, std::abs(values_[i] - other.values_[i]));
        return d;
    }

private:
    double x_lo_ = 0.0;
    double x_hi_ = 1.0;
    std::vector<double> values_;
    std::vector<double> gradient_;
};

/// Value function u[m][i] and its spatial gradient on a uniform space-time grid.
class ValueGrid {
public:
    ValueGrid() = default;
    ValueGrid(GridSpec spec, std::vector<double> values) : spec_(spec), values_(std::move(values)) {
        spec_.validate();
        require(values_.size() == (spec_.steps + 1) * spec_.nx, ErrorCode::invalid_argument,
                "value grid size does not match its spec");
        gradient_.resize(values_.size());
        for (std::size_t m = 0; m <= spec_.steps; ++m)
            detail::differentiate(row(m), spec_.dx(), std::span<double>(gradient_.data() + m * spec_.nx, spec_.nx));
    }

    const GridSpec& spec() const { return spec_; }
    double u(std::size_t m, std::size_t i) const { return values_[m * spec_.nx + i]; }
    double g(std::size_t m, std::size_t i) const { return gradient_[m * spec_.nx + i]; }
    std::span<const double> row(std::size_t m) const { return {values_.data() + m * spec_.nx, spec_.nx}; }
    std::span<const double> gradient_row(std::size_t m) const { return {gradient_.data() + m * spec_.nx, spec_.nx}; }

    GridSlice slice(std::size_t m) const {
        const auto r = row(m);
        return GridSlice(spec_.x_lo, spec_.x_hi, std::vector<double>(r.begin(), r.end()));
    }

    double value_at(double x, std::size_t m) const { return detail::interp(row(m), spec_.x_lo, spec_.dx(), x); }

private:
    GridSpec spec_;
    std::vector<double> values_;
    std::vector<double> gradient_;
};

/// Linear interpolation of the grid gradient at time index m. Out-of-domain x is
/// clamped with a warning; pass a counter to get the escalation policy.
inline double gradient_at(const ValueGrid& vg, double x, std::size_t m, ClampCounter* counter = nullptr) {
    require(m <= vg.spec().steps, ErrorCode::invalid_argument, "time index outside the grid");
    const auto& s = vg.spec();
    const bool outside = x < s.x_lo || x > s.x_hi;
    if (counter != nullptr) counter->record(outside);
    if (outside) {
        std::ostringstream msg;
        msg << "gradient query at x=" << x << " clamped to [" << s.x_lo << ", " << s.x_hi << "]";
        log::warning(msg.str());
    }
    return detail::interp(vg.gradient_row(m), s.x_lo, s.dx(), std::clamp(x, s.x_lo, s.x_hi));
}

struct RegularityReport {
    double max_abs = 0.0;
    double lip_const = 0.0;
    /// max second difference / dx^2 over slices with t <= t1 (may be negative).
    double semiconcavity_const = -std::numeric_limits<double>::infinity();
};

namespace detail {
inline void accumulate_regularity(std::span<const double> u, double dx, bool semiconcavity, RegularityReport& r) {
    for (std::size_t i = 0; i < u.size(); ++i) {
        r.max_abs = std::max(r.max_abs, std::abs(u[i]));
        if (i + 1 < u.size()) r.lip_const = std::max(r.lip_const, std::abs(u[i + 1] - u[i]) / dx);
        if (semiconcavity && i > 0 && i + 1 < u.size())
            r.semiconcavity_const = std::max(r.semiconcavity_const, (u[i + 1] + u[i - 1] - 2.0 * u[i]) / (dx * dx));
    }
}
} // namespace detail

/// Bound, discrete Lipschitz and semiconcavity constants; the latter over slices with t <= t1.
inline RegularityReport regularity_report(const ValueGrid& vg, double t1) {
    RegularityReport r;
    const auto& s = vg.spec();
    for (std::size_t m = 0; m <= s.steps; ++m)
        detail::accumulate_regularity(vg.row(m), s.dx(), s.t(m) <= t1 + 1e-12 * s.horizon, r);
    return r;
}

inline RegularityReport regularity_report(const ValueGrid& vg) { return regularity_report(vg, 0.9 * vg.spec().horizon); }

inline RegularityReport regularity_report(const GridSlice& slice) {
    RegularityReport r;
    detail::accumulate_regularity(slice.values(), slice.dx(), true, r);
    return r;
}

/// Population curve t_m -> (X(t_m), X'(t_m)) with the costates used to build it.
struct TrajectoryEnsemble {
    std::vector<double> times;
    std::vector<Ensemble> X;
    std::vector<Ensemble> V;
    std::vector<Ensemble> P; // may be empty (e.g. oracle trajectories)

    std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
    std::size_t samples() const { return X.empty() ? 0 : X.front().size(); }
    double horizon() const { return times.back(); }

    void validate() const {
        require(!times.empty() && X.size() == times.size() && V.size() == times.size(), ErrorCode::invalid_argument,
                "trajectory arrays must match the time grid");
        for (std::size_t m = 0; m < X.size(); ++m)
            require(X[m].same_shape(X[0]) && V[m].same_shape(X[0]), ErrorCode::invalid_argument,
                    "trajectory must keep N and d constant");
    }

    /// max_m ||(X[m+1] - X[m]) / dt - V[m]||_{L^q}.
    double finite_difference_defect() const {
        double worst = 0.0;
        for (std::size_t m = 0; m + 1 < X.size(); ++m) {
            const double dt = times[m + 1] - times[m];
            std::vector<double> r(X[m].flat().size());
            for (std::size_t k = 0; k < r.size(); ++k)
                r[k] = (X[m + 1].flat()[k] - X[m].flat()[k]) / dt - V[m].flat()[k];
            worst = std::max(worst, lq_norm(Ensemble(X[m].dim(), std::move(r), X[m].q()), X[m].q()));
        }
        return worst;
    }
};

/// max_m W_r(a.X[m], b.X[m]) (moment proxy when d > 1).
inline double trajectory_distance(const TrajectoryEnsemble& a, const TrajectoryEnsemble& b, double r) {
    require(a.X.size() == b.X.size(), ErrorCode::invalid_argument, "trajectories use different time grids");
    double d = 0.0;
    for (std::size_t m = 0; m < a.X.size(); ++m) d = std::max(d, law_distance(a.X[m], b.X[m], r));
    return d;
}

} // namespace emfg
