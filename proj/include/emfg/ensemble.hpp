#pragma once

// Empirical random variables: N equal-weight sample points in R^d standing for
// an element of L^q(Omega). The sample index plays the role of omega, so two
// ensembles of equal size are "defined on the same probability space" and may be
// combined samplewise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "emfg/error.hpp"

namespace emfg {

class Ensemble {
public:
    Ensemble() = default;

    /// `flat` is row-major: sample i occupies [i*dim, (i+1)*dim).
    Ensemble(std::size_t dim, std::vector<double> flat, double q = 2.0)
        : dim_(dim), data_(std::move(flat)), q_(q) {
        require(dim_ >= 1, ErrorCode::invalid_argument, "ensemble dimension must be positive");
        require(!data_.empty() && data_.size() % dim_ == 0, ErrorCode::invalid_argument,
                "ensemble needs at least one sample and a whole number of rows");
        require(q_ >= 1.0 && std::isfinite(q_), ErrorCode::invalid_argument, "moment exponent q must be >= 1");
        for (double v : data_)
            require(std::isfinite(v), ErrorCode::non_finite, "ensemble coordinates must be finite");
    }

    static Ensemble scalar(std::vector<double> xs, double q = 2.0) { return Ensemble(1, std::move(xs), q); }

    /// N copies of one point (a deterministic random variable).
    static Ensemble constant(std::size_t n, std::span<const double> point, double q = 2.0) {
        std::vector<double> flat;
        flat.reserve(n * point.size());
        for (std::size_t i = 0; i < n; ++i) flat.insert(flat.end(), point.begin(), point.end());
        return Ensemble(point.size(), std::move(flat), q);
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
    double q() const noexcept { return q_; }

    double operator()(std::size_t i, std::size_t k = 0) const { return data_[i * dim_ + k]; }
    double& operator()(std::size_t i, std::size_t k = 0) { return data_[i * dim_ + k]; }

    std::span<const double> point(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    std::span<double> point(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

    std::span<const double> flat() const noexcept { return data_; }
    std::span<double> flat() noexcept { return data_; }

    bool same_shape(const Ensemble& other) const noexcept {
        return dim_ == other.dim_ && data_.size() == other.data_.size();
    }

    friend bool operator==(const Ensemble& a, const Ensemble& b) {
        return a.dim_ == b.dim_ && a.q_ == b.q_ && a.data_ == b.data_;
    }

private:
    std::size_t dim_ = 0;
    std::vector<double> data_;
    double q_ = 2.0;
};

/// Joint samples (x_i, z_i); the pairing order is significant.
struct PairedEnsemble {
    Ensemble x;
    Ensemble z;

    PairedEnsemble(Ensemble state, Ensemble velocity) : x(std::move(state)), z(std::move(velocity)) {
        require(x.same_shape(z), ErrorCode::invalid_argument, "paired ensemble marginals must share N and d");
    }

    std::size_t size() const noexcept { return x.size(); }
    std::size_t dim() const noexcept { return x.dim(); }
};

inline double norm(std::span<const double> v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return std::sqrt(s);
}

inline double moment(const Ensemble& e, double r) {
    require(r >= 1.0, ErrorCode::invalid_argument, "moment order must be >= 1");
    double s = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) s += std::pow(norm(e.point(i)), r);
    return s / static_cast<double>(e.size());
}

inline std::vector<double> mean(const Ensemble& e) {
    std::vector<double> m(e.dim(), 0.0);
    for (std::size_t i = 0; i < e.size(); ++i)
        for (std::size_t k = 0; k < e.dim(); ++k) m[k] += e(i, k);
    for (double& v : m) v /= static_cast<double>(e.size());
    return m;
}

/// (E|X - Y|^r)^{1/r} for ensembles on the same sample space.
inline double lq_distance(const Ensemble& a, const Ensemble& b, double r) {
    require(a.same_shape(b), ErrorCode::invalid_argument, "lq_distance needs ensembles of equal shape");
    double s = 0.0;
    std::vector<double> diff(a.dim());
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t k = 0; k < a.dim(); ++k) diff[k] = a(i, k) - b(i, k);
        s += std::pow(norm(diff), r);
    }
    return std::pow(s / static_cast<double>(a.size()), 1.0 / r);
}

inline double lq_norm(const Ensemble& a, double r) { return std::pow(moment(a, r), 1.0 / r); }

/// Exact order-r Wasserstein distance between two 1-d empirical laws. Sizes may
/// differ: the quantile functions are compared on the common refinement of the
/// breakpoints i/N and j/M.
inline double wasserstein_1d(const Ensemble& a, const Ensemble& b, double r) {
    require(a.dim() == 1 && b.dim() == 1, ErrorCode::unsupported_dimension,
            "wasserstein_1d requires one-dimensional ensembles");
    require(r >= 1.0, ErrorCode::invalid_argument, "Wasserstein order must be >= 1");
    std::vector<double> xs(a.flat().begin(), a.flat().end());
    std::vector<double> ys(b.flat().begin(), b.flat().end());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    const std::size_t n = xs.size();
    const std::size_t m = ys.size();
    double acc = 0.0;
    if (n == m) {
        for (std::size_t i = 0; i < n; ++i) acc += std::pow(std::abs(xs[i] - ys[i]), r);
        return std::pow(acc / static_cast<double>(n), 1.0 / r);
    }
    // Integer positions in units of 1/(n*m).
    std::size_t i = 0, j = 0, pos = 0;
    const std::size_t total = n * m;
    while (pos < total) {
        const std::size_t next = std::min((i + 1) * m, (j + 1) * n);
        acc += static_cast<double>(next - pos) * std::pow(std::abs(xs[i] - ys[j]), r);
        pos = next;
        if (pos == (i + 1) * m) ++i;
        if (pos == (j + 1) * n) ++j;
    }
    return std::pow(acc / static_cast<double>(total), 1.0 / r);
}

/// Cheap proxy for d > 1: Euclidean distance between (mean, second-moment) vectors.
/// Not a metric on laws; only used where 1-d transport is unavailable.
inline double moment_distance(const Ensemble& a, const Ensemble& b) {
    require(a.dim() == b.dim(), ErrorCode::invalid_argument, "moment_distance needs equal dimension");
    const auto ma = mean(a);
    const auto mb = mean(b);
    double s = 0.0;
    for (std::size_t k = 0; k < ma.size(); ++k) s += (ma[k] - mb[k]) * (ma[k] - mb[k]);
    const double d2 = moment(a, 2.0) - moment(b, 2.0);
    return std::sqrt(s + d2 * d2);
}

/// Law distance used by solver diagnostics: exact W_r in 1-d, moment proxy otherwise.
inline double law_distance(const Ensemble& a, const Ensemble& b, double r) {
    return a.dim() == 1 ? wasserstein_1d(a, b, r) : moment_distance(a, b);
}

/// Same samples reordered by `perm` (perm[i] is the source index of sample i).
inline Ensemble permuted(const Ensemble& e, std::span<const std::size_t> perm) {
    require(perm.size() == e.size(), ErrorCode::invalid_argument, "permutation size mismatch");
    std::vector<double> flat;
    flat.reserve(e.flat().size());
    for (std::size_t src : perm) {
        const auto p = e.point(src);
        flat.insert(flat.end(), p.begin(), p.end());
    }
    return Ensemble(e.dim(), std::move(flat), e.q());
}

} // namespace emfg
