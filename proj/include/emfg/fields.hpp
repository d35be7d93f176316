#pragma once

// Law-dependent scalar fields x -> F(x, X) (potentials V and terminal costs psi).
// Binding a field to an ensemble computes the law summaries once, so the bound
// closure is cheap enough for grid sweeps.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "emfg/ensemble.hpp"

namespace emfg {

using PointView = std::span<const double>;
using BoundScalar = std::function<double(PointView)>;
using BoundGradient = std::function<void(PointView, std::span<double>)>;

struct LawField {
    std::string kind;
    std::function<BoundScalar(const Ensemble&)> bind_value;
    std::function<BoundGradient(const Ensemble&)> bind_gradient;

    double operator()(PointView x, const Ensemble& law) const { return bind_value(law)(x); }
    double operator()(double x, const Ensemble& law) const { return bind_value(law)(PointView(&x, 1)); }

    std::vector<double> gradient(PointView x, const Ensemble& law) const {
        std::vector<double> g(x.size());
        bind_gradient(law)(x, g);
        return g;
    }
};

using LawMatrix = std::function<Eigen::MatrixXd(const Ensemble&)>;
using LawVector = std::function<Eigen::VectorXd(const Ensemble&)>;
using LawScalar = std::function<double(const Ensemble&)>;

namespace fields {

inline LawField constant(double c) {
    return {"constant",
            [c](const Ensemble&) -> BoundScalar { return [c](PointView) { return c; }; },
            [](const Ensemble&) -> BoundGradient {
                return [](PointView, std::span<double> g) { std::fill(g.begin(), g.end(), 0.0); };
            }};
}

inline LawField zero() {
    auto f = constant(0.0);
    f.kind = "zero";
    return f;
}

/// alpha . x
inline LawField linear(std::vector<double> alpha) {
    return {"linear",
            [alpha](const Ensemble&) -> BoundScalar {
                return [alpha](PointView x) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < x.size(); ++k) s += alpha[k] * x[k];
                    return s;
                };
            },
            [alpha](const Ensemble&) -> BoundGradient {
                return [alpha](PointView x, std::span<double> g) {
                    for (std::size_t k = 0; k < x.size(); ++k) g[k] = alpha[k];
                };
            }};
}

/// kappa * E|x - X|^2 = kappa * (|x|^2 - 2 x.EX + E|X|^2)
inline LawField moment_quadratic(double kappa) {
    return {"moment_quadratic",
            [kappa](const Ensemble& law) -> BoundScalar {
                auto m = mean(law);
                const double s = moment(law, 2.0);
                return [kappa, m = std::move(m), s](PointView x) {
                    double xx = 0.0, xm = 0.0;
                    for (std::size_t k = 0; k < x.size(); ++k) {
                        xx += x[k] * x[k];
                        xm += x[k] * m[k];
                    }
                    return kappa * (xx - 2.0 * xm + s);
                };
            },
            [kappa](const Ensemble& law) -> BoundGradient {
                auto m = mean(law);
                return [kappa, m = std::move(m)](PointView x, std::span<double> g) {
                    for (std::size_t k = 0; k < x.size(); ++k) g[k] = 2.0 * kappa * (x[k] - m[k]);
                };
            }};
}

/// 1/2 x^T A(X) x + B(X).x + C(X)
inline LawField quadratic_form(LawMatrix a, LawVector b, LawScalar c) {
    return {"quadratic_form",
            [a, b, c](const Ensemble& law) -> BoundScalar {
                Eigen::MatrixXd A = a(law);
                Eigen::VectorXd B = b(law);
                const double C = c(law);
                return [A = std::move(A), B = std::move(B), C](PointView x) {
                    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
                    return 0.5 * xv.dot(A * xv) + B.dot(xv) + C;
                };
            },
            [a, b](const Ensemble& law) -> BoundGradient {
                const Eigen::MatrixXd A = a(law);
                Eigen::MatrixXd S = 0.5 * (A + A.transpose());
                Eigen::VectorXd B = b(law);
                return [S = std::move(S), B = std::move(B)](PointView x, std::span<double> g) {
                    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
                    Eigen::Map<Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(g.size()));
                    gv = S * xv + B;
                };
            }};
}

/// A |x|^4 + B
inline LawField quartic(double a, double b) {
    return {"quartic",
            [a, b](const Ensemble&) -> BoundScalar {
                return [a, b](PointView x) {
                    double r2 = 0.0;
                    for (double c : x) r2 += c * c;
                    return a * r2 * r2 + b;
                };
            },
            [a](const Ensemble&) -> BoundGradient {
                return [a](PointView x, std::span<double> g) {
                    double r2 = 0.0;
                    for (double c : x) r2 += c * c;
                    for (std::size_t k = 0; k < x.size(); ++k) g[k] = 4.0 * a * r2 * x[k];
                };
            }};
}

/// Arbitrary callable; the gradient is a central difference with step h.
inline LawField custom(std::function<double(PointView, const Ensemble&)> fn, double h = 1e-6) {
    return {"custom",
            [fn](const Ensemble& law) -> BoundScalar {
                return [fn, law](PointView x) { return fn(x, law); };
            },
            [fn, h](const Ensemble& law) -> BoundGradient {
                return [fn, law, h](PointView x, std::span<double> g) {
                    std::vector<double> y(x.begin(), x.end());
                    for (std::size_t k = 0; k < x.size(); ++k) {
                        y[k] = x[k] + h;
                        const double up = fn(y, law);
                        y[k] = x[k] - h;
                        const double dn = fn(y, law);
                        y[k] = x[k];
                        g[k] = (up - dn) / (2.0 * h);
                    }
                };
            }};
}

inline LawField scaled(LawField f, double s) {
    return {f.kind,
            [bv = f.bind_value, s](const Ensemble& law) -> BoundScalar {
                return [v = bv(law), s](PointView x) { return s * v(x); };
            },
            [bg = f.bind_gradient, s](const Ensemble& law) -> BoundGradient {
                return [g0 = bg(law), s](PointView x, std::span<double> g) {
                    g0(x, g);
                    for (double& c : g) c *= s;
                };
            }};
}

} // namespace fields

/// Largest difference quotient of x -> F(x, law) on n uniform probes of [lo, hi] (1-d).
inline double lipschitz_estimate(const LawField& f, const Ensemble& law, double lo, double hi, std::size_t n) {
    const auto v = f.bind_value(law);
    double best = 0.0;
    const double h = (hi - lo) / static_cast<double>(n - 1);
    double prev_x = lo;
    double prev = v(PointView(&prev_x, 1));
    for (std::size_t i = 1; i < n; ++i) {
        double x = lo + h * static_cast<double>(i);
        const double cur = v(PointView(&x, 1));
        best = std::max(best, std::abs(cur - prev) / h);
        prev = cur;
    }
    return best;
}

} // namespace emfg
