#pragma once

// Closed-form / ODE oracles for the two worked examples.
//
// Linear-quadratic: H = |p + beta EZ|^2/2 + x^T A(X) x/2 + B(X).x + C(X), terminal
// x^T M x/2 + N.x + Q. With u = x^T Gamma x/2 + Theta.x + zeta and w = EX',
// substitution into the HJB equation gives
//
//   -Gamma' + Gamma^T Gamma + A = 0
//   -Theta' + beta Gamma w + Gamma Theta + B = 0
//   -zeta'  + |Theta + beta w|^2/2 + C = 0
//
// coupled with X' = -Gamma X - Theta/(1+beta) + beta/(1+beta) Gamma EX.
//
// Quartic (x' = v/x, L = v^2/2 + x^4 + U): u = x^4 p(t) + q(t) with
// p' = 8p^2 - 1, q' = -U, X' = -4pX.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "emfg/ensemble.hpp"
#include "emfg/flow.hpp"
#include "emfg/grid.hpp"
#include "emfg/hamiltonian.hpp"

namespace emfg {

struct OracleOptions {
    /// RK4 sub-steps per solver time step.
    std::size_t substeps = 8;
    double tol = 1e-13;
    int max_iter = 500;
    /// Relaxation of the law path between passes (1 = plain iteration).
    double relaxation = 1.0;
};

struct LQState {
    std::vector<double> times;
    std::vector<Eigen::MatrixXd> gamma;
    std::vector<Eigen::VectorXd> theta;
    std::vector<double> zeta;
    /// E X'(t) at the solver times.
    std::vector<Eigen::VectorXd> mean_velocity;
    double beta = 0.0;
    int passes = 0;

    double value(PointView x, std::size_t m) const {
        const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
        return 0.5 * xv.dot(gamma[m] * xv) + theta[m].dot(xv) + zeta[m];
    }
    double value(double x, std::size_t m) const { return value(PointView(&x, 1), m); }
};

struct LQSolution {
    LQState state;
    TrajectoryEnsemble traj;
};

namespace detail {

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Samplewise LQ forward velocity.
inline Ensemble lq_velocity(const Ensemble& X, const Eigen::MatrixXd& G, const Eigen::VectorXd& th, double beta) {
    const Eigen::VectorXd ex = to_vector(mean(X));
    const Eigen::VectorXd common = -th / (1.0 + beta) + beta / (1.0 + beta) * (G * ex);
    std::vector<double> out(X.flat().size());
    const auto d = static_cast<Eigen::Index>(X.dim());
    for (std::size_t i = 0; i < X.size(); ++i) {
        const Eigen::Map<const Eigen::VectorXd> xi(X.point(i).data(), d);
        Eigen::Map<Eigen::VectorXd> vi(out.data() + i * X.dim(), d);
        vi = -G * xi + common;
    }
    return Ensemble(X.dim(), std::move(out), X.q());
}

} // namespace detail

/// Backward Riccati/affine system and forward population, iterated on the law path
/// (X(t), EX'(t)) until it stops changing. Constant coefficients with beta = 0
/// settle on the second pass.
inline LQSolution lq_solve(const LQCoefficients& coeffs, const Ensemble& x0, double beta, double horizon,
                           std::size_t steps, const OracleOptions& opt = {}) {
    require(beta != -1.0, ErrorCode::singular_coupling, "LQ oracle is singular for beta = -1");
    require(steps >= 1 && horizon > 0.0 && opt.substeps >= 1, ErrorCode::invalid_argument, "bad LQ oracle grid");
    const std::size_t K = steps * opt.substeps;
    const double h = horizon / static_cast<double>(K);
    const auto d = static_cast<Eigen::Index>(x0.dim());

    std::vector<Ensemble> X(K + 1, x0);
    std::vector<Eigen::VectorXd> w(K + 1, Eigen::VectorXd::Zero(d));
    std::vector<Eigen::MatrixXd> G(K + 1);
    std::vector<Eigen::VectorXd> Th(K + 1);
    std::vector<double> Ze(K + 1);
    std::vector<Ensemble> V(K + 1);

    int pass = 0;
    for (;;) {
        ++pass;
        // Coefficients along the current law path; stage values are node averages.
        std::vector<Eigen::MatrixXd> A(K + 1);
        std::vector<Eigen::VectorXd> B(K + 1);
        std::vector<double> C(K + 1);
        for (std::size_t k = 0; k <= K; ++k) {
            A[k] = coeffs.A(X[k]);
            B[k] = coeffs.B(X[k]);
            C[k] = coeffs.C(X[k]);
        }
        G[K] = coeffs.M(X[K]);
        Th[K] = coeffs.N(X[K]);
        Ze[K] = coeffs.Q(X[K]);

        struct Rates {
            Eigen::MatrixXd g;
            Eigen::VectorXd th;
            double ze;
        };
        auto rates = [beta](const Eigen::MatrixXd& g, const Eigen::VectorXd& th, const Eigen::MatrixXd& a,
                            const Eigen::VectorXd& b, double c, const Eigen::VectorXd& wv) {
            const Eigen::VectorXd shifted = th + beta * wv;
            return Rates{g.transpose() * g + a, g * th + beta * (g * wv) + b, 0.5 * shifted.squaredNorm() + c};
        };
        for (std::size_t k = K; k-- > 0;) {
            const Eigen::MatrixXd am = 0.5 * (A[k] + A[k + 1]);
            const Eigen::VectorXd bm = 0.5 * (B[k] + B[k + 1]);
            const double cm = 0.5 * (C[k] + C[k + 1]);
            const Eigen::VectorXd wm = 0.5 * (w[k] + w[k + 1]);
            // Integrate backward: y(t - h) = y(t) - h * y'.
            const Rates k1 = rates(G[k + 1], Th[k + 1], A[k + 1], B[k + 1], C[k + 1], w[k + 1]);
            const Rates k2 = rates(G[k + 1] - 0.5 * h * k1.g, Th[k + 1] - 0.5 * h * k1.th, am, bm, cm, wm);
            const Rates k3 = rates(G[k + 1] - 0.5 * h * k2.g, Th[k + 1] - 0.5 * h * k2.th, am, bm, cm, wm);
            const Rates k4 = rates(G[k + 1] - h * k3.g, Th[k + 1] - h * k3.th, A[k], B[k], C[k], w[k]);
            G[k] = G[k + 1] - h / 6.0 * (k1.g + 2.0 * k2.g + 2.0 * k3.g + k4.g);
            Th[k] = Th[k + 1] - h / 6.0 * (k1.th + 2.0 * k2.th + 2.0 * k3.th + k4.th);
            Ze[k] = Ze[k + 1] - h / 6.0 * (k1.ze + 2.0 * k2.ze + 2.0 * k3.ze + k4.ze);
            if (!G[k].allFinite() || G[k].cwiseAbs().maxCoeff() > 1e12) {
                std::ostringstream msg;
                const double t = h * static_cast<double>(k);
                msg << "Riccati solution escapes to infinity near t=" << t;
                throw FiniteEscape(msg.str(), t);
            }
        }

        // Forward population. Midpoint coefficients use cubic Hermite interpolation so the
        // forward RK4 keeps fourth order.
        std::vector<Rates> dn;
        dn.reserve(K + 1);
        for (std::size_t k = 0; k <= K; ++k) dn.push_back(rates(G[k], Th[k], A[k], B[k], C[k], w[k]));
        std::vector<Ensemble> Xn(K + 1);
        Xn[0] = x0;
        for (std::size_t k = 0; k < K; ++k) {
            const Eigen::MatrixXd gm = 0.5 * (G[k] + G[k + 1]) + h / 8.0 * (dn[k].g - dn[k + 1].g);
            const Eigen::VectorXd tm = 0.5 * (Th[k] + Th[k + 1]) + h / 8.0 * (dn[k].th - dn[k + 1].th);
            const Ensemble k1 = detail::lq_velocity(Xn[k], G[k], Th[k], beta);
            const Ensemble k2 = detail::lq_velocity(detail::axpy(Xn[k], 0.5 * h, k1), gm, tm, beta);
            const Ensemble k3 = detail::lq_velocity(detail::axpy(Xn[k], 0.5 * h, k2), gm, tm, beta);
            const Ensemble k4 = detail::lq_velocity(detail::axpy(Xn[k], h, k3), G[k + 1], Th[k + 1], beta);
            Xn[k + 1] = detail::rk4_combine(Xn[k], h, k1, k2, k3, k4);
        }
        double change = 0.0, scale = 1.0;
        std::vector<Eigen::VectorXd> wn(K + 1);
        for (std::size_t k = 0; k <= K; ++k) {
            V[k] = detail::lq_velocity(Xn[k], G[k], Th[k], beta);
            wn[k] = detail::to_vector(mean(V[k]));
            change = std::max(change, (wn[k] - w[k]).cwiseAbs().maxCoeff());
            for (std::size_t j = 0; j < Xn[k].flat().size(); ++j) {
                change = std::max(change, std::abs(Xn[k].flat()[j] - X[k].flat()[j]));
                scale = std::max(scale, std::abs(Xn[k].flat()[j]));
            }
        }
        const double r = opt.relaxation;
        for (std::size_t k = 0; k <= K; ++k) {
            w[k] = (1.0 - r) * w[k] + r * wn[k];
            X[k] = r == 1.0 ? std::move(Xn[k]) : detail::blend(X[k], Xn[k], r);
        }
        if (change <= opt.tol * scale) break;
        if (pass >= opt.max_iter) {
            std::ostringstream msg;
            msg << "LQ law-path iteration did not settle after " << pass << " passes (change " << change << ")";
            throw Error(ErrorCode::contraction_failure, msg.str());
        }
    }

    LQSolution out;
    out.state.beta = beta;
    out.state.passes = pass;
    for (std::size_t m = 0; m <= steps; ++m) {
        const std::size_t k = m * opt.substeps;
        const double t = m == steps ? horizon : horizon * static_cast<double>(m) / static_cast<double>(steps);
        out.state.times.push_back(t);
        out.state.gamma.push_back(G[k]);
        out.state.theta.push_back(Th[k]);
        out.state.zeta.push_back(Ze[k]);
        out.state.mean_velocity.push_back(w[k]);
        out.traj.times.push_back(t);
        out.traj.X.push_back(X[k]);
        out.traj.V.push_back(V[k]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Quartic example

inline constexpr double kSqrt2 = 1.4142135623730951;

/// p(t) = (1/(2 sqrt 2)) (1 + c e^{4 sqrt2 t}) / (1 - c e^{4 sqrt2 t})
inline double quartic_p(double c, double t) {
    const double y = c * std::exp(4.0 * kSqrt2 * t);
    return (1.0 + y) / (2.0 * kSqrt2 * (1.0 - y));
}

/// X(t)/X0 from integrating X' = -4pX with p above.
inline double quartic_trajectory_factor(double c, double t) {
    const double y = c * std::exp(4.0 * kSqrt2 * t);
    return std::sqrt((y - 1.0) / (c - 1.0)) * std::exp(-kSqrt2 * t);
}

/// [(c e^{4 sqrt2 t} - 1)/(c - 1)]^{-1/2} e^{sqrt2 t}, the reciprocal of the true factor; it does not
/// solve X' = -4pX and is kept only as a comparison target.
inline double quartic_trajectory_factor_reciprocal(double c, double t) {
    const double y = c * std::exp(4.0 * kSqrt2 * t);
    return std::pow((y - 1.0) / (c - 1.0), -0.5) * std::exp(kSqrt2 * t);
}

/// Integration constant c from p(T) = A.
inline double quartic_constant(double a, double horizon) {
    const double den = 2.0 * kSqrt2 * a + 1.0;
    require(den != 0.0 && std::isfinite(a), ErrorCode::root_solve_failure,
            "terminal value p(T) = -1/(2 sqrt 2) is outside the closed-form range");
    const double y_t = (2.0 * kSqrt2 * a - 1.0) / den;
    const double c = y_t * std::exp(-4.0 * kSqrt2 * horizon);
    // 1 - c e^{4 sqrt2 t} is monotone in t, so checking the endpoints suffices.
    const double left = 1.0 - c;
    const double right = 1.0 - y_t;
    require(left * right > 0.0, ErrorCode::singular_denominator,
            "closed-form denominator 1 - c e^{4 sqrt2 t} vanishes on [0, T]");
    return c;
}

struct QuarticState {
    std::vector<double> times;
    std::vector<double> p;      // closed form
    std::vector<double> p_ode;  // backward RK4 of p' = 8p^2 - 1
    std::vector<double> q;
    double c = 0.0;

    double value(double x, std::size_t m) const {
        const double x2 = x * x;
        return x2 * x2 * p[m] + q[m];
    }
    double max_closed_form_gap() const {
        double g = 0.0;
        for (std::size_t m = 0; m < p.size(); ++m) g = std::max(g, std::abs(p[m] - p_ode[m]));
        return g;
    }
};

struct QuarticSolution {
    QuarticState state;
    TrajectoryEnsemble traj;
};

inline QuarticSolution quartic_solve(const QuarticCoefficients& coeffs, const Ensemble& x0, double horizon,
                                     std::size_t steps, const OracleOptions& opt = {}) {
    require(x0.dim() == 1, ErrorCode::unsupported_dimension, "quartic oracle is one-dimensional");
    for (double v : x0.flat())
        require(v != 0.0, ErrorCode::invalid_argument, "quartic oracle needs samples away from 0");
    const double c = quartic_constant(coeffs.A, horizon);
    std::size_t sub = opt.substeps + (opt.substeps % 2); // even, for Simpson
    const std::size_t K = steps * sub;
    const double h = horizon / static_cast<double>(K);
    auto tk = [&](std::size_t k) { return k == K ? horizon : h * static_cast<double>(k); };

    // Backward RK4 for p' = 8p^2 - 1.
    std::vector<double> pode(K + 1);
    pode[K] = coeffs.A;
    auto f = [](double p) { return 8.0 * p * p - 1.0; };
    for (std::size_t k = K; k-- > 0;) {
        const double y = pode[k + 1];
        const double k1 = f(y);
        const double k2 = f(y - 0.5 * h * k1);
        const double k3 = f(y - 0.5 * h * k2);
        const double k4 = f(y - h * k3);
        pode[k] = y - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    // Forward RK4 for X' = -4 p(t) X with the closed-form p at exact stage times.
    std::vector<Ensemble> X(K + 1), V(K + 1);
    X[0] = x0;
    auto vel = [&](const Ensemble& e, double t) {
        const double rate = -4.0 * quartic_p(c, t);
        std::vector<double> out(e.flat().begin(), e.flat().end());
        for (double& v : out) v *= rate;
        return Ensemble(1, std::move(out), e.q());
    };
    for (std::size_t k = 0; k < K; ++k) {
        const double t = tk(k);
        const Ensemble k1 = vel(X[k], t);
        const Ensemble k2 = vel(detail::axpy(X[k], 0.5 * h, k1), t + 0.5 * h);
        const Ensemble k3 = vel(detail::axpy(X[k], 0.5 * h, k2), t + 0.5 * h);
        const Ensemble k4 = vel(detail::axpy(X[k], h, k3), t + h);
        X[k + 1] = detail::rk4_combine(X[k], h, k1, k2, k3, k4);
        V[k] = std::move(k1);
    }
    V[K] = vel(X[K], horizon);

    // q(t) = B + int_t^T U(X, X') ds by composite Simpson over node pairs.
    std::vector<double> U(K + 1);
    for (std::size_t k = 0; k <= K; ++k) U[k] = coeffs.U(X[k], V[k]);
    std::vector<double> q(K + 1);
    q[K] = coeffs.B;
    for (std::size_t k = K; k >= 2; k -= 2) {
        q[k - 2] = q[k] + h / 3.0 * (U[k - 2] + 4.0 * U[k - 1] + U[k]);
        q[k - 1] = q[k] + 0.5 * h * (U[k - 1] + U[k]); // odd nodes are never reported
    }

    QuarticSolution out;
    out.state.c = c;
    for (std::size_t m = 0; m <= steps; ++m) {
        const std::size_t k = m * sub;
        const double t = tk(k);
        out.state.times.push_back(t);
        out.state.p.push_back(quartic_p(c, t));
        out.state.p_ode.push_back(pode[k]);
        out.state.q.push_back(q[k]);
        out.traj.times.push_back(t);
        out.traj.X.push_back(X[k]);
        out.traj.V.push_back(V[k]);
    }
    return out;
}

/// max over solver times and samples of |X_reciprocal(t) - X_ode(t)|.
inline double quartic_reciprocal_trajectory_mismatch(const QuarticSolution& sol) {
    double worst = 0.0;
    const auto& x0 = sol.traj.X.front();
    for (std::size_t m = 0; m < sol.traj.times.size(); ++m) {
        const double factor = quartic_trajectory_factor_reciprocal(sol.state.c, sol.traj.times[m]);
        for (std::size_t i = 0; i < x0.size(); ++i)
            worst = std::max(worst, std::abs(factor * x0(i) - sol.traj.X[m](i)));
    }
    return worst;
}

/// Oracle values sampled on a solver grid (times must coincide).
template <class State>
ValueGrid oracle_value_grid(const State& state, const GridSpec& grid) {
    require(state.times.size() == grid.steps + 1, ErrorCode::invalid_argument, "oracle and grid time steps differ");
    std::vector<double> u((grid.steps + 1) * grid.nx);
    for (std::size_t m = 0; m <= grid.steps; ++m)
        for (std::size_t i = 0; i < grid.nx; ++i) u[m * grid.nx + i] = state.value(grid.x(i), m);
    return ValueGrid(grid, std::move(u));
}

} // namespace emfg
