#pragma once

// Solver for the implicit velocity relation Z = -D_pH(X, P, Y, Z), i.e. the map
// Z = G(X, P, Y). Quadratic-coupled families have a closed form; custom families
// are handled by fixed-point iteration under a declared contraction constant.

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "emfg/ensemble.hpp"
#include "emfg/hamiltonian.hpp"

namespace emfg {

struct VelocityOptions {
    double tol = 1e-12;
    int max_iter = 200;
};

struct VelocityResult {
    Ensemble z;
    int iterations = 0;
    /// ||Z + D_pH(X, P, Y, Z)||_{L^q} at return.
    double residual = 0.0;
    /// Geometric mean of successive-change ratios (custom families; 0 otherwise).
    double measured_rate = 0.0;
};

/// ||Z + D_pH(X_i, P_i, Y, Z)||_{L^q} with q taken from P.
inline double velocity_residual(const HamiltonianFamily& fam, const Ensemble& X, const Ensemble& P, const Ensemble& Y,
                                const Ensemble& Z) {
    const auto b = fam.bind(Y, Z);
    std::vector<double> r(Z.flat().size());
    std::vector<double> dp(Z.dim());
    for (std::size_t i = 0; i < Z.size(); ++i) {
        b.dp_hamiltonian(X.point(i), P.point(i), dp);
        for (std::size_t k = 0; k < Z.dim(); ++k) r[i * Z.dim() + k] = Z(i, k) + dp[k];
    }
    return lq_norm(Ensemble(Z.dim(), std::move(r), P.q()), P.q());
}

namespace detail {

inline Ensemble closed_form_velocity(double beta, const Ensemble& P) {
    require(beta != -1.0, ErrorCode::singular_coupling, "velocity equation is singular for beta = -1");
    const auto ep = mean(P);
    const double w = beta / (1.0 + beta);
    std::vector<double> z(P.flat().size());
    for (std::size_t i = 0; i < P.size(); ++i)
        for (std::size_t k = 0; k < P.dim(); ++k) z[i * P.dim() + k] = w * ep[k] - P(i, k);
    return Ensemble(P.dim(), std::move(z), P.q());
}

inline Ensemble quartic_velocity(const Ensemble& X, const Ensemble& P) {
    std::vector<double> z(P.flat().size());
    for (std::size_t i = 0; i < P.size(); ++i) {
        const double x = X(i);
        require(x != 0.0, ErrorCode::invalid_argument, "quartic dynamics undefined at x = 0");
        z[i] = -P(i) / (x * x);
    }
    return Ensemble(1, std::move(z), P.q());
}

} // namespace detail

inline VelocityResult solve_velocity(const HamiltonianFamily& fam, const Ensemble& X, const Ensemble& P,
                                     const Ensemble& Y, const VelocityOptions& opt = {}) {
    require(X.same_shape(P), ErrorCode::invalid_argument, "velocity solve needs X and P of equal shape");
    VelocityResult out;
    switch (fam.kind) {
    case FamilyKind::quadratic_coupled:
    case FamilyKind::lq:
        out.z = detail::closed_form_velocity(fam.beta, P);
        out.residual = velocity_residual(fam, X, P, Y, out.z);
        return out;
    case FamilyKind::quartic:
        out.z = detail::quartic_velocity(X, P);
        out.residual = velocity_residual(fam, X, P, Y, out.z);
        return out;
    case FamilyKind::custom:
        break;
    }

    require(fam.contraction < 1.0, ErrorCode::contraction_failure,
            "custom family must declare a contraction constant rho < 1");
    const double scale = std::max(1.0, lq_norm(P, P.q()));
    std::vector<double> z(P.flat().begin(), P.flat().end());
    for (double& c : z) c = -c;
    Ensemble current(P.dim(), z, P.q());
    std::vector<double> dp(P.dim());
    std::vector<double> changes;
    double change = std::numeric_limits<double>::infinity();
    int it = 0;
    while (it < opt.max_iter) {
        const auto b = fam.bind(Y, current);
        std::vector<double> next(z.size());
        for (std::size_t i = 0; i < P.size(); ++i) {
            b.dp_hamiltonian(X.point(i), P.point(i), dp);
            for (std::size_t k = 0; k < P.dim(); ++k) next[i * P.dim() + k] = -dp[k];
        }
        Ensemble candidate(P.dim(), std::move(next), P.q());
        change = lq_distance(candidate, current, P.q());
        current = std::move(candidate);
        ++it;
        changes.push_back(change);
        if (change <= opt.tol * scale) break;
    }
    out.z = current;
    out.iterations = it;
    out.residual = velocity_residual(fam, X, P, Y, current);

    // Rate from the steps still well above roundoff.
    const double floor = 1e-10 * scale;
    std::size_t last = 0;
    while (last + 1 < changes.size() && changes[last + 1] > floor) ++last;
    if (last >= 1 && changes[0] > 0.0)
        out.measured_rate = std::pow(changes[last] / changes[0], 1.0 / static_cast<double>(last));

    if (change > opt.tol * scale || out.residual > 10.0 * opt.tol * scale) {
        std::ostringstream msg;
        msg << "velocity iteration did not converge after " << it << " iterations (residual " << out.residual << ")";
        throw ContractionFailure(msg.str(), out.residual, it);
    }
    return out;
}

} // namespace emfg
