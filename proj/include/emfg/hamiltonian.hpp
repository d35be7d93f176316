#pragma once

// Hamiltonian/Lagrangian families H(x, p, X, Z) = sup_v { -f(x,v).p - L(x, v, X, Z) }.
// Every law-dependent quantity enters through bind(X, Z), which evaluates the law
// summaries once and returns closures over the player variables only.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "emfg/ensemble.hpp"
#include "emfg/fields.hpp"

namespace emfg {

enum class FamilyKind { quadratic_coupled, lq, quartic, custom };

inline std::string to_string(FamilyKind k) {
    switch (k) {
    case FamilyKind::quadratic_coupled: return "quadratic";
    case FamilyKind::lq: return "lq";
    case FamilyKind::quartic: return "quartic";
    case FamilyKind::custom: return "custom";
    }
    return "unknown";
}

/// Player dynamics: x' = v, or x' = v / x (the quartic example).
enum class Dynamics { identity, inverse_state };

using VectorOut = std::span<double>;

struct BoundHamiltonian {
    std::function<double(PointView x, PointView v)> lagrangian;
    std::function<double(PointView x, PointView p)> hamiltonian;
    std::function<void(PointView x, PointView p, VectorOut out)> dp_hamiltonian;
    std::function<void(PointView x, PointView p, VectorOut out)> dx_hamiltonian;
};

/// Coefficient maps of the linear-quadratic example, all functions of the state law.
struct LQCoefficients {
    LawMatrix A, M;
    LawVector B, N;
    LawScalar C, Q;
    /// True when none of the maps depends on its argument; the oracle then needs no law iteration.
    bool law_independent = true;

    static LQCoefficients constant(std::size_t dim, double a, double b, double c, double m, double n, double q);
};

struct QuarticCoefficients {
    double A = 0.0;
    double B = 0.0;
    /// Additive population cost U(X, Z).
    std::function<double(const Ensemble&, const Ensemble&)> U = [](const Ensemble&, const Ensemble&) { return 0.0; };
};

class HamiltonianFamily {
public:
    FamilyKind kind = FamilyKind::quadratic_coupled;
    std::string name;
    std::size_t dim = 1;
    double beta = 0.0;
    Dynamics dynamics = Dynamics::identity;
    LawField potential = fields::zero();
    LawField terminal = fields::zero();
    std::function<BoundHamiltonian(const Ensemble& X, const Ensemble& Z)> binder;
    /// Declared contraction constant of Z -> -D_pH(x, p, X, Z); only meaningful for custom families.
    double contraction = 0.0;
    std::optional<LQCoefficients> lq;
    std::optional<QuarticCoefficients> quartic;

    BoundHamiltonian bind(const Ensemble& X, const Ensemble& Z) const { return binder(X, Z); }

    double lagrangian(PointView x, PointView v, const Ensemble& X, const Ensemble& Z) const {
        return bind(X, Z).lagrangian(x, v);
    }
    double hamiltonian(PointView x, PointView p, const Ensemble& X, const Ensemble& Z) const {
        return bind(X, Z).hamiltonian(x, p);
    }
    std::vector<double> dp_hamiltonian(PointView x, PointView p, const Ensemble& X, const Ensemble& Z) const {
        std::vector<double> out(x.size());
        bind(X, Z).dp_hamiltonian(x, p, out);
        return out;
    }
    std::vector<double> dx_hamiltonian(PointView x, PointView p, const Ensemble& X, const Ensemble& Z) const {
        std::vector<double> out(x.size());
        bind(X, Z).dx_hamiltonian(x, p, out);
        return out;
    }
    double V(PointView x, const Ensemble& X) const { return potential(x, X); }
    double psi(PointView x, const Ensemble& X) const { return terminal(x, X); }

    /// x' for control v (1-d grid sweeps).
    double velocity_of_control(double x, double v) const {
        return dynamics == Dynamics::identity ? v : v / x;
    }
};

inline LQCoefficients LQCoefficients::constant(std::size_t dim, double a, double b, double c, double m, double n,
                                               double q) {
    const auto d = static_cast<Eigen::Index>(dim);
    LQCoefficients k;
    k.A = [d, a](const Ensemble&) -> Eigen::MatrixXd { return a * Eigen::MatrixXd::Identity(d, d); };
    k.M = [d, m](const Ensemble&) -> Eigen::MatrixXd { return m * Eigen::MatrixXd::Identity(d, d); };
    k.B = [d, b](const Ensemble&) -> Eigen::VectorXd { return Eigen::VectorXd::Constant(d, b); };
    k.N = [d, n](const Ensemble&) -> Eigen::VectorXd { return Eigen::VectorXd::Constant(d, n); };
    k.C = [c](const Ensemble&) { return c; };
    k.Q = [q](const Ensemble&) { return q; };
    k.law_independent = true;
    return k;
}

namespace families {

/// L = |v|^2/2 + beta v.EZ - V(x, X),  H = |beta EZ + p|^2/2 + V(x, X).
inline HamiltonianFamily quadratic_coupled(double beta, LawField potential, LawField terminal, std::size_t dim = 1) {
    HamiltonianFamily f;
    f.kind = FamilyKind::quadratic_coupled;
    f.name = "quadratic";
    f.dim = dim;
    f.beta = beta;
    f.potential = std::move(potential);
    f.terminal = std::move(terminal);
    f.binder = [beta, pot = f.potential](const Ensemble& X, const Ensemble& Z) {
        std::vector<double> shift = mean(Z);
        for (double& s : shift) s *= beta;
        auto v_val = pot.bind_value(X);
        auto v_grad = pot.bind_gradient(X);
        BoundHamiltonian b;
        b.lagrangian = [shift, v_val](PointView x, PointView v) {
            double kinetic = 0.0, cross = 0.0;
            for (std::size_t k = 0; k < v.size(); ++k) {
                kinetic += v[k] * v[k];
                cross += v[k] * shift[k];
            }
            return 0.5 * kinetic + cross - v_val(x);
        };
        b.hamiltonian = [shift, v_val](PointView x, PointView p) {
            double s = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k) s += (p[k] + shift[k]) * (p[k] + shift[k]);
            return 0.5 * s + v_val(x);
        };
        b.dp_hamiltonian = [shift](PointView, PointView p, VectorOut out) {
            for (std::size_t k = 0; k < p.size(); ++k) out[k] = p[k] + shift[k];
        };
        b.dx_hamiltonian = [v_grad](PointView x, PointView, VectorOut out) { v_grad(x, out); };
        return b;
    };
    return f;
}

/// Quadratic-coupled family whose potential and terminal cost are quadratic forms
/// with law-dependent coefficients.
inline HamiltonianFamily lq(double beta, LQCoefficients coeffs, std::size_t dim = 1) {
    auto f = quadratic_coupled(beta, fields::quadratic_form(coeffs.A, coeffs.B, coeffs.C),
                               fields::quadratic_form(coeffs.M, coeffs.N, coeffs.Q), dim);
    f.kind = FamilyKind::lq;
    f.name = "lq";
    f.lq = std::move(coeffs);
    return f;
}

/// L = v^2/2 + x^4 + U(X, Z) with dynamics x' = v/x; H = p^2/(2x^2) - x^4 - U.
inline HamiltonianFamily quartic(QuarticCoefficients coeffs) {
    HamiltonianFamily f;
    f.kind = FamilyKind::quartic;
    f.name = "quartic";
    f.dim = 1;
    f.dynamics = Dynamics::inverse_state;
    f.terminal = fields::quartic(coeffs.A, coeffs.B);
    f.potential = fields::quartic(1.0, 0.0);
    f.binder = [U = coeffs.U](const Ensemble& X, const Ensemble& Z) {
        const double u = U(X, Z);
        BoundHamiltonian b;
        b.lagrangian = [u](PointView x, PointView v) {
            const double x2 = x[0] * x[0];
            return 0.5 * v[0] * v[0] + x2 * x2 + u;
        };
        b.hamiltonian = [u](PointView x, PointView p) {
            const double x2 = x[0] * x[0];
            return p[0] * p[0] / (2.0 * x2) - x2 * x2 - u;
        };
        b.dp_hamiltonian = [](PointView x, PointView p, VectorOut out) { out[0] = p[0] / (x[0] * x[0]); };
        b.dx_hamiltonian = [](PointView x, PointView p, VectorOut out) {
            const double x0 = x[0];
            out[0] = -p[0] * p[0] / (x0 * x0 * x0) - 4.0 * x0 * x0 * x0;
        };
        return b;
    };
    f.quartic = std::move(coeffs);
    return f;
}

/// User-defined family; `rho` is the declared contraction constant of the velocity map.
inline HamiltonianFamily custom(std::size_t dim, std::function<BoundHamiltonian(const Ensemble&, const Ensemble&)> binder,
                                LawField terminal, double rho, std::string name = "custom") {
    HamiltonianFamily f;
    f.kind = FamilyKind::custom;
    f.name = std::move(name);
    f.dim = dim;
    f.binder = std::move(binder);
    f.terminal = std::move(terminal);
    f.contraction = rho;
    return f;
}

} // namespace families

/// max over a uniform v-grid of -f(x,v).p - L(x, v, X, Z) (1-d); numerical Legendre transform.
inline double legendre_sup(const HamiltonianFamily& fam, double x, double p, const Ensemble& X, const Ensemble& Z,
                           double v_max, std::size_t nv) {
    const auto b = fam.bind(X, Z);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nv; ++j) {
        double v = -v_max + 2.0 * v_max * static_cast<double>(j) / static_cast<double>(nv - 1);
        const double val = -fam.velocity_of_control(x, v) * p - b.lagrangian(PointView(&x, 1), PointView(&v, 1));
        best = std::max(best, val);
    }
    return best;
}

} // namespace emfg
