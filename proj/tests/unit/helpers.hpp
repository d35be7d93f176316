#pragma once

#include <random>
#include <vector>

#include "emfg/emfg.hpp"

namespace emfg::testing {

inline Ensemble random_ensemble(std::mt19937_64& rng, std::size_t n, std::size_t dim = 1, double lo = -1.0,
                                double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> flat(n * dim);
    for (auto& v : flat) v = u(rng);
    return Ensemble(dim, std::move(flat));
}

/// D_pH(x, p, Y, Z) = rho * EZ + p; the velocity map Z -> -D_pH is a rho-contraction.
inline HamiltonianFamily mean_contraction_family(double rho) {
    auto binder = [rho](const Ensemble&, const Ensemble& Z) {
        const auto ez = mean(Z);
        BoundHamiltonian b;
        b.lagrangian = [](PointView, PointView v) { return 0.5 * v[0] * v[0]; };
        b.hamiltonian = [ez, rho](PointView, PointView p) {
            const double s = p[0] + rho * ez[0];
            return 0.5 * s * s;
        };
        b.dp_hamiltonian = [ez, rho](PointView, PointView p, VectorOut out) {
            for (std::size_t k = 0; k < p.size(); ++k) out[k] = rho * ez[k] + p[k];
        };
        b.dx_hamiltonian = [](PointView, PointView p, VectorOut out) {
            for (std::size_t k = 0; k < p.size(); ++k) out[k] = 0.0;
        };
        return b;
    };
    return families::custom(1, binder, fields::zero(), rho, "mean_contraction");
}

inline std::vector<std::size_t> shuffled_indices(std::mt19937_64& rng, std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    std::shuffle(p.begin(), p.end(), rng);
    return p;
}

inline Ensemble constant_scalar(std::size_t n, double v) { return Ensemble::constant(n, std::vector<double>{v}); }

} // namespace emfg::testing
