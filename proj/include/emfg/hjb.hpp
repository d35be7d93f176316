#pragma once

// Backward semi-Lagrangian solver for -u_t + H(x, D_xu, X(t), X'(t)) = 0 with the
// population curve frozen. Each step takes the discrete dynamic-programming
// minimum over a uniform control set:
//
//   u[m][i] = min_v { dt L(x_i, v, X[m], V[m]) + I[u[m+1]](x_i + f(x_i, v) dt) }
//
// where I is clamped piecewise-linear interpolation. The scheme is monotone in
// the terminal data.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "emfg/detail/parallel.hpp"
#include "emfg/grid.hpp"
#include "emfg/hamiltonian.hpp"

namespace emfg {

struct HjbConfig {
    std::size_t nv = 101;
    double v_max = 4.0;
    /// Nodes closer than this to the domain edge are padding and excluded from the
    /// saturation check. Negative selects v_max * T for x' = v and 0 otherwise.
    double saturation_margin = -1.0;
    double saturation_fraction = 0.01;
    int threads = 1;
};

namespace detail {

inline double control_value(std::size_t j, std::size_t nv, double v_max) {
    const double num = 2.0 * static_cast<double>(j) - static_cast<double>(nv - 1);
    return v_max * num / static_cast<double>(nv - 1);
}

} // namespace detail

inline ValueGrid solve_backward(const HamiltonianFamily& fam, const TrajectoryEnsemble& traj, const GridSpec& grid,
                                const HjbConfig& cfg) {
    grid.validate();
    traj.validate();
    require(fam.dim == 1, ErrorCode::unsupported_dimension, "grid solver is one-dimensional");
    require(traj.steps() == grid.steps, ErrorCode::invalid_argument, "trajectory and value grid time steps differ");
    require(std::abs(traj.horizon() - grid.horizon) <= 1e-12 * grid.horizon, ErrorCode::invalid_argument,
            "trajectory and value grid horizons differ");
    require(cfg.nv >= 3 && cfg.v_max > 0.0, ErrorCode::invalid_argument, "control set needs nv >= 3 and v_max > 0");
    if (fam.dynamics == Dynamics::inverse_state)
        require(grid.x_lo > 0.0 || grid.x_hi < 0.0, ErrorCode::invalid_argument,
                "state-dependent dynamics x' = v/x need a domain excluding x = 0");

    const std::size_t nx = grid.nx;
    const std::size_t M = grid.steps;
    const double dt = grid.dt();
    const double dx = grid.dx();
    std::vector<double> u((M + 1) * nx);

    const auto psi = fam.terminal.bind_value(traj.X[M]);
    for (std::size_t i = 0; i < nx; ++i) {
        const double x = grid.x(i);
        u[M * nx + i] = psi(PointView(&x, 1));
    }

    std::vector<double> controls(cfg.nv);
    for (std::size_t j = 0; j < cfg.nv; ++j) controls[j] = detail::control_value(j, cfg.nv, cfg.v_max);

    const double margin = cfg.saturation_margin >= 0.0
                              ? cfg.saturation_margin
                              : (fam.dynamics == Dynamics::identity ? cfg.v_max * grid.horizon : 0.0);
    const double core_lo = grid.x_lo + margin - 1e-12;
    const double core_hi = grid.x_hi - margin + 1e-12;
    std::vector<unsigned char> saturated(nx);

    for (std::size_t m = M; m-- > 0;) {
        const auto bound = fam.bind(traj.X[m], traj.V[m]);
        const std::span<const double> next(u.data() + (m + 1) * nx, nx);
        double* cur = u.data() + m * nx;
        detail::parallel_for(nx, cfg.threads, [&](std::size_t i) {
            double x = grid.x(i);
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t j = 0; j < cfg.nv; ++j) {
                double v = controls[j];
                const double foot = x + fam.velocity_of_control(x, v) * dt;
                const double cost =
                    dt * bound.lagrangian(PointView(&x, 1), PointView(&v, 1)) + detail::interp(next, grid.x_lo, dx, foot);
                if (cost < best) {
                    best = cost;
                    arg = j;
                }
            }
            cur[i] = best;
            saturated[i] = (arg == 0 || arg + 1 == cfg.nv) ? 1 : 0;
        });

        std::size_t core = 0, hits = 0;
        for (std::size_t i = 0; i < nx; ++i) {
            const double x = grid.x(i);
            if (x < core_lo || x > core_hi) continue;
            ++core;
            hits += saturated[i];
        }
        if (core > 0 && static_cast<double>(hits) > cfg.saturation_fraction * static_cast<double>(core)) {
            std::ostringstream msg;
            msg << "optimal control saturates at +-v_max on " << hits << " of " << core
                << " interior nodes at t=" << grid.t(m) << "; increase v_max (currently " << cfg.v_max << ")";
            throw Error(ErrorCode::control_saturation, msg.str());
        }
    }
    return ValueGrid(grid, std::move(u));
}

/// Coercivity-based control bound: smallest v with L(x, +-v) >= L(x, 0) + Lip(psi) |v|
/// over probe points and times, doubled.
inline double default_control_bound(const HamiltonianFamily& fam, const TrajectoryEnsemble& traj,
                                    const GridSpec& grid) {
    const double lip = lipschitz_estimate(fam.terminal, traj.X.back(), grid.x_lo, grid.x_hi, grid.nx);
    const double probes_x[] = {grid.x_lo, 0.5 * (grid.x_lo + grid.x_hi), grid.x_hi};
    const std::size_t probes_m[] = {0, grid.steps / 2, grid.steps};
    double worst = 0.0;
    for (std::size_t m : probes_m) {
        const auto b = fam.bind(traj.X[m], traj.V[m]);
        for (double x : probes_x) {
            double zero = 0.0;
            const double base = b.lagrangian(PointView(&x, 1), PointView(&zero, 1));
            auto dominated = [&](double v) {
                double vp = v, vn = -v;
                return b.lagrangian(PointView(&x, 1), PointView(&vp, 1)) >= base + lip * v &&
                       b.lagrangian(PointView(&x, 1), PointView(&vn, 1)) >= base + lip * v;
            };
            double hi = 1e-3;
            while (!dominated(hi)) {
                hi *= 2.0;
                require(hi < 1e8, ErrorCode::invalid_argument, "Lagrangian is not coercive at a probe point");
            }
            double lo = 0.0;
            for (int k = 0; k < 60; ++k) {
                const double mid = 0.5 * (lo + hi);
                (dominated(mid) ? hi : lo) = mid;
            }
            worst = std::max(worst, hi);
        }
    }
    return 2.0 * worst;
}

} // namespace emfg
