#pragma once

// Outer fixed-point driver for the extended mean-field system. The iteration
// variable is the initial value slice Phi; one application of
//
//   F: Phi -> u~(., 0)
//
// integrates the Hamiltonian flow seeded by D_xPhi(X0) and solves the HJB
// equation backward along the resulting population curve. Damped Picard
// iteration is used; it is not guaranteed to converge and non-convergence is
// reported, not hidden.

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

#include "emfg/detail/log.hpp"
#include "emfg/flow.hpp"
#include "emfg/grid.hpp"
#include "emfg/hamiltonian.hpp"
#include "emfg/hjb.hpp"

namespace emfg {

enum class IterationMode { value, trajectory };

struct SolverConfig {
    std::size_t nx = 201;
    std::size_t steps = 200;
    std::size_t nv = 201;
    /// Non-positive selects the coercivity-based default.
    double v_max = 4.0;
    double damping = 0.5;
    double tol_fix = 1e-4;
    double tol_traj = 1e-4;
    int max_outer = 200;
    IterationMode mode = IterationMode::value;
    /// Explicit spatial domain; otherwise hull(X0) padded by v_max T + 3 dx.
    std::optional<std::pair<double, double>> domain;
    /// Semiconcavity constants are reported for t <= t1_fraction * T.
    double t1_fraction = 0.9;
    int threads = 1;

    void validate() const {
        require(nx >= 8 && steps >= 1 && nv >= 3, ErrorCode::invalid_argument, "solver needs nx >= 8, steps >= 1, nv >= 3");
        require(damping > 0.0 && damping <= 1.0, ErrorCode::invalid_argument, "damping must lie in (0, 1]");
        require(tol_fix > 0.0 && tol_traj > 0.0, ErrorCode::invalid_argument, "tolerances must be positive");
        require(max_outer >= 1, ErrorCode::invalid_argument, "max_outer must be positive");
        require(t1_fraction > 0.0 && t1_fraction < 1.0, ErrorCode::invalid_argument, "t1_fraction must lie in (0, 1)");
        if (domain) require(domain->second > domain->first, ErrorCode::invalid_argument, "empty solver domain");
    }
};

struct ResidualEntry {
    int iter = 0;
    /// ||Phi_{k+1} - Phi_k||_inf (the damped step).
    double phi_residual = 0.0;
    /// max_t W_q(X_{k+1}(t), X_k(t)); infinite on the first iterate.
    double traj_residual = 0.0;
    /// ||F(Phi_k) - Phi_k||_inf.
    double fixed_point_residual = 0.0;
};

struct MfgSolution {
    ValueGrid value;
    TrajectoryEnsemble traj;
    GridSlice phi;
    std::vector<ResidualEntry> residual_history;
    std::vector<RegularityReport> regularity;
    bool converged = false;
    int iterations = 0;
    double v_max = 0.0;
};

/// Control bound actually used: cfg.v_max, or the coercivity default evaluated on a
/// stationary population at X0.
inline double resolve_control_bound(const HamiltonianFamily& fam, const Ensemble& x0, double horizon,
                                    const SolverConfig& cfg) {
    if (cfg.v_max > 0.0) return cfg.v_max;
    const auto [lo_it, hi_it] = std::minmax_element(x0.flat().begin(), x0.flat().end());
    GridSpec probe{*lo_it - 1.0, *hi_it + 1.0, cfg.nx, horizon, 2};
    if (cfg.domain) probe = GridSpec{cfg.domain->first, cfg.domain->second, cfg.nx, horizon, 2};
    TrajectoryEnsemble still;
    const Ensemble zero_v(1, std::vector<double>(x0.size(), 0.0), x0.q());
    for (std::size_t m = 0; m <= 2; ++m) {
        still.times.push_back(probe.t(m));
        still.X.push_back(x0);
        still.V.push_back(zero_v);
    }
    return default_control_bound(fam, still, probe);
}

/// Grid used for a solve: explicit domain, or hull(X0) expanded by v_max T + 3 dx.
inline GridSpec solver_grid(const Ensemble& x0, double horizon, const SolverConfig& cfg, double v_max) {
    require(x0.dim() == 1, ErrorCode::unsupported_dimension, "grid solver is one-dimensional");
    if (cfg.domain) return GridSpec{cfg.domain->first, cfg.domain->second, cfg.nx, horizon, cfg.steps};
    const auto [lo_it, hi_it] = std::minmax_element(x0.flat().begin(), x0.flat().end());
    const double pad = v_max * horizon;
    double width = (*hi_it - *lo_it) + 2.0 * pad;
    if (width <= 0.0) width = 1.0;
    const double dx = width / static_cast<double>(cfg.nx - 7);
    return GridSpec{*lo_it - pad - 3.0 * dx, *hi_it + pad + 3.0 * dx, cfg.nx, horizon, cfg.steps};
}

/// Phi_0 = psi(., X0) on the grid.
inline GridSlice terminal_slice(const HamiltonianFamily& fam, const Ensemble& x0, const GridSpec& grid) {
    const auto psi = fam.terminal.bind_value(x0);
    std::vector<double> v(grid.nx);
    for (std::size_t i = 0; i < grid.nx; ++i) {
        const double x = grid.x(i);
        v[i] = psi(PointView(&x, 1));
    }
    return GridSlice(grid.x_lo, grid.x_hi, std::move(v));
}

struct FEvaluation {
    TrajectoryEnsemble traj;
    ValueGrid value;
};

inline HjbConfig hjb_config(const SolverConfig& cfg, double v_max) {
    HjbConfig h;
    h.nv = cfg.nv;
    h.v_max = v_max;
    h.threads = cfg.threads;
    return h;
}

inline FEvaluation evaluate_F(const HamiltonianFamily& fam, const Ensemble& x0, const GridSlice& phi,
                              const GridSpec& grid, const HjbConfig& hjb) {
    FEvaluation e{integrate_flow(fam, x0, phi, grid.horizon, grid.steps), {}};
    e.value = solve_backward(fam, e.traj, grid, hjb);
    return e;
}

/// F(Phi): flow seeded by D_xPhi(X0), backward HJB along it, t = 0 slice. `phi`
/// must live on solver_grid(x0, horizon, cfg, v_max).
inline GridSlice apply_F(const HamiltonianFamily& fam, const Ensemble& x0, const GridSlice& phi, double horizon,
                         const SolverConfig& cfg) {
    cfg.validate();
    const double v_max = resolve_control_bound(fam, x0, horizon, cfg);
    GridSpec grid = solver_grid(x0, horizon, cfg, v_max);
    require(phi.nx() == grid.nx && std::abs(phi.x_lo() - grid.x_lo) < 1e-12 * (1.0 + std::abs(grid.x_lo)),
            ErrorCode::invalid_argument, "phi does not live on the solver grid");
    return evaluate_F(fam, x0, phi, grid, hjb_config(cfg, v_max)).value.slice(0);
}

namespace detail {

inline GridSlice blend(const GridSlice& a, const GridSlice& b, double lambda) {
    std::vector<double> v(a.nx());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 - lambda) * a.values()[i] + lambda * b.values()[i];
    return GridSlice(a.x_lo(), a.x_hi(), std::move(v));
}

inline TrajectoryEnsemble blend(const TrajectoryEnsemble& a, const TrajectoryEnsemble& b, double lambda) {
    TrajectoryEnsemble out;
    out.times = a.times;
    for (std::size_t m = 0; m < a.X.size(); ++m) {
        out.X.push_back(blend(a.X[m], b.X[m], lambda));
        out.V.push_back(blend(a.V[m], b.V[m], lambda));
        if (!a.P.empty() && !b.P.empty()) out.P.push_back(blend(a.P[m], b.P[m], lambda));
    }
    return out;
}

inline MfgSolution solve_value_mode(const HamiltonianFamily& fam, const Ensemble& x0, const GridSpec& grid,
                                    const SolverConfig& cfg, const HjbConfig& hjb, GridSlice phi) {
    MfgSolution best;
    double best_res = std::numeric_limits<double>::infinity();
    std::optional<TrajectoryEnsemble> previous;
    const double q = x0.q();
    for (int k = 0; k < cfg.max_outer; ++k) {
        FEvaluation e = evaluate_F(fam, x0, phi, grid, hjb);
        GridSlice image = e.value.slice(0);
        const double fixed_res = image.sup_distance(phi);
        const double traj_res = previous ? trajectory_distance(e.traj, *previous, q)
                                         : std::numeric_limits<double>::infinity();
        GridSlice next = blend(phi, image, cfg.damping);
        const double step_res = next.sup_distance(phi);

        best.residual_history.push_back({k, step_res, traj_res, fixed_res});
        best.regularity.push_back(regularity_report(e.value, cfg.t1_fraction * grid.horizon));
        best.iterations = k + 1;

        const bool done = fixed_res <= cfg.tol_fix && traj_res <= cfg.tol_traj;
        if (done || fixed_res < best_res) {
            best_res = fixed_res;
            best.value = e.value;
            best.traj = e.traj;
            best.phi = phi;
        }
        if (done) {
            best.converged = true;
            break;
        }
        previous = std::move(e.traj);
        phi = std::move(next);
    }
    return best;
}

inline MfgSolution solve_trajectory_mode(const HamiltonianFamily& fam, const Ensemble& x0, const GridSpec& grid,
                                         const SolverConfig& cfg, const HjbConfig& hjb, const GridSlice& phi0) {
    MfgSolution best;
    double best_res = std::numeric_limits<double>::infinity();
    TrajectoryEnsemble traj = integrate_flow(fam, x0, phi0, grid.horizon, grid.steps);
    std::optional<GridSlice> previous_phi;
    for (int k = 0; k < cfg.max_outer; ++k) {
        ValueGrid value = solve_backward(fam, traj, grid, hjb);
        GridSlice phi = value.slice(0);
        TrajectoryEnsemble response = integrate_feedback(fam, x0, value);
        const double traj_res = trajectory_distance(response, traj, x0.q());
        const double phi_res =
            previous_phi ? phi.sup_distance(*previous_phi) : std::numeric_limits<double>::infinity();

        best.residual_history.push_back({k, phi_res, traj_res, phi_res});
        best.regularity.push_back(regularity_report(value, cfg.t1_fraction * grid.horizon));
        best.iterations = k + 1;

        const bool done = phi_res <= cfg.tol_fix && traj_res <= cfg.tol_traj;
        const double score = std::max(traj_res, std::isfinite(phi_res) ? phi_res : traj_res);
        if (done || score < best_res) {
            best_res = score;
            best.value = value;
            best.traj = traj;
            best.phi = phi;
        }
        if (done) {
            best.converged = true;
            break;
        }
        previous_phi = std::move(phi);
        traj = blend(traj, response, cfg.damping);
    }
    return best;
}

} // namespace detail

/// Damped Picard iteration from `initial_phi` (default psi(., X0)).
inline MfgSolution solve_mfg(const HamiltonianFamily& fam, const Ensemble& x0, double horizon, const SolverConfig& cfg,
                             std::optional<GridSlice> initial_phi = std::nullopt) {
    cfg.validate();
    if (fam.kind == FamilyKind::quadratic_coupled || fam.kind == FamilyKind::lq)
        require(fam.beta != -1.0, ErrorCode::singular_coupling, "beta = -1 makes the velocity equation singular");
    const double v_max = resolve_control_bound(fam, x0, horizon, cfg);
    const GridSpec grid = solver_grid(x0, horizon, cfg, v_max);
    const HjbConfig hjb = hjb_config(cfg, v_max);
    GridSlice phi = initial_phi ? *initial_phi : terminal_slice(fam, x0, grid);
    require(phi.nx() == grid.nx, ErrorCode::invalid_argument, "initial phi does not live on the solver grid");

    MfgSolution sol = cfg.mode == IterationMode::value ? detail::solve_value_mode(fam, x0, grid, cfg, hjb, phi)
                                                       : detail::solve_trajectory_mode(fam, x0, grid, cfg, hjb, phi);
    sol.v_max = v_max;
    if (!sol.converged) {
        std::ostringstream msg;
        msg << "fixed-point iteration stopped after " << sol.iterations << " iterations without meeting tolerances";
        log::warning(msg.str());
    }
    return sol;
}

/// u(x, 0) of the extended game restarted at time t from population Y; the value
/// V~(x, Y, t) of the master equation. t must lie on the solver's time grid
/// (it is rounded to the nearest step).
inline double master_value(const HamiltonianFamily& fam, double x, const Ensemble& y, double t, double horizon,
                           const SolverConfig& cfg) {
    require(t <= horizon + 1e-12 * horizon && t >= 0.0, ErrorCode::invalid_argument, "master time outside [0, T]");
    const double dt = horizon / static_cast<double>(cfg.steps);
    const auto remaining = static_cast<std::size_t>(std::llround((horizon - t) / dt));
    if (remaining == 0) return fam.psi(PointView(&x, 1), y);
    SolverConfig sub = cfg;
    sub.steps = remaining;
    const double sub_horizon = dt * static_cast<double>(remaining);
    const MfgSolution s = solve_mfg(fam, y, sub_horizon, sub);
    if (!s.converged) log::warning("master_value: restarted game did not converge; value is the best iterate");
    return s.value.value_at(x, 0);
}

struct MasterProbe {
    double x = 0.0;
    std::size_t step = 0; // time index on the solution grid
};

struct MasterEntry {
    MasterProbe probe;
    double solution_value = 0.0; // u(x, t_m) from the full solve
    double master_value = 0.0;   // V~(x, X(t_m), t_m) from the restarted game
    bool restarted_converged = true;
};

/// Per-probe comparison of u(x, t_m) with V~(x, X(t_m), t_m). Restarted games are
/// shared by probes at the same time index; entries come out sorted by time index.
inline std::vector<MasterEntry> master_consistency_table(const MfgSolution& sol, const HamiltonianFamily& fam,
                                                         const SolverConfig& cfg, const std::vector<MasterProbe>& probes) {
    const auto& spec = sol.value.spec();
    std::map<std::size_t, std::vector<double>> by_step;
    for (const auto& p : probes) {
        require(p.step <= spec.steps, ErrorCode::invalid_argument, "probe time index outside the grid");
        by_step[p.step].push_back(p.x);
    }
    std::vector<MasterEntry> out;
    for (const auto& [m, xs] : by_step) {
        const Ensemble& y = sol.traj.X[m];
        if (m == spec.steps) {
            for (double x : xs) out.push_back({{x, m}, sol.value.value_at(x, m), fam.psi(PointView(&x, 1), y), true});
            continue;
        }
        SolverConfig sub = cfg;
        sub.steps = spec.steps - m;
        const MfgSolution restarted = solve_mfg(fam, y, spec.horizon - spec.t(m), sub);
        if (!restarted.converged) log::warning("master consistency: restarted game did not converge");
        for (double x : xs)
            out.push_back({{x, m}, sol.value.value_at(x, m), restarted.value.value_at(x, 0), restarted.converged});
    }
    return out;
}

/// max over probes of |u(x, t_m) - V~(x, X(t_m), t_m)|.
inline double master_consistency_residual(const MfgSolution& sol, const HamiltonianFamily& fam,
                                          const SolverConfig& cfg, const std::vector<MasterProbe>& probes) {
    double worst = 0.0;
    for (const auto& e : master_consistency_table(sol, fam, cfg, probes))
        worst = std::max(worst, std::abs(e.solution_value - e.master_value));
    return worst;
}

enum class ProbeStatus { conclusive, inconclusive };

struct UniquenessReport {
    ProbeStatus status = ProbeStatus::conclusive;
    double max_distance = 0.0;
    std::vector<bool> converged;
    std::vector<GridSlice> fixed_points;
};

/// Runs solve_mfg from k random Lipschitz perturbations of psi(., X0) and reports
/// the largest pairwise sup-distance between the resulting fixed points.
inline UniquenessReport uniqueness_probe(const HamiltonianFamily& fam, const Ensemble& x0, double horizon,
                                         const SolverConfig& cfg, int k, std::uint64_t seed) {
    require(k >= 1, ErrorCode::invalid_argument, "uniqueness probe needs k >= 1");
    const double v_max = resolve_control_bound(fam, x0, horizon, cfg);
    const GridSpec grid = solver_grid(x0, horizon, cfg, v_max);
    const GridSlice base = terminal_slice(fam, x0, grid);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(-0.5, 0.5), freq(0.5, 2.0), phase(0.0, 6.283185307179586);
    std::vector<GridSlice> starts;
    for (int r = 0; r < k; ++r) {
        const double a = amp(rng), b = freq(rng), c = phase(rng);
        std::vector<double> v(grid.nx);
        for (std::size_t i = 0; i < grid.nx; ++i) v[i] = base.values()[i] + a * std::sin(b * grid.x(i) + c);
        starts.emplace_back(grid.x_lo, grid.x_hi, std::move(v));
    }

    std::vector<MfgSolution> runs(static_cast<std::size_t>(k));
    if (cfg.threads > 1) {
        SolverConfig inner = cfg;
        inner.threads = 1;
        std::vector<std::future<MfgSolution>> jobs;
        for (int r = 0; r < k; ++r)
            jobs.push_back(std::async(std::launch::async, [&, r] { return solve_mfg(fam, x0, horizon, inner, starts[r]); }));
        for (int r = 0; r < k; ++r) runs[static_cast<std::size_t>(r)] = jobs[static_cast<std::size_t>(r)].get();
    } else {
        for (int r = 0; r < k; ++r) runs[static_cast<std::size_t>(r)] = solve_mfg(fam, x0, horizon, cfg, starts[r]);
    }

    UniquenessReport rep;
    for (auto& s : runs) {
        rep.converged.push_back(s.converged);
        if (!s.converged) rep.status = ProbeStatus::inconclusive;
        rep.fixed_points.push_back(s.value.slice(0)); // F(phi), not the damped input
    }
    for (std::size_t i = 0; i < rep.fixed_points.size(); ++i)
        for (std::size_t j = i + 1; j < rep.fixed_points.size(); ++j)
            rep.max_distance = std::max(rep.max_distance, rep.fixed_points[i].sup_distance(rep.fixed_points[j]));
    return rep;
}

} // namespace emfg
