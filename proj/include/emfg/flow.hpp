#pragma once

// Self-consistent Hamiltonian flow in ensemble space:
//
//   X' = G(X, P, X),   P' = D_xH(X, P, X, G(X, P, X)),   X(0) = X0,  P(0) = D_xPhi(X0)
//
// integrated with classical RK4. The velocity map is re-solved at every stage, so
// the population mean couples all samples at each stage.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

#include "emfg/detail/log.hpp"
#include "emfg/grid.hpp"
#include "emfg/hamiltonian.hpp"
#include "emfg/velocity.hpp"

namespace emfg {

struct FlowState {
    Ensemble X;
    Ensemble P;
    double t = 0.0;
};

namespace detail {

struct FlowRates {
    Ensemble dX;
    Ensemble dP;
};

inline FlowRates flow_rhs(const HamiltonianFamily& fam, const Ensemble& X, const Ensemble& P) {
    Ensemble Z = solve_velocity(fam, X, P, X).z;
    const auto b = fam.bind(X, Z);
    std::vector<double> dp(P.flat().size());
    for (std::size_t i = 0; i < P.size(); ++i)
        b.dx_hamiltonian(X.point(i), P.point(i), std::span<double>(dp.data() + i * P.dim(), P.dim()));
    return {std::move(Z), Ensemble(P.dim(), std::move(dp), P.q())};
}

/// base + h * rate, samplewise.
inline Ensemble axpy(const Ensemble& base, double h, const Ensemble& rate) {
    std::vector<double> out(base.flat().size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = base.flat()[k] + h * rate.flat()[k];
    return Ensemble(base.dim(), std::move(out), base.q());
}

inline Ensemble blend(const Ensemble& a, const Ensemble& b, double lambda) {
    std::vector<double> v(a.flat().size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = (1.0 - lambda) * a.flat()[k] + lambda * b.flat()[k];
    return Ensemble(a.dim(), std::move(v), a.q());
}

inline Ensemble rk4_combine(const Ensemble& base, double dt, const Ensemble& k1, const Ensemble& k2,
                            const Ensemble& k3, const Ensemble& k4) {
    std::vector<double> out(base.flat().size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = base.flat()[k] +
                 dt / 6.0 * (k1.flat()[k] + 2.0 * k2.flat()[k] + 2.0 * k3.flat()[k] + k4.flat()[k]);
    return Ensemble(base.dim(), std::move(out), base.q());
}

inline bool all_finite(const Ensemble& e) {
    for (double v : e.flat())
        if (!std::isfinite(v) || std::abs(v) > 1e150) return false;
    return true;
}

inline std::size_t count_duplicates(const Ensemble& x0) {
    std::vector<std::vector<double>> rows;
    rows.reserve(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) rows.emplace_back(x0.point(i).begin(), x0.point(i).end());
    std::sort(rows.begin(), rows.end());
    std::size_t dup = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) dup += rows[i] == rows[i - 1] ? 1 : 0;
    return dup;
}

/// Ensemble-valued RK4 wrapper that checks each new state.
inline FlowState rk4_step(const FlowState& s, double dt, int step, FlowRates& k1_out,
                          const std::function<FlowRates(const Ensemble&, const Ensemble&, double)>& rhs) {
    auto blow_up = [step] {
        std::ostringstream msg;
        msg << "flow produced a non-finite state at step " << step + 1;
        throw BlowUp(msg.str(), step + 1);
    };
    // Overflow inside a stage is reported as blow-up, not as a downstream solver failure.
    auto stage = [&](const Ensemble& X, const Ensemble& P, double t) {
        if (!all_finite(X) || !all_finite(P)) blow_up();
        FlowRates r = rhs(X, P, t);
        if (!all_finite(r.dX) || !all_finite(r.dP)) blow_up();
        return r;
    };
    try {
        FlowRates k1 = stage(s.X, s.P, s.t);
        FlowRates k2 = stage(axpy(s.X, 0.5 * dt, k1.dX), axpy(s.P, 0.5 * dt, k1.dP), s.t + 0.5 * dt);
        FlowRates k3 = stage(axpy(s.X, 0.5 * dt, k2.dX), axpy(s.P, 0.5 * dt, k2.dP), s.t + 0.5 * dt);
        FlowRates k4 = stage(axpy(s.X, dt, k3.dX), axpy(s.P, dt, k3.dP), s.t + dt);
        FlowState next{rk4_combine(s.X, dt, k1.dX, k2.dX, k3.dX, k4.dX),
                       rk4_combine(s.P, dt, k1.dP, k2.dP, k3.dP, k4.dP), s.t + dt};
        if (!all_finite(next.X) || !all_finite(next.P)) blow_up();
        k1_out = std::move(k1);
        return next;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::non_finite) blow_up();
        throw;
    }
}

} // namespace detail

/// Integrates the flow from X0 with P(0) read off the gradient of `phi`.
inline TrajectoryEnsemble integrate_flow(const HamiltonianFamily& fam, const Ensemble& x0, const GridSlice& phi,
                                         double horizon, std::size_t steps) {
    require(x0.dim() == 1, ErrorCode::unsupported_dimension, "flow seeded from a grid slice needs d = 1");
    require(steps >= 1 && horizon > 0.0, ErrorCode::invalid_argument, "flow needs steps >= 1 and T > 0");
    if (const auto dup = detail::count_duplicates(x0); dup > 0) {
        std::ostringstream msg;
        msg << dup << " duplicate initial samples; they follow identical paths";
        log::info(msg.str());
    }

    ClampCounter clamps;
    std::vector<double> p0(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) p0[i] = phi.gradient_at(x0(i), &clamps);
    clamps.check();

    TrajectoryEnsemble traj;
    const double dt = horizon / static_cast<double>(steps);
    FlowState state{x0, Ensemble(1, std::move(p0), x0.q()), 0.0};
    auto rhs = [&fam](const Ensemble& X, const Ensemble& P, double) { return detail::flow_rhs(fam, X, P); };

    traj.times.reserve(steps + 1);
    for (std::size_t m = 0; m < steps; ++m) {
        detail::FlowRates k1;
        FlowState next = detail::rk4_step(state, dt, static_cast<int>(m), k1, rhs);
        traj.times.push_back(m == 0 ? 0.0 : dt * static_cast<double>(m));
        traj.X.push_back(std::move(state.X));
        traj.P.push_back(std::move(state.P));
        traj.V.push_back(std::move(k1.dX));
        state = std::move(next);
    }
    traj.times.push_back(horizon);
    traj.V.push_back(solve_velocity(fam, state.X, state.P, state.X).z);
    traj.X.push_back(std::move(state.X));
    traj.P.push_back(std::move(state.P));
    return traj;
}

/// Population driven by a frozen value function: X' = G(X, D_xu(X, t), X), with D_xu
/// interpolated linearly in time between grid slices. Used by the trajectory-Picard mode.
inline TrajectoryEnsemble integrate_feedback(const HamiltonianFamily& fam, const Ensemble& x0, const ValueGrid& vg) {
    require(x0.dim() == 1, ErrorCode::unsupported_dimension, "feedback flow needs d = 1");
    const auto& spec = vg.spec();
    const double dt = spec.dt();
    ClampCounter clamps;
    auto costate = [&](const Ensemble& X, double t) {
        const double s = std::clamp(t / dt, 0.0, static_cast<double>(spec.steps));
        const auto m = std::min(static_cast<std::size_t>(s), spec.steps - 1);
        const double w = s - static_cast<double>(m);
        std::vector<double> p(X.size());
        for (std::size_t i = 0; i < X.size(); ++i)
            p[i] = (1.0 - w) * gradient_at(vg, X(i), m, &clamps) + w * gradient_at(vg, X(i), m + 1, &clamps);
        return Ensemble(1, std::move(p), X.q());
    };
    auto rhs = [&](const Ensemble& X, const Ensemble& P, double t) {
        Ensemble Pt = costate(X, t);
        Ensemble Z = solve_velocity(fam, X, Pt, X).z;
        return detail::FlowRates{std::move(Z), Ensemble(P.dim(), std::vector<double>(P.flat().size(), 0.0), P.q())};
    };

    TrajectoryEnsemble traj;
    FlowState state{x0, costate(x0, 0.0), 0.0};
    for (std::size_t m = 0; m < spec.steps; ++m) {
        detail::FlowRates k1;
        FlowState next = detail::rk4_step(state, dt, static_cast<int>(m), k1, rhs);
        next.P = costate(next.X, spec.t(m + 1));
        traj.times.push_back(spec.t(m));
        traj.X.push_back(std::move(state.X));
        traj.P.push_back(std::move(state.P));
        traj.V.push_back(std::move(k1.dX));
        state = std::move(next);
    }
    traj.times.push_back(spec.horizon);
    traj.V.push_back(solve_velocity(fam, state.X, state.P, state.X).z);
    traj.X.push_back(std::move(state.X));
    traj.P.push_back(std::move(state.P));
    clamps.check();
    return traj;
}

struct SeparationReport {
    double min_ratio = 1.0;
    std::size_t pairs = 0;
    std::size_t skipped_pairs = 0;
};

/// min over sample pairs and times t_m <= t1 of |X_i(t) - X_j(t)| / |X_i(0) - X_j(0)|.
/// Pairs starting at the same point are skipped.
inline SeparationReport separation_diagnostic(const TrajectoryEnsemble& traj, double t1) {
    traj.validate();
    require(traj.X.front().dim() == 1, ErrorCode::unsupported_dimension, "separation diagnostic needs d = 1");
    SeparationReport r;
    const auto& x0 = traj.X.front();
    const std::size_t n = x0.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d0 = std::abs(x0(i) - x0(j));
            if (d0 == 0.0) {
                ++r.skipped_pairs;
                continue;
            }
            ++r.pairs;
            for (std::size_t m = 0; m < traj.X.size() && traj.times[m] <= t1 + 1e-12; ++m)
                r.min_ratio = std::min(r.min_ratio, std::abs(traj.X[m](i) - traj.X[m](j)) / d0);
        }
    }
    if (r.skipped_pairs > 0) log::warning(std::to_string(r.skipped_pairs) + " coincident initial pairs skipped");
    return r;
}

inline SeparationReport separation_diagnostic(const TrajectoryEnsemble& traj) {
    return separation_diagnostic(traj, traj.horizon());
}

struct GronwallReport {
    /// sup of ||(X,P)(t)|| / (1 + ||(X,P)(0)||) over the first half of the horizon.
    double half_horizon_constant = 0.0;
    double full_horizon_constant = 0.0;
    bool within_envelope(double factor = 10.0) const {
        return full_horizon_constant <= factor * half_horizon_constant;
    }
};

inline GronwallReport gronwall_report(const TrajectoryEnsemble& traj) {
    require(traj.P.size() == traj.X.size(), ErrorCode::invalid_argument, "gronwall report needs costates");
    const double q = traj.X.front().q();
    auto joint = [q](const Ensemble& X, const Ensemble& P) {
        return std::pow(moment(X, q) + moment(P, q), 1.0 / q);
    };
    const double base = 1.0 + joint(traj.X.front(), traj.P.front());
    GronwallReport r;
    const double half = 0.5 * traj.horizon();
    for (std::size_t m = 0; m < traj.X.size(); ++m) {
        const double c = joint(traj.X[m], traj.P[m]) / base;
        r.full_horizon_constant = std::max(r.full_horizon_constant, c);
        if (traj.times[m] <= half + 1e-12) r.half_horizon_constant = std::max(r.half_horizon_constant, c);
    }
    return r;
}

} // namespace emfg
