#pragma once

// Batch front-end: runs one subcommand on a problem file and writes its bundle.
// Exit status: 0 success, 2 ran without converging, 1 error (raised as emfg::Error).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emfg/diagnostics.hpp"
#include "emfg/flow.hpp"
#include "emfg/io.hpp"
#include "emfg/problem.hpp"

namespace emfg {

enum class Subcommand { solve, oracle, check, master, probe_uniqueness };

inline Subcommand parse_subcommand(const std::string& s) {
    if (s == "solve") return Subcommand::solve;
    if (s == "oracle") return Subcommand::oracle;
    if (s == "check") return Subcommand::check;
    if (s == "master") return Subcommand::master;
    if (s == "probe-uniqueness") return Subcommand::probe_uniqueness;
    throw Error(ErrorCode::invalid_argument, "unknown subcommand '" + s + "'");
}

inline std::string to_string(Subcommand s) {
    switch (s) {
    case Subcommand::solve: return "solve";
    case Subcommand::oracle: return "oracle";
    case Subcommand::check: return "check";
    case Subcommand::master: return "master";
    case Subcommand::probe_uniqueness: return "probe-uniqueness";
    }
    return "unknown";
}

struct RunConfig {
    Subcommand subcommand = Subcommand::solve;
    std::filesystem::path problem;
    std::vector<std::string> overrides;
    std::filesystem::path out;
    std::uint64_t seed = 0;
    int threads = 1;
};

namespace app {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Context {
    ProblemSpec spec;
    HamiltonianFamily fam;
    Ensemble x0;
    SolverConfig cfg;
};

inline Context load(const RunConfig& rc) {
    Context c{parse_problem(rc.problem, rc.overrides), {}, {}, {}};
    c.fam = build_family(c.spec);
    c.x0 = build_initial(c.spec, rc.seed);
    c.cfg = c.spec.solver;
    c.cfg.threads = std::max(1, rc.threads);
    return c;
}

inline void prepare_out(const fs::path& out) {
    require(!out.empty(), ErrorCode::invalid_argument, "an output directory is required");
    std::error_code ec;
    fs::create_directories(out, ec);
    require(!ec && fs::is_directory(out), ErrorCode::io, "cannot create output directory " + out.string());
}

inline json meta_base(const RunConfig& rc, const Context& c) {
    return json{{"subcommand", to_string(rc.subcommand)}, {"problem", emit(c.spec)}, {"seed", rc.seed},
                {"threads", c.cfg.threads}, {"samples", c.x0.size()}};
}

inline json grid_json(const GridSpec& g) {
    return json{{"x_lo", g.x_lo}, {"x_hi", g.x_hi}, {"nx", g.nx}, {"horizon", g.horizon}, {"steps", g.steps}};
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline json solution_diagnostics(const MfgSolution& sol, const SolverConfig& cfg) {
    json regs = json::array();
    for (const auto& r : sol.regularity)
        regs.push_back({{"max_abs", r.max_abs}, {"lip_const", r.lip_const}, {"semiconcavity_const", r.semiconcavity_const}});
    const auto sep = separation_diagnostic(sol.traj, cfg.t1_fraction * sol.traj.horizon());
    return json{{"regularity", regs},
                {"separation", {{"min_ratio", sep.min_ratio}, {"pairs", sep.pairs}, {"skipped_pairs", sep.skipped_pairs}}}};
}

inline int run_solve(const RunConfig& rc) {
    const auto t0 = std::chrono::steady_clock::now();
    const Context c = load(rc);
    prepare_out(rc.out);
    const MfgSolution sol = solve_mfg(c.fam, c.x0, c.spec.horizon, c.cfg);
    io::write_value(rc.out / "value.csv", sol.value);
    io::write_trajectory(rc.out / "trajectory.csv", sol.traj);
    io::write_residuals(rc.out / "residuals.csv", sol.residual_history);
    io::write_plot_files(rc.out / "plot", sol.value, sol.traj, &sol.residual_history);
    json meta = meta_base(rc, c);
    meta["converged"] = sol.converged;
    meta["iterations"] = sol.iterations;
    meta["v_max"] = sol.v_max;
    meta["grid"] = grid_json(sol.value.spec());
    meta["diagnostics"] = solution_diagnostics(sol, c.cfg);
    meta["wall_time_s"] = seconds_since(t0);
    io::write_json(rc.out / "meta.json", meta);
    return sol.converged ? 0 : 2;
}

/// Closed-form solution sampled on the grid the solver would use, so bundles compare node by node.
inline int run_oracle(const RunConfig& rc) {
    const auto t0 = std::chrono::steady_clock::now();
    const Context c = load(rc);
    prepare_out(rc.out);
    const double v_max = resolve_control_bound(c.fam, c.x0, c.spec.horizon, c.cfg);
    const GridSpec grid = solver_grid(c.x0, c.spec.horizon, c.cfg, v_max);
    json meta = meta_base(rc, c);
    ValueGrid vg;
    TrajectoryEnsemble traj;
    if (c.spec.family == "lq") {
        const auto s = lq_solve(build_lq_coefficients(c.spec), c.x0, c.spec.beta, c.spec.horizon, grid.steps);
        io::write_lq_coefficients(rc.out / "coefficients.csv", s.state);
        meta["law_passes"] = s.state.passes;
        traj = s.traj;
        if (c.x0.dim() == 1) vg = oracle_value_grid(s.state, grid);
    } else if (c.spec.family == "quartic") {
        const auto s = quartic_solve(build_quartic_coefficients(c.spec), c.x0, c.spec.horizon, grid.steps);
        io::write_quartic_coefficients(rc.out / "coefficients.csv", s.state);
        meta["c"] = s.state.c;
        meta["closed_form_vs_ode_gap"] = s.state.max_closed_form_gap();
        meta["reciprocal_trajectory_mismatch"] = quartic_reciprocal_trajectory_mismatch(s);
        traj = s.traj;
        vg = oracle_value_grid(s.state, grid);
    } else {
        throw Error(ErrorCode::invalid_argument, "closed-form oracles exist only for the lq and quartic families");
    }
    io::write_trajectory(rc.out / "trajectory.csv", traj);
    io::write_residuals(rc.out / "residuals.csv", {});
    if (c.x0.dim() == 1) {
        io::write_value(rc.out / "value.csv", vg);
        io::write_plot_files(rc.out / "plot", vg, traj, nullptr);
    }
    meta["converged"] = true;
    meta["grid"] = grid_json(grid);
    meta["wall_time_s"] = seconds_since(t0);
    io::write_json(rc.out / "meta.json", meta);
    return 0;
}

inline int run_check(const RunConfig& rc) {
    const auto t0 = std::chrono::steady_clock::now();
    const Context c = load(rc);
    prepare_out(rc.out);
    const auto& cond = c.spec.check.condition;
    const std::size_t trials = c.spec.check.trials;
    json reports = json::object();
    if (cond == "all" || cond == "V")
        reports["V"] = io::write_report(rc.out / "V", check_V_monotone(c.fam.potential, c.fam.dim, trials, rc.seed, c.cfg.threads));
    if (cond == "all" || cond == "psi")
        reports["psi"] =
            io::write_report(rc.out / "psi", check_psi_monotone(c.fam.terminal, c.fam.dim, trials, rc.seed, c.cfg.threads));
    if (cond == "all" || cond == "L")
        reports["L"] = io::write_report(rc.out / "L", check_L_monotone(c.fam, trials, rc.seed, c.cfg.threads));
    json meta = meta_base(rc, c);
    meta["reports"] = reports;
    meta["wall_time_s"] = seconds_since(t0);
    io::write_json(rc.out / "meta.json", meta);
    return 0;
}

inline std::vector<MasterProbe> master_probes(const ProblemSpec& s, const GridSpec& g) {
    require(s.master.has_value(), ErrorCode::schema, "problem.master: required by the master subcommand");
    std::vector<MasterProbe> probes;
    for (double t : s.master->times) {
        const auto m = static_cast<std::size_t>(std::llround(t / g.dt()));
        for (double x : s.master->xs) probes.push_back({x, std::min(m, g.steps)});
    }
    return probes;
}

inline int run_master(const RunConfig& rc) {
    const auto t0 = std::chrono::steady_clock::now();
    const Context c = load(rc);
    prepare_out(rc.out);
    const MfgSolution sol = solve_mfg(c.fam, c.x0, c.spec.horizon, c.cfg);
    const auto table = master_consistency_table(sol, c.fam, c.cfg, master_probes(c.spec, sol.value.spec()));
    double worst = 0.0;
    bool all_converged = sol.converged;
    {
        auto out = io::detail::open_out(rc.out / "master.csv");
        out << "t,x,u,master_value,abs_diff\n";
        for (const auto& e : table) {
            const double d = std::abs(e.solution_value - e.master_value);
            worst = std::max(worst, d);
            all_converged = all_converged && e.restarted_converged;
            out << io::fmt(sol.value.spec().t(e.probe.step)) << ',' << io::fmt(e.probe.x) << ','
                << io::fmt(e.solution_value) << ',' << io::fmt(e.master_value) << ',' << io::fmt(d) << '\n';
        }
    }
    io::write_value(rc.out / "value.csv", sol.value);
    io::write_trajectory(rc.out / "trajectory.csv", sol.traj);
    io::write_residuals(rc.out / "residuals.csv", sol.residual_history);
    json meta = meta_base(rc, c);
    meta["converged"] = all_converged;
    meta["master_consistency_residual"] = worst;
    meta["probes"] = table.size();
    meta["wall_time_s"] = seconds_since(t0);
    io::write_json(rc.out / "meta.json", meta);
    return all_converged ? 0 : 2;
}

inline int run_probe(const RunConfig& rc) {
    const auto t0 = std::chrono::steady_clock::now();
    const Context c = load(rc);
    prepare_out(rc.out);
    const auto rep = uniqueness_probe(c.fam, c.x0, c.spec.horizon, c.cfg, c.spec.probe_k, rc.seed);
    {
        auto out = io::detail::open_out(rc.out / "fixed_points.csv");
        out << 'x';
        for (std::size_t r = 0; r < rep.fixed_points.size(); ++r) out << ",phi" << r;
        out << '\n';
        const auto& f0 = rep.fixed_points.front();
        for (std::size_t i = 0; i < f0.nx(); ++i) {
            out << io::fmt(f0.x(i));
            for (const auto& f : rep.fixed_points) out << ',' << io::fmt(f.values()[i]);
            out << '\n';
        }
    }
    const bool conclusive = rep.status == ProbeStatus::conclusive;
    json meta = meta_base(rc, c);
    meta["status"] = conclusive ? "conclusive" : "inconclusive";
    meta["max_distance"] = rep.max_distance;
    meta["converged"] = rep.converged;
    meta["tol_fix"] = c.cfg.tol_fix;
    meta["wall_time_s"] = seconds_since(t0);
    io::write_json(rc.out / "meta.json", meta);
    return conclusive ? 0 : 2;
}

} // namespace app

inline int run(const RunConfig& rc) {
    switch (rc.subcommand) {
    case Subcommand::solve: return app::run_solve(rc);
    case Subcommand::oracle: return app::run_oracle(rc);
    case Subcommand::check: return app::run_check(rc);
    case Subcommand::master: return app::run_master(rc);
    case Subcommand::probe_uniqueness: return app::run_probe(rc);
    }
    return 1;
}

} // namespace emfg
