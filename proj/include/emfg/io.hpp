#pragma once

// CSV and JSON serialization of ensembles, solution bundles and reports.
// Every double is written with 17 significant digits, so files round-trip exactly.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "emfg/analytic.hpp"
#include "emfg/diagnostics.hpp"
#include "emfg/mfg.hpp"

namespace emfg::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::io, "cannot open " + path.string() + " for writing");
    return out;
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        cells.push_back(cell);
    }
    return cells;
}

inline double parse_double(const std::string& s, const fs::path& path, std::size_t line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    require(used == s.size() && !s.empty(), ErrorCode::io,
            path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
    return v;
}

/// Rows of numbers under a header whose columns must equal `expected` (empty = any).
inline std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_table(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorCode::io, path.string() + ": missing header");
    auto header = split(line);
    std::vector<std::vector<double>> rows;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        require(cells.size() == header.size(), ErrorCode::io, path.string() + ":" + std::to_string(n) + ": wrong column count");
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(parse_double(c, path, n));
        rows.push_back(std::move(row));
    }
    return {std::move(header), std::move(rows)};
}

inline std::string indexed_header(const char* prefix, std::size_t d) {
    std::string h;
    for (std::size_t k = 0; k < d; ++k) h += (k ? "," : "") + std::string(prefix) + std::to_string(k);
    return h;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Ensembles

inline void write_ensemble(const fs::path& path, const Ensemble& e) {
    auto out = detail::open_out(path);
    out << detail::indexed_header("x", e.dim()) << '\n';
    for (std::size_t i = 0; i < e.size(); ++i) {
        for (std::size_t k = 0; k < e.dim(); ++k) out << (k ? "," : "") << fmt(e(i, k));
        out << '\n';
    }
}

inline Ensemble read_ensemble(const fs::path& path, double q = 2.0) {
    auto [header, rows] = detail::read_table(path);
    require(!header.empty() && header == detail::split(detail::indexed_header("x", header.size())), ErrorCode::io,
            path.string() + ": header must be x0,...,x{d-1}");
    std::vector<double> flat;
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return Ensemble(header.size(), std::move(flat), q);
}

inline void write_paired(const fs::path& path, const PairedEnsemble& p) {
    auto out = detail::open_out(path);
    out << detail::indexed_header("x", p.dim()) << ',' << detail::indexed_header("z", p.dim()) << '\n';
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (std::size_t k = 0; k < p.dim(); ++k) out << (k ? "," : "") << fmt(p.x(i, k));
        for (std::size_t k = 0; k < p.dim(); ++k) out << ',' << fmt(p.z(i, k));
        out << '\n';
    }
}

inline PairedEnsemble read_paired(const fs::path& path, double q = 2.0) {
    auto [header, rows] = detail::read_table(path);
    require(header.size() % 2 == 0 && !header.empty(), ErrorCode::io, path.string() + ": paired header needs 2d columns");
    const std::size_t d = header.size() / 2;
    const auto expected = detail::split(detail::indexed_header("x", d) + "," + detail::indexed_header("z", d));
    require(header == expected, ErrorCode::io, path.string() + ": header must be x0..,z0..");
    std::vector<double> x, z;
    for (const auto& r : rows) {
        x.insert(x.end(), r.begin(), r.begin() + static_cast<std::ptrdiff_t>(d));
        z.insert(z.end(), r.begin() + static_cast<std::ptrdiff_t>(d), r.end());
    }
    return PairedEnsemble(Ensemble(d, std::move(x), q), Ensemble(d, std::move(z), q));
}

// ---------------------------------------------------------------------------
// Solution bundle

inline void write_value(const fs::path& path, const ValueGrid& vg) {
    auto out = detail::open_out(path);
    const auto& s = vg.spec();
    out << "t,x,u,du_dx\n";
    for (std::size_t m = 0; m <= s.steps; ++m)
        for (std::size_t i = 0; i < s.nx; ++i)
            out << fmt(s.t(m)) << ',' << fmt(s.x(i)) << ',' << fmt(vg.u(m, i)) << ',' << fmt(vg.g(m, i)) << '\n';
}

/// One row per (time, sample). Multi-dimensional ensembles get indexed columns;
/// the p columns are left empty when the trajectory carries no costates.
inline void write_trajectory(const fs::path& path, const TrajectoryEnsemble& tr) {
    auto out = detail::open_out(path);
    const std::size_t d = tr.X.front().dim();
    const bool has_p = !tr.P.empty();
    if (d == 1) out << "t,sample_index,x,v,p\n";
    else
        out << "t,sample_index," << detail::indexed_header("x", d) << ',' << detail::indexed_header("v", d) << ','
            << detail::indexed_header("p", d) << '\n';
    for (std::size_t m = 0; m < tr.times.size(); ++m)
        for (std::size_t i = 0; i < tr.samples(); ++i) {
            out << fmt(tr.times[m]) << ',' << i;
            for (std::size_t k = 0; k < d; ++k) out << ',' << fmt(tr.X[m](i, k));
            for (std::size_t k = 0; k < d; ++k) out << ',' << fmt(tr.V[m](i, k));
            for (std::size_t k = 0; k < d; ++k) out << ',' << (has_p ? fmt(tr.P[m](i, k)) : std::string());
            out << '\n';
        }
}

inline void write_residuals(const fs::path& path, const std::vector<ResidualEntry>& hist) {
    auto out = detail::open_out(path);
    out << "iter,phi_residual,traj_residual\n";
    for (const auto& r : hist) out << r.iter << ',' << fmt(r.phi_residual) << ',' << fmt(r.traj_residual) << '\n';
}

inline void write_lq_coefficients(const fs::path& path, const LQState& s) {
    auto out = detail::open_out(path);
    const auto d = static_cast<std::size_t>(s.theta.front().size());
    if (d == 1) {
        out << "t,gamma,theta,zeta\n";
        for (std::size_t m = 0; m < s.times.size(); ++m)
            out << fmt(s.times[m]) << ',' << fmt(s.gamma[m](0, 0)) << ',' << fmt(s.theta[m](0)) << ',' << fmt(s.zeta[m]) << '\n';
        return;
    }
    out << 't';
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) out << ",gamma" << i << j;
    out << ',' << detail::indexed_header("theta", d) << ",zeta\n";
    for (std::size_t m = 0; m < s.times.size(); ++m) {
        out << fmt(s.times[m]);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                out << ',' << fmt(s.gamma[m](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        for (std::size_t i = 0; i < d; ++i) out << ',' << fmt(s.theta[m](static_cast<Eigen::Index>(i)));
        out << ',' << fmt(s.zeta[m]) << '\n';
    }
}

inline void write_quartic_coefficients(const fs::path& path, const QuarticState& s) {
    auto out = detail::open_out(path);
    out << "t,p,q\n";
    for (std::size_t m = 0; m < s.times.size(); ++m)
        out << fmt(s.times[m]) << ',' << fmt(s.p[m]) << ',' << fmt(s.q[m]) << '\n';
}

inline void write_json(const fs::path& path, const json& j) {
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
}

/// Two-column CSVs for external plotting.
inline void write_plot_files(const fs::path& dir, const ValueGrid& vg, const TrajectoryEnsemble& tr,
                             const std::vector<ResidualEntry>* hist) {
    {
        auto out = detail::open_out(dir / "u_vs_x_at_t0.csv");
        out << "x,u\n";
        for (std::size_t i = 0; i < vg.spec().nx; ++i) out << fmt(vg.spec().x(i)) << ',' << fmt(vg.u(0, i)) << '\n';
    }
    {
        auto out = detail::open_out(dir / "mean_trajectory.csv");
        out << "t,mean_x\n";
        for (std::size_t m = 0; m < tr.times.size(); ++m) out << fmt(tr.times[m]) << ',' << fmt(mean(tr.X[m])[0]) << '\n';
    }
    if (hist) {
        auto out = detail::open_out(dir / "residuals.csv");
        out << "iter,fixed_point_residual\n";
        for (const auto& r : *hist) out << r.iter << ',' << fmt(r.fixed_point_residual) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Monotonicity report

/// JSON summary; certificate ensembles go to sibling CSV files named in the report.
inline json write_report(const fs::path& dir, const MonotonicityReport& r) {
    json j;
    j["condition"] = to_string(r.condition);
    j["trials"] = r.trials;
    j["skipped"] = r.skipped;
    j["min_value"] = r.min_value;
    j["verdict"] = to_string(r.verdict);
    j["certificate_files"] = json::array();
    if (r.condition == Condition::lagrangian_monotone && r.verdict == Verdict::violated)
        j["weak_form_compatible"] = r.weak_form_compatible;
    if (r.verdict == Verdict::violated && r.first && r.second) {
        if (r.condition == Condition::lagrangian_monotone) {
            write_paired(dir / "certificate_first.csv", *r.first);
            write_paired(dir / "certificate_second.csv", *r.second);
        } else {
            write_ensemble(dir / "certificate_first.csv", r.first->x);
            write_ensemble(dir / "certificate_second.csv", r.second->x);
        }
        j["certificate_files"] = {"certificate_first.csv", "certificate_second.csv"};
    }
    write_json(dir / "report.json", j);
    return j;
}

} // namespace emfg::io
