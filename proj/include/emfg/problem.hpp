#pragma once

// Problem documents: strict JSON schema, canonical re-emission, and construction
// of the family / initial ensemble / solver configuration they describe.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "emfg/io.hpp"

namespace emfg {

using json = nlohmann::json;

struct FieldSpec {
    std::string kind = "zero";
    std::map<std::string, double> params;
    /// Vector-valued parameter of the linear terminal cost.
    std::vector<double> alpha;
};

struct InitialSpec {
    std::string kind = "uniform";
    std::size_t n = 0;
    // samples
    std::vector<std::vector<double>> values;
    std::string csv;
    // uniform / gaussian_like
    double lo = -1.0, hi = 1.0;
    std::string layout = "random";
    double mean = 0.0, std = 1.0;
};

struct CheckSpec {
    std::string condition = "all";
    std::size_t trials = 10000;
};

struct MasterSpec {
    std::vector<double> times;
    std::vector<double> xs;
};

struct ProblemSpec {
    std::string family = "quadratic";
    double beta = 0.0;
    double horizon = 1.0;
    double q = 2.0;
    std::size_t dim = 1;
    FieldSpec potential;
    FieldSpec terminal;
    InitialSpec initial;
    SolverConfig solver;
    CheckSpec check;
    std::optional<MasterSpec> master;
    int probe_k = 3;
    /// Directory of the problem file, for resolving relative CSV paths.
    std::filesystem::path base_dir;
};

namespace schema {

[[noreturn]] inline void fail(const std::string& where, const std::string& expect) {
    throw Error(ErrorCode::schema, where + ": " + expect);
}

inline void keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail(where, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) fail(where + "." + k, "unknown key");
}

inline double number(const json& j, const std::string& key, const std::string& where, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) fail(where + "." + key, "expected a finite number");
    return v.get<double>();
}

inline std::size_t count(const json& j, const std::string& key, const std::string& where, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail(where + "." + key, "expected a non-negative integer");
    return v.get<std::size_t>();
}

inline std::string text(const json& j, const std::string& key, const std::string& where, const std::string& fallback,
                        std::initializer_list<const char*> choices) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) fail(where + "." + key, "expected a string");
    const auto s = j.at(key).get<std::string>();
    std::string list;
    for (const char* c : choices) {
        if (s == c) return s;
        list += std::string(list.empty() ? "" : "|") + c;
    }
    fail(where + "." + key, "expected one of " + list + ", got '" + s + "'");
}

inline std::vector<double> numbers(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number() || !std::isfinite(e.get<double>())) fail(where, "expected finite numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

/// Parameter names accepted per (role, kind).
inline std::vector<std::string> field_params(const std::string& family, bool terminal, const std::string& kind) {
    if (kind == "zero") return {};
    if (kind == "constant") return {"c"};
    if (kind == "moment_quadratic") return {"kappa"};
    if (kind == "linear") return {"alpha"};
    if (kind == "quartic") return terminal ? std::vector<std::string>{"A", "B"} : std::vector<std::string>{"u0"};
    if (kind == "quadratic_form")
        return terminal ? std::vector<std::string>{"M", "N", "Q", "kappa"} : std::vector<std::string>{"A", "B", "C", "kappa"};
    (void)family;
    return {};
}

inline FieldSpec field(const json& j, const std::string& where, const std::string& family, bool terminal) {
    keys(j, where, {"kind", "params"});
    FieldSpec f;
    if (family == "quartic") {
        f.kind = text(j, "kind", where, "quartic", {"quartic"});
    } else if (family == "lq") {
        f.kind = text(j, "kind", where, "quadratic_form", {"quadratic_form"});
    } else if (terminal) {
        f.kind = text(j, "kind", where, "zero", {"zero", "constant", "linear", "moment_quadratic", "quadratic_form"});
    } else {
        f.kind = text(j, "kind", where, "zero", {"zero", "constant", "moment_quadratic", "quadratic_form"});
    }
    const auto allowed = field_params(family, terminal, f.kind);
    if (j.contains("params")) {
        const auto& p = j.at("params");
        if (!p.is_object()) fail(where + ".params", "expected an object");
        for (const auto& [k, v] : p.items()) {
            if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
                fail(where + ".params." + k, "unknown parameter for kind '" + f.kind + "'");
            if (k == "alpha") f.alpha = numbers(v, where + ".params.alpha");
            else f.params[k] = number(p, k, where + ".params", 0.0);
        }
    }
    for (const auto& k : allowed)
        if (k != "alpha" && !f.params.count(k)) f.params[k] = 0.0;
    return f;
}

inline InitialSpec initial(const json& j, const std::string& where, std::size_t dim) {
    keys(j, where, {"kind", "params", "N"});
    InitialSpec s;
    s.kind = text(j, "kind", where, "uniform", {"samples", "uniform", "gaussian_like"});
    s.n = count(j, "N", where, 0);
    const json p = j.contains("params") ? j.at("params") : json::object();
    const std::string pw = where + ".params";
    if (s.kind == "samples") {
        keys(p, pw, {"values", "csv"});
        if (p.contains("values") == p.contains("csv")) fail(pw, "expected exactly one of 'values' or 'csv'");
        if (p.contains("csv")) {
            if (!p.at("csv").is_string()) fail(pw + ".csv", "expected a path string");
            s.csv = p.at("csv").get<std::string>();
        } else {
            const auto& v = p.at("values");
            if (!v.is_array() || v.empty()) fail(pw + ".values", "expected a non-empty array");
            for (const auto& row : v) {
                if (row.is_array()) s.values.push_back(numbers(row, pw + ".values"));
                else s.values.push_back(numbers(json::array({row}), pw + ".values"));
                if (s.values.back().size() != dim) fail(pw + ".values", "each sample needs " + std::to_string(dim) + " coordinates");
            }
            if (s.n != 0 && s.n != s.values.size()) fail(where + ".N", "does not match the number of samples");
            s.n = s.values.size();
        }
    } else if (s.kind == "uniform") {
        keys(p, pw, {"lo", "hi", "layout"});
        s.lo = number(p, "lo", pw, -1.0);
        s.hi = number(p, "hi", pw, 1.0);
        s.layout = text(p, "layout", pw, "random", {"random", "grid"});
        if (!(s.hi > s.lo)) fail(pw, "expected lo < hi");
        if (s.n == 0) fail(where + ".N", "expected a positive sample count");
    } else {
        keys(p, pw, {"mean", "std"});
        s.mean = number(p, "mean", pw, 0.0);
        s.std = number(p, "std", pw, 1.0);
        if (!(s.std > 0.0)) fail(pw + ".std", "expected a positive number");
        if (s.n == 0) fail(where + ".N", "expected a positive sample count");
    }
    return s;
}

inline SolverConfig solver(const json& j, const std::string& where) {
    keys(j, where, {"nx", "steps", "nv", "v_max", "damping", "tol_fix", "tol_traj", "max_outer", "mode", "domain", "t1_fraction"});
    SolverConfig c;
    c.nx = count(j, "nx", where, c.nx);
    c.steps = count(j, "steps", where, c.steps);
    c.nv = count(j, "nv", where, c.nv);
    c.v_max = number(j, "v_max", where, c.v_max);
    c.damping = number(j, "damping", where, c.damping);
    c.tol_fix = number(j, "tol_fix", where, c.tol_fix);
    c.tol_traj = number(j, "tol_traj", where, c.tol_traj);
    c.max_outer = static_cast<int>(count(j, "max_outer", where, static_cast<std::size_t>(c.max_outer)));
    c.mode = text(j, "mode", where, "value", {"value", "trajectory"}) == "value" ? IterationMode::value : IterationMode::trajectory;
    c.t1_fraction = number(j, "t1_fraction", where, c.t1_fraction);
    if (j.contains("domain")) {
        const auto d = numbers(j.at("domain"), where + ".domain");
        if (d.size() != 2 || !(d[1] > d[0])) fail(where + ".domain", "expected [lo, hi] with lo < hi");
        c.domain = std::make_pair(d[0], d[1]);
    }
    try {
        c.validate();
    } catch (const Error& e) {
        fail(where, e.what());
    }
    return c;
}

} // namespace schema

inline ProblemSpec parse_problem_json(const json& j, const std::filesystem::path& base_dir = {}) {
    using namespace schema;
    keys(j, "problem", {"family", "beta", "T", "q", "dim", "potential", "terminal", "initial", "solver", "check", "master", "probe"});
    ProblemSpec s;
    s.base_dir = base_dir;
    if (!j.contains("family")) fail("problem.family", "required");
    s.family = text(j, "family", "problem", "quadratic", {"quadratic", "lq", "quartic"});
    s.beta = number(j, "beta", "problem", 0.0);
    if (s.family == "quartic" && s.beta != 0.0) fail("problem.beta", "the quartic family has no velocity coupling; expected 0");
    if (s.beta == -1.0) fail("problem.beta", "beta = -1 makes the velocity equation singular");
    if (!j.contains("T")) fail("problem.T", "required");
    s.horizon = number(j, "T", "problem", 1.0);
    if (!(s.horizon > 0.0)) fail("problem.T", "expected a positive horizon");
    s.q = number(j, "q", "problem", 2.0);
    if (!(s.q >= 1.0)) fail("problem.q", "expected q >= 1");
    s.dim = count(j, "dim", "problem", 1);
    if (s.dim == 0 || (s.family == "quartic" && s.dim != 1)) fail("problem.dim", "expected 1 (or >= 1 for lq/quadratic)");
    s.potential = field(j.value("potential", json::object()), "problem.potential", s.family, false);
    s.terminal = field(j.value("terminal", json::object()), "problem.terminal", s.family, true);
    if (s.terminal.kind == "linear" && s.terminal.alpha.size() != s.dim)
        fail("problem.terminal.params.alpha", "expected " + std::to_string(s.dim) + " coefficients");
    if (!j.contains("initial")) fail("problem.initial", "required");
    s.initial = initial(j.at("initial"), "problem.initial", s.dim);
    s.solver = solver(j.value("solver", json::object()), "problem.solver");
    if (j.contains("check")) {
        const auto& c = j.at("check");
        keys(c, "problem.check", {"condition", "trials"});
        s.check.condition = text(c, "condition", "problem.check", "all", {"all", "V", "psi", "L"});
        s.check.trials = count(c, "trials", "problem.check", 10000);
        if (s.check.trials == 0) fail("problem.check.trials", "expected a positive count");
    }
    if (j.contains("master")) {
        const auto& m = j.at("master");
        keys(m, "problem.master", {"times", "xs"});
        MasterSpec ms;
        if (!m.contains("times") || !m.contains("xs")) fail("problem.master", "expected 'times' and 'xs'");
        ms.times = numbers(m.at("times"), "problem.master.times");
        ms.xs = numbers(m.at("xs"), "problem.master.xs");
        for (double t : ms.times)
            if (t < 0.0 || t > s.horizon) fail("problem.master.times", "times must lie in [0, T]");
        s.master = ms;
    }
    if (j.contains("probe")) {
        const auto& p = j.at("probe");
        keys(p, "problem.probe", {"k"});
        s.probe_k = static_cast<int>(count(p, "k", "problem.probe", 3));
        if (s.probe_k < 1) fail("problem.probe.k", "expected k >= 1");
    }
    return s;
}

inline ProblemSpec parse_problem(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "cannot open problem file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::schema, path.string() + ": invalid JSON: " + e.what());
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        require(eq != std::string::npos && eq > 0, ErrorCode::invalid_argument, "override must be key=value: " + o);
        std::string ptr = "/" + o.substr(0, eq);
        std::replace(ptr.begin(), ptr.end(), '.', '/');
        const std::string raw = o.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::parse_error&) {
            value = raw;
        }
        j[json::json_pointer(ptr)] = value;
    }
    return parse_problem_json(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

/// Canonical form: every field explicit, keys sorted.
inline json emit(const ProblemSpec& s) {
    auto field_json = [](const FieldSpec& f) {
        json p = json::object();
        for (const auto& [k, v] : f.params) p[k] = v;
        if (f.kind == "linear") p["alpha"] = f.alpha;
        return json{{"kind", f.kind}, {"params", p}};
    };
    json init{{"kind", s.initial.kind}, {"N", s.initial.n}};
    if (s.initial.kind == "samples") {
        if (!s.initial.csv.empty()) init["params"] = {{"csv", s.initial.csv}};
        else init["params"] = {{"values", s.initial.values}};
    } else if (s.initial.kind == "uniform") {
        init["params"] = {{"lo", s.initial.lo}, {"hi", s.initial.hi}, {"layout", s.initial.layout}};
    } else {
        init["params"] = {{"mean", s.initial.mean}, {"std", s.initial.std}};
    }
    const auto& c = s.solver;
    json solver{{"nx", c.nx},          {"steps", c.steps},       {"nv", c.nv},
                {"v_max", c.v_max},    {"damping", c.damping},   {"tol_fix", c.tol_fix},
                {"tol_traj", c.tol_traj}, {"max_outer", c.max_outer},
                {"mode", c.mode == IterationMode::value ? "value" : "trajectory"}, {"t1_fraction", c.t1_fraction}};
    if (c.domain) solver["domain"] = {c.domain->first, c.domain->second};
    json j{{"family", s.family},
           {"beta", s.beta},
           {"T", s.horizon},
           {"q", s.q},
           {"dim", s.dim},
           {"potential", field_json(s.potential)},
           {"terminal", field_json(s.terminal)},
           {"initial", init},
           {"solver", solver},
           {"check", {{"condition", s.check.condition}, {"trials", s.check.trials}}},
           {"probe", {{"k", s.probe_k}}}};
    if (s.master) j["master"] = {{"times", s.master->times}, {"xs", s.master->xs}};
    return j;
}

// ---------------------------------------------------------------------------
// Construction

/// Initial ensemble; random layouts draw from mt19937_64(seed).
inline Ensemble build_initial(const ProblemSpec& s, std::uint64_t seed) {
    const auto& in = s.initial;
    if (in.kind == "samples") {
        if (!in.csv.empty()) {
            std::filesystem::path p(in.csv);
            if (p.is_relative()) p = s.base_dir / p;
            Ensemble e = io::read_ensemble(p, s.q);
            require(e.dim() == s.dim, ErrorCode::schema, "problem.initial.params.csv: dimension does not match problem.dim");
            return e;
        }
        std::vector<double> flat;
        for (const auto& r : in.values) flat.insert(flat.end(), r.begin(), r.end());
        return Ensemble(s.dim, std::move(flat), s.q);
    }
    std::mt19937_64 rng(seed);
    std::vector<double> flat(in.n * s.dim);
    if (in.kind == "uniform") {
        if (in.layout == "grid") {
            for (std::size_t i = 0; i < in.n; ++i) {
                const double x = in.n == 1 ? 0.5 * (in.lo + in.hi)
                                           : in.lo + (in.hi - in.lo) * static_cast<double>(i) / static_cast<double>(in.n - 1);
                for (std::size_t k = 0; k < s.dim; ++k) flat[i * s.dim + k] = x;
            }
        } else {
            std::uniform_real_distribution<double> u(in.lo, in.hi);
            for (auto& v : flat) v = u(rng);
        }
    } else {
        std::normal_distribution<double> g(in.mean, in.std);
        for (auto& v : flat) v = g(rng);
    }
    return Ensemble(s.dim, std::move(flat), s.q);
}

namespace detail {

inline double param(const FieldSpec& f, const char* k) {
    const auto it = f.params.find(k);
    return it == f.params.end() ? 0.0 : it->second;
}

/// x |-> 1/2 a|x|^2 + b.x + c  plus  kappa E|x - X|^2, as law-dependent LQ maps.
inline void lq_maps(std::size_t dim, double a, double b, double c, double kappa, LawMatrix& A, LawVector& B, LawScalar& C) {
    const auto d = static_cast<Eigen::Index>(dim);
    A = [=](const Ensemble&) -> Eigen::MatrixXd { return (a + 2.0 * kappa) * Eigen::MatrixXd::Identity(d, d); };
    B = [=](const Ensemble& X) -> Eigen::VectorXd {
        return Eigen::VectorXd::Constant(d, b) - 2.0 * kappa * to_vector(mean(X));
    };
    C = [=](const Ensemble& X) { return c + kappa * moment(X, 2.0); };
}

inline LawField quadratic_field(const FieldSpec& f, std::size_t dim, bool terminal) {
    LawMatrix A;
    LawVector B;
    LawScalar C;
    lq_maps(dim, param(f, terminal ? "M" : "A"), param(f, terminal ? "N" : "B"), param(f, terminal ? "Q" : "C"),
            param(f, "kappa"), A, B, C);
    return fields::quadratic_form(A, B, C);
}

inline LawField build_field(const FieldSpec& f, std::size_t dim, bool terminal) {
    if (f.kind == "zero") return fields::zero();
    if (f.kind == "constant") return fields::constant(param(f, "c"));
    if (f.kind == "moment_quadratic") return fields::moment_quadratic(param(f, "kappa"));
    if (f.kind == "linear") return fields::linear(f.alpha);
    if (f.kind == "quadratic_form") return quadratic_field(f, dim, terminal);
    throw Error(ErrorCode::schema, "unsupported field kind '" + f.kind + "'");
}

} // namespace detail

inline LQCoefficients build_lq_coefficients(const ProblemSpec& s) {
    require(s.family == "lq", ErrorCode::invalid_argument, "LQ coefficients need an lq problem");
    LQCoefficients k;
    const auto& p = s.potential;
    const auto& t = s.terminal;
    detail::lq_maps(s.dim, detail::param(p, "A"), detail::param(p, "B"), detail::param(p, "C"), detail::param(p, "kappa"),
                    k.A, k.B, k.C);
    detail::lq_maps(s.dim, detail::param(t, "M"), detail::param(t, "N"), detail::param(t, "Q"), detail::param(t, "kappa"),
                    k.M, k.N, k.Q);
    k.law_independent = detail::param(p, "kappa") == 0.0 && detail::param(t, "kappa") == 0.0;
    return k;
}

inline QuarticCoefficients build_quartic_coefficients(const ProblemSpec& s) {
    require(s.family == "quartic", ErrorCode::invalid_argument, "quartic coefficients need a quartic problem");
    QuarticCoefficients k;
    k.A = detail::param(s.terminal, "A");
    k.B = detail::param(s.terminal, "B");
    const double u0 = detail::param(s.potential, "u0");
    k.U = [u0](const Ensemble&, const Ensemble&) { return u0; };
    return k;
}

inline HamiltonianFamily build_family(const ProblemSpec& s) {
    if (s.family == "lq") return families::lq(s.beta, build_lq_coefficients(s), s.dim);
    if (s.family == "quartic") return families::quartic(build_quartic_coefficients(s));
    return families::quadratic_coupled(s.beta, detail::build_field(s.potential, s.dim, false),
                                       detail::build_field(s.terminal, s.dim, true), s.dim);
}

} // namespace emfg
