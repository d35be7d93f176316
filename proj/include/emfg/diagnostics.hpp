#pragma once

// Monte Carlo checks of the Lasry-Lions type monotonicity conditions.
//
// Sampling cannot certify a universally quantified condition: a "satisfied"
// verdict means no violation was found in `trials` samples. A "violated" verdict
// always carries the offending pair, which re-evaluates to the stored value.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "emfg/detail/parallel.hpp"
#include "emfg/ensemble.hpp"
#include "emfg/fields.hpp"
#include "emfg/flow.hpp"
#include "emfg/hamiltonian.hpp"

namespace emfg {

enum class Verdict { satisfied, violated, inconclusive };

inline std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::satisfied: return "satisfied";
    case Verdict::violated: return "violated";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "unknown";
}

enum class Condition { potential_monotone, terminal_monotone, lagrangian_monotone };

inline std::string to_string(Condition c) {
    switch (c) {
    case Condition::potential_monotone: return "V_monotone";
    case Condition::terminal_monotone: return "psi_monotone";
    case Condition::lagrangian_monotone: return "L_monotone";
    }
    return "unknown";
}

struct MonotonicityReport {
    Condition condition = Condition::potential_monotone;
    std::size_t trials = 0;
    /// Trials with X == X~ are not informative and are skipped.
    std::size_t skipped = 0;
    /// Minimum of the tested quantity; the sign convention makes "> 0" (or ">= 0"
    /// for the terminal condition) the satisfied direction.
    double min_value = std::numeric_limits<double>::infinity();
    std::size_t argmin_trial = 0;
    /// Certificate pair (X, Z) and (X~, Z~); Z parts are only meaningful for the L condition.
    std::optional<PairedEnsemble> first;
    std::optional<PairedEnsemble> second;
    Verdict verdict = Verdict::inconclusive;
    /// L condition only: every non-positive sample had L(., ., X, Z) == L(., ., X~, Z~),
    /// i.e. the weaker "if and only if" form of the condition is not contradicted.
    bool weak_form_compatible = false;
};

/// E[F(X, X) - F(X, X~) + F(X~, X~) - F(X~, X)] for same-size ensembles.
inline double monotonicity_expression(const LawField& f, const Ensemble& a, const Ensemble& b) {
    require(a.same_shape(b), ErrorCode::invalid_argument, "monotonicity pair must share N and d");
    const auto fa = f.bind_value(a);
    const auto fb = f.bind_value(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += fa(a.point(i)) - fb(a.point(i)) + fb(b.point(i)) - fa(b.point(i));
    return s / static_cast<double>(a.size());
}

/// E[L(X,Z;X,Z) - L(X~,Z~;X,Z) + L(X~,Z~;X~,Z~) - L(X,Z;X~,Z~)].
inline double lagrangian_monotonicity_expression(const HamiltonianFamily& fam, const PairedEnsemble& a,
                                                 const PairedEnsemble& b) {
    require(a.x.same_shape(b.x), ErrorCode::invalid_argument, "monotonicity pair must share N and d");
    const auto la = fam.bind(a.x, a.z);
    const auto lb = fam.bind(b.x, b.z);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += la.lagrangian(a.x.point(i), a.z.point(i)) - la.lagrangian(b.x.point(i), b.z.point(i)) +
             lb.lagrangian(b.x.point(i), b.z.point(i)) - lb.lagrangian(a.x.point(i), a.z.point(i));
    }
    return s / static_cast<double>(a.size());
}

/// For the quadratic-coupled family the L expression reduces to
/// beta |EZ - EZ~|^2 minus the potential expression.
inline double quadratic_lagrangian_reduction(const HamiltonianFamily& fam, const PairedEnsemble& a,
                                             const PairedEnsemble& b) {
    const auto ea = mean(a.z);
    const auto eb = mean(b.z);
    double d2 = 0.0;
    for (std::size_t k = 0; k < ea.size(); ++k) d2 += (ea[k] - eb[k]) * (ea[k] - eb[k]);
    return fam.beta * d2 - monotonicity_expression(fam.potential, a.x, b.x);
}

// ---------------------------------------------------------------------------
// Ensemble sampling

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Point mass, uniform cloud, or two clusters, with a random centre.
inline Ensemble sample_shape(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
    std::uniform_real_distribution<double> centre(-2.0, 2.0), width(0.1, 1.5), unit(-1.0, 1.0);
    std::uniform_int_distribution<int> shape(0, 2);
    std::vector<double> c(dim), c2(dim);
    for (auto& v : c) v = centre(rng);
    for (auto& v : c2) v = centre(rng);
    const int kind = shape(rng);
    const double w = width(rng);
    std::vector<double> flat(n * dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < dim; ++k) {
            double& x = flat[i * dim + k];
            switch (kind) {
            case 0: x = c[k]; break;
            case 1: x = c[k] + w * unit(rng); break;
            default: x = (i % 2 == 0 ? c[k] : c2[k]) + 0.1 * w * unit(rng); break;
            }
        }
    return Ensemble(dim, std::move(flat));
}

inline std::size_t sample_size(std::mt19937_64& rng) {
    static constexpr std::size_t sizes[] = {1, 2, 8, 64};
    return sizes[std::uniform_int_distribution<int>(0, 3)(rng)];
}

/// Independent per-trial generator, so the report does not depend on evaluation order.
inline std::mt19937_64 trial_rng(std::uint64_t seed, std::size_t trial) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(trial) + 1)));
}

inline void require_law_dependent(const LawField& f, std::size_t dim) {
    // Distinct, irregular points: a point mass would be invariant under any relabelling.
    std::vector<double> flat(8 * dim);
    for (std::size_t j = 0; j < flat.size(); ++j) flat[j] = std::sin(1.7 * static_cast<double>(j) + 0.3) * 1.5;
    const Ensemble x(dim, std::move(flat));
    std::vector<std::size_t> perm = {3, 7, 0, 5, 1, 6, 2, 4};
    const Ensemble y = permuted(x, perm);
    for (std::size_t i = 0; i < 3; ++i) {
        const double a = f(x.point(i), x);
        const double b = f(x.point(i), y);
        require(std::abs(a - b) <= 1e-12 * (1.0 + std::abs(a)), ErrorCode::invalid_argument,
                "field is not invariant under sample permutation (not a function of the law)");
    }
}

struct TrialPair {
    PairedEnsemble a;
    PairedEnsemble b;
};

inline TrialPair sample_pair(std::uint64_t seed, std::size_t trial, std::size_t dim) {
    auto rng = trial_rng(seed, trial);
    const std::size_t n = sample_size(rng);
    Ensemble x = sample_shape(rng, n, dim);
    Ensemble z = sample_shape(rng, n, dim);
    Ensemble xt = sample_shape(rng, n, dim);
    Ensemble zt = sample_shape(rng, n, dim);
    return {PairedEnsemble(std::move(x), std::move(z)), PairedEnsemble(std::move(xt), std::move(zt))};
}

template <class Value>
MonotonicityReport run_trials(Condition cond, std::size_t dim, std::size_t trials, std::uint64_t seed,
                              bool compare_z, int threads, Value&& value) {
    std::vector<double> values(trials, std::numeric_limits<double>::quiet_NaN());
    parallel_for(trials, threads, [&](std::size_t t) {
        const TrialPair p = sample_pair(seed, t, dim);
        const bool same = p.a.x == p.b.x && (!compare_z || p.a.z == p.b.z);
        if (!same) values[t] = value(p.a, p.b);
    });
    MonotonicityReport r;
    r.condition = cond;
    r.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
        if (std::isnan(values[t])) {
            ++r.skipped;
            continue;
        }
        if (values[t] < r.min_value) {
            r.min_value = values[t];
            r.argmin_trial = t;
        }
    }
    if (r.skipped < trials) {
        TrialPair p = sample_pair(seed, r.argmin_trial, dim);
        r.first = std::move(p.a);
        r.second = std::move(p.b);
    }
    return r;
}

} // namespace detail

/// Potential condition E(V(X,X) - V(X,X~) + V(X~,X~) - V(X~,X)) < 0 for X != X~.
/// The recorded value is the negated expression; satisfied means min_value > 0.
inline MonotonicityReport check_V_monotone(const LawField& V, std::size_t dim, std::size_t trials,
                                           std::uint64_t seed, int threads = 1) {
    detail::require_law_dependent(V, dim);
    auto r = detail::run_trials(Condition::potential_monotone, dim, trials, seed, false, threads,
                                [&](const PairedEnsemble& a, const PairedEnsemble& b) {
                                    return -monotonicity_expression(V, a.x, b.x);
                                });
    if (r.skipped == trials) r.verdict = Verdict::inconclusive;
    else r.verdict = r.min_value > 0.0 ? Verdict::satisfied : Verdict::violated;
    return r;
}

/// Terminal condition E(psi(X,X) - psi(X,X~) + psi(X~,X~) - psi(X~,X)) >= 0.
inline MonotonicityReport check_psi_monotone(const LawField& psi, std::size_t dim, std::size_t trials,
                                             std::uint64_t seed, int threads = 1) {
    detail::require_law_dependent(psi, dim);
    auto r = detail::run_trials(Condition::terminal_monotone, dim, trials, seed, false, threads,
                                [&](const PairedEnsemble& a, const PairedEnsemble& b) {
                                    return monotonicity_expression(psi, a.x, b.x);
                                });
    if (r.skipped == trials) r.verdict = Verdict::inconclusive;
    else r.verdict = r.min_value >= 0.0 ? Verdict::satisfied : Verdict::violated;
    return r;
}

namespace detail {
/// L(x, v, X, Z) == L(x, v, X~, Z~) at every sample point of both ensembles.
inline bool same_lagrangian(const HamiltonianFamily& fam, const PairedEnsemble& a, const PairedEnsemble& b) {
    const auto la = fam.bind(a.x, a.z);
    const auto lb = fam.bind(b.x, b.z);
    for (const PairedEnsemble* e : {&a, &b})
        for (std::size_t i = 0; i < e->size(); ++i) {
            const double u = la.lagrangian(e->x.point(i), e->z.point(i));
            const double w = lb.lagrangian(e->x.point(i), e->z.point(i));
            if (std::abs(u - w) > 1e-12 * (1.0 + std::abs(u))) return false;
        }
    return true;
}
} // namespace detail

/// Joint condition E(L(X,Z;X,Z) - L(X~,Z~;X,Z) + L(X~,Z~;X~,Z~) - L(X,Z;X~,Z~)) > 0.
/// A violated verdict also reports whether the weak form is still compatible.
inline MonotonicityReport check_L_monotone(const HamiltonianFamily& fam, std::size_t trials, std::uint64_t seed,
                                           int threads = 1) {
    auto r = detail::run_trials(Condition::lagrangian_monotone, fam.dim, trials, seed, true, threads,
                                [&](const PairedEnsemble& a, const PairedEnsemble& b) {
                                    return lagrangian_monotonicity_expression(fam, a, b);
                                });
    if (r.skipped == trials) {
        r.verdict = Verdict::inconclusive;
        return r;
    }
    r.verdict = r.min_value > 0.0 ? Verdict::satisfied : Verdict::violated;
    if (r.verdict == Verdict::violated) {
        r.weak_form_compatible = true;
        for (std::size_t t = 0; t < trials && r.weak_form_compatible; ++t) {
            const auto p = detail::sample_pair(seed, t, fam.dim);
            if (p.a.x == p.b.x && p.a.z == p.b.z) continue;
            if (lagrangian_monotonicity_expression(fam, p.a, p.b) <= 0.0 && !detail::same_lagrangian(fam, p.a, p.b))
                r.weak_form_compatible = false;
        }
    }
    return r;
}

/// Re-evaluates the stored certificate pair; equals min_value for a faithful report.
inline double reevaluate_certificate(const MonotonicityReport& r, const HamiltonianFamily* fam, const LawField* field) {
    require(r.first.has_value() && r.second.has_value(), ErrorCode::invalid_argument, "report has no certificate");
    switch (r.condition) {
    case Condition::potential_monotone:
        return -monotonicity_expression(*field, r.first->x, r.second->x);
    case Condition::terminal_monotone:
        return monotonicity_expression(*field, r.first->x, r.second->x);
    case Condition::lagrangian_monotone:
        return lagrangian_monotonicity_expression(*fam, *r.first, *r.second);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Second-derivative form of the joint condition

/// E[Z.D2_vZ L.Z + Y.D2_xX L.Y + Z.D2_vX L.Y + Y.D2_xZ L.Z] at the probe (X, Z) in the
/// direction (Y, W): the mixed derivative d^2/ds dtau of
///   E L(X + sY, Z + sW; X + tau Y, Z + tau W)
/// by central differences. Disagreement between steps h and h/2 flags a non-smooth probe.
inline double second_derivative_form(const HamiltonianFamily& fam, const PairedEnsemble& probe,
                                     const PairedEnsemble& direction, double h = 1e-3) {
    require(probe.x.same_shape(direction.x), ErrorCode::invalid_argument, "direction must match the probe shape");
    auto shifted = [](const Ensemble& base, const Ensemble& dir, double s) { return detail::axpy(base, s, dir); };
    auto f = [&](double s, double tau) {
        const Ensemble lx = shifted(probe.x, direction.x, tau);
        const Ensemble lz = shifted(probe.z, direction.z, tau);
        const auto b = fam.bind(lx, lz);
        const Ensemble px = shifted(probe.x, direction.x, s);
        const Ensemble pz = shifted(probe.z, direction.z, s);
        double acc = 0.0;
        for (std::size_t i = 0; i < px.size(); ++i) acc += b.lagrangian(px.point(i), pz.point(i));
        return acc / static_cast<double>(px.size());
    };
    auto mixed = [&](double step) {
        return (f(step, step) - f(step, -step) - f(-step, step) + f(-step, -step)) / (4.0 * step * step);
    };
    const double coarse = mixed(h);
    const double fine = mixed(0.5 * h);
    require(std::abs(coarse - fine) <= 1e-4 * (1.0 + std::abs(fine)), ErrorCode::non_smooth_probe,
            "finite-difference mixed derivative is unstable at this probe (L not smooth there)");
    return fine;
}

/// Minimum of the form over `n` random unit directions at the probe.
inline double second_derivative_scan(const HamiltonianFamily& fam, const PairedEnsemble& probe, std::size_t n,
                                     std::uint64_t seed) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
        auto rng = detail::trial_rng(seed, t);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<double> y(probe.x.flat().size()), w(y.size());
        double nrm = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) {
            y[k] = g(rng);
            w[k] = g(rng);
            nrm += y[k] * y[k] + w[k] * w[k];
        }
        nrm = std::sqrt(nrm / static_cast<double>(probe.size()));
        for (std::size_t k = 0; k < y.size(); ++k) {
            y[k] /= nrm;
            w[k] /= nrm;
        }
        PairedEnsemble dir(Ensemble(probe.dim(), std::move(y)), Ensemble(probe.dim(), std::move(w)));
        worst = std::min(worst, second_derivative_form(fam, probe, dir));
    }
    return worst;
}

} // namespace emfg
