#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"

using namespace emfg;

namespace {
const LawField kSpread = fields::moment_quadratic(1.0);   // E|x - X|^2
const LawField kNegSpread = fields::moment_quadratic(-1.0);

Ensemble pointmass(std::size_t n, double v) { return Ensemble::scalar(std::vector<double>(n, v)); }
} // namespace

TEST(MonotonicityExpression, DeterministicPair) {
    EXPECT_NEAR(monotonicity_expression(kSpread, pointmass(4, 0), pointmass(4, 1)), -2.0, 1e-14);
    EXPECT_NEAR(monotonicity_expression(kNegSpread, pointmass(4, 0), pointmass(4, 1)), 2.0, 1e-14);
    EXPECT_EQ(monotonicity_expression(fields::constant(3.0), pointmass(4, 0), pointmass(4, 1)), 0.0);
}

TEST(CheckV, SpreadPotentialHasNoViolation) {
    const auto r = check_V_monotone(kSpread, 1, 10000, 42);
    EXPECT_EQ(r.verdict, Verdict::satisfied);
    EXPECT_GT(r.min_value, 0.0);
    EXPECT_EQ(r.trials, 10000u);
}

TEST(CheckV, AttractivePotentialIsViolatedWithCertificate) {
    const auto r = check_V_monotone(kNegSpread, 1, 2000, 42);
    ASSERT_EQ(r.verdict, Verdict::violated);
    ASSERT_TRUE(r.first && r.second);
    EXPECT_NEAR(reevaluate_certificate(r, nullptr, &kNegSpread), r.min_value, 1e-10);
}

TEST(CheckV, LawIndependentPotentialIsViolated) {
    const auto r = check_V_monotone(fields::quartic(1.0, 0.0), 1, 200, 1);
    EXPECT_EQ(r.verdict, Verdict::violated);
    EXPECT_NEAR(r.min_value, 0.0, 1e-12);
}

TEST(CheckV, RejectsFieldsThatAreNotLawFunctions) {
    // Reads the first sample only, so it changes under relabelling.
    const auto bad = fields::custom([](PointView x, const Ensemble& law) { return x[0] * law(0); });
    EXPECT_THROW(check_V_monotone(bad, 1, 10, 1), Error);
}

TEST(CheckPsi, Examples) {
    // Same expansion as for V: E|x - X|^2 gives -2 on the point-mass pair, so the
    // repulsive sign is the one meeting the ">= 0" requirement.
    EXPECT_NEAR(monotonicity_expression(kNegSpread, pointmass(3, 0), pointmass(3, 1)), 2.0, 1e-14);
    const auto good = check_psi_monotone(kNegSpread, 1, 2000, 7);
    EXPECT_EQ(good.verdict, Verdict::satisfied);
    EXPECT_GE(good.min_value, 0.0);

    const auto flat = check_psi_monotone(fields::linear({0.4}), 1, 500, 7);
    EXPECT_EQ(flat.verdict, Verdict::satisfied);
    EXPECT_NEAR(flat.min_value, 0.0, 1e-12);

    const auto bad = check_psi_monotone(kSpread, 1, 2000, 7);
    ASSERT_EQ(bad.verdict, Verdict::violated);
    EXPECT_NEAR(reevaluate_certificate(bad, nullptr, &kSpread), bad.min_value, 1e-10);
}

TEST(CheckPsi, TwoDimensional) {
    const auto r = check_psi_monotone(fields::moment_quadratic(-1.0), 2, 500, 9);
    EXPECT_EQ(r.verdict, Verdict::satisfied);
    EXPECT_EQ(r.first->dim(), 2u);
}

TEST(CheckL, MeanVelocityCouplingExample) {
    const auto fam = families::quadratic_coupled(1.0, fields::zero(), fields::zero());
    const auto x = Ensemble::scalar({-0.3, 0.2, 0.9});
    const PairedEnsemble a(x, pointmass(3, 1.0)), b(x, pointmass(3, 0.0));
    EXPECT_NEAR(lagrangian_monotonicity_expression(fam, a, b), 1.0, 1e-14);
}

TEST(CheckL, UncoupledIsWeakFormCompatible) {
    const auto fam = families::quadratic_coupled(0.0, fields::zero(), fields::zero());
    const auto r = check_L_monotone(fam, 500, 3);
    EXPECT_EQ(r.verdict, Verdict::violated);
    EXPECT_NEAR(r.min_value, 0.0, 1e-12);
    EXPECT_TRUE(r.weak_form_compatible);
}

TEST(CheckL, CoupledWithMonotonePotentialIsSatisfied) {
    const auto fam = families::quadratic_coupled(1.0, kSpread, fields::zero());
    const auto r = check_L_monotone(fam, 10000, 4);
    EXPECT_EQ(r.verdict, Verdict::satisfied);
    EXPECT_GT(r.min_value, 0.0);
}

TEST(CheckL, AttractiveCrowdIsViolatedAndNotWeaklyCompatible) {
    const auto fam = families::quadratic_coupled(1.0, kNegSpread, kSpread);
    const auto r = check_L_monotone(fam, 2000, 5);
    ASSERT_EQ(r.verdict, Verdict::violated);
    EXPECT_FALSE(r.weak_form_compatible);
    EXPECT_NEAR(reevaluate_certificate(r, &fam, nullptr), r.min_value, 1e-10);
}

TEST(CheckL, ReductionIdentityOnSampledPairs) {
    for (double beta : {0.0, 0.5, 1.0, 2.0}) {
        for (const auto& V : {kSpread, kNegSpread, fields::constant(0.2)}) {
            const auto fam = families::quadratic_coupled(beta, V, fields::zero());
            for (std::size_t t = 0; t < 250; ++t) {
                const auto p = detail::sample_pair(77, t, 1);
                const double direct = lagrangian_monotonicity_expression(fam, p.a, p.b);
                EXPECT_NEAR(direct, quadratic_lagrangian_reduction(fam, p.a, p.b), 1e-10 * (1 + std::abs(direct)));
            }
        }
    }
}

TEST(Reports, SeededAndThreadIndependent) {
    const auto a = check_V_monotone(kNegSpread, 1, 3000, 99, 1);
    const auto b = check_V_monotone(kNegSpread, 1, 3000, 99, 4);
    const auto c = check_V_monotone(kNegSpread, 1, 3000, 100, 1);
    EXPECT_EQ(a.min_value, b.min_value);
    EXPECT_EQ(a.argmin_trial, b.argmin_trial);
    EXPECT_NE(a.argmin_trial, c.argmin_trial);
}

TEST(Reports, SkippedTrialsAreCounted) {
    std::size_t expected = 0;
    for (std::size_t t = 0; t < 2000; ++t) {
        const auto p = detail::sample_pair(8, t, 1);
        expected += p.a.x == p.b.x;
    }
    EXPECT_EQ(check_V_monotone(kSpread, 1, 2000, 8).skipped, expected);
}

TEST(SecondDerivative, Examples) {
    const auto coupled = families::quadratic_coupled(1.0, fields::zero(), fields::zero());
    const auto free = families::quadratic_coupled(0.0, fields::zero(), fields::zero());
    const PairedEnsemble probe(Ensemble::scalar({-0.5, 0.1, 0.7}), Ensemble::scalar({0.3, -0.2, 1.0}));
    const PairedEnsemble z_only(pointmass(3, 0.0), pointmass(3, 1.0));
    const PairedEnsemble none(pointmass(3, 0.0), pointmass(3, 0.0));
    EXPECT_NEAR(second_derivative_form(coupled, probe, z_only), 1.0, 1e-6);
    EXPECT_NEAR(second_derivative_form(coupled, probe, none), 0.0, 1e-12);
    for (const auto* d : {&z_only, &none}) EXPECT_NEAR(second_derivative_form(free, probe, *d), 0.0, 1e-9);
    EXPECT_NEAR(second_derivative_scan(free, probe, 20, 1), 0.0, 1e-6);
}

TEST(SecondDerivative, NonSmoothProbe) {
    // |x - EX| has a kink where the probe sample sits on the mean.
    const auto kink = fields::custom([](PointView x, const Ensemble& law) { return std::abs(x[0] - mean(law)[0]); });
    const auto fam = families::quadratic_coupled(0.0, kink, fields::zero());
    const PairedEnsemble probe(Ensemble::scalar({-1.0, 0.0, 1.0}), pointmass(3, 0.0));
    const PairedEnsemble dir(Ensemble::scalar({0.0, 1.0, 0.0}), pointmass(3, 0.0));
    try {
        second_derivative_form(fam, probe, dir);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::non_smooth_probe);
    }
}
