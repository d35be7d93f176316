#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"

using namespace emfg;
using emfg::testing::constant_scalar;
using emfg::testing::random_ensemble;

// ---------------------------------------------------------------- ensembles

TEST(Ensemble, MomentExamples) {
    EXPECT_DOUBLE_EQ(moment(Ensemble::scalar({1, -1}), 2), 1.0);
    EXPECT_DOUBLE_EQ(moment(Ensemble::scalar({0}), 3.5), 0.0);
    EXPECT_DOUBLE_EQ(moment(Ensemble::scalar({1, 2, 3}), 1), 2.0);
}

TEST(Ensemble, MeanExamples) {
    EXPECT_EQ(mean(Ensemble::scalar({1, 2, 3})), std::vector<double>{2.0});
    EXPECT_EQ(mean(Ensemble(2, {0, 1, 2, 3})), (std::vector<double>{1.0, 2.0}));
    EXPECT_EQ(mean(Ensemble::scalar({-5})), std::vector<double>{-5.0});
}

TEST(Ensemble, RejectsInvalidData) {
    EXPECT_THROW(Ensemble(1, {}), Error);
    EXPECT_THROW(Ensemble(1, {1.0, NAN}), Error);
    EXPECT_THROW(Ensemble(1, {1.0, INFINITY}), Error);
    EXPECT_THROW(Ensemble(2, {1.0, 2.0, 3.0}), Error);
    EXPECT_THROW(Ensemble(1, {1.0}, 0.5), Error);
}

TEST(Ensemble, PairedMarginalsMustMatch) {
    EXPECT_THROW(PairedEnsemble(Ensemble::scalar({1, 2}), Ensemble::scalar({1})), Error);
    const PairedEnsemble p(Ensemble::scalar({1, 2}), Ensemble::scalar({3, 4}));
    EXPECT_EQ(p.size(), 2u);
}

TEST(Wasserstein, Examples) {
    EXPECT_DOUBLE_EQ(wasserstein_1d(Ensemble::scalar({0}), Ensemble::scalar({1}), 1), 1.0);
    const auto a = Ensemble::scalar({0.3, -2, 5});
    EXPECT_DOUBLE_EQ(wasserstein_1d(a, a, 2), 0.0);
    EXPECT_DOUBLE_EQ(wasserstein_1d(Ensemble::scalar({0, 2}), Ensemble::scalar({1, 3}), 2), 1.0);
}

TEST(Wasserstein, SortedListsAtDistanceZero) {
    EXPECT_DOUBLE_EQ(wasserstein_1d(Ensemble::scalar({3, 1, 2}), Ensemble::scalar({1, 2, 3}), 2), 0.0);
}

TEST(Wasserstein, UnequalSizesUseCommonRefinement) {
    // {0} vs {-1, 1}: every unit of mass moves distance 1.
    EXPECT_DOUBLE_EQ(wasserstein_1d(Ensemble::scalar({0}), Ensemble::scalar({-1, 1}), 2), 1.0);
    // {0, 1} vs {0, 0.5, 1}: mass 1/6 moves 0.5 twice in the common refinement (units of 1/6).
    const double w1 = wasserstein_1d(Ensemble::scalar({0, 1}), Ensemble::scalar({0, 0.5, 1}), 1);
    EXPECT_NEAR(w1, 2.0 / 6.0 * 0.5, 1e-15);
}

TEST(Wasserstein, RejectsHigherDimension) {
    try {
        wasserstein_1d(Ensemble(2, {0, 0}), Ensemble(2, {1, 1}), 2);
        FAIL() << "expected unsupported_dimension";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::unsupported_dimension);
    }
}

TEST(Wasserstein, MetricPropertiesOnRandomTriples) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 200; ++t) {
        const auto a = random_ensemble(rng, 17, 1, -3, 3);
        const auto b = random_ensemble(rng, 17, 1, -3, 3);
        const auto c = random_ensemble(rng, 17, 1, -3, 3);
        for (double r : {1.0, 2.0, 3.0}) {
            const double ab = wasserstein_1d(a, b, r), ba = wasserstein_1d(b, a, r);
            EXPECT_NEAR(ab, ba, 1e-14);
            EXPECT_GT(ab, 0.0);
            EXPECT_LE(ab, wasserstein_1d(a, c, r) + wasserstein_1d(c, b, r) + 1e-12);
        }
        EXPECT_DOUBLE_EQ(wasserstein_1d(a, permuted(a, emfg::testing::shuffled_indices(rng, 17)), 2), 0.0);
    }
}

// ---------------------------------------------------------------- families

TEST(Family, QuadraticCoupledFormulas) {
    const auto fam = families::quadratic_coupled(0.7, fields::moment_quadratic(1.5), fields::zero());
    const auto X = Ensemble::scalar({-1, 0.5, 2});
    const auto Z = Ensemble::scalar({0.2, -0.4, 1.1});
    const double ez = (0.2 - 0.4 + 1.1) / 3.0;
    const double x = 0.3, v = -0.8, p = 1.25;
    const double V = 1.5 * ((x + 1) * (x + 1) + (x - 0.5) * (x - 0.5) + (x - 2) * (x - 2)) / 3.0;
    const auto b = fam.bind(X, Z);
    EXPECT_NEAR(b.lagrangian(PointView(&x, 1), PointView(&v, 1)), 0.5 * v * v + 0.7 * v * ez - V, 1e-14);
    EXPECT_NEAR(b.hamiltonian(PointView(&x, 1), PointView(&p, 1)), 0.5 * (0.7 * ez + p) * (0.7 * ez + p) + V, 1e-14);
}

TEST(Family, LawDependenceIsPermutationInvariant) {
    std::mt19937_64 rng(5);
    const auto fam = families::quadratic_coupled(0.9, fields::moment_quadratic(-0.6), fields::moment_quadratic(2.0));
    for (int t = 0; t < 50; ++t) {
        const auto X = random_ensemble(rng, 13, 1, -2, 2);
        const auto Z = random_ensemble(rng, 13, 1, -2, 2);
        const auto perm = emfg::testing::shuffled_indices(rng, 13);
        const auto Xp = permuted(X, perm), Zp = permuted(Z, perm);
        const auto b = fam.bind(X, Z), bp = fam.bind(Xp, Zp);
        for (double x : {-1.3, 0.0, 0.7}) {
            const PointView xv(&x, 1);
            for (double v : {-2.0, 0.4}) {
                const PointView vv(&v, 1);
                EXPECT_NEAR(b.lagrangian(xv, vv), bp.lagrangian(xv, vv), 1e-12);
                EXPECT_NEAR(b.hamiltonian(xv, vv), bp.hamiltonian(xv, vv), 1e-12);
            }
            EXPECT_NEAR(fam.V(xv, X), fam.V(xv, Xp), 1e-12);
            EXPECT_NEAR(fam.psi(xv, X), fam.psi(xv, Xp), 1e-12);
        }
        const auto P = random_ensemble(rng, 13, 1, -2, 2);
        const auto G = solve_velocity(fam, X, P, X).z;
        const auto Gp = solve_velocity(fam, Xp, permuted(P, perm), Xp).z;
        for (std::size_t i = 0; i < 13; ++i) EXPECT_NEAR(Gp(i), G(perm[i]), 1e-12);
    }
}

TEST(Family, PairedLawIsJointPermutationInvariant) {
    std::mt19937_64 rng(9);
    const auto fam = families::quadratic_coupled(1.3, fields::moment_quadratic(1.0), fields::zero());
    const auto X = random_ensemble(rng, 9), Z = random_ensemble(rng, 9);
    const auto perm = emfg::testing::shuffled_indices(rng, 9);
    const PairedEnsemble a(X, Z), ap(permuted(X, perm), permuted(Z, perm));
    const PairedEnsemble b(random_ensemble(rng, 9), random_ensemble(rng, 9));
    EXPECT_NEAR(lagrangian_monotonicity_expression(fam, a, b), lagrangian_monotonicity_expression(fam, ap, b), 1e-12);
}

TEST(Family, LegendreDualityOnControlGrid) {
    std::mt19937_64 rng(3);
    const auto fam = families::quadratic_coupled(0.5, fields::moment_quadratic(1.0), fields::zero());
    const auto X = random_ensemble(rng, 8), Z = random_ensemble(rng, 8);
    const auto b = fam.bind(X, Z);
    const double v_max = 6.0;
    const std::size_t nv = 2401;
    const double dv = 2 * v_max / (nv - 1);
    for (double x : {-0.5, 0.25}) {
        for (double p : {-2.0, -0.3, 0.0, 1.7}) {
            const double h = b.hamiltonian(PointView(&x, 1), PointView(&p, 1));
            const double s = legendre_sup(fam, x, p, X, Z, v_max, nv);
            EXPECT_LE(s, h + 1e-12);
            EXPECT_NEAR(s, h, 0.5 * dv * dv);
        }
    }
}

TEST(Family, TerminalLipschitzEstimateWithinDeclaredConstant) {
    const auto X = Ensemble::scalar({-0.5, 0.5});
    // psi = 1.5 E|x - X|^2 has slope 3|x - EX| <= 3 * 2 on [-2, 2].
    const double lip = lipschitz_estimate(fields::moment_quadratic(1.5), X, -2.0, 2.0, 401);
    EXPECT_LE(lip, 6.0 + 1e-9);
    EXPECT_GT(lip, 5.9);
}

TEST(Family, QuarticDerivatives) {
    QuarticCoefficients k;
    k.A = 0.5;
    const auto fam = families::quartic(k);
    const auto X = Ensemble::scalar({1.0});
    const double x = 0.8, p = 0.3;
    EXPECT_NEAR(fam.dp_hamiltonian(PointView(&x, 1), PointView(&p, 1), X, X)[0], p / (x * x), 1e-15);
    EXPECT_NEAR(fam.dx_hamiltonian(PointView(&x, 1), PointView(&p, 1), X, X)[0], -p * p / (x * x * x) - 4 * x * x * x, 1e-14);
    EXPECT_DOUBLE_EQ(fam.velocity_of_control(2.0, 1.0), 0.5);
}

// ---------------------------------------------------------------- velocity equation

TEST(Velocity, UncoupledIsMinusP) {
    const auto fam = families::quadratic_coupled(0.0, fields::zero(), fields::zero());
    const auto P = constant_scalar(4, 2.0);
    const auto r = solve_velocity(fam, P, P, P);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(r.z(i), -2.0);
}

TEST(Velocity, CoupledDeterministicExample) {
    const auto fam = families::quadratic_coupled(1.0, fields::zero(), fields::zero());
    const auto P = constant_scalar(3, 2.0);
    const auto r = solve_velocity(fam, P, P, P);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(r.z(i), -1.0);
    EXPECT_EQ(r.residual, 0.0);
}

TEST(Velocity, CustomContractionExample) {
    const auto fam = emfg::testing::mean_contraction_family(0.5);
    const auto P = constant_scalar(5, 3.0);
    const auto r = solve_velocity(fam, P, P, P);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(r.z(i), -2.0, 1e-11);
    EXPECT_LE(r.residual, 10 * 1e-12 * 3.0);
    EXPECT_GT(r.iterations, 1);
}

TEST(Velocity, SingularCouplingRejected) {
    const auto fam = families::quadratic_coupled(-1.0, fields::zero(), fields::zero());
    const auto P = constant_scalar(2, 1.0);
    try {
        solve_velocity(fam, P, P, P);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::singular_coupling);
    }
}

TEST(Velocity, CustomWithoutContractionRejected) {
    const auto fam = emfg::testing::mean_contraction_family(1.0);
    const auto P = constant_scalar(2, 1.0);
    EXPECT_THROW(solve_velocity(fam, P, P, P), Error);
}

TEST(Velocity, DivergentIterationReportsResidual) {
    auto fam = emfg::testing::mean_contraction_family(1.5);
    fam.contraction = 0.5; // declared, but the map actually expands
    const auto P = constant_scalar(2, 1.0);
    try {
        solve_velocity(fam, P, P, P);
        FAIL();
    } catch (const ContractionFailure& e) {
        EXPECT_EQ(e.code(), ErrorCode::contraction_failure);
        EXPECT_GT(e.residual(), 1.0);
        EXPECT_EQ(e.iterations(), 200);
    }
}

TEST(Velocity, ResidualPropertyOverRandomInputs) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> beta(-0.9, 5.0);
    for (int t = 0; t < 300; ++t) {
        const auto fam = families::quadratic_coupled(beta(rng), fields::zero(), fields::zero());
        const auto P = random_ensemble(rng, 1 + t % 40, 1, -4, 4);
        const auto r = solve_velocity(fam, P, P, P);
        EXPECT_LE(velocity_residual(fam, P, P, P, r.z), 1e-10);
    }
}

TEST(Velocity, MeasuredContractionRateMatchesDeclared) {
    std::mt19937_64 rng(4);
    const auto fam = emfg::testing::mean_contraction_family(0.5);
    for (int t = 0; t < 20; ++t) {
        const auto P = random_ensemble(rng, 16, 1, -3, 3);
        const auto r = solve_velocity(fam, P, P, P);
        EXPECT_LE(r.measured_rate, 0.55);
        EXPECT_GT(r.measured_rate, 0.0);
    }
}

TEST(Velocity, QuarticIsMinusPOverXSquared) {
    QuarticCoefficients k;
    const auto fam = families::quartic(k);
    const auto X = Ensemble::scalar({0.5, 2.0});
    const auto P = Ensemble::scalar({1.0, -4.0});
    const auto r = solve_velocity(fam, X, P, X);
    EXPECT_DOUBLE_EQ(r.z(0), -4.0);
    EXPECT_DOUBLE_EQ(r.z(1), 1.0);
}
