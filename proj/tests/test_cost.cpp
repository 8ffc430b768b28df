#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "ctl/cost.hpp"
#include "ctl/error.hpp"
#include "ctl/numeric.hpp"

using namespace ctl;

namespace {

// Brute-force Young dual: maximize x t - c(t) over a wide bracket.
double dual_by_search(const CostFunction& c, double x, double span) {
    auto neg = [&](double t) { return -(x * t - c.eval(t)); };
    const auto m = golden_section_minimize(neg, -span, span, 1e-14);
    return -m.value;
}

std::vector<CostFunction> class_psi_members() {
    return {CostFunction::g_p(1.1), CostFunction::g_p(1.5), CostFunction::g_p(1.9), CostFunction::entropy()};
}

}  // namespace

TEST(PsiX, Branches) {
    const auto c = CostFunction::psi_x(1.0);
    EXPECT_DOUBLE_EQ(c.eval(1.0), 0.25);
    EXPECT_DOUBLE_EQ(c.eval(3.0), 2.0);
    EXPECT_DOUBLE_EQ(c.eval(-3.0), 2.0);
    EXPECT_DOUBLE_EQ(c.deriv(1.0), 0.5);
    EXPECT_DOUBLE_EQ(c.deriv(-5.0), -1.0);
}

TEST(PsiX, ContinuousAtKnot) {
    for (double x : {0.1, 0.7, 2.0, 13.0}) {
        const auto c = CostFunction::psi_x(x);
        const double t = 2.0 * x;
        EXPECT_NEAR(0.25 * t * t, x * x, 1e-15 * x * x);
        EXPECT_NEAR(t * x - x * x, x * x, 1e-15 * x * x);
        EXPECT_NEAR(c.eval(std::nextafter(t, 0.0)), c.eval(std::nextafter(t, 1e9)), 1e-12 * x * x);
    }
}

TEST(PsiX, Scaling) {
    const double a = 3.0, x = 0.7, z = 5.0;
    EXPECT_NEAR(CostFunction::psi_x(a * x).eval(a * z), a * a * CostFunction::psi_x(x).eval(z), 1e-13);
}

TEST(PsiX, RejectsNonPositive) {
    EXPECT_THROW(CostFunction::psi_x(0.0), InvalidArgument);
    EXPECT_THROW(CostFunction::psi_x(-1.0), InvalidArgument);
}

TEST(Gp, Values) {
    const auto c = CostFunction::g_p(1.5);
    EXPECT_DOUBLE_EQ(c.eval(1.0), 0.5);
    EXPECT_NEAR(c.eval(4.0), 8.0 / 1.5 + 0.5 - 1.0 / 1.5, 1e-14);
    EXPECT_NEAR(c.eval(4.0), 5.166667, 1e-6);
    EXPECT_DOUBLE_EQ(c.deriv(0.5), 0.5);
    EXPECT_DOUBLE_EQ(c.deriv(4.0), 2.0);
}

TEST(Gp, PowerComparison) {
    for (double p : {1.1, 1.5, 1.9}) {
        const auto c = CostFunction::g_p(p);
        for (double x : {0.0, 0.3, 1.0, 2.0, 10.0}) EXPECT_LE(std::pow(x, p), p * c.eval(x) + 1.0 - p / 2.0 + 1e-12);
    }
}

TEST(Gp, RejectsOutOfRange) {
    EXPECT_THROW(CostFunction::g_p(1.0), InvalidArgument);
    EXPECT_THROW(CostFunction::g_p(2.0), InvalidArgument);
    EXPECT_THROW(CostFunction::g_p(0.5), InvalidArgument);
}

TEST(Entropy, Values) {
    const auto c = CostFunction::entropy();
    EXPECT_EQ(c.eval(0.0), 0.0);
    EXPECT_NEAR(c.eval(std::numbers::e - 1.0), 1.0, 1e-15);
    EXPECT_NEAR(c.deriv(1.0), 0.693147180559945, 1e-14);
    EXPECT_NEAR(c.mixing_tail(3.0), 0.25, 1e-16);
}

TEST(YoungDual, EntropyClosedForm) {
    const auto c = CostFunction::entropy();
    EXPECT_NEAR(young_dual(c, 1.0), std::numbers::e - 2.0, 1e-14);
    EXPECT_NEAR(young_dual(c, 2.0), std::exp(2.0) - 3.0, 1e-13);
    EXPECT_NEAR(young_dual(c, -2.0), std::exp(2.0) - 3.0, 1e-13);
}

TEST(YoungDual, ZeroAtOrigin) {
    for (const auto& c : {CostFunction::psi_x(1.0), CostFunction::g_p(1.5), CostFunction::entropy(),
                          CostFunction::power(1.0), CostFunction::power(3.0)})
        EXPECT_EQ(young_dual(c, 0.0), 0.0) << c.name();
}

TEST(YoungDual, ClosedFormsMatchSearch) {
    for (const auto& c : {CostFunction::g_p(1.3), CostFunction::entropy(), CostFunction::power(1.5),
                          CostFunction::power(3.0), CostFunction::psi_x(2.0)})
        for (double x : {0.2, 0.9, 1.7}) EXPECT_NEAR(young_dual(c, x), dual_by_search(c, x, 60.0), 1e-9) << c.name() << " " << x;
}

TEST(YoungDual, Divergence) {
    EXPECT_TRUE(std::isinf(young_dual(CostFunction::power(1.0), 1.5)));
    EXPECT_EQ(young_dual(CostFunction::power(1.0), 0.5), 0.0);
    EXPECT_TRUE(std::isinf(young_dual(CostFunction::psi_x(1.0), 1.01)));
}

TEST(YoungDual, CustomByBisection) {
    const auto e = CostFunction::entropy();
    auto custom = CostFunction::custom_class_psi(
        "entropy-copy", [e](double t) { return e.eval(t); }, [e](double t) { return e.deriv(t); },
        [](double y) { return 1.0 / (1.0 + y); });
    for (double x : {0.5, 1.0, 2.0, 4.0}) EXPECT_NEAR(young_dual(custom, x), young_dual(e, x), 1e-9 * std::exp(x));
    // Bounded derivative: dual diverges beyond sup deriv.
    auto bounded = CostFunction::custom_convex(
        "huber", [](double t) { return std::abs(t) <= 1 ? 0.5 * t * t : std::abs(t) - 0.5; },
        [](double t) { return std::clamp(t, -1.0, 1.0); });
    EXPECT_TRUE(std::isinf(young_dual(bounded, 1.5)));
    EXPECT_NEAR(young_dual(bounded, 0.5), 0.125, 1e-11);
}

TEST(MixtureCheck, EntropyAndGp) {
    const std::vector<double> grid{0.5, 1.0, 5.0, 20.0};
    EXPECT_LT(mixture_check(CostFunction::entropy(), grid), 1e-8);
    EXPECT_LT(mixture_check(CostFunction::g_p(1.5), grid), 1e-8);
    EXPECT_LT(mixture_check(CostFunction::g_p(1.1), grid), 1e-8);
}

TEST(MixtureCheck, PsiXOneAtom) {
    const std::vector<double> grid{0.5, 1.0, 1.5, 3.0, 7.0, -4.0};
    EXPECT_LT(mixture_check(CostFunction::psi_x(1.0), grid), 1e-15);
}

TEST(MixtureCheck, MissingTail) {
    const std::vector<double> grid{1.0};
    EXPECT_THROW(mixture_check(CostFunction::power(2.0), grid), InvalidArgument);
}

TEST(ClassPsi, BuiltinsPassValidation) {
    for (const auto& c : class_psi_members()) {
        auto check = check_class_psi([&](double t) { return c.eval(t); }, [&](double t) { return c.deriv(t); },
                                     [&](double y) { return c.mixing_tail(y); });
        EXPECT_TRUE(check.ok) << c.name() << ": " << (check.failures.empty() ? "" : check.failures.front());
    }
}

TEST(ClassPsi, RejectsQuadratic) {
    EXPECT_THROW(CostFunction::custom_class_psi(
                     "half-square", [](double t) { return 0.5 * t * t; }, [](double t) { return t; },
                     [](double) { return 1.0; }),
                 InvalidArgument);
}

TEST(ClassPsi, RejectsWrongCurvature) {
    // psi_1 has curvature 1/2 at the origin.
    const auto c = CostFunction::psi_x(1.0);
    EXPECT_THROW(CostFunction::custom_class_psi(
                     "psi1", [c](double t) { return c.eval(t); }, [c](double t) { return c.deriv(t); },
                     [c](double y) { return c.mixing_tail(y); }),
                 InvalidArgument);
    // 2 psi_1 is a class member.
    EXPECT_NO_THROW(CostFunction::custom_class_psi(
        "2psi1", [c](double t) { return 2 * c.eval(t); }, [c](double t) { return 2 * c.deriv(t); },
        [c](double y) { return 2 * c.mixing_tail(y); }, {2.0}));
}

TEST(ClassPsi, RejectsNonConvex) {
    EXPECT_THROW(CostFunction::custom_convex(
                     "sqrt", [](double t) { return std::sqrt(std::abs(t)); },
                     [](double t) { return t == 0 ? 0.0 : 0.5 / std::sqrt(std::abs(t)) * (t > 0 ? 1 : -1); }),
                 InvalidArgument);
}

// ---------------------------------------------------------------------------
// Properties over random grids
// ---------------------------------------------------------------------------

TEST(CostProperties, SqrtSubadditive) {
    std::mt19937_64 rng(11);
    std::exponential_distribution<double> draw(0.2);
    for (const auto& c : class_psi_members())
        for (int i = 0; i < 2000; ++i) {
            const double a = draw(rng), b = draw(rng);
            EXPECT_LE(std::sqrt(c.eval(a + b)), std::sqrt(c.eval(a)) + std::sqrt(c.eval(b)) + 1e-12) << c.name();
        }
}

TEST(CostProperties, QuadraticDomination) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> draw(-50.0, 50.0);
    const auto psi = CostFunction::psi_x(0.8);
    for (int i = 0; i < 2000; ++i) {
        const double x = draw(rng);
        for (const auto& c : class_psi_members()) EXPECT_LE(c.eval(x), 0.5 * x * x * (1 + 1e-15)) << c.name();
        EXPECT_LE(psi.eval(x), 0.25 * x * x * (1 + 1e-15));
    }
}

TEST(CostProperties, DerivativeBound) {
    std::mt19937_64 rng(13);
    std::exponential_distribution<double> draw(0.1);
    for (const auto& c : class_psi_members())
        for (int i = 0; i < 2000; ++i) {
            const double x = draw(rng) + 1e-9;
            EXPECT_LE(x * c.deriv(x), 2.0 * c.eval(x) * (1 + 1e-12) + 1e-300) << c.name() << " x=" << x;
        }
}

TEST(CostProperties, MidpointConvexity) {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> draw(-30.0, 30.0);
    const std::vector<CostFunction> all{CostFunction::psi_x(0.5), CostFunction::g_p(1.5), CostFunction::entropy(),
                                        CostFunction::power(1.0), CostFunction::power(1.7), CostFunction::power(3.0)};
    for (const auto& c : all)
        for (int i = 0; i < 2000; ++i) {
            const double a = draw(rng), b = draw(rng);
            const double rhs = 0.5 * (c.eval(a) + c.eval(b));
            EXPECT_LE(c.eval(0.5 * (a + b)), rhs + 1e-12 * std::max(1.0, rhs)) << c.name();
        }
}

TEST(CostProperties, EvenAndZeroAtOrigin) {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> draw(0.0, 40.0);
    for (const auto& c : class_psi_members()) {
        EXPECT_EQ(c.eval(0.0), 0.0);
        EXPECT_EQ(c.deriv(0.0), 0.0);
        for (int i = 0; i < 500; ++i) {
            const double x = draw(rng);
            EXPECT_EQ(c.eval(x), c.eval(-x));
        }
    }
}

TEST(CostProperties, MixingTailIsSecondDerivative) {
    for (const auto& c : class_psi_members())
        for (double y : {0.25, 0.5, 2.0, 7.0, 30.0}) {
            const double h = 1e-5 * y;
            const double fd = (c.deriv(y + h) - c.deriv(y - h)) / (2 * h);
            EXPECT_NEAR(c.mixing_tail(y), fd, 1e-6) << c.name() << " y=" << y;
        }
}
