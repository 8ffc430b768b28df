#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ctl/cost.hpp"
#include "ctl/couplings.hpp"
#include "ctl/error.hpp"
#include "ctl/tails.hpp"

using namespace ctl;

namespace {

// Pareto with P(Z > x) = x^{-q} on [1, inf), so Q(v) = v^{-1/q}.
class Pareto final : public Distribution {
public:
    explicit Pareto(double q) : q_(q) {}
    double cdf(double x) const override { return x <= 1 ? 0.0 : 1 - std::pow(x, -q_); }
    double sf(double x) const override { return x <= 1 ? 1.0 : std::pow(x, -q_); }
    double pdf(double x) const override { return x <= 1 ? 0.0 : q_ * std::pow(x, -q_ - 1); }
    double quantile_upper(double v) const override { return v >= 1 ? 1.0 : std::pow(v, -1 / q_); }
    double quantile(double u) const override { return u <= 0 ? -kInf : std::pow(1 - u, -1 / q_); }
    double quantile_z(double z) const override { return std::pow(normal_sf(z), -1 / q_); }
    double expected_excess(double t) const override {
        if (t <= 1) return q_ / (q_ - 1) - t;
        return std::pow(t, 1 - q_) / (q_ - 1);
    }
    Support support() const override { return {}; }
    std::string describe() const override { return "pareto"; }

private:
    double q_;
};

// Hides as_discrete() so the generic golden-section routes run.
class Opaque final : public Distribution {
public:
    explicit Opaque(DiscretePtr d) : d_(std::move(d)) {}
    double cdf(double x) const override { return d_->cdf(x); }
    double sf(double x) const override { return d_->sf(x); }
    double quantile(double u) const override { return d_->quantile(u); }
    double quantile_upper(double v) const override { return d_->quantile_upper(v); }
    double quantile_z(double z) const override { return d_->quantile_z(z); }
    double expected_excess(double t) const override { return d_->expected_excess(t); }
    std::vector<double> z_breaks() const override { return d_->z_breaks(); }
    Support support() const override { return d_->support(); }
    std::string describe() const override { return "opaque"; }

private:
    DiscretePtr d_;
};

DiscretePtr random_discrete(std::mt19937_64& rng, int max_atoms = 6) {
    const int k = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_atoms));
    std::vector<double> x, p;
    for (int i = 0; i < k; ++i) {
        x.push_back(std::round((uniform_open01(rng) * 8 - 3) * 4) / 4);
        p.push_back(0.05 + uniform_open01(rng));
    }
    return DiscreteLaw::from_atoms(x, p, true);
}

JointDiscrete random_joint(std::mt19937_64& rng) {
    const int k = 1 + static_cast<int>(rng() % 8);
    std::vector<JointDiscrete::Atom> atoms;
    double total = 0;
    for (int i = 0; i < k; ++i) {
        const double p = 0.05 + uniform_open01(rng);
        atoms.push_back({std::round((uniform_open01(rng) * 6 - 2) * 4) / 4,
                         std::round((uniform_open01(rng) * 6 - 2) * 4) / 4, p});
        total += p;
    }
    for (auto& a : atoms) a.p /= total;
    return JointDiscrete(atoms);
}

std::vector<DistPtr> test_laws() {
    const auto gap = std::make_shared<CouplingGapLaw>(quantile_coupling(convolve_n(*rademacher(), 8), 8, 1.0));
    return {normal(0, 1),
            std::make_shared<GammaLaw>(2.0, 0.0),
            std::make_shared<UniformLaw>(-1.0, 2.0),
            centered_poisson(3),
            convolve_n(*rademacher(), 5),
            gap,
            fold(std::make_shared<NormalSquareLaw>(1.0))};
}

}  // namespace

TEST(Cvar, Examples) {
    const UniformLaw U(0, 1);
    const auto r = cvar(U, 0.5);
    EXPECT_NEAR(r.variational, 0.75, 1e-12);
    EXPECT_NEAR(r.integral, 0.75, 1e-12);
    const GammaLaw E(1.0, 0.0);
    const auto e = cvar(E, 0.1);
    EXPECT_NEAR(e.variational, 1 - std::log(0.1), 1e-10);
    EXPECT_NEAR(e.integral, 1 - std::log(0.1), 1e-10);
    for (const auto& d : test_laws()) {
        const auto c = cvar(*d, 1 - 1e-9);
        EXPECT_NEAR(c.variational, d->mean(), 1e-6) << d->describe();
        EXPECT_NEAR(c.integral, d->mean(), 1e-6) << d->describe();
    }
    EXPECT_THROW(cvar(U, 0.0), InvalidArgument);
    EXPECT_THROW(cvar(U, 1.5), InvalidArgument);
}

TEST(Htilde, PointMass) {
    const auto c = point_mass(2.0);
    EXPECT_EQ(htilde(*c, 2.5), 0.0);
    EXPECT_EQ(htilde(*c, 2.0), 1.0);
    EXPECT_EQ(htilde(*c, -1.0), 1.0);
    const Opaque o(c);
    EXPECT_NEAR(htilde(o, 2.5), 0.0, 1e-12);
    EXPECT_NEAR(htilde(o, 1.0), 1.0, 1e-12);
}

TEST(Htilde, ExactMatchesGolden) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const auto d = random_discrete(rng);
        const Opaque o(d);
        const double x = uniform_open01(rng) * 8 - 3;
        EXPECT_NEAR(htilde_exact(*d, x), htilde(o, x), 1e-9) << d->describe() << " x=" << x;
    }
}

TEST(Htilde, PsiEnvelope) {
    for (const auto& d : {fold(normal(0, 1)), fold(centered_poisson(2)),
                          std::static_pointer_cast<const Distribution>(std::make_shared<GammaLaw>(3.0, 0.0))}) {
        for (double u : {0.5, 1.0, 2.0, 4.0}) {
            const auto psi = CostFunction::psi_x(u / 2);
            const double rhs = 4 / (u * u) * d->expect([&](double z) { return psi.eval(std::abs(z)); });
            EXPECT_LE(htilde(*d, u), rhs + 1e-12) << d->describe() << " " << u;
        }
    }
}

TEST(WeakMoments, ParetoCalibration) {
    for (double q : {1.5, 2.0, 3.0}) {
        const Pareto P(q);
        const auto w = weak_moments(P, q);
        EXPECT_NEAR(w.lambda, 1.0, 1e-9) << q;
        EXPECT_NEAR(w.calderon, q / (q - 1), 1e-6) << q;
        EXPECT_NEAR(w.lambda_tilde, std::pow(q / (q - 1), q), 1e-6) << q;
    }
    // Heavier tail than the order asked for.
    EXPECT_THROW(weak_moments(Pareto(1.5), 2.0), DivergenceError);
}

TEST(WeakMoments, AbsNormalSquareOracle) {
    const auto Z = fold(std::make_shared<NormalSquareLaw>(1.0));
    const double p = 1.5;
    auto tail = [](double x) {
        double v = 2 * normal_sf(std::sqrt(1 + x));
        if (x < 1) v += 2 * normal_cdf(std::sqrt(1 - x)) - 1;
        return v;
    };
    double oracle = 0;
    const int N = 10'000'000;
    for (int i = 1; i <= N; ++i) {
        const double x = 40.0 * i / N;
        oracle = std::max(oracle, std::pow(x, p) * tail(x));
    }
    const auto w = weak_moments(*Z, p);
    EXPECT_NEAR(w.lambda, oracle, 1e-9);
    EXPECT_LE(w.lambda, w.lambda_tilde);
}

TEST(WeakMoments, LambdaBelowLambdaTildeAndCalderonIdentity) {
    for (const auto& d : test_laws()) {
        for (double q : {1.0, 1.5, 2.0}) {
            const auto w = weak_moments(*d, q);
            EXPECT_LE(w.lambda, w.lambda_tilde + 1e-12) << d->describe() << " q=" << q;
            EXPECT_NEAR(w.lambda_tilde, std::pow(w.calderon, q), 1e-8 * std::max(1.0, w.lambda_tilde))
                << d->describe() << " q=" << q;
        }
    }
}

TEST(Subadditivity, Examples) {
    const auto R = rademacher();
    EXPECT_GE(htilde_subadditivity_check(JointDiscrete::independent(*R, *R), 1.0, 0.5), -1e-9);
    const auto A = DiscreteLaw::from_atoms({-2, -0.5, 0, 1, 3}, {0.1, 0.3, 0.2, 0.25, 0.15});
    for (double t : {-1.0, 0.25, 0.5, 1.0, 2.0})
        EXPECT_GE(htilde_subadditivity_check(JointDiscrete::comonotone(*A, *A), 2 * t, t), -1e-9) << t;
    const auto Z = point_mass(0.0);
    for (double x : {-1.0, 0.0, 0.5, 2.0})
        for (double t : {-0.5, 0.5, 1.0}) {
            const auto j = JointDiscrete::independent(*A, *Z);
            const double m = htilde_subadditivity_check(j, x, t);
            const double direct = std::max(htilde_exact(*A, t), x - t <= 0 ? 1.0 : 0.0) - htilde_exact(*A, x);
            EXPECT_NEAR(m, direct, 1e-15);
            EXPECT_GE(m, -1e-9);
        }
}

TEST(Subadditivity, Validation) {
    EXPECT_THROW(JointDiscrete({{0, 0, 0.5}}), InvalidArgument);
    EXPECT_THROW(JointDiscrete({{0, 0, -0.5}, {1, 1, 1.5}}), InvalidArgument);
}

TEST(TailProfile, CsvTables) {
    const TailProfile tp(centered_poisson(1));
    std::ostringstream q, h;
    tp.write_quantile_csv(q, {0.5, 0.1});
    tp.write_tail_csv(h, {0.0, 1.0});
    EXPECT_EQ(q.str().substr(0, 12), "u,Q,Qtilde\r\n");
    EXPECT_EQ(h.str().substr(0, 12), "x,H,Htilde\r\n");
    const std::string qs = q.str();
    EXPECT_EQ(std::count(qs.begin(), qs.end(), '\n'), 3);
    EXPECT_NEAR(tp.Qtilde(1.0), 0.0, 1e-12);
    EXPECT_NEAR(tp.H(0.0), centered_poisson(1)->sf(0.0), 0);
}

// Properties ---------------------------------------------------------------

TEST(TailsProperty, CvarRoutesAgree) {
    std::mt19937_64 rng(3);
    for (const auto& d : test_laws()) {
        for (int i = 0; i < 6; ++i) {
            const double u = std::pow(10.0, -4 * uniform_open01(rng));
            const auto c = cvar(*d, u);
            EXPECT_NEAR(c.variational, c.integral, 1e-8 * std::max(1.0, std::abs(c.integral)))
                << d->describe() << " u=" << u;
            EXPECT_NEAR(qtilde(*d, u), c.integral, 1e-8 * std::max(1.0, std::abs(c.integral)));
        }
    }
}

TEST(TailsProperty, GaloisDuality) {
    std::mt19937_64 rng(21);
    for (const auto& d : test_laws()) {
        const TailProfile tp(d);
        int checked = 0;
        for (int i = 0; i < 1000; ++i) {
            const double u = std::pow(10.0, -3 * uniform_open01(rng));
            const double x = d->quantile(0.001) + (d->quantile_upper(0.001) - d->quantile(0.001) + 1) *
                                                      (1.2 * uniform_open01(rng) - 0.1);
            const double qt = tp.Qtilde(u), ht = tp.Htilde(x);
            // Pairs within rounding of the boundary carry no information.
            if (std::abs(x - qt) <= 1e-9 * (1 + std::abs(x)) || std::abs(ht - u) <= 1e-9) continue;
            EXPECT_EQ(ht < u, x > qt) << d->describe() << " x=" << x << " u=" << u;
            ++checked;
        }
        EXPECT_GT(checked, 900);
    }
}

TEST(TailsProperty, HtildeDominatesTail) {
    std::mt19937_64 rng(22);
    for (const auto& d : test_laws()) {
        for (int i = 0; i < 50; ++i) {
            const double x = d->quantile(0.01) + (d->quantile_upper(1e-4) - d->quantile(0.01)) * uniform_open01(rng);
            EXPECT_GE(htilde(*d, x) + 1e-12, d->sf(x)) << d->describe() << " x=" << x;
        }
    }
}

TEST(TailsProperty, QtildeMonotoneAndConcaveIntegral) {
    // Q~ is nonincreasing and u Q~(u) = int_0^u Q is concave in u.
    for (const auto& d : test_laws()) {
        std::vector<double> u, v;
        for (int k = 0; k <= 60; ++k) {
            u.push_back(std::pow(10.0, -6 + 0.1 * k));
            v.push_back(qtilde(*d, u.back()));
        }
        for (std::size_t i = 1; i < u.size(); ++i)
            EXPECT_LE(v[i], v[i - 1] + 1e-10 * (1 + std::abs(v[i - 1]))) << d->describe() << " u=" << u[i];
        for (std::size_t i = 1; i + 1 < u.size(); ++i) {
            const double s1 = (u[i] * v[i] - u[i - 1] * v[i - 1]) / (u[i] - u[i - 1]);
            const double s2 = (u[i + 1] * v[i + 1] - u[i] * v[i]) / (u[i + 1] - u[i]);
            EXPECT_LE(s2, s1 + 1e-6 * (1 + std::abs(s1))) << d->describe() << " u=" << u[i];
        }
    }
}

TEST(TailsProperty, UQtildeNondecreasingForNonnegativeLaws) {
    const std::vector<DistPtr> laws = {fold(normal(0, 1)), fold(centered_poisson(3)),
                                       std::make_shared<GammaLaw>(2.0, 0.0),
                                       fold(std::make_shared<NormalSquareLaw>(1.0))};
    for (const auto& d : laws) {
        double prev = 0;
        for (int k = 0; k <= 60; ++k) {
            const double u = std::pow(10.0, -6 + 0.1 * k);
            const double v = u * qtilde(*d, u);
            EXPECT_GE(v, prev - 1e-12) << d->describe() << " u=" << u;
            prev = v;
        }
    }
}

TEST(TailsProperty, SubadditivityRandomCases) {
    std::mt19937_64 rng(1000);
    double worst = kInf;
    for (int i = 0; i < 1000; ++i) {
        const auto j = random_joint(rng);
        const double x = uniform_open01(rng) * 8 - 3, t = uniform_open01(rng) * 6 - 2;
        worst = std::min(worst, htilde_subadditivity_check(j, x, t));
    }
    EXPECT_GE(worst, -1e-9);
}

TEST(TailsProperty, CvarSubadditivityTransfer) {
    std::mt19937_64 rng(1001);
    for (int i = 0; i < 300; ++i) {
        const auto j = random_joint(rng);
        const double u = 0.01 + 0.99 * uniform_open01(rng);
        const double lhs = std::abs(qtilde(*j.law_a(), u) - qtilde(*j.law_b(), u));
        EXPECT_LE(lhs, qtilde(*j.law_abs_diff(), u) + 1e-12);
    }
}
