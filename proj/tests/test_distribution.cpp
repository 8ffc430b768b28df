#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "ctl/distribution.hpp"
#include "ctl/error.hpp"
#include "ctl/numeric.hpp"

using namespace ctl;

namespace {

std::vector<DistPtr> probe_laws() {
    return {normal(0.0, 1.0),
            normal(0.3, 2.5),
            centered_poisson(1.0),
            centered_poisson(7.5),
            rademacher(),
            centered_bernoulli(0.3),
            centered_exponential_sum(1),
            centered_exponential_sum(10),
            std::make_shared<UniformLaw>(-0.5, 0.5),
            smooth(rademacher(), 0.3),
            lindeberg_surrogate(0.8),
            std::make_shared<ShiftedLatticeLaw>(convolve_n(*rademacher(), 3), 2.0),
            std::make_shared<NormalSquareLaw>(1.0 / 6.0),
            fold(normal(0.2, 1.0))};
}

}  // namespace

TEST(Families, NormalMedian) { EXPECT_EQ(normal(0.0, 1.0)->quantile(0.5), 0.0); }

TEST(Families, PoissonMoments) {
    const auto p = centered_poisson(1.0);
    EXPECT_NEAR(p->moment(1), 0.0, 1e-14);
    EXPECT_NEAR(p->moment(2), 1.0, 1e-13);
    // The 1e-15 tail truncation shows up in the higher moments.
    EXPECT_NEAR(p->moment(3), 1.0, 1e-12);
    EXPECT_NEAR(p->moment(4), 4.0, 1e-10);  // lambda + 3 lambda^2
    EXPECT_EQ(p->support().kind, SupportKind::Lattice);
    EXPECT_EQ(p->support().step, 1.0);
}

TEST(Families, RademacherMoments) {
    const auto r = rademacher();
    EXPECT_EQ(r->moment(4), 1.0);
    EXPECT_EQ(r->abs_third(), 1.0);
    EXPECT_EQ(r->moment(1), 0.0);
}

TEST(Families, CenteredMeansAndVariances) {
    EXPECT_NEAR(centered_bernoulli(0.3)->moment(1), 0.0, 1e-16);
    EXPECT_NEAR(centered_bernoulli(0.3)->variance(), 0.21, 1e-15);
    EXPECT_NEAR(centered_exponential_sum(1)->moment(1), 0.0, 1e-15);
    EXPECT_NEAR(centered_exponential_sum(1)->moment(3), 2.0, 1e-14);
    EXPECT_NEAR(UniformLaw(-0.5, 0.5).variance(), 1.0 / 12.0, 1e-16);
}

TEST(Families, InvalidParameters) {
    EXPECT_THROW(centered_poisson(0.0), InvalidArgument);
    EXPECT_THROW(centered_bernoulli(1.0), InvalidArgument);
    EXPECT_THROW(normal(0.0, -1.0), InvalidArgument);
    EXPECT_THROW(UniformLaw(1.0, 1.0), InvalidArgument);
    EXPECT_THROW(make_family({"cauchy"}), InvalidArgument);
}

TEST(Families, PoissonTruncationTinyTails) {
    const auto p = centered_poisson(4.0);
    // Exact Poisson(4) quantities: P(N = 0) = e^-4.
    EXPECT_NEAR(p->cdf(-4.0), std::exp(-4.0), 1e-15);
    EXPECT_LT(p->tail().front(), 1.0);
}

TEST(Convolve, RademacherTwo) {
    const auto s = convolve_n(*rademacher(), 2);
    ASSERT_EQ(s->size(), 3u);
    EXPECT_DOUBLE_EQ(s->points()[0], -2.0);
    EXPECT_DOUBLE_EQ(s->points()[1], 0.0);
    EXPECT_DOUBLE_EQ(s->points()[2], 2.0);
    EXPECT_DOUBLE_EQ(s->probs()[0], 0.25);
    EXPECT_DOUBLE_EQ(s->probs()[1], 0.5);
    EXPECT_DOUBLE_EQ(s->probs()[2], 0.25);
}

TEST(Convolve, PoissonAdditivity) {
    const auto s = convolve_n(*centered_poisson(1.0), 10);
    const auto direct = centered_poisson(10.0);
    EXPECT_LT(total_variation(*s, *direct), 1e-12);
}

TEST(Convolve, BinomialWeights) {
    const auto s = convolve_n(*centered_bernoulli(0.5), 4);
    ASSERT_EQ(s->size(), 5u);
    const double w[] = {1, 4, 6, 4, 1};
    for (int i = 0; i < 5; ++i) {
        EXPECT_NEAR(s->points()[static_cast<std::size_t>(i)], i - 2.0, 1e-15);
        EXPECT_NEAR(s->probs()[static_cast<std::size_t>(i)], w[i] / 16.0, 1e-16);
    }
}

TEST(Convolve, MeanAndVarianceScale) {
    for (const auto& base : {centered_poisson(1.0), centered_bernoulli(0.3), rademacher()}) {
        for (int n : {3, 17, 64, 200}) {
            const auto s = convolve_n(*base, n);
            EXPECT_NEAR(s->moment(1), n * base->moment(1), 1e-10 * n);
            EXPECT_NEAR(s->variance(), n * base->variance(), 1e-10 * n * base->variance()) << n;
        }
    }
}

TEST(Convolve, SerialAndParallelAgree) {
    const auto lat = *centered_poisson(2.0)->lattice();
    const auto a = convolve_n(lat, 37, kDefaultAtomCap, false);
    const auto b = convolve_n(lat, 37, kDefaultAtomCap, true);
    ASSERT_EQ(a.atoms.size(), b.atoms.size());
    for (std::size_t i = 0; i < a.atoms.size(); ++i) {
        EXPECT_EQ(a.atoms[i].first, b.atoms[i].first);
        EXPECT_EQ(a.atoms[i].second, b.atoms[i].second);
    }
}

TEST(Convolve, CapacityGuard) {
    EXPECT_THROW(convolve_n(*rademacher(), 2000, 1000), CapacityError);
    EXPECT_THROW(convolve_n(*DiscreteLaw::from_atoms({0.0, 0.5}, {0.5, 0.5}), 2), InvalidArgument);
}

TEST(Lattice, JsonRoundTrip) {
    const auto lat = *convolve_n(*centered_poisson(1.5), 3)->lattice();
    const auto back = LatticeLaw::from_json(nlohmann::json::parse(lat.to_json().dump()));
    EXPECT_EQ(back.origin, lat.origin);
    EXPECT_EQ(back.step, lat.step);
    ASSERT_EQ(back.atoms.size(), lat.atoms.size());
    for (std::size_t i = 0; i < lat.atoms.size(); ++i) EXPECT_EQ(back.atoms[i], lat.atoms[i]);
}

TEST(Lattice, Validation) {
    EXPECT_THROW(LatticeLaw({0.0, 1.0, {{0, 0.5}, {0, 0.5}}}).validate(), InvalidArgument);
    EXPECT_THROW(LatticeLaw({0.0, 1.0, {{0, 0.5}, {1, 0.4}}}).validate(), InvalidArgument);
    EXPECT_THROW(LatticeLaw({0.0, 0.0, {{0, 1.0}}}).validate(), InvalidArgument);
    EXPECT_THROW(LatticeLaw::from_json(nlohmann::json::parse(R"({"origin":0,"step":1})")), InvalidArgument);
}

TEST(Lattice, QuantileLandsOnLattice) {
    const auto s = convolve_n(*rademacher(), 7);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double q = s->quantile(uniform_open01(rng));
        const double k = (q + 7.0) / 2.0;
        EXPECT_NEAR(k, std::round(k), 1e-12);
    }
}

TEST(Surrogate, Moments) {
    const auto y = lindeberg_surrogate(1.0);
    EXPECT_NEAR(y->moment(1), 0.0, 1e-13);
    EXPECT_NEAR(y->moment(2), 1.0, 1e-12);
    EXPECT_NEAR(y->moment(3), 1.0, 1e-11);
    EXPECT_NEAR(y->moment(4), 5.0, 1e-10);
    EXPECT_NEAR(lindeberg_surrogate(0.5)->moment(4), 3.5, 1e-10);
    const auto neg = lindeberg_surrogate(-0.7);
    EXPECT_NEAR(neg->moment(1), 0.0, 1e-13);
    EXPECT_NEAR(neg->moment(3), -0.7, 1e-11);
    EXPECT_NEAR(neg->moment(4), 3.0 + 2 * 0.49, 1e-10);
    EXPECT_THROW(lindeberg_surrogate(0.0), InvalidArgument);
}

TEST(Surrogate, CdfIsMixture) {
    const auto y = lindeberg_surrogate(0.6);
    const auto& b = *y->base()->as_discrete();
    for (double x : {-1.5, 0.0, 0.4, 2.0}) {
        double oracle = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i) oracle += b.probs()[i] * normal_cdf((x - b.points()[i]) / std::sqrt(0.5));
        EXPECT_NEAR(y->cdf(x), oracle, 1e-14);
    }
}

TEST(Smooth, PointMassGivesNormal) {
    const auto s = smooth(point_mass(0.0), 1.0);
    for (double x : {-6.0, -1.0, 0.0, 0.3, 2.5, 8.0}) EXPECT_NEAR(s->cdf(x), normal_cdf(x), 1e-12);
}

TEST(Smooth, SymmetryAndVariance) {
    for (double sigma : {0.1, 0.3, 2.0}) {
        const auto s = smooth(rademacher(), sigma);
        EXPECT_NEAR(s->cdf(0.0), 0.5, 1e-15);
        EXPECT_NEAR(s->moment(2), 1.0 + sigma * sigma, 1e-14);
    }
    const auto sp = smooth(centered_poisson(3.0), 0.5);
    EXPECT_NEAR(sp->variance(), 3.25, 1e-12);
    EXPECT_NEAR(smooth(normal(0, 2), 1.0)->variance(), 3.0, 1e-14);
}

TEST(Smooth, GenericContinuousBase) {
    // Uniform[-1/2,1/2] + sigma N: cdf by the closed form of the integrated normal cdf.
    const double sigma = 0.4;
    const auto s = smooth(std::make_shared<UniformLaw>(-0.5, 0.5), sigma);
    auto ipsi = [](double t) { return t * normal_cdf(t) + normal_pdf(t); };
    for (double x : {-1.0, -0.2, 0.0, 0.7}) {
        const double oracle = sigma * (ipsi((x + 0.5) / sigma) - ipsi((x - 0.5) / sigma));
        EXPECT_NEAR(s->cdf(x), oracle, 1e-10);
    }
}

TEST(Shifted, CdfAndQuantileAffine) {
    const auto base = point_mass(0.0);
    const ShiftedLatticeLaw s(base, 1.0);
    EXPECT_NEAR(s.cdf(0.1), 0.6, 1e-15);
    EXPECT_NEAR(s.quantile(0.25), -0.25, 1e-15);
    EXPECT_NEAR(s.quantile_upper(0.25), 0.25, 1e-15);
    EXPECT_THROW(ShiftedLatticeLaw(base, 2.0), InvalidArgument);
    EXPECT_THROW(ShiftedLatticeLaw(DiscreteLaw::from_atoms({0.0, 0.5}, {0.5, 0.5}), 0.5), InvalidArgument);
}

TEST(Shifted, Moments) {
    const auto base = convolve_n(*centered_poisson(1.0), 4);
    const ShiftedLatticeLaw s(base, 1.0);
    EXPECT_NEAR(s.moment(2), 4.0 + 1.0 / 12.0, 1e-12);
    // Generic z-space quadrature as an independent route.
    EXPECT_NEAR(s.Distribution::moment(2), s.moment(2), 1e-9);
    EXPECT_NEAR(s.Distribution::moment(4), s.moment(4), 1e-8);
}

TEST(NormalSquare, TailsAndExcess) {
    const NormalSquareLaw z(1.0);
    EXPECT_NEAR(z.cdf(0.0), 1.0 - 2.0 * normal_sf(1.0), 1e-15);
    EXPECT_NEAR(z.expected_excess(-5.0), 5.0, 1e-15);
    // Generic quadrature excess as oracle.
    for (double t : {-0.5, 0.0, 1.0, 4.0}) EXPECT_NEAR(z.expected_excess(t), z.Distribution::expected_excess(t), 1e-9);
    EXPECT_NEAR(z.quantile(z.cdf(2.0)), 2.0, 1e-12);
}

TEST(Folded, MatchesDirectTail) {
    const auto g = normal(0.0, 1.0);
    const auto f = fold(g);
    EXPECT_NEAR(f->sf(1.0), 2 * normal_sf(1.0), 1e-15);
    EXPECT_NEAR(f->moment(1), std::sqrt(2.0 / std::numbers::pi), 1e-12);
    EXPECT_NEAR(f->expected_excess(0.5), 2 * (normal_pdf(0.5) - 0.5 * normal_sf(0.5)), 1e-12);
    const auto fr = fold(rademacher());
    ASSERT_NE(fr->as_discrete(), nullptr);
    EXPECT_EQ(fr->as_discrete()->size(), 1u);
}

TEST(Gamma, ExcessAgainstQuadrature) {
    const auto g = centered_exponential_sum(5);
    for (double t : {-3.0, 0.0, 2.0, 9.0}) EXPECT_NEAR(g->expected_excess(t), g->Distribution::expected_excess(t), 1e-9);
    EXPECT_NEAR(g->Distribution::moment(3), g->moment(3), 1e-8);
}

// ---------------------------------------------------------------------------
// Properties
// ---------------------------------------------------------------------------

TEST(DistProperties, GeneralizedInverse) {
    std::mt19937_64 rng(101);
    for (const auto& d : probe_laws()) {
        for (int i = 0; i < 300; ++i) {
            const double u = uniform_open01(rng);
            const double q = d->quantile(u);
            EXPECT_GE(d->cdf(q), u - 1e-12) << d->describe();
            const double x = d->quantile(uniform_open01(rng)) + 0.01 * (uniform_open01(rng) - 0.5);
            EXPECT_LE(d->quantile(d->cdf(x)), x + 1e-9 * std::max(1.0, std::abs(x))) << d->describe();
        }
    }
}

TEST(DistProperties, GaloisPairsOnLattice) {
    std::mt19937_64 rng(102);
    const auto s = convolve_n(*centered_poisson(2.0), 5);
    for (int i = 0; i < 2000; ++i) {
        const double u = uniform_open01(rng);
        const double x = -6.0 + 12.0 * uniform_open01(rng);
        EXPECT_EQ(s->quantile(u) <= x, u <= s->cdf(x));
    }
}

TEST(DistProperties, CdfMonotoneWithLimits) {
    for (const auto& d : probe_laws()) {
        double prev = 0.0;
        for (double x = -30.0; x <= 30.0; x += 0.173) {
            const double c = d->cdf(x);
            EXPECT_GE(c, prev - 1e-15) << d->describe();
            EXPECT_NEAR(c + d->sf(x), 1.0, 1e-12) << d->describe();
            prev = c;
        }
        EXPECT_LT(d->cdf(-1e4), 1e-12);
        EXPECT_GT(d->cdf(1e4), 1.0 - 1e-12);
    }
}

TEST(DistProperties, QuantileZConsistent) {
    for (const auto& d : probe_laws())
        for (double z : {-7.0, -2.0, -0.3, 0.4, 3.0, 7.5}) {
            const double q = d->quantile_z(z);
            const double u = normal_cdf(z);
            EXPECT_GE(d->cdf(q + 1e-9 * std::max(1.0, std::abs(q))), u - 1e-12) << d->describe();
        }
}

TEST(DistProperties, KolmogorovSoak) {
    std::mt19937_64 rng(777);
    const std::size_t n = 100000;
    for (const auto& d : std::vector<DistPtr>{normal(0.0, 1.0), centered_poisson(3.0), centered_exponential_sum(2)}) {
        auto xs = d->sample(rng, n);
        std::sort(xs.begin(), xs.end());
        double ks = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i + 1 < n && xs[i + 1] == xs[i]) continue;
            const double emp = static_cast<double>(i + 1) / n;
            ks = std::max(ks, std::abs(emp - d->cdf(xs[i])));
        }
        EXPECT_LT(ks, 3.0 / std::sqrt(static_cast<double>(n))) << d->describe();
    }
}

TEST(DistProperties, CenteredFamiliesHaveZeroMean) {
    const std::vector<DistPtr> centered{centered_poisson(1.0),        centered_poisson(7.5),
                                        rademacher(),                 centered_bernoulli(0.3),
                                        centered_exponential_sum(10), std::make_shared<UniformLaw>(-0.5, 0.5),
                                        lindeberg_surrogate(0.8),     std::make_shared<NormalSquareLaw>(1.0 / 6.0)};
    for (const auto& d : centered) EXPECT_NEAR(d->moment(1), 0.0, 1e-10) << d->describe();
}
