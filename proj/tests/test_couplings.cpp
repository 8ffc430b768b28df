#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ctl/couplings.hpp"
#include "ctl/error.hpp"
#include "ctl/kernels.hpp"

using namespace ctl;

namespace {

const double kRad = 2 - 2 * std::sqrt(2 / M_PI);

// P(B <= k) by direct summation of lgamma weights.
double binom_cdf_oracle(long n, long k) {
    double s = 0;
    for (long j = 0; j <= k; ++j)
        s += std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) - n * std::log(2.0));
    return s;
}

}  // namespace

TEST(QuantileCoupling, RademacherSpotValue) {
    const auto c = quantile_coupling(rademacher(), 1, 1.0);
    EXPECT_EQ(c.sum_coordinate(0.25, 0.5), -1.0);
    EXPECT_NEAR(c.gaussian_coordinate(0.25, 0.5), -0.6744897501960817, 1e-14);
    EXPECT_NEAR(c.z_of_u(0.25, 0.5), 1 - 0.6744897501960817, 1e-14);
    // u on the boundary 1/2 stays with the atom whose interval ends there.
    EXPECT_EQ(c.sum_coordinate(0.5, 0.3), -1.0);
    EXPECT_EQ(c.sum_coordinate(0.5000001, 0.3), 1.0);
}

TEST(QuantileCoupling, RademacherSecondMoment) {
    const auto c = quantile_coupling(rademacher(), 1, 1.0);
    const auto r = c.expect(CostFunction::power(2));
    EXPECT_NEAR(r.value, kRad, 1e-10);
}

TEST(QuantileCoupling, PointMassGivesHalfNormal) {
    const auto c = quantile_coupling(point_mass(0), 1, 1.0);
    EXPECT_NEAR(c.expect(CostFunction::power(2)).value, 1.0, 1e-10);
    EXPECT_NEAR(c.expect(CostFunction::power(1)).value, std::sqrt(2 / M_PI), 1e-10);
    const CouplingGapLaw z(c);
    for (double t : {0.1, 0.7, 2.0, 5.0}) EXPECT_NEAR(z.sf(t), 2 * normal_sf(t), 1e-15);
}

TEST(QuantileCoupling, AgreesWithKappa) {
    const auto law = convolve_n(*centered_poisson(1), 8);
    const auto c = quantile_coupling(law, 8, 1.0);
    const auto G = normal(0, 8);
    for (const auto& cost : {CostFunction::power(2), CostFunction::power(1), CostFunction::entropy(),
                             CostFunction::psi_x(0.5), CostFunction::g_p(1.5)}) {
        const double a = c.expect(cost).value;
        const double b = kappa(cost, *law, *G).value;
        EXPECT_NEAR(a, b, 1e-8) << cost.name();
    }
}

TEST(QuantileCoupling, Rejects) {
    EXPECT_THROW(quantile_coupling(rademacher(), 0, 1.0), InvalidArgument);
    EXPECT_THROW(quantile_coupling(rademacher(), 1, 0.0), InvalidArgument);
    const auto nonlattice = DiscreteLaw::from_atoms({-1.0, 0.3, 0.7}, {0.3, 0.3, 0.4});
    EXPECT_THROW(shifted_coupling(nonlattice, 1, 1.0), InvalidArgument);
    EXPECT_THROW(shifted_coupling(rademacher(), 1, 1.0), InvalidArgument);
}

TEST(ShiftedCoupling, PointMassMedian) {
    const auto c = shifted_coupling(point_mass(0), 1, 1.0);
    EXPECT_NEAR(c.z_of_w(0.5), 0.0, 1e-15);
    EXPECT_NEAR(c.sum_coordinate(0.3, 0.3), -0.2, 1e-15);
}

TEST(ShiftedCoupling, PathwiseWithinHalfStep) {
    const auto law = convolve_n(*rademacher(), 2);
    const auto plain = quantile_coupling(law, 2, 1.0);
    const auto shifted = shifted_coupling(law, 2, 2.0);
    std::mt19937_64 rng(99);
    for (const auto& [u, d] : plain.sample(rng, 10000))
        EXPECT_LE(shifted.z_of_u(u, d), plain.z_of_u(u, d) + 1.0 + 1e-12);
}

TEST(ShiftedCoupling, AgreesWithShiftedLawKappa) {
    const auto law = convolve_n(*centered_poisson(1), 16);
    const auto c = shifted_coupling(law, 16, 1.0);
    const ShiftedLatticeLaw shifted(law, 1.0);
    const auto G = normal(0, 16);
    EXPECT_NEAR(c.expect(CostFunction::power(2)).value, kappa(CostFunction::power(2), shifted, *G).value, 1e-8);
}

TEST(GapLaw, ClosedFormsAgainstQuadrature) {
    const auto law = convolve_n(*rademacher(), 4);
    const auto c = quantile_coupling(law, 4, 1.0);
    const CouplingGapLaw z(c);
    EXPECT_NEAR(z.moment(2), c.expect(CostFunction::power(2)).value, 1e-10);
    EXPECT_NEAR(z.moment(1), c.expect(CostFunction::power(1)).value, 1e-10);
    for (double t : {0.0, 0.3, 1.0, 2.5}) {
        EXPECT_NEAR(z.cdf(t) + z.sf(t), 1.0, 1e-15);
        // E (Z - t)_+ = int_t^inf sf.
        QuadOptions q;
        q.abs_tol = 1e-13;
        const double tail = integrate([&](double s) { return z.sf(s); }, t, 40.0, q).value;
        EXPECT_NEAR(z.expected_excess(t), tail, 1e-11) << t;
        // Density matches a central difference of the cdf.
        const double h = 1e-6;
        if (t > 0) EXPECT_NEAR(z.pdf(t), (z.cdf(t + h) - z.cdf(t - h)) / (2 * h), 1e-6);
    }
    EXPECT_THROW(CouplingGapLaw(shifted_coupling(law, 4, 2.0)), InvalidArgument);
}

TEST(SymmetricBinomial, ExactTable) {
    for (long n : {1L, 2L, 7L, 33L, 64L})
        for (long k = -1; k <= n; ++k) EXPECT_NEAR(symmetric_binomial_cdf(n, k), binom_cdf_oracle(n, k), 1e-13);
    EXPECT_EQ(symmetric_binomial_cdf(4, 1), 5.0 / 16.0);
    // P(B <= 31) = (2^64 - C(64, 32)) / 2^65, exact in long double.
    const long double c6432 = 1832624140942590534.0L;
    EXPECT_EQ(symmetric_binomial_cdf(64, 31), static_cast<double>((0x1p64L - c6432) / 0x1p65L));
}

TEST(SymmetricBinomial, LargeN) {
    for (long n : {65L, 100L, 1001L}) {
        for (long k : {0L, n / 4, n / 2 - 1, n / 2, n - 3}) {
            const double o = binom_cdf_oracle(n, k);
            EXPECT_NEAR(symmetric_binomial_cdf(n, k), o, 1e-12 * std::max(1e-3, o)) << n << " " << k;
        }
        // Symmetry P(B <= k) + P(B <= n - k - 1) = 1.
        EXPECT_NEAR(symmetric_binomial_cdf(n, n / 3) + symmetric_binomial_cdf(n, n - n / 3 - 1), 1.0, 1e-14);
    }
}

TEST(Dyadic, SampleStructure) {
    std::mt19937_64 rng(5);
    const auto s = dyadic_poisson_coupling(2.0, 10, rng);
    EXPECT_EQ(s.xi.size(), 10u);
    EXPECT_EQ(s.residual_var_bound, 2.0 / 1024);
    // Telescoping: Pi(m) - 2^{-L} Pi(2^L m) = sum U~_l 2^{-l-1}.
    double tele = 0;
    for (int l = 0; l < 10; ++l) tele += s.u_tilde[static_cast<std::size_t>(l)] * std::ldexp(1.0, -l - 1);
    const double top = s.poisson_value - tele;  // 2^{-L} Pi(2^L m)
    EXPECT_NEAR(top * 1024, std::round(top * 1024), 1e-9);
    EXPECT_THROW(dyadic_poisson_coupling(0.0, 10, rng), InvalidArgument);
    EXPECT_THROW(dyadic_poisson_coupling(1.0, 0, rng), InvalidArgument);
}

TEST(Dyadic, GaussianMarginal) {
    DyadicMcOptions o;
    o.m = 4;
    o.levels = 20;
    o.samples = 100000;
    o.seed = 2026;
    const auto s = dyadic_mc(o);
    EXPECT_LE(std::abs(s.gaussian_mean), 4 * std::sqrt(4.0 / 1e5));
    const double v = 4 * (1 - std::ldexp(1.0, -20));
    EXPECT_NEAR(s.gaussian_var, v, 0.02 * v);
}

TEST(Dyadic, MeanSquareGapAndOrthogonality) {
    for (double m : {0.5, 1.0, 2.0, 8.0, 32.0}) {
        DyadicMcOptions o;
        o.m = m;
        o.samples = 20000;
        o.seed = 77;
        const auto s = dyadic_mc(o);
        EXPECT_LE(s.mean_sq_gap, 0.937 + 3 * s.se_sq_gap) << m;
        EXPECT_LE(std::abs(s.level_cov), 4 * s.level_cov_se) << m;
    }
}

TEST(Dyadic, SerialParallelIdentical) {
    DyadicMcOptions o;
    o.m = 3;
    o.samples = 20000;
    o.chunk = 1000;
    o.parallel = false;
    const auto a = dyadic_mc(o);
    o.parallel = true;
    const auto b = dyadic_mc(o);
    EXPECT_EQ(a.mean_sq_gap, b.mean_sq_gap);
    EXPECT_EQ(a.gaussian_var, b.gaussian_var);
    EXPECT_EQ(a.level_cov, b.level_cov);
}

TEST(Dyadic, ResidualGuard) {
    DyadicMcOptions o;
    o.levels = 5;
    EXPECT_THROW(dyadic_mc(o), InvalidArgument);
    EXPECT_EQ(dyadic_levels_for(1e-4), 14);
}

TEST(Dyadic, CsvDump) {
    std::mt19937_64 rng(1);
    std::vector<DyadicCouplingSample> v{dyadic_poisson_coupling(1.0, 3, rng)};
    std::ostringstream os;
    write_dyadic_csv(os, v);
    const auto s = os.str();
    EXPECT_EQ(s.substr(0, s.find("\r\n")), "m,level_count,poisson_value,gaussian_value");
    EXPECT_NE(s.find("\n1,3,"), std::string::npos);
}

TEST(BinomialCoupling, Values) {
    const auto r1 = binomial_gaussian_coupling(1);
    EXPECT_NEAR(r1.w2sq.value, kRad, 1e-12);
    EXPECT_LE(r1.w2sq.value, r1.walk_envelope + 1e-12);
    for (int n : {2, 8, 64, 256}) {
        const auto r = binomial_gaussian_coupling(n);
        EXPECT_LE(r.w2sq.value, 33.0 / 16.0) << n;
        EXPECT_GE(r.pathwise_min_margin, 0.0) << n;
    }
    EXPECT_TRUE(std::isnan(binomial_gaussian_coupling(2000).pathwise_min_margin));
    EXPECT_THROW(binomial_gaussian_coupling((1 << 14) + 1), CapacityError);
    EXPECT_THROW(binomial_gaussian_coupling(0), InvalidArgument);
}

// Properties ---------------------------------------------------------------

TEST(CouplingProperty, OptimalityMatchesKappa) {
    std::mt19937_64 rng(123);
    const std::vector<CostFunction> costs{CostFunction::power(2), CostFunction::entropy(), CostFunction::psi_x(1.0),
                                          CostFunction::power(1.5)};
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 12);
        const auto law = trial % 2 ? convolve_n(*rademacher(), n) : convolve_n(*centered_bernoulli(0.3), n);
        const double sigma = trial % 2 ? 1.0 : std::sqrt(0.21);
        const auto c = quantile_coupling(law, n, sigma);
        const auto G = normal(0, n * sigma * sigma);
        const auto& cost = costs[static_cast<std::size_t>(trial) % costs.size()];
        EXPECT_NEAR(c.expect(cost).value, kappa(cost, *law, *G).value, 1e-8) << cost.name() << " n=" << n;
    }
}

TEST(CouplingProperty, MarginalsByMonteCarlo) {
    std::mt19937_64 rng(31);
    const auto law = convolve_n(*rademacher(), 3);
    const auto c = quantile_coupling(law, 3, 1.0);
    const auto draws = c.sample(rng, 100000);
    std::vector<double> g;
    g.reserve(draws.size());
    double count_m1 = 0;
    for (const auto& [u, d] : draws) {
        g.push_back(c.gaussian_coordinate(u, d) / std::sqrt(3.0));
        count_m1 += c.sum_coordinate(u, d) == -1.0;
    }
    std::sort(g.begin(), g.end());
    double ks = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        ks = std::max(ks, std::abs(normal_cdf(g[i]) - (i + 0.5) / static_cast<double>(g.size())));
    EXPECT_LT(ks, 3 / std::sqrt(1e5));
    EXPECT_NEAR(count_m1 / 1e5, 3.0 / 8.0, 4 * std::sqrt(0.25 / 1e5));
}

TEST(CouplingProperty, DyadicLevelIndependenceChiSquare) {
    // 4x4 contingency of (xi_0, xi_1) quartiles; 9 degrees of freedom, 1%
    // critical value 21.666.
    std::mt19937_64 rng(4242);
    const double q[3] = {normal_quantile(0.25), 0.0, normal_quantile(0.75)};
    auto bin = [&](double x) { return (x > q[0]) + (x > q[1]) + (x > q[2]); };
    double table[4][4] = {};
    const int N = 40000;
    for (int i = 0; i < N; ++i) {
        const auto s = dyadic_poisson_coupling(1.5, 14, rng);
        table[bin(s.xi[0])][bin(s.xi[1])] += 1;
    }
    double chi = 0;
    for (auto& row : table)
        for (double o : row) chi += (o - N / 16.0) * (o - N / 16.0) / (N / 16.0);
    EXPECT_LT(chi, 21.666);
}
