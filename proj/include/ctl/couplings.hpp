#pragma once

// Explicit couplings: the delta-randomised quantile coupling of a lattice sum
// with its Gaussian, the uniformly shifted variant, the dyadic Poisson-normal
// coupling and the +-1 walk against N(0, n).

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "ctl/cost.hpp"
#include "ctl/distribution.hpp"
#include "ctl/numeric.hpp"
#include "ctl/transport.hpp"

namespace ctl {

// Realises (S, G) from two uniforms (u, delta): u picks the atom s whose cdf
// interval (F(s-0), F(s)] contains u (a u on a boundary goes to the atom whose
// interval ends there), then w = F(s-0) + delta (F(s) - F(s-0)) and
// G = sigma sqrt(n) Phi^{-1}(w). In the shifted variant S is replaced by
// S + h (delta - 1/2), whose cdf at that point is again w, so the pair is a
// function of w alone.
class QuantileCoupling {
public:
    const DiscreteLaw& sum_law() const { return *law_; }
    DiscretePtr sum_law_ptr() const { return law_; }
    int n() const { return n_; }
    double sigma() const { return sigma_; }
    // 0 for the unshifted coupling.
    double shift() const { return h_; }
    // sigma sqrt(n).
    double gaussian_scale() const { return scale_; }

    std::size_t atom_index(double u) const;
    double sum_coordinate(double u, double delta) const;
    double gaussian_coordinate(double u, double delta) const;
    // |S - G|.
    double z_of_u(double u, double delta) const;
    // |S - G| at the point w = F(S) of the common uniform.
    double z_of_w(double w) const;

    // E c(S - G) over (u, delta), integrated per atom in delta.
    QuadResult expect(const CostFunction& c) const;
    // Independent (u, delta) draws.
    std::vector<std::pair<double, double>> sample(std::mt19937_64& rng, std::size_t count) const;

private:
    friend QuantileCoupling quantile_coupling(DiscretePtr, int, double);
    friend QuantileCoupling shifted_coupling(DiscretePtr, int, double, double);
    QuantileCoupling(DiscretePtr law, int n, double sigma, double h);

    DiscretePtr law_;
    int n_;
    double sigma_, h_, scale_;
};

// Throws InvalidArgument on n < 1, sigma <= 0 or an empty law.
QuantileCoupling quantile_coupling(DiscretePtr sum_law, int n, double sigma);
QuantileCoupling quantile_coupling(const LatticeLaw& sum_law, int n, double sigma);
// Requires lattice information with step h.
QuantileCoupling shifted_coupling(DiscretePtr sum_law, int n, double h, double sigma = 1.0);

// Law of Z = |S - G| under the unshifted coupling; cdf, sf, density and
// E (Z - t)_+ are exact sums over the atoms' Gaussian cells.
class CouplingGapLaw final : public Distribution {
public:
    explicit CouplingGapLaw(const QuantileCoupling& coupling);

    double cdf(double t) const override;
    double sf(double t) const override;
    double pdf(double t) const override;
    double expected_excess(double t) const override;
    double moment(int k) const override;
    Support support() const override { return {}; }
    std::string describe() const override;

private:
    std::vector<double> s_, a_, b_;  // atom value, cell [a, b] in z
    double scale_;
};

// ---------------------------------------------------------------------------
// Dyadic Poisson-normal coupling
// ---------------------------------------------------------------------------

// P(B <= k) for B ~ Binomial(n, 1/2). Exact rational for n <= 64.
double symmetric_binomial_cdf(std::int64_t n, std::int64_t k);

struct DyadicCouplingSample {
    double m = 0.0;
    int levels = 0;
    std::int64_t poisson_value = 0;  // Pi(m)
    double gaussian_value = 0.0;     // sum over l < levels of xi_l sqrt(2^{l+1} m) 2^{-l-1}
    // Var(2^{-L} Pi(2^L m) - m) = m 2^{-L}, the part of Pi(m) - m the
    // truncated series leaves out.
    double residual_var_bound = 0.0;
    std::vector<double> xi;              // per level l
    std::vector<std::int64_t> u_tilde;   // 2 Pi(2^l m) - Pi(2^{l+1} m)
};

inline constexpr int kDefaultDyadicLevels = 14;
inline constexpr int kMaxDyadicLevels = 40;

// Samples Pi(2^L m) once and thins down with Binomial(., 1/2) draws.
DyadicCouplingSample dyadic_poisson_coupling(double m, int levels, std::mt19937_64& rng);

// Smallest L with 2^{-L} <= rel_residual.
int dyadic_levels_for(double rel_residual);

struct DyadicMcOptions {
    double m = 1.0;
    int levels = kDefaultDyadicLevels;
    std::size_t samples = 100'000;
    std::uint64_t seed = 1;
    std::size_t chunk = 4096;
    bool parallel = true;
    // Largest allowed residual variance relative to m.
    double max_rel_residual = 1e-4;
};

struct DyadicMcSummary {
    double m = 0.0;
    int levels = 0;
    std::size_t samples = 0;
    double mean_sq_gap = 0.0;  // E (Pi(m) - m - W)^2
    double se_sq_gap = 0.0;
    double gaussian_mean = 0.0;
    double gaussian_var = 0.0;
    double residual_var_bound = 0.0;
    // Sample covariance of V_0 and V_1, V_l = xi_l sqrt(2^{l+1} m) - U~_{l+1}.
    double level_cov = 0.0;
    double level_cov_se = 0.0;
};

// Chunk c draws from mt19937_64 seeded with (seed, c); chunk sums are
// reduced in chunk order, so serial and parallel runs agree bitwise.
DyadicMcSummary dyadic_mc(const DyadicMcOptions& opt);

// CSV rows: m, level_count, poisson_value, gaussian_value.
void write_dyadic_csv(std::ostream& os, const std::vector<DyadicCouplingSample>& samples);

// ---------------------------------------------------------------------------
// +-1 walk against N(0, n)
// ---------------------------------------------------------------------------

inline constexpr int kMaxBinomialCouplingN = 1 << 14;

struct BinomialCouplingReport {
    int n = 0;
    TransportReport w2sq;
    double walk_envelope = 0.0;  // min(33/16, 2n (1 - sqrt(2/pi)))
    // min over z of 3/2 + z^2/4 - |S - sqrt(n) z| with S = F^{-1}(Phi(z)).
    // NaN when 2^{-n} underflows (n > 1074) and the outer atoms are lost.
    double pathwise_min_margin = 0.0;
};

// Throws CapacityError for n > kMaxBinomialCouplingN.
BinomialCouplingReport binomial_gaussian_coupling(int n, const TransportOptions& opt = {});

}  // namespace ctl
