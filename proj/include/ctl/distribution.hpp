#pragma once

// One-dimensional laws with exact cdfs and quantiles. Quantiles follow the
// left-continuous convention F^{-1}(u) = inf{x : F(x) >= u}, so quantile(0)
// is -inf for every law. Every law also
// answers quantile_z(z) = F^{-1}(Phi(z)), evaluated on whichever side of the
// median keeps the probability argument accurate; the transport integrals run
// in that variable.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ctl {

enum class SupportKind { Continuous, Lattice, Mixed };

struct Support {
    SupportKind kind = SupportKind::Continuous;
    double origin = 0.0;  // lattice only
    double step = 0.0;    // lattice only
};

class DiscreteLaw;

class Distribution {
public:
    virtual ~Distribution() = default;

    virtual double cdf(double x) const = 0;
    // P(X > x), accurate where cdf(x) is close to 1.
    virtual double sf(double x) const { return 1.0 - cdf(x); }
    // P(X < x).
    virtual double cdf_left(double x) const { return cdf(x); }
    // Density where one exists, NaN otherwise.
    virtual double pdf(double) const;

    virtual double quantile(double u) const;
    // quantile(1 - v) without forming 1 - v.
    virtual double quantile_upper(double v) const;
    // quantile(Phi(z)).
    virtual double quantile_z(double z) const;

    virtual std::vector<double> sample(std::mt19937_64& rng, std::size_t count) const;
    virtual Support support() const = 0;

    // Raw moment E X^k for k in 1..4.
    virtual double moment(int k) const;
    // E |X|^r for r > 0.
    virtual double abs_moment(double r) const;
    double abs_third() const { return abs_moment(3.0); }
    double mean() const { return moment(1); }
    double variance() const;

    // E (X - t)_+.
    virtual double expected_excess(double t) const;
    // E f(X).
    virtual double expect(const std::function<double(double)>& f) const;

    // Increasing z values where quantile_z jumps or changes formula.
    virtual std::vector<double> z_breaks() const { return {}; }
    virtual const DiscreteLaw* as_discrete() const { return nullptr; }
    // (mean, standard deviation) when the law is exactly Gaussian.
    virtual std::optional<std::pair<double, double>> gaussian() const { return std::nullopt; }
    virtual std::string describe() const = 0;

protected:
    // Generic inversion of cdf / sf by bracketing and safeguarded Newton.
    double invert_lower(double u) const;
    double invert_upper(double v) const;
};

using DistPtr = std::shared_ptr<const Distribution>;

// Lattice data: atoms at origin + offset * step.
struct LatticeLaw {
    double origin = 0.0;
    double step = 1.0;
    std::vector<std::pair<std::int64_t, double>> atoms;

    // Throws InvalidArgument unless step > 0, offsets strictly increase,
    // probabilities are nonnegative and sum to 1 within 1e-14.
    void validate() const;
    nlohmann::json to_json() const;
    static LatticeLaw from_json(const nlohmann::json& j);
};

// Finite discrete law. Keeps forward and backward cumulative sums so both
// tails stay accurate.
class DiscreteLaw final : public Distribution {
public:
    // Sorts, merges duplicate points and drops zero weights. Weights must sum
    // to 1 within 1e-12 unless `normalize` is set.
    static std::shared_ptr<const DiscreteLaw> from_atoms(std::vector<double> x, std::vector<double> p,
                                                         bool normalize = false);
    static std::shared_ptr<const DiscreteLaw> from_lattice(const LatticeLaw& law);

    double cdf(double x) const override;
    double sf(double x) const override;
    double cdf_left(double x) const override;
    double quantile(double u) const override;
    double quantile_upper(double v) const override;
    double quantile_z(double z) const override;
    std::vector<double> sample(std::mt19937_64& rng, std::size_t count) const override;
    Support support() const override;
    double moment(int k) const override;
    double abs_moment(double r) const override;
    double expected_excess(double t) const override;
    double expect(const std::function<double(double)>& f) const override;
    std::vector<double> z_breaks() const override;
    const DiscreteLaw* as_discrete() const override { return this; }
    std::string describe() const override;

    std::size_t size() const { return x_.size(); }
    const std::vector<double>& points() const { return x_; }
    const std::vector<double>& probs() const { return p_; }
    // cum()[i] = P(X <= x_i), tail()[i] = P(X > x_i).
    const std::vector<double>& cum() const { return cum_; }
    const std::vector<double>& tail() const { return tail_; }
    // z-space cell boundaries: atom i occupies [zb[i], zb[i+1]] with zb[0] = -inf.
    const std::vector<double>& z_cells() const { return zcell_; }
    std::optional<LatticeLaw> lattice() const;

private:
    DiscreteLaw() = default;
    void finish();

    std::vector<double> x_, p_, cum_, tail_, zcell_;
    std::optional<LatticeLaw> lattice_;
};

using DiscretePtr = std::shared_ptr<const DiscreteLaw>;

class NormalLaw final : public Distribution {
public:
    NormalLaw(double mean, double variance);
    double cdf(double x) const override;
    double sf(double x) const override;
    double pdf(double x) const override;
    double quantile(double u) const override;
    double quantile_upper(double v) const override;
    double quantile_z(double z) const override { return m_ + s_ * z; }
    std::vector<double> sample(std::mt19937_64& rng, std::size_t count) const override;
    Support support() const override { return {}; }
    double moment(int k) const override;
    double abs_moment(double r) const override;
    double expected_excess(double t) const override;
    std::optional<std::pair<double, double>> gaussian() const override { return std::pair{m_, s_}; }
    std::string describe() const override;

private:
    double m_, s_;
};

// Gamma(shape, 1) - shift. Gamma(n) - n is the exact law of a sum of n
// centered unit exponentials.
class GammaLaw final : public Distribution {
public:
    GammaLaw(double shape, double shift);
    double cdf(double x) const override;
    double sf(double x) const override;
    double pdf(double x) const override;
    double quantile(double u) const override;
    double quantile_upper(double v) const override;
    std::vector<double> sample(std::mt19937_64& rng, std::size_t count) const override;
    Support support() const override { return {}; }
    double moment(int k) const override;
    double expected_excess(double t) const override;
    std::string describe() const override;

private:
    double k_, shift_;
};

class UniformLaw final : public Distribution {
public:
    UniformLaw(double a, double b);
    double cdf(double x) const override;
    double sf(double x) const override;
    double pdf(double x) const override;
    double quantile(double u) const override;
    double quantile_upper(double v) const override;
    Support support() const override { return {}; }
    double moment(int k) const override;
    double abs_moment(double r) const override;
    double expected_excess(double t) const override;
    std::string describe() const override;

private:
    double a_, b_;
};

// Law of base + sigma N with N standard normal and independent.
class SmoothedLaw final : public Distribution {
public:
    SmoothedLaw(DistPtr base, double sigma);
    double cdf(double x) const override;
    double sf(double x) const override;
    double pdf(double x) const override;
    Support support() const override { return {}; }
    double moment(int k) const override;
    double expected_excess(double t) const override;
    std::string describe() const override;
    const DistPtr& base() const { return base_; }
    double sigma() const { return sigma_; }

private:
    double mix(double x, bool upper) const;
    DistPtr base_;
    const DiscreteLaw* discrete_ = nullptr;
    double sigma_;
};

// Law of S + hV for a lattice S with step >= h and V uniform on [-1/2, 1/2].
// Piecewise-linear cdf, so quantiles are affine in u on each atom's cell.
class ShiftedLatticeLaw final : public Distribution {
public:
    ShiftedLatticeLaw(DiscretePtr base, double h);
    double cdf(double x) const override;
    double sf(double x) const override;
    double pdf(double x) const override;
    double quantile(double u) const override;
    double quantile_upper(double v) const override;
    Support support() const override { return {}; }
    double moment(int k) const override;
    double expected_excess(double t) const override;
    std::vector<double> z_breaks() const override;
    std::string describe() const override;
    const DiscretePtr& base() const { return base_; }
    double h() const { return h_; }

private:
    DiscretePtr base_;
    double h_;
};

// Law of a (G^2 - 1) for G standard normal and a > 0.
class NormalSquareLaw final : public Distribution {
public:
    explicit NormalSquareLaw(double a);
    double cdf(double x) const override;
    double sf(double x) const override;
    double pdf(double x) const override;
    double quantile(double u) const override;
    double quantile_upper(double v) const override;
    Support support() const override { return {}; }
    double moment(int k) const override;
    double expected_excess(double t) const override;
    std::string describe() const override;

private:
    double a_;
};

// Law of |X|.
class FoldedLaw final : public Distribution {
public:
    explicit FoldedLaw(DistPtr base);
    double cdf(double x) const override;
    double sf(double x) const override;
    double cdf_left(double x) const override;
    double pdf(double x) const override;
    Support support() const override;
    double moment(int k) const override;
    double abs_moment(double r) const override;
    double expected_excess(double t) const override;
    double expect(const std::function<double(double)>& f) const override;
    std::string describe() const override;

private:
    DistPtr base_;
};

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

struct FamilySpec {
    // normal, poisson, rademacher, bernoulli, exponential, uniform, point, lattice
    std::string family;
    double param = 0.0;  // variance, lambda, success probability or point location
    std::optional<LatticeLaw> lattice;
};

DistPtr make_family(const FamilySpec& spec);

DiscretePtr centered_poisson(double lambda);
DiscretePtr rademacher();
DiscretePtr centered_bernoulli(double p);
DiscretePtr point_mass(double x);
DistPtr normal(double mean, double variance);
// Exact law of the sum of n centered unit exponentials.
DistPtr centered_exponential_sum(int n);

inline constexpr std::size_t kDefaultAtomCap = 1'000'000;

// Exact n-fold convolution by repeated doubling. Atoms whose combined tail
// mass is below 1e-17 are trimmed after each product and the result is
// renormalized. Throws CapacityError if the support would exceed `cap`.
LatticeLaw convolve_n(const LatticeLaw& base, int n, std::size_t cap = kDefaultAtomCap, bool parallel = true);
DiscretePtr convolve_n(const DiscreteLaw& base, int n, std::size_t cap = kDefaultAtomCap, bool parallel = true);

// Law of B + N with B = 2 beta (Pi(lambda) - lambda), lambda = 1/(8 beta^2),
// N ~ N(0, 1/2) independent. Mean 0, variance 1, E Y^3 = beta,
// E Y^4 = 3 + 2 beta^2.
std::shared_ptr<const SmoothedLaw> lindeberg_surrogate(double beta3);

// The discrete Poisson part B of lindeberg_surrogate.
DiscretePtr lindeberg_jump_part(double beta3);

DistPtr smooth(DistPtr d, double sigma);

// Law of |X|; discrete inputs are folded exactly into a DiscreteLaw.
DistPtr fold(DistPtr d);

// Total variation distance between two discrete laws.
double total_variation(const DiscreteLaw& a, const DiscreteLaw& b);

}  // namespace ctl
