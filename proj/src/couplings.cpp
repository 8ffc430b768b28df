#include "ctl/couplings.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "ctl/coverage.hpp"
#include "ctl/error.hpp"
#include "ctl/kernels.hpp"

namespace ctl {

namespace {

void touch() { coverage::touch(coverage::Module::Couplings); }

// Phi^{-1}(a + delta p) evaluated from whichever side keeps w accurate;
// `tail` is 1 - a - p.
double cell_quantile(double a, double p, double tail, double delta) {
    const double w = a + delta * p;
    if (w <= 0.5) return normal_quantile(w);
    return normal_quantile_upper(tail + (1.0 - delta) * p);
}

}  // namespace

// ---------------------------------------------------------------------------
// Quantile coupling
// ---------------------------------------------------------------------------

QuantileCoupling::QuantileCoupling(DiscretePtr law, int n, double sigma, double h)
    : law_(std::move(law)), n_(n), sigma_(sigma), h_(h), scale_(sigma * std::sqrt(static_cast<double>(n))) {}

QuantileCoupling quantile_coupling(DiscretePtr sum_law, int n, double sigma) {
    touch();
    if (!sum_law || sum_law->points().empty()) throw InvalidArgument("quantile_coupling: empty sum law");
    if (n < 1) throw InvalidArgument("quantile_coupling: n must be >= 1");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("quantile_coupling: sigma must be > 0");
    return QuantileCoupling(std::move(sum_law), n, sigma, 0.0);
}

QuantileCoupling quantile_coupling(const LatticeLaw& sum_law, int n, double sigma) {
    return quantile_coupling(DiscreteLaw::from_lattice(sum_law), n, sigma);
}

QuantileCoupling shifted_coupling(DiscretePtr sum_law, int n, double h, double sigma) {
    touch();
    if (!sum_law || !sum_law->lattice()) throw InvalidArgument("shifted_coupling: sum law must be a lattice law");
    if (!(h > 0.0) || std::abs(h - sum_law->lattice()->step) > 1e-12 * h)
        throw InvalidArgument("shifted_coupling: h must equal the lattice step");
    auto c = quantile_coupling(std::move(sum_law), n, sigma);
    c.h_ = h;
    return c;
}

std::size_t QuantileCoupling::atom_index(double u) const {
    const auto& cum = law_->cum();
    auto it = std::lower_bound(cum.begin(), cum.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
}

double QuantileCoupling::sum_coordinate(double u, double delta) const {
    const double s = law_->points()[atom_index(u)];
    return h_ > 0.0 ? s + h_ * (delta - 0.5) : s;
}

double QuantileCoupling::gaussian_coordinate(double u, double delta) const {
    const std::size_t i = atom_index(u);
    const double a = i == 0 ? 0.0 : law_->cum()[i - 1];
    return scale_ * cell_quantile(a, law_->probs()[i], law_->tail()[i], delta);
}

double QuantileCoupling::z_of_u(double u, double delta) const {
    return std::abs(sum_coordinate(u, delta) - gaussian_coordinate(u, delta));
}

double QuantileCoupling::z_of_w(double w) const {
    const std::size_t i = atom_index(w);
    const double a = i == 0 ? 0.0 : law_->cum()[i - 1];
    const double p = law_->probs()[i];
    const double delta = std::clamp((w - a) / p, 0.0, 1.0);
    return z_of_u(w, delta);
}

QuadResult QuantileCoupling::expect(const CostFunction& c) const {
    touch();
    const auto& x = law_->points();
    const auto& p = law_->probs();
    const auto& cum = law_->cum();
    const auto& tail = law_->tail();
    std::vector<QuadResult> parts;
    kernels::map_indices(
        x.size(), parts,
        [&](std::size_t i) {
            const double a = i == 0 ? 0.0 : cum[i - 1];
            auto gap = [&](double d) {
                const double s = h_ > 0.0 ? x[i] + h_ * (d - 0.5) : x[i];
                return s - scale_ * cell_quantile(a, p[i], tail[i], d);
            };
            // Split where the gap crosses a kink of the cost.
            std::vector<double> pts{0.0, 1.0};
            constexpr int kScan = 64;
            for (double k : c.kinks()) {
                for (double level : {k, -k}) {
                    double prev = gap(0.5 / kScan) - level;
                    for (int j = 1; j < kScan; ++j) {
                        const double lo = (j - 0.5) / kScan, hi = (j + 0.5) / kScan;
                        const double cur = gap(hi) - level;
                        if ((prev > 0.0) != (cur > 0.0))
                            pts.push_back(bisect_root([&](double d) { return gap(d) - level; }, lo, hi, 1e-15));
                        prev = cur;
                    }
                    if (k == 0.0) break;
                }
            }
            std::sort(pts.begin(), pts.end());
            QuadOptions q;
            q.abs_tol = 1e-13;
            q.rel_tol = 1e-12;
            q.max_evaluations = 200000;
            auto r = integrate_pieces([&](double d) { return c.eval(gap(d)); }, pts, q);
            r.value *= p[i];
            r.abs_error *= p[i];
            return r;
        },
        true);
    QuadResult total;
    for (const auto& r : parts) total += r;
    if (!total.converged) throw ConvergenceError("QuantileCoupling::expect: quadrature did not converge");
    return total;
}

std::vector<std::pair<double, double>> QuantileCoupling::sample(std::mt19937_64& rng, std::size_t count) const {
    std::vector<std::pair<double, double>> out(count);
    for (auto& s : out) {
        const double u = uniform_open01(rng);
        s = {u, uniform_open01(rng)};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gap law
// ---------------------------------------------------------------------------

CouplingGapLaw::CouplingGapLaw(const QuantileCoupling& coupling) : scale_(coupling.gaussian_scale()) {
    if (coupling.shift() > 0.0) throw InvalidArgument("CouplingGapLaw: only the unshifted coupling has a cell form");
    const auto& law = coupling.sum_law();
    const auto& zc = law.z_cells();
    s_.assign(law.points().begin(), law.points().end());
    a_.assign(zc.begin(), zc.end() - 1);
    b_.assign(zc.begin() + 1, zc.end());
}

double CouplingGapLaw::cdf(double t) const {
    if (t < 0.0) return 0.0;
    KahanSum acc;
    for (std::size_t i = 0; i < s_.size(); ++i)
        acc.add(normal_mass(std::max(a_[i], (s_[i] - t) / scale_), std::min(b_[i], (s_[i] + t) / scale_)));
    return std::clamp(acc.value(), 0.0, 1.0);
}

double CouplingGapLaw::sf(double t) const {
    if (t < 0.0) return 1.0;
    KahanSum acc;
    for (std::size_t i = 0; i < s_.size(); ++i) {
        acc.add(normal_mass(a_[i], std::min(b_[i], (s_[i] - t) / scale_)));
        acc.add(normal_mass(std::max(a_[i], (s_[i] + t) / scale_), b_[i]));
    }
    return std::clamp(acc.value(), 0.0, 1.0);
}

double CouplingGapLaw::pdf(double t) const {
    if (t < 0.0) return 0.0;
    double d = 0.0;
    for (std::size_t i = 0; i < s_.size(); ++i) {
        const double lo = (s_[i] - t) / scale_, hi = (s_[i] + t) / scale_;
        if (lo > a_[i] && lo < b_[i]) d += normal_pdf(lo);
        if (hi > a_[i] && hi < b_[i]) d += normal_pdf(hi);
    }
    return d / scale_;
}

double CouplingGapLaw::expected_excess(double t) const {
    if (t < 0.0) return expected_excess(0.0) - t;
    KahanSum acc;
    for (std::size_t i = 0; i < s_.size(); ++i) {
        const double lo = (s_[i] - t) / scale_, hi = (s_[i] + t) / scale_;
        // s - t - scale z on (a, lo), scale z - s - t on (hi, b).
        const auto gl = normal_partial_moments(a_[i], std::min(b_[i], lo));
        const auto gh = normal_partial_moments(std::max(a_[i], hi), b_[i]);
        acc.add((s_[i] - t) * gl.m0 - scale_ * gl.m1);
        acc.add(scale_ * gh.m1 - (s_[i] + t) * gh.m0);
    }
    return std::max(0.0, acc.value());
}

double CouplingGapLaw::moment(int k) const {
    if (k == 1) return expected_excess(0.0);
    if (k == 2) {
        KahanSum acc;
        for (std::size_t i = 0; i < s_.size(); ++i) {
            const auto g = normal_partial_moments(a_[i], b_[i]);
            acc.add(s_[i] * s_[i] * g.m0 - 2.0 * s_[i] * scale_ * g.m1 + scale_ * scale_ * g.m2);
        }
        return std::max(0.0, acc.value());
    }
    return Distribution::moment(k);
}

std::string CouplingGapLaw::describe() const { return "CouplingGap(" + std::to_string(s_.size()) + " atoms)"; }

// ---------------------------------------------------------------------------
// Dyadic Poisson-normal coupling
// ---------------------------------------------------------------------------

namespace {

constexpr int kExactBinomialMax = 64;
__extension__ using u128 = unsigned __int128;

struct BinomialTable {
    // cdf[n][k] = P(B <= k), pmf[n][k] = P(B = k), both correctly rounded.
    std::array<std::array<double, kExactBinomialMax + 1>, kExactBinomialMax + 1> cdf{}, pmf{};

    BinomialTable() {
        for (int n = 0; n <= kExactBinomialMax; ++n) {
            u128 c = 1, cum = 0;
            for (int k = 0; k <= n; ++k) {
                cum += c;
                pmf[n][k] = std::ldexp(static_cast<double>(c), -n);
                cdf[n][k] = std::ldexp(static_cast<double>(cum), -n);
                c = c * static_cast<unsigned>(n - k) / static_cast<unsigned>(k + 1);
            }
        }
    }
};

const BinomialTable& binomial_table() {
    static const BinomialTable t;
    return t;
}

double symmetric_binomial_pmf(std::int64_t n, std::int64_t k) {
    if (k < 0 || k > n) return 0.0;
    if (n <= kExactBinomialMax) return binomial_table().pmf[n][k];
    return boost::math::pdf(boost::math::binomial_distribution<double>(static_cast<double>(n), 0.5),
                            static_cast<double>(k));
}

// xi = Phi^{-1}(F(b - 1) + delta P(B = b)) for B ~ Binomial(n, 1/2).
double binomial_transform(std::int64_t n, std::int64_t b, double delta) {
    const double p = symmetric_binomial_pmf(n, b);
    if (2 * b <= n) return normal_quantile(symmetric_binomial_cdf(n, b - 1) + delta * p);
    // P(B > b) = P(B <= n - b - 1) by symmetry.
    return normal_quantile_upper(symmetric_binomial_cdf(n, n - b - 1) + (1.0 - delta) * p);
}

}  // namespace

double symmetric_binomial_cdf(std::int64_t n, std::int64_t k) {
    if (n < 0) throw InvalidArgument("symmetric_binomial_cdf: n must be >= 0");
    if (k < 0) return 0.0;
    if (k >= n) return 1.0;
    if (n <= kExactBinomialMax) return binomial_table().cdf[n][k];
    // P(B <= k) = I_{1/2}(n - k, k + 1).
    return boost::math::ibeta(static_cast<double>(n - k), static_cast<double>(k + 1), 0.5);
}

int dyadic_levels_for(double rel_residual) {
    if (!(rel_residual > 0.0)) throw InvalidArgument("dyadic_levels_for: tolerance must be > 0");
    const int L = std::max(1, static_cast<int>(std::ceil(-std::log2(rel_residual))));
    if (L > kMaxDyadicLevels) throw InvalidArgument("dyadic_levels_for: tolerance needs more than 40 levels");
    return L;
}

DyadicCouplingSample dyadic_poisson_coupling(double m, int levels, std::mt19937_64& rng) {
    touch();
    if (!(m > 0.0) || !std::isfinite(m)) throw InvalidArgument("dyadic_poisson_coupling: m must be > 0");
    if (levels < 1 || levels > kMaxDyadicLevels)
        throw InvalidArgument("dyadic_poisson_coupling: levels must be in [1, 40]");
    const double top_mean = std::ldexp(m, levels);
    if (top_mean > 1e15) throw CapacityError("dyadic_poisson_coupling: 2^levels m too large to sample");

    DyadicCouplingSample s;
    s.m = m;
    s.levels = levels;
    s.residual_var_bound = std::ldexp(m, -levels);
    s.xi.assign(static_cast<std::size_t>(levels), 0.0);
    s.u_tilde.assign(static_cast<std::size_t>(levels), 0);

    std::int64_t cur = std::poisson_distribution<std::int64_t>(top_mean)(rng);
    double w = 0.0;
    for (int l = levels - 1; l >= 0; --l) {
        const std::int64_t N = cur;  // Pi(2^{l+1} m)
        const std::int64_t B = N == 0 ? 0 : std::binomial_distribution<std::int64_t>(N, 0.5)(rng);
        const double delta = uniform_open01(rng);
        const double xi = binomial_transform(N, B, delta);
        s.xi[static_cast<std::size_t>(l)] = xi;
        s.u_tilde[static_cast<std::size_t>(l)] = 2 * B - N;
        // xi sqrt(2^{l+1} m) 2^{-l-1} = xi sqrt(m 2^{-l-1}).
        w += xi * std::sqrt(std::ldexp(m, -l - 1));
        cur = B;
    }
    s.poisson_value = cur;
    s.gaussian_value = w;
    return s;
}

namespace {

struct ChunkSums {
    std::size_t count = 0;
    double g2 = 0, g4 = 0, w = 0, w2 = 0, v0 = 0, v1 = 0, v01 = 0, v01sq = 0;
};

}  // namespace

DyadicMcSummary dyadic_mc(const DyadicMcOptions& opt) {
    touch();
    if (opt.samples == 0) throw InvalidArgument("dyadic_mc: samples must be > 0");
    if (opt.chunk == 0) throw InvalidArgument("dyadic_mc: chunk must be > 0");
    if (std::ldexp(1.0, -opt.levels) > opt.max_rel_residual)
        throw InvalidArgument("dyadic_mc: levels too small for the requested residual bound (need " +
                              std::to_string(dyadic_levels_for(opt.max_rel_residual)) + ")");
    const std::size_t chunks = (opt.samples + opt.chunk - 1) / opt.chunk;
    const double m = opt.m;
    std::vector<ChunkSums> parts;
    kernels::map_indices(
        chunks, parts,
        [&](std::size_t c) {
            std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                              static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
            std::mt19937_64 rng(seq);
            ChunkSums s;
            const std::size_t begin = c * opt.chunk;
            const std::size_t end = std::min(opt.samples, begin + opt.chunk);
            for (std::size_t i = begin; i < end; ++i) {
                const auto d = dyadic_poisson_coupling(m, opt.levels, rng);
                const double g = static_cast<double>(d.poisson_value) - m - d.gaussian_value;
                s.count++;
                s.g2 += g * g;
                s.g4 += g * g * g * g;
                s.w += d.gaussian_value;
                s.w2 += d.gaussian_value * d.gaussian_value;
                if (opt.levels >= 2) {
                    const double V0 = d.xi[0] * std::sqrt(2.0 * m) - static_cast<double>(d.u_tilde[0]);
                    const double V1 = d.xi[1] * std::sqrt(4.0 * m) - static_cast<double>(d.u_tilde[1]);
                    s.v0 += V0;
                    s.v1 += V1;
                    s.v01 += V0 * V1;
                    s.v01sq += V0 * V1 * V0 * V1;
                }
            }
            return s;
        },
        opt.parallel);

    ChunkSums t;
    for (const auto& s : parts) {
        t.count += s.count;
        t.g2 += s.g2;
        t.g4 += s.g4;
        t.w += s.w;
        t.w2 += s.w2;
        t.v0 += s.v0;
        t.v1 += s.v1;
        t.v01 += s.v01;
        t.v01sq += s.v01sq;
    }
    const double N = static_cast<double>(t.count);
    DyadicMcSummary out;
    out.m = m;
    out.levels = opt.levels;
    out.samples = t.count;
    out.residual_var_bound = std::ldexp(m, -opt.levels);
    out.mean_sq_gap = t.g2 / N;
    out.se_sq_gap = std::sqrt(std::max(0.0, t.g4 / N - out.mean_sq_gap * out.mean_sq_gap) / N);
    out.gaussian_mean = t.w / N;
    out.gaussian_var = (t.w2 - N * out.gaussian_mean * out.gaussian_mean) / (N - 1.0);
    const double m01 = t.v01 / N;
    out.level_cov = m01 - (t.v0 / N) * (t.v1 / N);
    out.level_cov_se = std::sqrt(std::max(0.0, t.v01sq / N - m01 * m01) / N);
    return out;
}

void write_dyadic_csv(std::ostream& os, const std::vector<DyadicCouplingSample>& samples) {
    os << "m,level_count,poisson_value,gaussian_value\r\n";
    char buf[128];
    for (const auto& s : samples) {
        std::snprintf(buf, sizeof buf, "%.17g,%d,%lld,%.17g\r\n", s.m, s.levels,
                      static_cast<long long>(s.poisson_value), s.gaussian_value);
        os << buf;
    }
}

// ---------------------------------------------------------------------------
// +-1 walk
// ---------------------------------------------------------------------------

BinomialCouplingReport binomial_gaussian_coupling(int n, const TransportOptions& opt) {
    touch();
    if (n < 1) throw InvalidArgument("binomial_gaussian_coupling: n must be >= 1");
    if (n > kMaxBinomialCouplingN)
        throw CapacityError("binomial_gaussian_coupling: n above 2^14 is outside exact mode");
    // Untrimmed binomial weights, so the outer cells are the true ones
    // wherever the weights are representable.
    std::vector<double> xs(static_cast<std::size_t>(n) + 1), ps(xs.size());
    for (int j = 0; j <= n; ++j) {
        xs[static_cast<std::size_t>(j)] = 2.0 * j - n;
        ps[static_cast<std::size_t>(j)] = symmetric_binomial_pmf(n, j);
    }
    const bool complete = ps.front() > 0.0;
    const auto law = DiscreteLaw::from_atoms(std::move(xs), std::move(ps), true);
    const auto G = normal(0.0, n);
    BinomialCouplingReport r;
    r.n = n;
    r.w2sq = kappa(CostFunction::power(2), *law, *G, opt);
    r.walk_envelope = std::min(33.0 / 16.0, 2.0 * n * (1.0 - std::sqrt(2.0 / M_PI)));

    // 3/2 + z^2/4 - |s - r z| = min of two convex quadratics; minimise each
    // over the cell.
    const double rn = std::sqrt(static_cast<double>(n));
    const auto& zc = law->z_cells();
    const auto& x = law->points();
    double margin = kInf;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = zc[i], b = zc[i + 1], s = x[i];
        const double z1 = std::clamp(-2.0 * rn, a, b), z2 = std::clamp(2.0 * rn, a, b);
        const double q1 = 1.5 + 0.25 * z1 * z1 - (s - rn * z1);
        const double q2 = 1.5 + 0.25 * z2 * z2 + (s - rn * z2);
        margin = std::min({margin, q1, q2});
    }
    // With underflowed end atoms the outer cells are wrong; no pathwise claim.
    r.pathwise_min_margin = complete ? margin : kNaN;
    return r;
}

}  // namespace ctl
