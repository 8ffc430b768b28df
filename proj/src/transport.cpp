#include "ctl/transport.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ctl/coverage.hpp"
#include "ctl/error.hpp"
#include "ctl/kernels.hpp"
#include "ctl/numeric.hpp"

namespace ctl {

namespace {

constexpr double kZMain = 8.5;
constexpr double kZBand = 13.0;

void touch() { coverage::touch(coverage::Module::Transport); }

// int_a^b (c0 - s z)^2 phi(z) dz.
double square_cell(double c0, double s, double a, double b) {
    const auto g = normal_partial_moments(a, b);
    return std::max(0.0, c0 * c0 * g.m0 - 2.0 * c0 * s * g.m1 + s * s * g.m2);
}

// int_a^b |c0 - s z| phi(z) dz with s > 0.
double abs_cell(double c0, double s, double a, double b) {
    const double zc = c0 / s;
    auto lin = [&](double lo, double hi) {
        const auto g = normal_partial_moments(lo, hi);
        return c0 * g.m0 - s * g.m1;
    };
    if (zc <= a) return -lin(a, b);
    if (zc >= b) return lin(a, b);
    return lin(a, zc) - lin(zc, b);
}

QuadOptions quad_options(const TransportOptions& opt, std::size_t pieces) {
    QuadOptions q;
    q.abs_tol = opt.abs_tol / static_cast<double>(std::max<std::size_t>(pieces, 1));
    q.rel_tol = opt.rel_tol;
    q.max_evaluations = std::max<std::size_t>(2000, opt.max_evaluations / std::max<std::size_t>(pieces, 1));
    return q;
}

void add_sorted_unique(std::vector<double>& pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
}

// Integration points on [-kZBand, kZBand]: the main window edges, both laws'
// quantile breaks and extra points supplied by the caller.
std::vector<double> window_points(const Distribution& F, const Distribution& G, const std::vector<double>& extra) {
    std::vector<double> pts{-kZBand, -kZMain, kZMain, kZBand};
    for (const auto* d : {&F, &G})
        for (double z : d->z_breaks())
            if (z > -kZBand && z < kZBand) pts.push_back(z);
    for (double z : extra)
        if (z > -kZBand && z < kZBand) pts.push_back(z);
    add_sorted_unique(pts);
    return pts;
}

// Analytic bound on int_{|z| > kZBand} c(F^{-1} - G^{-1}) phi from
// c(t) <= a (1 + t^2) and Cauchy-Schwarz on the tail mass.
double envelope_remainder(const CostFunction& c, const Distribution& F, const Distribution& G) {
    const auto a = c.quadratic_envelope();
    const double v = normal_sf(kZBand);
    if (!a) return kNaN;
    const double m4 = std::sqrt(std::max(0.0, F.moment(4))) + std::sqrt(std::max(0.0, G.moment(4)));
    return 2.0 * (*a) * (v + 2.0 * std::sqrt(v) * m4);
}

// Numerical estimate of the same tail for integrands without an envelope.
QuadResult tail_estimate(const std::function<double(double)>& f) {
    QuadOptions q;
    q.abs_tol = 1e-16;
    q.rel_tol = 1e-6;
    q.max_evaluations = 20000;
    QuadResult r = integrate([&](double z) { return std::abs(f(z)); }, kZBand, 30.0, q);
    r += integrate([&](double z) { return std::abs(f(z)); }, -30.0, -kZBand, q);
    return r;
}

// Crossing points where F^{-1}(Phi(z)) - G^{-1}(Phi(z)) equals +-level with F
// discrete and G Gaussian, or both Gaussian.
std::vector<double> crossing_points(const Distribution& F, const Distribution& G, const std::vector<double>& levels) {
    std::vector<double> out;
    const auto gf = F.gaussian(), gg = G.gaussian();
    auto emit = [&](double c0, double s) {
        // d(z) = c0 - s z.
        if (s == 0.0) return;
        for (double L : levels) {
            out.push_back((c0 - L) / s);
            if (L != 0.0) out.push_back((c0 + L) / s);
        }
    };
    if (gf && gg) {
        emit(gf->first - gg->first, gg->second - gf->second);
    } else if (const auto* d = F.as_discrete(); d && gg) {
        for (double x : d->points()) emit(x - gg->first, gg->second);
    } else if (const auto* d2 = G.as_discrete(); d2 && gf) {
        for (double y : d2->points()) emit(gf->first - y, -gf->second);
    }
    return out;
}

std::vector<double> cost_levels(const CostFunction& c) {
    std::vector<double> lv(c.kinks().begin(), c.kinks().end());
    return lv;
}

void tail_precheck(const CostFunction& c, const Distribution& F, const Distribution& G) {
    for (double u : {1e-8, 1.0 - 1e-8}) {
        const double d = F.quantile(u) - G.quantile(u);
        const double v = c.eval(d);
        if (!std::isfinite(d) || !std::isfinite(v))
            throw DivergenceError("kappa: cost of quantile gap not finite at u = " + std::to_string(u));
    }
    if (!c.quadratic_envelope()) {
        // Costs above quadratic growth: the z-space integrand must decay
        // through the remainder region.
        for (double sgn : {-1.0, 1.0}) {
            double prev = kInf;
            for (double z : {kZBand, 20.0, 30.0}) {
                const double v = c.eval(F.quantile_z(sgn * z) - G.quantile_z(sgn * z)) * normal_pdf(z);
                if (!std::isfinite(v) || v > prev)
                    throw DivergenceError("kappa: cost integrand does not decay at |z| = " + std::to_string(z));
                prev = v;
            }
        }
    }
}

// Discrete F against Gaussian G: cell by cell, closed form where available.
TransportReport discrete_vs_gaussian(const CostFunction& c, const DiscreteLaw& F, double m, double s,
                                     const TransportOptions& opt) {
    TransportReport rep;
    rep.method = TransportMethod::PiecewiseLattice;
    const auto& zc = F.z_cells();
    const auto& xs = F.points();
    const bool square = c.kind() == CostKind::PowerP && c.parameter() == 2.0;
    const bool absval = c.kind() == CostKind::PowerP && c.parameter() == 1.0;
    const auto levels = cost_levels(c);
    const auto q = quad_options(opt, xs.size() * 4);
    std::vector<QuadResult> parts;
    kernels::map_indices(
        xs.size(), parts,
        [&](std::size_t i) {
            QuadResult r;
            const double c0 = xs[i] - m;
            const double a = zc[i], b = zc[i + 1];
            if (square || absval) {
                r.value = square ? square_cell(c0, s, a, b) : abs_cell(c0, s, a, b);
                r.abs_error = 64.0 * 2.2e-16 * (std::abs(r.value) + (c0 * c0 + s * s) * normal_mass(a, b));
                r.evaluations = 1;
                return r;
            }
            const double lo = std::max(a, -kZBand), hi = std::min(b, kZBand);
            if (!(hi > lo)) return r;
            std::vector<double> pts{lo, hi};
            for (double z : {-kZMain, kZMain})
                if (z > lo && z < hi) pts.push_back(z);
            for (double L : levels)
                for (double z : {(c0 - L) / s, (c0 + L) / s})
                    if (z > lo && z < hi) pts.push_back(z);
            add_sorted_unique(pts);
            return integrate_pieces([&](double z) { return c.eval(c0 - s * z) * normal_pdf(z); }, pts, q);
        },
        opt.parallel);
    bool converged = true;
    for (const auto& r : parts) {
        rep.value += r.value;
        rep.abs_error += r.abs_error;
        rep.evaluations += r.evaluations;
        converged = converged && r.converged;
    }
    if (!converged) throw ConvergenceError("kappa: quadrature did not converge within the evaluation budget");
    if (!(square || absval)) {
        // The first and last cells extend past the band.
        const double v = normal_sf(kZBand);
        const auto a = c.quadratic_envelope();
        const double xmax = std::max(std::abs(xs.front() - m), std::abs(xs.back() - m));
        if (a)
            rep.abs_error += 2.0 * (*a) * (v * (1.0 + 2.0 * xmax * xmax) +
                                          2.0 * s * s * (kZBand * normal_pdf(kZBand) + v));
        else
            rep.abs_error += tail_estimate([&](double z) {
                                 return c.eval(F.quantile_z(z) - m - s * z) * normal_pdf(z);
                             }).value;
    }
    return rep;
}

// Both discrete: exact merge of the two quantile step functions.
TransportReport discrete_vs_discrete(const CostFunction& c, const DiscreteLaw& F, const DiscreteLaw& G) {
    TransportReport rep;
    rep.method = TransportMethod::PiecewiseLattice;
    const auto &xf = F.points(), &xg = G.points(), &cf = F.cum(), &cg = G.cum();
    std::size_t i = 0, j = 0;
    double prev = 0.0;
    KahanSum s;
    double scale = 0.0;
    while (i < xf.size() && j < xg.size()) {
        const double next = std::min(cf[i], cg[j]);
        const double w = next - prev;
        const double cost = c.eval(xf[i] - xg[j]);
        if (w > 0.0) s.add(w * cost);
        scale += std::abs(w * cost);
        prev = next;
        rep.evaluations++;
        const bool adv_i = cf[i] <= next, adv_j = cg[j] <= next;
        if (adv_i) ++i;
        if (adv_j) ++j;
    }
    rep.value = std::max(0.0, s.value());
    rep.abs_error = 1e-15 * scale + 1e-15 * static_cast<double>(rep.evaluations) * rep.value;
    return rep;
}

struct ZSpaceResult {
    QuadResult main;
    double remainder = 0.0;
};

ZSpaceResult zspace(const Distribution& F, const Distribution& G, const std::function<double(double, double)>& f,
                    const std::vector<double>& extra, const TransportOptions& opt) {
    const auto pts = window_points(F, G, extra);
    const auto q = quad_options(opt, pts.size());
    auto integrand = [&](double z) { return f(F.quantile_z(z) - G.quantile_z(z), z) * normal_pdf(z); };
    ZSpaceResult out;
    out.main = kernels::integrate_cells(integrand, pts, q, opt.parallel);
    if (!out.main.converged) throw ConvergenceError("z-space quadrature did not converge within the evaluation budget");
    return out;
}

}  // namespace

std::string to_string(TransportMethod m) {
    switch (m) {
        case TransportMethod::ZSpaceQuadrature: return "ZSpaceQuadrature";
        case TransportMethod::PiecewiseLattice: return "PiecewiseLattice";
        case TransportMethod::ClosedForm: return "ClosedForm";
    }
    return "?";
}

nlohmann::json to_json(const TransportReport& r) {
    return {{"value", r.value}, {"abs_error", r.abs_error}, {"method", to_string(r.method)}, {"evaluations", r.evaluations}};
}

TransportReport kappa(const CostFunction& c, const Distribution& F, const Distribution& G, const TransportOptions& opt) {
    touch();
    if (&F == &G) return {0.0, 0.0, TransportMethod::ClosedForm, 0};
    tail_precheck(c, F, G);

    const auto gf = F.gaussian(), gg = G.gaussian();
    const auto* df = F.as_discrete();
    const auto* dg = G.as_discrete();
    const bool square = c.kind() == CostKind::PowerP && c.parameter() == 2.0;

    if (gf && gg && square) {
        const double dm = gf->first - gg->first, ds = gf->second - gg->second;
        return {dm * dm + ds * ds, 0.0, TransportMethod::ClosedForm, 0};
    }
    if (df && dg) return discrete_vs_discrete(c, *df, *dg);
    if (df && gg) return discrete_vs_gaussian(c, *df, gg->first, gg->second, opt);
    if (dg && gf) return discrete_vs_gaussian(c, *dg, gf->first, gf->second, opt);

    const auto extra = crossing_points(F, G, cost_levels(c));
    const auto r = zspace(F, G, [&](double d, double) { return c.eval(d); }, extra, opt);
    TransportReport rep{r.main.value, r.main.abs_error, TransportMethod::ZSpaceQuadrature, r.main.evaluations};
    const double env = envelope_remainder(c, F, G);
    if (std::isfinite(env)) {
        rep.abs_error += env;
    } else {
        const auto t = tail_estimate([&](double z) { return c.eval(F.quantile_z(z) - G.quantile_z(z)) * normal_pdf(z); });
        rep.abs_error += t.value;
        rep.evaluations += t.evaluations;
    }
    rep.value = std::max(0.0, rep.value);
    return rep;
}

TransportReport wasserstein_p(double p, const Distribution& F, const Distribution& G, const TransportOptions& opt) {
    if (!(p >= 1.0)) throw InvalidArgument("wasserstein_p: p must be >= 1");
    auto rep = kappa(CostFunction::power(p), F, G, opt);
    const double k = rep.value;
    const double v = std::pow(k, 1.0 / p);
    rep.abs_error = k > 0.0 ? rep.abs_error * v / (p * k) : std::pow(rep.abs_error, 1.0 / p);
    rep.value = v;
    return rep;
}

TransportReport w_phi(const CostFunction& c, const Distribution& F, const Distribution& G, const TransportOptions& opt) {
    if (!c.is_class_psi() && c.kind() != CostKind::PsiX)
        throw InvalidArgument("w_phi: " + c.name() + " is not a class-Psi cost");
    auto rep = kappa(c, F, G, opt);
    const double k = rep.value;
    const double v = std::sqrt(k);
    rep.abs_error = k > 0.0 ? rep.abs_error / (2.0 * v) : std::sqrt(rep.abs_error);
    rep.value = v;
    return rep;
}

double Weight::at_z(double z) const {
    if (of_z) return of_z(z);
    return of_u(normal_cdf(z));
}

Weight Weight::constant(double c) {
    return {[c](double) { return c; }, [c](double) { return c; }};
}

Weight Weight::normal_quantile_power(double k) {
    return {[k](double u) { return std::pow(std::abs(normal_quantile(u)), k); },
            [k](double z) { return std::pow(std::abs(z), k); }};
}

Weight Weight::from_u(std::function<double(double)> g) { return {std::move(g), {}}; }

TransportReport weighted_cost(const Weight& g, const Distribution& F, const Distribution& G,
                              const TransportOptions& opt) {
    touch();
    if (!g.of_u && !g.of_z) throw InvalidArgument("weighted_cost: empty weight");
    if (&F == &G) return {0.0, 0.0, TransportMethod::ClosedForm, 0};
    const auto extra = crossing_points(F, G, {0.0});
    auto f = [&](double d, double z) { return g.at_z(z) * std::abs(d); };
    const auto r = zspace(F, G, f, extra, opt);
    TransportReport rep{std::max(0.0, r.main.value), r.main.abs_error, TransportMethod::ZSpaceQuadrature,
                        r.main.evaluations};
    const auto t = tail_estimate([&](double z) { return f(F.quantile_z(z) - G.quantile_z(z), z) * normal_pdf(z); });
    if (!std::isfinite(t.value) || t.value > 1e-6)
        throw DivergenceError("weighted_cost: weight not integrable near the endpoints");
    rep.abs_error += t.value;
    rep.evaluations += t.evaluations;
    return rep;
}

SignedReport signed_functional(const Weight& g, const std::function<double(double)>& ell, const Distribution& F,
                               const Distribution& G, const TransportOptions& opt) {
    touch();
    if ((!g.of_u && !g.of_z) || !ell) throw InvalidArgument("signed_functional: empty weight or ell");
    const auto extra = crossing_points(F, G, {0.0});
    auto f = [&](double d, double z) { return g.at_z(z) * ell(d); };
    const auto r = zspace(F, G, f, extra, opt);
    const auto t = tail_estimate([&](double z) { return f(F.quantile_z(z) - G.quantile_z(z), z) * normal_pdf(z); });
    if (!std::isfinite(t.value) || t.value > 1e-6)
        throw DivergenceError("signed_functional: integrand not integrable near the endpoints");
    return {r.main.value, r.main.abs_error + t.value, r.main.evaluations + t.evaluations};
}

// ---------------------------------------------------------------------------
// Dual witness
// ---------------------------------------------------------------------------

double WitnessFunction::zero_distance(double t) const {
    if (zeros_.empty()) return kInf;
    auto it = std::lower_bound(zeros_.begin(), zeros_.end(), t);
    double d = kInf;
    if (it != zeros_.end()) d = *it - t;
    if (it != zeros_.begin()) d = std::min(d, t - *(it - 1));
    return d;
}

double WitnessFunction::derivative(double t) const {
    if (zero_) return 0.0;
    const double h = gap_(t);
    if (h == 0.0) return 0.0;
    return (h > 0.0 ? 1.0 : -1.0) * dphi_(2.0 * zero_distance(t));
}

double WitnessFunction::value_at(double t) const {
    if (zero_ || t == 0.0) return 0.0;
    const double lo = std::min(0.0, t), hi = std::max(0.0, t);
    std::vector<double> pts{lo};
    for (std::size_t i = 0; i < zeros_.size(); ++i) {
        if (zeros_[i] > lo && zeros_[i] < hi) pts.push_back(zeros_[i]);
        if (i + 1 < zeros_.size()) {
            const double mid = 0.5 * (zeros_[i] + zeros_[i + 1]);
            if (mid > lo && mid < hi) pts.push_back(mid);
        }
    }
    pts.push_back(hi);
    std::sort(pts.begin(), pts.end());
    QuadOptions q;
    q.abs_tol = 1e-12;
    q.rel_tol = 1e-12;
    const double v = integrate_pieces([&](double s) { return derivative(s); }, pts, q).value;
    return t > 0.0 ? v : -v;
}

WitnessResult dual_witness(const CostFunction& c, const Distribution& F, const Distribution& G) {
    touch();
    if (!c.is_class_psi() && c.kind() != CostKind::PsiX)
        throw InvalidArgument("dual_witness: " + c.name() + " is not a class-Psi cost");
    for (const auto* d : {&F, &G})
        if (d->as_discrete() || d->support().kind != SupportKind::Continuous || !std::isfinite(d->pdf(d->quantile(0.5))))
            throw InvalidArgument("dual_witness: inputs must have continuous strictly increasing cdfs");

    const double scale = 1.0 + std::sqrt(std::max(F.variance(), G.variance()));
    if (std::abs(F.mean() - G.mean()) > 1e-9 * scale)
        throw InvalidArgument("dual_witness: inputs must have equal means");

    WitnessResult out;
    out.witness.dphi_ = [c](double t) { return c.deriv(t); };
    out.witness.gap_ = [&F, &G](double t) { return G.cdf(t) - F.cdf(t); };
    const auto& H = out.witness.gap_;

    const double lo = std::min(F.quantile(1e-7), G.quantile(1e-7));
    const double hi = std::max(F.quantile_upper(1e-7), G.quantile_upper(1e-7));
    out.working_lo = lo;
    out.working_hi = hi;

    constexpr int kCells = 4096;
    std::vector<double> grid(kCells + 1), vals(kCells + 1);
    double gap_max = 0.0;
    for (int i = 0; i <= kCells; ++i) {
        grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / kCells;
        vals[static_cast<std::size_t>(i)] = H(grid[static_cast<std::size_t>(i)]);
        gap_max = std::max(gap_max, std::abs(vals[static_cast<std::size_t>(i)]));
    }
    if (&F == &G || gap_max <= 1e-15) {
        out.witness.zero_ = true;
        return out;
    }
    auto& zeros = out.witness.zeros_;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (vals[i] == 0.0) {
            zeros.push_back(grid[i]);
            continue;
        }
        if (i + 1 < grid.size() && vals[i + 1] != 0.0 && (vals[i] > 0.0) != (vals[i + 1] > 0.0))
            zeros.push_back(bisect_root(H, grid[i], grid[i + 1], 1e-14));
    }
    if (zeros.empty())
        throw InvalidArgument("dual_witness: cdf gap has no zero on the working interval (unequal means)");
    std::sort(zeros.begin(), zeros.end());

    // zeta = int |H(t)| phi'(2 d(t, A)) dt, split at zeros and midpoints.
    const double ext_lo = std::min(F.quantile(1e-15), G.quantile(1e-15));
    const double ext_hi = std::max(F.quantile_upper(1e-15), G.quantile_upper(1e-15));
    std::vector<double> pts{ext_lo, lo, hi, ext_hi};
    for (std::size_t i = 0; i < zeros.size(); ++i) {
        pts.push_back(zeros[i]);
        if (i + 1 < zeros.size()) pts.push_back(0.5 * (zeros[i] + zeros[i + 1]));
    }
    add_sorted_unique(pts);
    QuadOptions q;
    q.abs_tol = 1e-11;
    q.rel_tol = 1e-11;
    const auto& w = out.witness;
    const auto r = integrate_pieces([&](double t) { return w.derivative(t) * H(t); }, pts, q);
    out.zeta_lower = r.value;
    out.abs_error = r.abs_error;
    return out;
}

}  // namespace ctl
