#include "ctl/asymptotics.hpp"

#include <algorithm>
#include <cmath>

#include "ctl/coverage.hpp"
#include "ctl/error.hpp"
#include "ctl/numeric.hpp"
#include "ctl/tails.hpp"

namespace ctl {

namespace {

constexpr double kZ = 13.0;

void touch() { coverage::touch(coverage::Module::Asymptotics); }

QuadOptions limit_options() {
    QuadOptions opt;
    opt.abs_tol = 1e-13;
    opt.rel_tol = 1e-12;
    return opt;
}

// Sorted breakpoints in [-kZ, kZ] for an integrand of a (z^2 - 1) + s that
// is non-smooth where that quantity equals +-k for k in `levels`.
std::vector<double> quadratic_breaks(double a, double s, const std::vector<double>& levels) {
    std::vector<double> pts{-kZ, -1.0, 0.0, 1.0, kZ};
    if (a != 0.0) {
        for (double k : levels) {
            for (double target : {k, -k}) {
                const double z2 = 1 + (target - s) / a;
                if (z2 > 0) {
                    const double z = std::sqrt(z2);
                    if (z < kZ) {
                        pts.push_back(z);
                        pts.push_back(-z);
                    }
                }
            }
        }
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

std::vector<double> cost_levels(const CostFunction& c) {
    std::vector<double> v(c.kinks().begin(), c.kinks().end());
    return v;
}

// Integral over |z| <= kZ plus an estimate of the two tails on [kZ, 2 kZ].
// Throws DivergenceError when the tail estimate is not negligible.
template <class F>
LimitResult gaussian_integral(F&& f, const std::vector<double>& pts, const char* what) {
    const auto opt = limit_options();
    const auto r = integrate_pieces(f, pts, opt);
    const auto hi = integrate(f, kZ, 2 * kZ, opt);
    const auto lo = integrate(f, -2 * kZ, -kZ, opt);
    const double tail = std::abs(hi.value) + std::abs(lo.value);
    if (!std::isfinite(r.value) || !std::isfinite(tail) || tail > 1e-6 * (1 + std::abs(r.value)))
        throw DivergenceError(std::string(what) + ": integrand does not decay");
    LimitResult out;
    out.value = r.value;
    out.abs_error = r.abs_error + tail;
    return out;
}

double check_beta(double beta3) {
    if (!std::isfinite(beta3)) throw InvalidArgument("beta3 must be finite");
    return beta3 / 6.0;
}

void attach_dual_warning(LimitResult& r, const CostFunction* phi, const Weight& g) {
    if (!phi) return;
    if (!dual_integrability(*phi, g).any())
        r.warnings.push_back("g(U) not found in L_phi* for " + phi->name() + " at scales 1, 1/4, 1/16");
}

}  // namespace

LimitResult limit_kappa(const CostFunction& c, const LimitSpec& spec) {
    touch();
    const double a = check_beta(spec.beta3);
    const auto levels = cost_levels(c);
    auto inner = [&](double s) {
        auto f = [&](double z) { return c.eval(a * (z * z - 1) + s) * normal_pdf(z); };
        return gaussian_integral(f, quadratic_breaks(a, s, levels), "limit_kappa");
    };
    if (!spec.lattice) return inner(0.0);
    const double h = *spec.lattice;
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("limit_kappa: lattice step must be positive");
    LimitResult out;
    double fine = 0, coarse = 0, quad_err = 0;
    const auto& g64 = gauss_legendre(64);
    const auto& g32 = gauss_legendre(32);
    for (std::size_t i = 0; i < g64.nodes.size(); ++i) {
        const double u = 0.5 * (g64.nodes[i] + 1);
        const auto r = inner(h * (u - 0.5));
        fine += 0.5 * g64.weights[i] * r.value;
        quad_err += 0.5 * g64.weights[i] * r.abs_error;
    }
    for (std::size_t i = 0; i < g32.nodes.size(); ++i) {
        const double u = 0.5 * (g32.nodes[i] + 1);
        coarse += 0.5 * g32.weights[i] * inner(h * (u - 0.5)).value;
    }
    out.value = fine;
    out.abs_error = quad_err + std::abs(fine - coarse);
    return out;
}

bool DualIntegrability::any() const {
    return std::any_of(finite.begin(), finite.end(), [](bool b) { return b; });
}

DualIntegrability dual_integrability(const CostFunction& c, const Weight& g) {
    touch();
    DualIntegrability out;
    out.scales = {1.0, 0.25, 0.0625};
    const auto opt = limit_options();
    for (double s : out.scales) {
        auto f = [&](double z) {
            const double v = young_dual(c, s * g.at_z(z));
            return std::isinf(v) ? kInf : v * normal_pdf(z);
        };
        double prev = 0, growth = kInf;
        bool ok = true;
        for (double zmax : {6.0, 9.0, 12.0}) {
            const double pts[] = {-zmax, -1.0, 0.0, 1.0, zmax};
            const double v = integrate_pieces(f, pts, opt).value;
            if (!std::isfinite(v)) {
                ok = false;
                break;
            }
            growth = v - prev;
            prev = v;
        }
        out.finite.push_back(ok && growth <= 1e-8 * (1 + prev));
    }
    return out;
}

LimitResult limit_weighted(const Weight& g, double beta3, const CostFunction* phi) {
    touch();
    const double a = std::abs(check_beta(beta3));
    auto f = [&](double z) { return g.at_z(z) * std::abs(z * z - 1) * normal_pdf(z); };
    const std::vector<double> pts{-kZ, -1.0, 0.0, 1.0, kZ};
    auto r = gaussian_integral(f, pts, "limit_weighted");
    r.value *= a;
    r.abs_error *= a;
    attach_dual_warning(r, phi, g);
    return r;
}

LimitResult limit_signed(const Weight& g, const std::function<double(double)>& ell, double beta3,
                         const CostFunction* phi) {
    touch();
    const double a = check_beta(beta3);
    auto f = [&](double z) { return g.at_z(z) * ell(a * (z * z - 1)) * normal_pdf(z); };
    const std::vector<double> pts{-kZ, -1.0, 0.0, 1.0, kZ};
    auto r = gaussian_integral(f, pts, "limit_signed");
    attach_dual_warning(r, phi, g);
    return r;
}

WeakMomentLimit limit_weak_moment(double p, double beta3) {
    touch();
    if (!(p >= 1.0 && p < 2.0)) throw InvalidArgument("limit_weak_moment: p must lie in [1, 2)");
    const FoldedLaw Z(std::make_shared<NormalSquareLaw>(1.0));
    const auto w = weak_moments(Z, p);
    WeakMomentLimit out;
    out.p = p;
    out.lambda = w.lambda;
    out.lambda_tilde = w.lambda_tilde;
    const double scale = std::pow(std::abs(beta3) / 6, p);
    out.scaled_lambda = scale * w.lambda;
    out.scaled_lambda_tilde = scale * w.lambda_tilde;
    return out;
}

LimitResult limit_poisson_wp(double p, bool with_uniform) {
    touch();
    if (!(p >= 1.0 && p <= 2.0)) throw InvalidArgument("limit_poisson_wp: p must lie in [1, 2]");
    // int_{-1/2}^{1/2} |y + v|^p dv = F(y + 1/2) - F(y - 1/2), F(t) = sign(t)|t|^{p+1}/(p+1).
    auto P = [p](double t) { return std::copysign(std::pow(std::abs(t), p + 1) / (p + 1), t); };
    auto f = [&](double z) {
        const double y = (z * z - 1) / 6;
        const double m = with_uniform ? P(y + 0.5) - P(y - 0.5) : std::pow(std::abs(y), p);
        return m * normal_pdf(z);
    };
    // The inner mean is non-smooth where y = 1/2 (z = +-2); y = 0 at z = +-1.
    const std::vector<double> pts{-kZ, -2.0, -1.0, 0.0, 1.0, 2.0, kZ};
    const auto r = gaussian_integral(f, pts, "limit_poisson_wp");
    LimitResult out;
    out.value = std::pow(r.value, 1 / p);
    out.abs_error = out.value / (p * r.value) * r.abs_error;
    return out;
}

std::vector<ConvergenceRow> convergence_sequence(const CostFunction& c, const std::function<DistPtr(int)>& law,
                                                 const std::vector<int>& ns, double limit) {
    touch();
    if (ns.empty()) throw InvalidArgument("convergence_sequence: empty n grid");
    std::vector<ConvergenceRow> rows;
    for (int n : ns) {
        if (n < 1) throw InvalidArgument("convergence_sequence: n must be positive");
        const auto F = law(n);
        const auto G = normal(0, n);
        const auto r = kappa(c, *F, *G);
        rows.push_back({n, r.value, r.abs_error, limit, std::abs(r.value - limit)});
    }
    return rows;
}

bool gaps_decreasing(const std::vector<ConvergenceRow>& rows) {
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (!(rows[i].gap < rows[i - 1].gap)) return false;
    return true;
}

}  // namespace ctl
