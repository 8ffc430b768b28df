#include "ctl/cost.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

#include "ctl/coverage.hpp"
#include "ctl/error.hpp"
#include "ctl/numeric.hpp"

namespace ctl {

namespace {

double sgn(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

std::string fmt_param(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// Fixed logarithmic validation grid on (0, 1e6].
std::vector<double> validation_grid() {
    std::vector<double> g;
    for (int k = -40; k <= 60; ++k) g.push_back(std::pow(10.0, k / 10.0));
    return g;
}

}  // namespace

CostFunction::CostFunction(CostKind kind, double param, std::vector<double> kinks, std::string name)
    : kind_(kind), param_(param), kinks_(std::move(kinks)), name_(std::move(name)) {}

CostFunction CostFunction::psi_x(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw InvalidArgument("psi_x: x must be positive and finite");
    coverage::touch(coverage::Module::CostKernel);
    return CostFunction(CostKind::PsiX, x, {2.0 * x}, "psi_x(" + fmt_param(x) + ")");
}

CostFunction CostFunction::g_p(double p) {
    if (!(p > 1.0 && p < 2.0)) throw InvalidArgument("g_p: p must lie in (1, 2)");
    coverage::touch(coverage::Module::CostKernel);
    return CostFunction(CostKind::Gp, p, {1.0}, "g_p(" + fmt_param(p) + ")");
}

CostFunction CostFunction::entropy() {
    coverage::touch(coverage::Module::CostKernel);
    return CostFunction(CostKind::Entropy, 0.0, {}, "entropy");
}

CostFunction CostFunction::power(double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidArgument("power: p must be >= 1");
    coverage::touch(coverage::Module::CostKernel);
    std::vector<double> kinks;
    // |t|^p is smooth at 0 only for even integer p.
    if (!(std::fmod(p, 2.0) == 0.0)) kinks.push_back(0.0);
    return CostFunction(CostKind::PowerP, p, std::move(kinks), "power(" + fmt_param(p) + ")");
}

CostFunction CostFunction::custom_class_psi(std::string name, Fn eval, Fn deriv, Fn mixing_tail,
                                            std::vector<double> kinks) {
    if (!eval || !deriv || !mixing_tail) throw InvalidArgument("custom_class_psi: eval, deriv and mixing_tail required");
    auto check = check_class_psi(eval, deriv, mixing_tail);
    if (!check.ok) {
        std::string msg = "custom_class_psi(" + name + "): ";
        for (std::size_t i = 0; i < check.failures.size(); ++i) msg += (i ? "; " : "") + check.failures[i];
        throw InvalidArgument(msg);
    }
    coverage::touch(coverage::Module::CostKernel);
    CostFunction c(CostKind::Custom, 0.0, std::move(kinks), name);
    c.custom_ = std::make_shared<const Custom>(Custom{name, std::move(eval), std::move(deriv), std::move(mixing_tail), true});
    return c;
}

CostFunction CostFunction::custom_convex(std::string name, Fn eval, Fn deriv, std::vector<double> kinks) {
    if (!eval || !deriv) throw InvalidArgument("custom_convex: eval and deriv required");
    if (std::abs(eval(0.0)) > 1e-14) throw InvalidArgument("custom_convex(" + name + "): eval(0) != 0");
    const auto grid = validation_grid();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid[i];
        const double e = eval(x);
        // Overflow to +inf at large |t| is allowed.
        if (std::isnan(e) || e < 0.0) throw InvalidArgument("custom_convex(" + name + "): eval NaN or negative");
        if (std::abs(e - eval(-x)) > 1e-12 * std::max(1.0, e))
            throw InvalidArgument("custom_convex(" + name + "): eval not even");
        if (i > 0) {
            const double a = grid[i - 1];
            if (deriv(x) < deriv(a) - 1e-12 * std::max(1.0, std::abs(deriv(x))))
                throw InvalidArgument("custom_convex(" + name + "): deriv decreasing");
            if (eval(0.5 * (a + x)) > 0.5 * (eval(a) + e) + 1e-12 * std::max(1.0, e))
                throw InvalidArgument("custom_convex(" + name + "): midpoint convexity fails");
        }
    }
    coverage::touch(coverage::Module::CostKernel);
    CostFunction c(CostKind::Custom, 0.0, std::move(kinks), name);
    c.custom_ = std::make_shared<const Custom>(Custom{name, std::move(eval), std::move(deriv), {}, false});
    return c;
}

double CostFunction::eval(double t) const {
    const double a = std::abs(t);
    switch (kind_) {
        case CostKind::PsiX:
            return a <= 2.0 * param_ ? 0.25 * a * a : a * param_ - param_ * param_;
        case CostKind::Gp:
            return a <= 1.0 ? 0.5 * a * a : std::pow(a, param_) / param_ + 0.5 - 1.0 / param_;
        case CostKind::Entropy:
            return (1.0 + a) * std::log1p(a) - a;
        case CostKind::PowerP:
            if (param_ == 1.0) return a;
            if (param_ == 2.0) return a * a;
            return std::pow(a, param_);
        case CostKind::Custom:
            return custom_->eval(t);
    }
    return kNaN;
}

double CostFunction::deriv(double t) const {
    const double a = std::abs(t);
    const double s = sgn(t);
    switch (kind_) {
        case CostKind::PsiX:
            return s * std::min(0.5 * a, param_);
        case CostKind::Gp:
            return s * (a <= 1.0 ? a : std::pow(a, param_ - 1.0));
        case CostKind::Entropy:
            return s * std::log1p(a);
        case CostKind::PowerP:
            if (param_ == 1.0) return s;
            return s * param_ * std::pow(a, param_ - 1.0);
        case CostKind::Custom:
            return custom_->deriv(t);
    }
    return kNaN;
}

bool CostFunction::has_mixing_tail() const {
    switch (kind_) {
        case CostKind::PsiX:
        case CostKind::Gp:
        case CostKind::Entropy:
            return true;
        case CostKind::PowerP:
            return false;
        case CostKind::Custom:
            return static_cast<bool>(custom_->mixing_tail);
    }
    return false;
}

double CostFunction::mixing_tail(double y) const {
    y = std::max(y, 0.0);
    switch (kind_) {
        case CostKind::PsiX:
            // psi_x'' is 1/2 below the knot: psi_x = (1/2) * (2 psi_x), and
            // 2 psi_x is the one-atom mixture with its atom at 2x.
            return y < 2.0 * param_ ? 0.5 : 0.0;
        case CostKind::Gp:
            return y < 1.0 ? 1.0 : (param_ - 1.0) * std::pow(y, param_ - 2.0);
        case CostKind::Entropy:
            return 1.0 / (1.0 + y);
        case CostKind::PowerP:
            break;
        case CostKind::Custom:
            if (custom_->mixing_tail) return custom_->mixing_tail(y);
            break;
    }
    throw InvalidArgument("mixing_tail: " + name_ + " has no mixing measure");
}

bool CostFunction::is_class_psi() const {
    switch (kind_) {
        case CostKind::Gp:
        case CostKind::Entropy:
            return true;
        case CostKind::PsiX:
        case CostKind::PowerP:
            return false;
        case CostKind::Custom:
            return custom_->class_psi;
    }
    return false;
}

const std::string& CostFunction::name() const { return name_; }

std::optional<double> CostFunction::quadratic_envelope() const {
    switch (kind_) {
        case CostKind::PsiX:
            return 0.25;
        case CostKind::Gp:
        case CostKind::Entropy:
            return 0.5;
        case CostKind::PowerP:
            if (param_ <= 2.0) return 1.0;
            return std::nullopt;
        case CostKind::Custom:
            if (custom_->class_psi) return 0.5;
            return std::nullopt;
    }
    return std::nullopt;
}

double young_dual(const CostFunction& c, double x) {
    if (!std::isfinite(x)) throw InvalidArgument("young_dual: x must be finite");
    coverage::touch(coverage::Module::CostKernel);
    const double a = std::abs(x);
    if (a == 0.0) return 0.0;
    const double p = c.parameter();
    switch (c.kind()) {
        case CostKind::PsiX:
            return a <= p ? a * a : kInf;
        case CostKind::Gp: {
            if (a <= 1.0) return 0.5 * a * a;
            const double q = p / (p - 1.0);
            return std::pow(a, q) / q + 1.0 / p - 0.5;
        }
        case CostKind::Entropy:
            return std::expm1(a) - a;
        case CostKind::PowerP:
            if (p == 1.0) return a <= 1.0 ? 0.0 : kInf;
            return a * (1.0 - 1.0 / p) * std::pow(a / p, 1.0 / (p - 1.0));
        case CostKind::Custom:
            break;
    }
    // deriv is nondecreasing on [0, inf); find t with deriv(t) = a.
    double lo = 0.0, hi = 1.0;
    while (c.deriv(hi) < a) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) return kInf;
    }
    for (int it = 0; it < 2000; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;
        const double g = c.deriv(mid) - a;
        if (std::abs(g) <= 1e-12) {
            lo = hi = mid;
            break;
        }
        (g < 0.0 ? lo : hi) = mid;
    }
    const double t = 0.5 * (lo + hi);
    return std::max(0.0, a * t - c.eval(t));
}

double mixture_check(const CostFunction& c, std::span<const double> z_grid) {
    if (!c.has_mixing_tail()) throw InvalidArgument("mixture_check: " + c.name() + " has no mixing tail");
    coverage::touch(coverage::Module::CostKernel);
    QuadOptions opt;
    opt.abs_tol = 1e-13;
    opt.rel_tol = 1e-14;
    double worst = 0.0;
    for (double z : z_grid) {
        const double a = std::abs(z);
        std::vector<double> pts{0.0};
        for (double k : c.kinks())
            if (k > 0.0 && k < a) pts.push_back(k);
        pts.push_back(a);
        const auto r = integrate_pieces([&](double y) { return c.mixing_tail(y); }, pts, opt);
        const double integral = (z < 0.0 ? -1.0 : 1.0) * r.value;
        worst = std::max(worst, std::abs(c.deriv(z) - integral));
    }
    return worst;
}

ClassPsiCheck check_class_psi(const CostFunction::Fn& eval, const CostFunction::Fn& deriv,
                              const CostFunction::Fn& mixing_tail) {
    ClassPsiCheck out;
    auto fail = [&](std::string why) {
        out.ok = false;
        out.failures.push_back(std::move(why));
    };
    if (std::abs(eval(0.0)) > 1e-14) fail("eval(0) != 0");
    if (std::abs(deriv(0.0)) > 1e-14) fail("deriv(0) != 0");

    const auto grid = validation_grid();
    bool even = true, convex = true, monotone = true, concave = true, ratio = true, tail_ok = true, primitive = true;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid[i];
        const double e = eval(x);
        const double d = deriv(x);
        const double tol = 1e-10 * std::max(1.0, std::abs(e));
        if (!std::isfinite(e) || !std::isfinite(d)) {
            fail("non-finite value at " + fmt_param(x));
            return out;
        }
        if (std::abs(e - eval(-x)) > tol || std::abs(d + deriv(-x)) > 1e-10 * std::max(1.0, std::abs(d))) even = false;
        const double m = mixing_tail(x);
        if (!(m >= 0.0) || m > 1.0 + 1e-12) tail_ok = false;
        if (i == 0) continue;
        const double a = grid[i - 1];
        const double dtol = 1e-10 * std::max(1.0, std::abs(d));
        if (eval(0.5 * (a + x)) > 0.5 * (eval(a) + e) + tol) convex = false;
        if (d < deriv(a) - dtol) monotone = false;
        if (d / x > deriv(a) / a + dtol / a) ratio = false;
        if (mixing_tail(x) > mixing_tail(a) + 1e-12) tail_ok = false;
        if (i + 1 < grid.size()) {
            const double b = grid[i + 1];
            const double chord = deriv(a) + (deriv(b) - deriv(a)) * (x - a) / (b - a);
            if (d < chord - dtol) concave = false;
        }
    }
    if (!even) fail("not even");
    if (!convex) fail("not convex");
    if (!monotone) fail("deriv not nondecreasing");
    if (!concave) fail("deriv not concave");
    if (!ratio) fail("deriv(x)/x not nonincreasing");
    if (!tail_ok) fail("mixing_tail not a nonincreasing tail in [0, 1]");

    // Unit curvature at the origin, by finite difference and by the tail.
    const double h = 1e-6;
    if (std::abs(deriv(h) / h - 1.0) > 1e-3) fail("deriv'(0) != 1");
    if (std::abs(mixing_tail(1e-12) - 1.0) > 1e-6) fail("mixing_tail(0+) != 1");

    // Sublinearity proxy: deriv(x)/x strictly decays across decades.
    const double r1 = deriv(1.0), r3 = deriv(1e3) / 1e3, r6 = deriv(1e6) / 1e6;
    if (!(r6 < r3 && r3 < r1)) fail("deriv(x)/x does not decay");

    // eval and deriv are primitives of deriv and mixing_tail respectively.
    QuadOptions opt;
    opt.abs_tol = 1e-11;
    opt.rel_tol = 1e-11;
    for (double x : {0.3, 1.0, 3.0, 10.0, 100.0}) {
        const auto ie = integrate(deriv, 0.0, x, opt);
        const auto id = integrate(mixing_tail, 0.0, x, opt);
        if (std::abs(ie.value - eval(x)) > 1e-6 * std::max(1.0, eval(x))) primitive = false;
        if (std::abs(id.value - deriv(x)) > 1e-6 * std::max(1.0, deriv(x))) primitive = false;
    }
    if (!primitive) fail("eval/deriv/mixing_tail not consistent primitives");
    return out;
}

}  // namespace ctl
