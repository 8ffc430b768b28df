#include "ctl/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "ctl/coverage.hpp"
#include "ctl/error.hpp"
#include "ctl/numeric.hpp"

namespace ctl {

namespace {

void touch() { coverage::touch(coverage::Module::Bounds); }

using Used = std::vector<std::pair<std::string, double>>;

Used c0_constants() {
    return {{"gamma0", constants::gamma0}, {"gamma1", constants::gamma1}, {"gamma3", constants::gamma3}};
}

void require_open_unit_order(double p, const char* what) {
    if (!(p > 1.0 && p < 2.0)) throw InvalidArgument(std::string(what) + ": p must lie in (1, 2)");
}

}  // namespace

const std::vector<NamedConstant>& constant_table() {
    static const std::vector<NamedConstant> table = [] {
        using namespace constants;
        std::vector<NamedConstant> t = {
            {"gamma0", gamma0, "kappa_psi_x bound: lambda3^2 coefficient of C0"},
            {"gamma1", gamma1, "kappa_psi_x bound: sigma^2 coefficient of C0"},
            {"gamma2", gamma2, "kappa_psi_x bound: truncated third moment coefficient"},
            {"gamma3", gamma3, "kappa_psi_x bound: mu3^2 coefficient of C0"},
            {"a1", a1, "weak-moment bound: lambda3 coefficient"},
            {"a2(p=1.5)", tail_trunc * std::sqrt(tail_scale), "weak-moment bound: 5.2041 (2.8183)^{2-p} at p = 1.5"},
            {"c1", gaussian_derivative_closed_form(1), "Gaussian smoothing: ||phi'||_1 = sqrt(2/pi)"},
            {"c2", gaussian_derivative_closed_form(2), "Gaussian smoothing: ||phi''||_1 = sqrt(8/(pi e)) <= 0.9679"},
            {"c3", gaussian_derivative_closed_form(3), "Gaussian smoothing: ||phi'''||_1"},
            {"c4", gaussian_derivative_closed_form(4), "Gaussian smoothing: ||phi^(4)||_1"},
            {"c5", gaussian_derivative_closed_form(5), "Gaussian smoothing: ||phi^(5)||_1 <= 5.9101"},
            {"poisson_w2", poisson_w2, "Poisson-normal W2 constant: W2^2 <= 0.937 alpha^2"},
            {"kappa_mu3", kappa_mu3, "kappa_psi_x bound: additive mu3 term (sqrt 0.937 <= 0.968)"},
            {"phi_mu3", phi_mu3, "W_phi bound: additive mu3 term"},
            {"w2_mu3", w2_mu3, "W2 and W_p bounds: additive mu3 term"},
            {"tail_scale", tail_scale, "H~ tail bound: truncation scale"},
            {"tail_trunc", tail_trunc, "H~ tail bound: truncated third moment coefficient"},
            {"tail_lambda3", tail_lambda3, "H~ tail bound: lambda3^2 coefficient"},
            {"w2_chain", w2_chain, "W2 bound: gamma0 + gamma1 + gamma2 after sigma^4 <= mu4"},
            {"w2_universal", w2_universal, "W2 bound: 6.825 sigma^{-1} sqrt(mu4)"},
            {"w2_symmetric", w2_symmetric, "W2 bound, mu3 = 0: 4.140 sigma^{-1} sqrt(mu4)"},
            {"rademacher_lower", rademacher_lower, "Rademacher lower bound sqrt(2 (1 - sqrt(2/pi))) >= 0.63579"},
            {"walk_cap", walk_cap, "Rademacher walk coupling envelope 3/2 + 9/16 = 33/16"},
            {"sqrt5_over_6", std::sqrt(5.0) / 6, "Poisson W2 limit sqrt(5)/6"},
            {"weighted_limit", 2 / std::sqrt(2 * std::numbers::pi * std::numbers::e) + 1 - 4.0 / 3 * normal_cdf(1.0),
             "weighted cost limit E(G^2 |G^2 - 1|)/6"},
            {"signed_limit", 1.0 / 3, "signed functional limit E(G^2 (G^2 - 1))/6"},
        };
        return t;
    }();
    return table;
}

// ---------------------------------------------------------------------------
// XStats
// ---------------------------------------------------------------------------

XStats XStats::from_law(DistPtr law) {
    touch();
    if (!law) throw InvalidArgument("XStats: null law");
    const double m = law->mean();
    const double var = law->variance();
    if (!(var > 0.0)) throw InvalidArgument("XStats: variance must be positive");
    if (std::abs(m) > 1e-9 * (1 + std::sqrt(var))) throw InvalidArgument("XStats: law must be centered");
    XStats xs;
    xs.sigma = std::sqrt(var);
    xs.mu3 = law->moment(3);
    xs.lambda3 = law->abs_moment(3.0);
    const double m4 = law->moment(4);
    if (std::isfinite(m4)) xs.mu4 = m4;
    xs.truncated_third = [law, m4](double u) {
        if (!(u >= 0.0)) throw InvalidArgument("truncated_third: u must be nonnegative");
        if (std::isinf(u)) return m4;
        return law->expect([u](double x) {
            const double a = std::abs(x);
            return a * a * a * std::min(a, u);
        });
    };
    return xs;
}

void XStats::validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("XStats: sigma must be positive");
    if (!std::isfinite(mu3) || !std::isfinite(lambda3)) throw InvalidArgument("XStats: moments must be finite");
    if (lambda3 < std::abs(mu3) * (1 - 1e-12)) throw InvalidArgument("XStats: lambda3 < |mu3|");
    if (sigma * sigma * sigma > lambda3 * (1 + 1e-12)) throw InvalidArgument("XStats: sigma^3 > lambda3");
    if (mu4 && *mu4 < std::pow(sigma, 4) * (1 - 1e-12)) throw InvalidArgument("XStats: mu4 < sigma^4");
}

double XStats::trunc(double u) const {
    if (std::isinf(u)) {
        if (mu4) return *mu4;
        if (!truncated_third) throw InvalidArgument("XStats: x = inf needs mu4");
    }
    if (!truncated_third) throw InvalidArgument("XStats: truncated_third missing");
    return truncated_third(u);
}

double c0(const XStats& xs) {
    using namespace constants;
    const double s2 = xs.sigma * xs.sigma;
    return gamma1 * s2 + (gamma0 * xs.lambda3 * xs.lambda3 + gamma3 * xs.mu3 * xs.mu3) / (s2 * s2);
}

// ---------------------------------------------------------------------------
// BoundReport
// ---------------------------------------------------------------------------

BoundReport& BoundReport::measure(double value) {
    measured = value;
    margin = bound - value;
    return *this;
}

nlohmann::json to_json(const BoundReport& r) {
    nlohmann::json j;
    j["bound"] = r.bound;
    j["measured"] = r.measured ? nlohmann::json(*r.measured) : nlohmann::json(nullptr);
    j["margin"] = r.margin ? nlohmann::json(*r.margin) : nlohmann::json(nullptr);
    auto& c = j["constants_used"] = nlohmann::json::object();
    for (const auto& [k, v] : r.constants_used) c[k] = v;
    return j;
}

// ---------------------------------------------------------------------------
// Bounds
// ---------------------------------------------------------------------------

BoundReport thm21_bound(const XStats& xs, double x, bool squared) {
    touch();
    xs.validate();
    if (!(x > 0.0)) throw InvalidArgument("thm21_bound: x must be positive");
    using namespace constants;
    const double s2 = xs.sigma * xs.sigma;
    const double tt = xs.trunc(std::isinf(x) ? kInf : 8 * x);
    const double root = std::sqrt(c0(xs) + gamma2 * tt / s2) + kappa_mu3 * std::abs(xs.mu3) / s2;
    BoundReport r;
    r.bound = squared ? root * root : root;
    r.constants_used = c0_constants();
    r.constants_used.emplace_back("gamma2", gamma2);
    r.constants_used.emplace_back("kappa_mu3", kappa_mu3);
    return r;
}

BoundReport w2_bound(const XStats& xs) {
    touch();
    xs.validate();
    if (!xs.mu4) throw InvalidArgument("w2_bound: mu4 required");
    using namespace constants;
    const double s2 = xs.sigma * xs.sigma;
    BoundReport r;
    r.bound = 2 * std::sqrt(c0(xs) + gamma2 * *xs.mu4 / s2) + w2_mu3 * std::abs(xs.mu3) / s2;
    r.constants_used = c0_constants();
    r.constants_used.emplace_back("gamma2", gamma2);
    r.constants_used.emplace_back("w2_mu3", w2_mu3);
    return r;
}

double w2_chain_bound(double sigma, double mu3, double mu4) {
    touch();
    using namespace constants;
    const double s2 = sigma * sigma;
    return 2 * std::sqrt(w2_chain * mu4 / s2 + gamma3 * mu3 * mu3 / (s2 * s2)) + w2_mu3 * std::abs(mu3) / s2;
}

double w2_universal_bound(double sigma, double mu4) {
    touch();
    return constants::w2_universal * std::sqrt(mu4) / sigma;
}

double w2_symmetric_bound(double sigma, double mu4) {
    touch();
    return constants::w2_symmetric * std::sqrt(mu4) / sigma;
}

double phi_prime_moment(const Distribution& x, const CostFunction& c) {
    touch();
    return x.expect([&](double v) {
        const double a = std::abs(v);
        return a * a * a * c.deriv(a / 4);
    });
}

double phi_moment_fallback(const Distribution& x, const CostFunction& c) {
    touch();
    return 8 * x.expect([&](double v) {
        const double a = std::abs(v);
        return a * a * c.eval(a / 4);
    });
}

BoundReport thm22_bound(const CostFunction& c, const XStats& xs, double phi_prime_mom) {
    touch();
    xs.validate();
    if (!c.is_class_psi()) throw InvalidArgument("thm22_bound: cost must be in class Psi");
    if (!(phi_prime_mom >= 0.0) || !std::isfinite(phi_prime_mom))
        throw DivergenceError("thm22_bound: E(|X|^3 phi'(|X|/4)) not finite");
    using namespace constants;
    const double s2 = xs.sigma * xs.sigma;
    BoundReport r;
    r.bound = std::sqrt(2 * c0(xs) + 8 * gamma2 * phi_prime_mom / s2) + phi_mu3 * std::abs(xs.mu3) / s2;
    r.constants_used = c0_constants();
    r.constants_used.emplace_back("gamma2", gamma2);
    r.constants_used.emplace_back("phi_mu3", phi_mu3);
    return r;
}

BoundReport prop_wp_bound(double p, const XStats& xs, double abs_moment_p2) {
    touch();
    require_open_unit_order(p, "prop_wp_bound");
    xs.validate();
    if (!(abs_moment_p2 >= 0.0) || !std::isfinite(abs_moment_p2))
        throw DivergenceError("prop_wp_bound: E|X|^{p+2} not finite");
    using namespace constants;
    const double s2 = xs.sigma * xs.sigma;
    const double inner = std::pow(c0(xs), p / 2) + p * std::pow(2.0, 5 - 3 * p) * gamma2 * abs_moment_p2 / s2;
    BoundReport r;
    r.bound = 2 * std::pow(inner, 1 / p) + w2_mu3 * std::abs(xs.mu3) / s2;
    r.constants_used = c0_constants();
    r.constants_used.emplace_back("gamma2", gamma2);
    r.constants_used.emplace_back("w2_mu3", w2_mu3);
    return r;
}

BoundReport thm23_bound(const XStats& xs, double t) {
    touch();
    if (!(t > 0.0)) throw InvalidArgument("thm23_bound: t must be positive");
    xs.validate();
    using namespace constants;
    const double s2 = xs.sigma * xs.sigma;
    const double num = tail_lambda3 * xs.lambda3 * xs.lambda3 / (s2 * s2) + tail_trunc * xs.trunc(tail_scale * t) / s2;
    BoundReport r;
    r.bound = std::min(1.0, num / (t * t));
    r.constants_used = {{"tail_lambda3", tail_lambda3}, {"tail_trunc", tail_trunc}, {"tail_scale", tail_scale}};
    return r;
}

double Cor24Report::kappa_tilde() const {
    if (weak) return weak->bound;
    if (strong) return strong->bound;
    throw InvalidArgument("Cor24Report: empty");
}

Cor24Report cor24_bound(double p, const XStats& xs, std::optional<double> abs_moment_p2) {
    touch();
    require_open_unit_order(p, "cor24_bound");
    xs.validate();
    if (!xs.weak_Lambda_p2 && !abs_moment_p2)
        throw InvalidArgument("cor24_bound: needs Lambda_{p+2}(X) or E|X|^{p+2}");
    using namespace constants;
    const double s2 = xs.sigma * xs.sigma;
    Cor24Report out;
    out.p = p;
    out.a2 = tail_trunc * std::pow(tail_scale, 2 - p);
    const double head = std::pow(a1 * xs.lambda3 / s2, p);
    const Used used = {{"a1", a1}, {"a2", out.a2}};
    if (xs.weak_Lambda_p2) {
        BoundReport r;
        r.bound = head + out.a2 * (p + 2) / ((p - 1) * (2 - p)) * *xs.weak_Lambda_p2 / s2;
        r.constants_used = used;
        out.weak = r;
    }
    if (abs_moment_p2) {
        BoundReport r;
        r.bound = head + out.a2 * *abs_moment_p2 / s2;
        r.constants_used = used;
        out.strong = r;
    }
    return out;
}

double cvar_gap_bound(double kappa_tilde, double p, double u) {
    touch();
    if (!(u > 0.0 && u <= 1.0)) throw InvalidArgument("cvar_gap_bound: u must be in (0, 1]");
    return std::pow(kappa_tilde / u, 1 / p);
}

double gaussian_cvar(double sigma, int n, double u) {
    touch();
    if (!(u > 0.0 && u <= 1.0)) throw InvalidArgument("gaussian_cvar: u must be in (0, 1]");
    if (u == 1.0) return 0.0;
    const double z = normal_quantile_upper(u);
    return sigma * std::sqrt(static_cast<double>(n)) * normal_pdf(z) / u;
}

double poisson_w2_bound(double alpha) {
    touch();
    if (alpha == 0.0 || !std::isfinite(alpha)) throw InvalidArgument("poisson_w2_bound: alpha must be nonzero");
    return constants::poisson_w2 * alpha * alpha;
}

double surrogate_chain_bound(double beta3) {
    touch();
    return constants::poisson_w2 * beta3 * beta3;
}

// ---------------------------------------------------------------------------
// Gaussian derivative norms
// ---------------------------------------------------------------------------

double hermite_he(int j, double x) {
    if (j < 0) throw InvalidArgument("hermite_he: negative degree");
    double h0 = 1.0, h1 = x;
    if (j == 0) return h0;
    for (int k = 1; k < j; ++k) {
        const double h2 = x * h1 - k * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

std::vector<double> hermite_zeros(int j) {
    if (j < 1 || j > 20) throw InvalidArgument("hermite_zeros: degree must be in 1..20");
    // All zeros of He_j lie in |x| < 2 sqrt(j); they interlace with those of He_{j-1}.
    const double r = 2 * std::sqrt(static_cast<double>(j)) + 1;
    std::vector<double> edges{-r};
    if (j > 1) {
        const auto prev = hermite_zeros(j - 1);
        edges.insert(edges.end(), prev.begin(), prev.end());
    }
    edges.push_back(r);
    std::vector<double> z;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
        z.push_back(bisect_root([j](double x) { return hermite_he(j, x); }, edges[i], edges[i + 1], 1e-15));
    return z;
}

double gaussian_derivative_l1(int j) {
    touch();
    if (j < 1 || j > 5) throw InvalidArgument("gaussian_derivative_l1: j must be in 1..5");
    // phi^{(j)} = (-1)^j He_j phi, which keeps one sign between consecutive zeros.
    std::vector<double> pts{-40.0};
    for (double z : hermite_zeros(j)) pts.push_back(z);
    pts.push_back(40.0);
    QuadOptions opt;
    opt.abs_tol = 1e-15;
    opt.rel_tol = 1e-14;
    KahanSum s;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const auto r = integrate([j](double x) { return hermite_he(j, x) * normal_pdf(x); }, pts[i], pts[i + 1], opt);
        s.add(std::abs(r.value));
    }
    return s.value();
}

double gaussian_derivative_closed_form(int j) {
    using std::exp, std::sqrt;
    const double pi = std::numbers::pi, e = std::numbers::e;
    switch (j) {
    case 1: return sqrt(2 / pi);
    case 2: return sqrt(8 / (pi * e));
    case 3: return sqrt(2 / pi) * (1 + 4 * exp(-1.5));
    case 4: {
        const double s6 = sqrt(6.0), s32 = sqrt(1.5);
        return 4 * sqrt(3 / (pi * e * e * e)) * (sqrt(3 - s6) * exp(s32) + sqrt(3 + s6) * exp(-s32));
    }
    case 5: {
        const double s10 = sqrt(10.0);
        return 4 / sqrt(2 * pi) *
               (1.5 + 4 * (2 + s10) * exp(-(5 + s10) / 2) + 4 * (s10 - 2) * exp(-(5 - s10) / 2));
    }
    default: throw InvalidArgument("gaussian_derivative_closed_form: j must be in 1..5");
    }
}

}  // namespace ctl
