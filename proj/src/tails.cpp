#include "ctl/tails.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "ctl/coverage.hpp"
#include "ctl/error.hpp"
#include "ctl/numeric.hpp"

namespace ctl {

namespace {

constexpr int kGrid = 512;

void touch() { coverage::touch(coverage::Module::Tails); }

void check_level(double u, const char* what) {
    if (!(u > 0.0 && u <= 1.0)) throw InvalidArgument(std::string(what) + ": u must be in (0, 1]");
}

// int_0^u Q(v) dv for a discrete law, walking atoms from the top.
double top_mass_integral(const DiscreteLaw& d, double u) {
    const auto& x = d.points();
    const auto& p = d.probs();
    const auto& tail = d.tail();
    KahanSum s;
    for (std::size_t i = x.size(); i-- > 0;) {
        if (tail[i] >= u) break;
        s.add(std::min(p[i], u - tail[i]) * x[i]);
    }
    return s.value();
}

// int_0^u Q(v) dv = int_{z_u}^inf F^{-1}(Phi(z)) phi(z) dz with v = Phi-bar(z).
double quantile_integral(const Distribution& d, double u) {
    const double zu = std::max(-30.0, normal_quantile_upper(u));
    std::vector<double> pts{zu};
    for (double z : d.z_breaks())
        if (z > zu && z < 30.0) pts.push_back(z);
    for (double z : {-8.5, 0.0, 8.5, 13.0})
        if (z > zu) pts.push_back(z);
    pts.push_back(std::max(zu, 30.0));
    std::sort(pts.begin(), pts.end());
    QuadOptions q;
    q.abs_tol = 1e-14;
    q.rel_tol = 1e-13;
    q.max_evaluations = 400000;
    const auto r = integrate_pieces([&](double z) { return d.quantile_z(z) * normal_pdf(z); }, pts, q);
    if (!std::isfinite(r.value)) throw DivergenceError("cvar: quantile integral not finite");
    return r.value;
}

double upper_quantile(const Distribution& d, double u) {
    if (u >= 1.0) return d.quantile(1e-300);
    return d.quantile_upper(u);
}

}  // namespace

CvarResult cvar(const Distribution& d, double u) {
    touch();
    check_level(u, "cvar");
    const double tq = upper_quantile(d, u);
    if (!std::isfinite(tq) || !std::isfinite(d.expected_excess(tq)))
        throw DivergenceError("cvar: E|Z| not finite");
    auto f = [&](double t) { return t + d.expected_excess(t) / u; };
    const double w = 1.0 + std::abs(tq);
    auto m = golden_section_minimize(f, tq - w, tq + w, 1e-12);
    const double ftq = f(tq);
    if (ftq < m.value) m = {tq, ftq};
    CvarResult r;
    r.variational = m.value;
    r.argmin = m.argmin;
    const auto* dd = d.as_discrete();
    r.integral = (dd ? top_mass_integral(*dd, u) : quantile_integral(d, u)) / u;
    return r;
}

double qtilde(const Distribution& d, double u) {
    touch();
    check_level(u, "qtilde");
    if (const auto* dd = d.as_discrete()) return top_mass_integral(*dd, u) / u;
    // The variational infimum is attained at t = Q(u).
    const double t = upper_quantile(d, u);
    return t + d.expected_excess(t) / u;
}

double htilde_exact(const DiscreteLaw& d, double x) {
    touch();
    const auto& a = d.points();
    const auto& p = d.probs();
    const auto& tail = d.tail();
    double best = 1.0;
    // N(t) = E(Z - t)_+ is linear on [a_i, a_{i+1}] with slope -P(Z > a_i).
    double N = 0.0;
    double n_at_x = 0.0, p_at_x = 0.0;
    for (std::size_t i = a.size(); i-- > 0;) {
        if (i + 1 < a.size()) N += tail[i] * (a[i + 1] - a[i]);
        if (a[i] > x) n_at_x += p[i] * (a[i] - x);
        if (a[i] == x) p_at_x = p[i];
        if (a[i] < x) best = std::min(best, N / (x - a[i]));
    }
    if (n_at_x == 0.0) best = std::min(best, p_at_x);
    return std::clamp(best, 0.0, 1.0);
}

double htilde(const Distribution& d, double x) {
    touch();
    if (const auto* dd = d.as_discrete()) return htilde_exact(*dd, x);
    const double lo = d.quantile(1e-12);
    if (!(lo < x)) return 1.0;
    const double hi = x - 1e-12 * std::max(1.0, std::abs(x));
    if (!(hi > lo)) return 1.0;
    auto f = [&](double t) { return d.expected_excess(t) / (x - t); };
    const auto m = golden_section_minimize(f, lo, hi, 1e-12);
    double v = std::min({m.value, f(lo), f(hi)});
    if (!std::isfinite(v)) throw DivergenceError("htilde: E Z_+ not finite");
    return std::clamp(v, 0.0, 1.0);
}

namespace {

struct SupResult {
    double arg = 0.0, value = 0.0;
    bool at_top = false;
};

// sup of f over a log grid on [lo, hi], refined by golden section.
template <class F>
SupResult log_grid_sup(F&& f, double lo, double hi) {
    SupResult r;
    if (!(hi > lo)) {
        r.arg = hi;
        r.value = f(hi);
        return r;
    }
    std::vector<double> xs(kGrid), fs(kGrid);
    const double llo = std::log(lo), lhi = std::log(hi);
    std::size_t best = 0;
    for (int i = 0; i < kGrid; ++i) {
        xs[static_cast<std::size_t>(i)] = i == kGrid - 1 ? hi : std::exp(llo + (lhi - llo) * i / (kGrid - 1));
        fs[static_cast<std::size_t>(i)] = f(xs[static_cast<std::size_t>(i)]);
        if (fs[static_cast<std::size_t>(i)] > fs[best]) best = static_cast<std::size_t>(i);
    }
    const double a = xs[best == 0 ? 0 : best - 1], b = xs[std::min<std::size_t>(best + 1, kGrid - 1)];
    const auto m = golden_section_minimize([&](double x) { return -f(x); }, a, b, 1e-13);
    r.arg = xs[best];
    r.value = fs[best];
    if (-m.value > r.value) r = {m.argmin, -m.value, false};
    r.at_top = best == kGrid - 1 || best == 0;
    return r;
}

}  // namespace

WeakMoments weak_moments(const Distribution& d, double q) {
    touch();
    if (!(q >= 1.0)) throw InvalidArgument("weak_moments: q must be >= 1");
    WeakMoments w;
    w.q = q;
    const double hi = d.quantile_upper(1e-10);
    if (!(hi > 0.0)) return w;  // Z <= 0 a.s. up to 1e-10
    double lo = d.quantile(1e-10);
    if (!(lo > 0.0)) lo = hi * 1e-12;
    lo = std::min(lo, hi);
    const bool bounded = d.sf(2.0 * hi) == 0.0;

    const auto* dd = d.as_discrete();
    if (dd) {
        const auto& a = dd->points();
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] <= 0.0) continue;
            const double v = std::pow(a[i], q) * (dd->tail()[i] + dd->probs()[i]);
            if (v > w.lambda) w.lambda = v, w.x_lambda = a[i];
        }
    } else {
        const auto s = log_grid_sup([&](double x) { return std::pow(x, q) * d.sf(x); }, lo, hi);
        if (s.at_top && s.arg >= hi && !bounded)
            throw DivergenceError("weak_moments: sup of x^q H(x) not reached; tail too heavy for q");
        w.lambda = s.value;
        w.x_lambda = s.arg;
    }

    // H~ is continuous; its sup may sit at the top atom of a bounded law.
    const auto st = log_grid_sup([&](double x) { return std::pow(x, q) * htilde(d, x); }, lo, hi);
    if (st.at_top && st.arg >= hi && !bounded && !dd)
        throw DivergenceError("weak_moments: sup of x^q H~(x) not reached; tail too heavy for q");
    w.lambda_tilde = st.value;
    w.x_lambda_tilde = st.arg;

    const auto sc = log_grid_sup([&](double u) { return std::pow(u, 1.0 / q) * qtilde(d, u); }, 1e-10, 1.0);
    if (sc.at_top && sc.arg <= 1e-10 && !bounded && !dd)
        throw DivergenceError("weak_moments: sup of u^{1/q} Q~(u) not reached; tail too heavy for q");
    w.calderon = sc.value;
    w.u_calderon = sc.arg;
    return w;
}

// ---------------------------------------------------------------------------
// Joint discrete laws
// ---------------------------------------------------------------------------

JointDiscrete::JointDiscrete(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    KahanSum s;
    for (const auto& t : atoms_) {
        if (!(t.p >= 0.0) || !std::isfinite(t.a) || !std::isfinite(t.b))
            throw InvalidArgument("JointDiscrete: atoms need finite values and p >= 0");
        s.add(t.p);
    }
    if (atoms_.empty() || std::abs(s.value() - 1.0) > 1e-12)
        throw InvalidArgument("JointDiscrete: probabilities must sum to 1");
}

JointDiscrete JointDiscrete::independent(const DiscreteLaw& A, const DiscreteLaw& B) {
    std::vector<Atom> out;
    out.reserve(A.points().size() * B.points().size());
    for (std::size_t i = 0; i < A.points().size(); ++i)
        for (std::size_t j = 0; j < B.points().size(); ++j)
            out.push_back({A.points()[i], B.points()[j], A.probs()[i] * B.probs()[j]});
    return JointDiscrete(std::move(out));
}

JointDiscrete JointDiscrete::comonotone(const DiscreteLaw& A, const DiscreteLaw& B) {
    std::vector<Atom> out;
    const auto &ca = A.cum(), &cb = B.cum();
    std::size_t i = 0, j = 0;
    double prev = 0.0;
    while (i < ca.size() && j < cb.size()) {
        const double next = std::min(ca[i], cb[j]);
        if (next > prev) out.push_back({A.points()[i], B.points()[j], next - prev});
        prev = next;
        const bool adv_i = ca[i] <= next, adv_j = cb[j] <= next;
        if (adv_i) ++i;
        if (adv_j) ++j;
    }
    return JointDiscrete(std::move(out));
}

DiscretePtr JointDiscrete::marginal(double wa, double wb, bool abs_value) const {
    std::vector<double> x, p;
    x.reserve(atoms_.size());
    p.reserve(atoms_.size());
    for (const auto& t : atoms_) {
        const double v = wa * t.a + wb * t.b;
        x.push_back(abs_value ? std::abs(v) : v);
        p.push_back(t.p);
    }
    return DiscreteLaw::from_atoms(std::move(x), std::move(p), true);
}

DiscretePtr JointDiscrete::law_a() const { return marginal(1.0, 0.0, false); }
DiscretePtr JointDiscrete::law_b() const { return marginal(0.0, 1.0, false); }
DiscretePtr JointDiscrete::law_sum() const { return marginal(1.0, 1.0, false); }
DiscretePtr JointDiscrete::law_abs_diff() const { return marginal(1.0, -1.0, true); }

double htilde_subadditivity_check(const JointDiscrete& joint, double x, double t) {
    touch();
    const double lhs = htilde_exact(*joint.law_sum(), x);
    return std::max(htilde_exact(*joint.law_a(), t), htilde_exact(*joint.law_b(), x - t)) - lhs;
}

// ---------------------------------------------------------------------------
// TailProfile
// ---------------------------------------------------------------------------

TailProfile::TailProfile(DistPtr source) : source_(std::move(source)) {
    if (!source_) throw InvalidArgument("TailProfile: null source");
    discrete_ = source_->as_discrete();
}

double TailProfile::Q(double v) const {
    check_level(v, "TailProfile::Q");
    return upper_quantile(*source_, v);
}
double TailProfile::Qtilde(double u) const { return qtilde(*source_, u); }
double TailProfile::H(double x) const { return source_->sf(x); }
double TailProfile::Htilde(double x) const {
    return discrete_ ? htilde_exact(*discrete_, x) : htilde(*source_, x);
}
double TailProfile::lambda(double q) const { return weak_moments(*source_, q).lambda; }
double TailProfile::lambda_tilde(double q) const { return weak_moments(*source_, q).lambda_tilde; }

void TailProfile::write_quantile_csv(std::ostream& os, const std::vector<double>& u_grid) const {
    os << "u,Q,Qtilde\r\n";
    char buf[160];
    for (double u : u_grid) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\r\n", u, Q(u), Qtilde(u));
        os << buf;
    }
}

void TailProfile::write_tail_csv(std::ostream& os, const std::vector<double>& x_grid) const {
    os << "x,H,Htilde\r\n";
    char buf[160];
    for (double x : x_grid) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\r\n", x, H(x), Htilde(x));
        os << buf;
    }
}

}  // namespace ctl
