#pragma once

// Numerical primitives shared by every module: standard normal functions,
// adaptive Gauss-Kronrod quadrature, Gauss-Legendre rules, golden-section
// minimization and bracketed root finding.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <queue>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "ctl/error.hpp"

namespace ctl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Standard normal
// ---------------------------------------------------------------------------

inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * (0.5 * std::numbers::sqrt2)); }

// P(N > z), accurate deep in the upper tail.
inline double normal_sf(double z) { return normal_cdf(-z); }

// Uniform draw in the open interval (0, 1) from the top 53 bits; portable
// across standard libraries, unlike std::uniform_real_distribution.
inline double uniform_open01(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Phi^{-1}(u); returns -inf/+inf at the endpoints.
double normal_quantile(double u);

// Phi^{-1}(1 - v) without forming 1 - v.
double normal_quantile_upper(double v);

// Phi(b) - Phi(a) for a <= b, computed on the side that avoids cancellation.
inline double normal_mass(double a, double b) {
    if (!(a < b)) return 0.0;
    if (a >= 0.0) return normal_sf(a) - normal_sf(b);
    if (b <= 0.0) return normal_cdf(b) - normal_cdf(a);
    return 1.0 - normal_cdf(a) - normal_sf(b);
}

// int_a^b z^k phi(z) dz for k = 0, 1, 2; a and b may be infinite.
struct NormalPartialMoments {
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
};

inline NormalPartialMoments normal_partial_moments(double a, double b) {
    if (!(a < b)) return {};
    const double pa = std::isfinite(a) ? normal_pdf(a) : 0.0;
    const double pb = std::isfinite(b) ? normal_pdf(b) : 0.0;
    const double apa = std::isfinite(a) ? a * pa : 0.0;
    const double bpb = std::isfinite(b) ? b * pb : 0.0;
    const double m0 = normal_mass(a, b);
    return {m0, pa - pb, m0 + apa - bpb};
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

struct QuadOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-12;
    std::size_t max_evaluations = 1'000'000;
};

struct QuadResult {
    double value = 0.0;
    double abs_error = 0.0;
    std::size_t evaluations = 0;
    bool converged = true;

    QuadResult& operator+=(const QuadResult& o) {
        value += o.value;
        abs_error += o.abs_error;
        evaluations += o.evaluations;
        converged = converged && o.converged;
        return *this;
    }
};

namespace detail {

struct Gk15Segment {
    double a, b, value, error;
    bool operator<(const Gk15Segment& o) const { return error < o.error; }
};

// Kronrod nodes / weights (QUADPACK qk15). Node 7 is the centre.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
Gk15Segment gk15(F& f, double a, double b) {
    const double centre = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(centre);
    double resg = fc * kWg[3];
    double resk = fc * kWgk[7];
    double resabs = std::abs(resk);
    std::array<double, 7> fv1{}, fv2{};
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const double f1 = f(centre - dx);
        const double f2 = f(centre + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += kWgk[j] * (f1 + f2);
        resabs += kWgk[j] * (std::abs(f1) + std::abs(f2));
        if (j % 2 == 1) resg += kWg[j / 2] * (f1 + f2);
    }
    const double reskh = resk * 0.5;
    double resasc = kWgk[7] * std::abs(fc - reskh);
    for (int j = 0; j < 7; ++j)
        resasc += kWgk[j] * (std::abs(fv1[j] - reskh) + std::abs(fv2[j] - reskh));
    const double result = resk * half;
    resabs *= std::abs(half);
    resasc *= std::abs(half);
    double err = std::abs((resk - resg) * half);
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (resabs > std::numeric_limits<double>::min() / (50.0 * eps))
        err = std::max(50.0 * eps * resabs, err);
    if (!std::isfinite(result)) err = kInf;
    return {a, b, result, err};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod 15 on [a, b] (finite). Bisects the segment
// with the largest error estimate until the total estimate meets the
// tolerance or the evaluation budget runs out.
template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadOptions& opt = {}) {
    QuadResult out;
    if (a == b) return out;
    double sign = 1.0;
    if (a > b) {
        std::swap(a, b);
        sign = -1.0;
    }
    std::priority_queue<detail::Gk15Segment> heap;
    auto first = detail::gk15(f, a, b);
    out.evaluations = 15;
    double total = first.value;
    double error = first.error;
    heap.push(first);
    while (error > std::max(opt.abs_tol, opt.rel_tol * std::abs(total))) {
        if (out.evaluations + 30 > opt.max_evaluations) {
            out.converged = false;
            break;
        }
        auto worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            out.converged = false;
            break;
        }
        heap.pop();
        auto left = detail::gk15(f, worst.a, mid);
        auto right = detail::gk15(f, mid, worst.b);
        out.evaluations += 30;
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum from the segments to avoid drift from the running updates.
    double v = 0.0, e = 0.0;
    while (!heap.empty()) {
        v += heap.top().value;
        e += heap.top().error;
        heap.pop();
    }
    out.value = sign * v;
    out.abs_error = e;
    if (!std::isfinite(out.value)) out.converged = false;
    return out;
}

// Integrates over consecutive breakpoints: [p0,p1], [p1,p2], ... Each piece
// gets the full tolerance budget divided evenly.
template <class F>
QuadResult integrate_pieces(F&& f, std::span<const double> points, const QuadOptions& opt = {}) {
    QuadResult out;
    if (points.size() < 2) return out;
    QuadOptions local = opt;
    const auto pieces = static_cast<double>(points.size() - 1);
    local.abs_tol = opt.abs_tol / pieces;
    local.max_evaluations = std::max<std::size_t>(
        1000, opt.max_evaluations / static_cast<std::size_t>(points.size() - 1));
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        if (points[i + 1] > points[i]) out += integrate(f, points[i], points[i + 1], local);
    }
    return out;
}

// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussLegendreRule& gauss_legendre(int n);

template <class F>
double gauss_legendre_integrate(F&& f, double a, double b, const GaussLegendreRule& rule) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * f(c + h * rule.nodes[i]);
    return s * h;
}

// ---------------------------------------------------------------------------
// One-dimensional solvers
// ---------------------------------------------------------------------------

struct MinimumResult {
    double argmin;
    double value;
};

// Golden-section search for the minimum of a unimodal f on [a, b].
template <class F>
MinimumResult golden_section_minimize(F&& f, double a, double b, double x_tol = 1e-12) {
    constexpr double inv_phi = 0.6180339887498948482;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    double best_x = fc <= fd ? c : d;
    double best_f = std::min(fc, fd);
    for (int it = 0; it < 400 && (b - a) > x_tol * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
            if (fc < best_f) best_f = fc, best_x = c;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
            if (fd < best_f) best_f = fd, best_x = d;
        }
    }
    return {best_x, best_f};
}

// Smallest x in [lo, hi] (up to x_tol) with pred(x) true, where pred is
// monotone false -> true. Requires pred(hi).
template <class P>
double bisect_predicate(P&& pred, double lo, double hi, double x_tol = 1e-13) {
    for (int it = 0; it < 2000; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;
        if ((hi - lo) <= x_tol * std::max(1.0, std::abs(mid))) break;
        if (pred(mid))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

// Root of a continuous g with g(lo), g(hi) of opposite signs.
template <class G>
double bisect_root(G&& g, double lo, double hi, double x_tol = 1e-14) {
    double glo = g(lo);
    const double ghi = g(hi);
    if (glo == 0.0) return lo;
    if (ghi == 0.0) return hi;
    if ((glo > 0) == (ghi > 0)) throw ConvergenceError("bisect_root: endpoints do not bracket a root");
    for (int it = 0; it < 2000; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;
        if ((hi - lo) <= x_tol * std::max(1.0, std::abs(mid))) break;
        const double gm = g(mid);
        if (gm == 0.0) return mid;
        if ((gm > 0) == (glo > 0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Compensated (Kahan) accumulator for long sums of small terms.
class KahanSum {
public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

}  // namespace ctl
