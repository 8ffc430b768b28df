#include "ctl/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>
#include <nlohmann/json.hpp>

#include "ctl/coverage.hpp"
#include "ctl/error.hpp"
#include "ctl/kernels.hpp"
#include "ctl/numeric.hpp"

namespace ctl {

namespace {

constexpr double kZMax = 13.0;

void touch() { coverage::touch(coverage::Module::Distributions); }

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void check_prob(double u, const char* who) {
    if (!(u >= 0.0 && u <= 1.0)) throw InvalidArgument(std::string(who) + ": probability outside [0,1]");
}

// E (m + s N - t)_+ for N standard normal.
double normal_excess(double m, double s, double t) {
    const double d = (t - m) / s;
    return s * (normal_pdf(d) - d * normal_sf(d));
}

// E (Y - t)_+ for Y uniform on [a, b].
double uniform_excess(double a, double b, double t) {
    if (t <= a) return 0.5 * (a + b) - t;
    if (t >= b) return 0.0;
    return (b - t) * (b - t) / (2.0 * (b - a));
}

// Integration points for z-space expectations over [-kZMax, kZMax].
std::vector<double> z_points(const Distribution& d) {
    std::vector<double> pts{-kZMax};
    for (double z : d.z_breaks())
        if (z > -kZMax && z < kZMax) pts.push_back(z);
    pts.push_back(kZMax);
    return pts;
}

}  // namespace

// ---------------------------------------------------------------------------
// Distribution defaults
// ---------------------------------------------------------------------------

double Distribution::pdf(double) const { return kNaN; }

double Distribution::invert_lower(double u) const {
    // Smallest x with cdf(x) >= u.
    double lo = -1.0, hi = 1.0;
    while (cdf(lo) >= u) {
        hi = lo;
        lo *= 2.0;
        if (lo < -1e300) return lo;
    }
    while (cdf(hi) < u) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) return hi;
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 400; ++it) {
        if (hi - lo <= 1e-13 * std::max(1.0, std::abs(x))) break;
        const double f = cdf(x) - u;
        if (f >= 0.0)
            hi = x;
        else
            lo = x;
        const double p = pdf(x);
        double next = 0.5 * (lo + hi);
        if (std::isfinite(p) && p > 0.0) {
            const double newton = x - f / p;
            if (newton > lo && newton < hi) {
                if (std::abs(newton - x) <= 1e-15 * std::max(1.0, std::abs(x))) return newton;
                next = newton;
            }
        }
        x = next;
    }
    return hi;
}

double Distribution::invert_upper(double v) const {
    // Smallest x with sf(x) <= v.
    double lo = -1.0, hi = 1.0;
    while (sf(lo) <= v) {
        hi = lo;
        lo *= 2.0;
        if (lo < -1e300) return lo;
    }
    while (sf(hi) > v) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) return hi;
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 400; ++it) {
        if (hi - lo <= 1e-13 * std::max(1.0, std::abs(x))) break;
        const double f = v - sf(x);
        if (f >= 0.0)
            hi = x;
        else
            lo = x;
        const double p = pdf(x);
        double next = 0.5 * (lo + hi);
        if (std::isfinite(p) && p > 0.0) {
            const double newton = x - f / p;
            if (newton > lo && newton < hi) {
                if (std::abs(newton - x) <= 1e-15 * std::max(1.0, std::abs(x))) return newton;
                next = newton;
            }
        }
        x = next;
    }
    return hi;
}

double Distribution::quantile(double u) const {
    check_prob(u, "quantile");
    if (u == 0.0) return -kInf;
    if (u == 1.0) return kInf;
    return u <= 0.5 ? invert_lower(u) : invert_upper(1.0 - u);
}

double Distribution::quantile_upper(double v) const {
    check_prob(v, "quantile_upper");
    if (v == 0.0) return kInf;
    if (v == 1.0) return -kInf;
    return v <= 0.5 ? invert_upper(v) : invert_lower(1.0 - v);
}

double Distribution::quantile_z(double z) const {
    return z <= 0.0 ? quantile(normal_cdf(z)) : quantile_upper(normal_sf(z));
}

std::vector<double> Distribution::sample(std::mt19937_64& rng, std::size_t count) const {
    std::vector<double> out(count);
    for (auto& v : out) v = quantile(uniform_open01(rng));
    return out;
}

double Distribution::moment(int k) const {
    if (k < 1 || k > 4) throw InvalidArgument("moment: order must be in 1..4");
    return expect([k](double x) { return std::pow(x, k); });
}

double Distribution::abs_moment(double r) const {
    if (!(r > 0.0)) throw InvalidArgument("abs_moment: r must be positive");
    return expect([r](double x) { return std::pow(std::abs(x), r); });
}

double Distribution::variance() const {
    const double m = moment(1);
    return moment(2) - m * m;
}

double Distribution::expected_excess(double t) const {
    const double u = cdf(t);
    double z0 = u <= 0.5 ? normal_quantile(u) : normal_quantile_upper(sf(t));
    if (z0 >= kZMax) return 0.0;
    z0 = std::max(z0, -kZMax);
    std::vector<double> pts{z0};
    for (double z : z_breaks())
        if (z > z0 && z < kZMax) pts.push_back(z);
    pts.push_back(kZMax);
    QuadOptions opt;
    opt.abs_tol = 1e-14;
    opt.rel_tol = 1e-12;
    const auto r = integrate_pieces(
        [&](double z) { return std::max(quantile_z(z) - t, 0.0) * normal_pdf(z); }, pts, opt);
    return r.value;
}

double Distribution::expect(const std::function<double(double)>& f) const {
    QuadOptions opt;
    opt.abs_tol = 1e-14;
    opt.rel_tol = 1e-12;
    const auto pts = z_points(*this);
    return integrate_pieces([&](double z) { return f(quantile_z(z)) * normal_pdf(z); }, pts, opt).value;
}

// ---------------------------------------------------------------------------
// LatticeLaw
// ---------------------------------------------------------------------------

void LatticeLaw::validate() const {
    if (!(step > 0.0) || !std::isfinite(step)) throw InvalidArgument("LatticeLaw: step must be positive");
    if (!std::isfinite(origin)) throw InvalidArgument("LatticeLaw: origin must be finite");
    if (atoms.empty()) throw InvalidArgument("LatticeLaw: no atoms");
    KahanSum total;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (i > 0 && atoms[i].first <= atoms[i - 1].first)
            throw InvalidArgument("LatticeLaw: offsets must be strictly increasing");
        if (!(atoms[i].second >= 0.0)) throw InvalidArgument("LatticeLaw: negative probability");
        total.add(atoms[i].second);
    }
    if (std::abs(total.value() - 1.0) > 1e-14) throw InvalidArgument("LatticeLaw: probabilities do not sum to 1");
}

nlohmann::json LatticeLaw::to_json() const {
    nlohmann::json atoms_json = nlohmann::json::array();
    for (const auto& [k, p] : atoms) atoms_json.push_back(nlohmann::json::array({k, p}));
    return {{"origin", origin}, {"step", step}, {"atoms", atoms_json}};
}

LatticeLaw LatticeLaw::from_json(const nlohmann::json& j) {
    LatticeLaw law;
    try {
        law.origin = j.at("origin").get<double>();
        law.step = j.at("step").get<double>();
        for (const auto& a : j.at("atoms")) {
            if (!a.is_array() || a.size() != 2) throw InvalidArgument("LatticeLaw: atom must be [offset, prob]");
            law.atoms.emplace_back(a[0].get<std::int64_t>(), a[1].get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("LatticeLaw JSON: ") + e.what());
    }
    law.validate();
    return law;
}

// ---------------------------------------------------------------------------
// DiscreteLaw
// ---------------------------------------------------------------------------

DiscretePtr DiscreteLaw::from_atoms(std::vector<double> x, std::vector<double> p, bool normalize) {
    if (x.size() != p.size() || x.empty()) throw InvalidArgument("DiscreteLaw: need matching non-empty atoms");
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    auto law = std::shared_ptr<DiscreteLaw>(new DiscreteLaw());
    KahanSum total;
    for (std::size_t i : order) {
        if (!std::isfinite(x[i])) throw InvalidArgument("DiscreteLaw: atom not finite");
        if (!(p[i] >= 0.0) || !std::isfinite(p[i])) throw InvalidArgument("DiscreteLaw: invalid probability");
        total.add(p[i]);
        if (p[i] == 0.0) continue;
        if (!law->x_.empty() && law->x_.back() == x[i])
            law->p_.back() += p[i];
        else {
            law->x_.push_back(x[i]);
            law->p_.push_back(p[i]);
        }
    }
    if (law->x_.empty()) throw InvalidArgument("DiscreteLaw: zero total mass");
    if (!normalize && std::abs(total.value() - 1.0) > 1e-12)
        throw InvalidArgument("DiscreteLaw: probabilities do not sum to 1");
    for (auto& v : law->p_) v /= total.value();
    law->finish();
    touch();
    return law;
}

DiscretePtr DiscreteLaw::from_lattice(const LatticeLaw& lat) {
    lat.validate();
    auto law = std::shared_ptr<DiscreteLaw>(new DiscreteLaw());
    KahanSum total;
    for (const auto& [k, p] : lat.atoms) total.add(p);
    LatticeLaw kept{lat.origin, lat.step, {}};
    for (const auto& [k, p] : lat.atoms) {
        if (p == 0.0) continue;
        law->x_.push_back(lat.origin + static_cast<double>(k) * lat.step);
        law->p_.push_back(p / total.value());
        kept.atoms.emplace_back(k, p / total.value());
    }
    law->lattice_ = std::move(kept);
    law->finish();
    touch();
    return law;
}

void DiscreteLaw::finish() {
    const std::size_t n = x_.size();
    cum_.assign(n, 0.0);
    tail_.assign(n, 0.0);
    KahanSum fwd;
    for (std::size_t i = 0; i < n; ++i) {
        fwd.add(p_[i]);
        cum_[i] = std::min(1.0, fwd.value());
    }
    KahanSum bwd;
    for (std::size_t i = n; i-- > 0;) {
        tail_[i] = std::max(0.0, bwd.value());
        bwd.add(p_[i]);
    }
    cum_[n - 1] = 1.0;
    tail_[n - 1] = 0.0;
    zcell_.assign(n + 1, 0.0);
    zcell_[0] = -kInf;
    for (std::size_t i = 0; i + 1 < n; ++i)
        zcell_[i + 1] = cum_[i] <= 0.5 ? normal_quantile(cum_[i]) : normal_quantile_upper(tail_[i]);
    zcell_[n] = kInf;
}

double DiscreteLaw::cdf(double x) const {
    const auto idx = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin());
    return idx == 0 ? 0.0 : cum_[idx - 1];
}

double DiscreteLaw::sf(double x) const {
    const auto idx = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin());
    return idx == 0 ? 1.0 : tail_[idx - 1];
}

double DiscreteLaw::cdf_left(double x) const {
    const auto idx = static_cast<std::size_t>(std::lower_bound(x_.begin(), x_.end(), x) - x_.begin());
    return idx == 0 ? 0.0 : cum_[idx - 1];
}

double DiscreteLaw::quantile(double u) const {
    check_prob(u, "quantile");
    if (u == 0.0) return -kInf;
    auto it = std::lower_bound(cum_.begin(), cum_.end(), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cum_.begin()), x_.size() - 1);
    return x_[idx];
}

double DiscreteLaw::quantile_upper(double v) const {
    check_prob(v, "quantile_upper");
    if (v == 1.0) return -kInf;
    auto it = std::partition_point(tail_.begin(), tail_.end(), [v](double t) { return t > v; });
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - tail_.begin()), x_.size() - 1);
    return x_[idx];
}

double DiscreteLaw::quantile_z(double z) const {
    // Atom i covers (zcell_[i], zcell_[i+1]].
    auto it = std::lower_bound(zcell_.begin() + 1, zcell_.end(), z);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - zcell_.begin()) - 1, x_.size() - 1);
    return x_[idx];
}

std::vector<double> DiscreteLaw::sample(std::mt19937_64& rng, std::size_t count) const {
    std::vector<double> out(count);
    for (auto& v : out) v = quantile(uniform_open01(rng));
    return out;
}

Support DiscreteLaw::support() const {
    if (lattice_) return {SupportKind::Lattice, lattice_->origin, lattice_->step};
    return {SupportKind::Mixed, 0.0, 0.0};
}

double DiscreteLaw::moment(int k) const {
    if (k < 1 || k > 4) throw InvalidArgument("moment: order must be in 1..4");
    KahanSum s;
    for (std::size_t i = 0; i < x_.size(); ++i) {
        double v = p_[i];
        for (int j = 0; j < k; ++j) v *= x_[i];
        s.add(v);
    }
    return s.value();
}

double DiscreteLaw::abs_moment(double r) const {
    if (!(r > 0.0)) throw InvalidArgument("abs_moment: r must be positive");
    KahanSum s;
    for (std::size_t i = 0; i < x_.size(); ++i) s.add(p_[i] * std::pow(std::abs(x_[i]), r));
    return s.value();
}

double DiscreteLaw::expected_excess(double t) const {
    KahanSum s;
    for (std::size_t i = x_.size(); i-- > 0 && x_[i] > t;) s.add(p_[i] * (x_[i] - t));
    return s.value();
}

double DiscreteLaw::expect(const std::function<double(double)>& f) const {
    KahanSum s;
    for (std::size_t i = 0; i < x_.size(); ++i) s.add(p_[i] * f(x_[i]));
    return s.value();
}

std::vector<double> DiscreteLaw::z_breaks() const { return {zcell_.begin() + 1, zcell_.end() - 1}; }

std::string DiscreteLaw::describe() const {
    if (lattice_)
        return "lattice(origin=" + num(lattice_->origin) + ", step=" + num(lattice_->step) +
               ", atoms=" + std::to_string(x_.size()) + ")";
    return "discrete(atoms=" + std::to_string(x_.size()) + ")";
}

std::optional<LatticeLaw> DiscreteLaw::lattice() const { return lattice_; }

// ---------------------------------------------------------------------------
// NormalLaw
// ---------------------------------------------------------------------------

NormalLaw::NormalLaw(double mean, double variance) : m_(mean), s_(std::sqrt(variance)) {
    if (!(variance > 0.0) || !std::isfinite(variance) || !std::isfinite(mean))
        throw InvalidArgument("normal: variance must be positive and finite");
    touch();
}

double NormalLaw::cdf(double x) const { return normal_cdf((x - m_) / s_); }
double NormalLaw::sf(double x) const { return normal_sf((x - m_) / s_); }
double NormalLaw::pdf(double x) const { return normal_pdf((x - m_) / s_) / s_; }

double NormalLaw::quantile(double u) const {
    check_prob(u, "quantile");
    return m_ + s_ * normal_quantile(u);
}

double NormalLaw::quantile_upper(double v) const {
    check_prob(v, "quantile_upper");
    return m_ + s_ * normal_quantile_upper(v);
}

std::vector<double> NormalLaw::sample(std::mt19937_64& rng, std::size_t count) const {
    std::vector<double> out(count);
    for (auto& v : out) v = m_ + s_ * normal_quantile(uniform_open01(rng));
    return out;
}

double NormalLaw::moment(int k) const {
    const double m = m_, v = s_ * s_;
    switch (k) {
        case 1: return m;
        case 2: return v + m * m;
        case 3: return m * m * m + 3.0 * m * v;
        case 4: return m * m * m * m + 6.0 * m * m * v + 3.0 * v * v;
        default: throw InvalidArgument("moment: order must be in 1..4");
    }
}

double NormalLaw::abs_moment(double r) const {
    if (!(r > 0.0)) throw InvalidArgument("abs_moment: r must be positive");
    if (m_ != 0.0) return Distribution::abs_moment(r);
    return std::pow(s_, r) * std::pow(2.0, 0.5 * r) * std::tgamma(0.5 * (r + 1.0)) / std::sqrt(std::numbers::pi);
}

double NormalLaw::expected_excess(double t) const { return normal_excess(m_, s_, t); }

std::string NormalLaw::describe() const { return "normal(mean=" + num(m_) + ", variance=" + num(s_ * s_) + ")"; }

// ---------------------------------------------------------------------------
// GammaLaw
// ---------------------------------------------------------------------------

GammaLaw::GammaLaw(double shape, double shift) : k_(shape), shift_(shift) {
    if (!(shape > 0.0) || !std::isfinite(shape) || !std::isfinite(shift))
        throw InvalidArgument("gamma: shape must be positive and finite");
    touch();
}

double GammaLaw::cdf(double x) const {
    const double y = x + shift_;
    return y <= 0.0 ? 0.0 : boost::math::gamma_p(k_, y);
}

double GammaLaw::sf(double x) const {
    const double y = x + shift_;
    return y <= 0.0 ? 1.0 : boost::math::gamma_q(k_, y);
}

double GammaLaw::pdf(double x) const {
    const double y = x + shift_;
    return y <= 0.0 ? 0.0 : boost::math::gamma_p_derivative(k_, y);
}

double GammaLaw::quantile(double u) const {
    check_prob(u, "quantile");
    if (u == 0.0) return -kInf;
    if (u == 1.0) return kInf;
    return boost::math::gamma_p_inv(k_, u) - shift_;
}

double GammaLaw::quantile_upper(double v) const {
    check_prob(v, "quantile_upper");
    if (v == 1.0) return -kInf;
    if (v == 0.0) return kInf;
    return boost::math::gamma_q_inv(k_, v) - shift_;
}

std::vector<double> GammaLaw::sample(std::mt19937_64& rng, std::size_t count) const {
    std::vector<double> out(count);
    for (auto& v : out) v = quantile(uniform_open01(rng));
    return out;
}

double GammaLaw::moment(int k) const {
    const double c = k_ - shift_;
    const double m2 = k_, m3 = 2.0 * k_, m4 = 3.0 * k_ * k_ + 6.0 * k_;
    switch (k) {
        case 1: return c;
        case 2: return m2 + c * c;
        case 3: return m3 + 3.0 * c * m2 + c * c * c;
        case 4: return m4 + 4.0 * c * m3 + 6.0 * c * c * m2 + c * c * c * c;
        default: throw InvalidArgument("moment: order must be in 1..4");
    }
}

double GammaLaw::expected_excess(double t) const {
    const double s = t + shift_;
    if (s <= 0.0) return k_ - s;
    return k_ * boost::math::gamma_q(k_ + 1.0, s) - s * boost::math::gamma_q(k_, s);
}

std::string GammaLaw::describe() const { return "gamma(shape=" + num(k_) + ", shift=" + num(shift_) + ")"; }

// ---------------------------------------------------------------------------
// UniformLaw
// ---------------------------------------------------------------------------

UniformLaw::UniformLaw(double a, double b) : a_(a), b_(b) {
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) throw InvalidArgument("uniform: need finite a < b");
    touch();
}

double UniformLaw::cdf(double x) const { return std::clamp((x - a_) / (b_ - a_), 0.0, 1.0); }
double UniformLaw::sf(double x) const { return std::clamp((b_ - x) / (b_ - a_), 0.0, 1.0); }
double UniformLaw::pdf(double x) const { return (x >= a_ && x <= b_) ? 1.0 / (b_ - a_) : 0.0; }

double UniformLaw::quantile(double u) const {
    check_prob(u, "quantile");
    if (u == 0.0) return -kInf;
    return a_ + u * (b_ - a_);
}

double UniformLaw::quantile_upper(double v) const {
    check_prob(v, "quantile_upper");
    if (v == 1.0) return -kInf;
    return b_ - v * (b_ - a_);
}

double UniformLaw::moment(int k) const {
    if (k < 1 || k > 4) throw InvalidArgument("moment: order must be in 1..4");
    return (std::pow(b_, k + 1) - std::pow(a_, k + 1)) / ((k + 1) * (b_ - a_));
}

double UniformLaw::abs_moment(double r) const {
    if (!(r > 0.0)) throw InvalidArgument("abs_moment: r must be positive");
    const double w = (r + 1.0) * (b_ - a_);
    if (a_ >= 0.0) return (std::pow(b_, r + 1.0) - std::pow(a_, r + 1.0)) / w;
    if (b_ <= 0.0) return (std::pow(-a_, r + 1.0) - std::pow(-b_, r + 1.0)) / w;
    return (std::pow(-a_, r + 1.0) + std::pow(b_, r + 1.0)) / w;
}

double UniformLaw::expected_excess(double t) const { return uniform_excess(a_, b_, t); }

std::string UniformLaw::describe() const { return "uniform(" + num(a_) + ", " + num(b_) + ")"; }

// ---------------------------------------------------------------------------
// SmoothedLaw
// ---------------------------------------------------------------------------

SmoothedLaw::SmoothedLaw(DistPtr base, double sigma) : base_(std::move(base)), sigma_(sigma) {
    if (!base_) throw InvalidArgument("smooth: null base");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("smooth: sigma must be positive");
    discrete_ = base_->as_discrete();
    touch();
}

double SmoothedLaw::mix(double x, bool upper) const {
    auto kernel = [&](double y) {
        const double d = (x - y) / sigma_;
        return upper ? normal_sf(d) : normal_cdf(d);
    };
    if (discrete_) {
        KahanSum s;
        const auto& xs = discrete_->points();
        const auto& ps = discrete_->probs();
        for (std::size_t i = 0; i < xs.size(); ++i) s.add(ps[i] * kernel(xs[i]));
        return std::clamp(s.value(), 0.0, 1.0);
    }
    return std::clamp(base_->expect(kernel), 0.0, 1.0);
}

double SmoothedLaw::cdf(double x) const { return mix(x, false); }
double SmoothedLaw::sf(double x) const { return mix(x, true); }

double SmoothedLaw::pdf(double x) const {
    auto kernel = [&](double y) { return normal_pdf((x - y) / sigma_) / sigma_; };
    if (discrete_) {
        double s = 0.0;
        const auto& xs = discrete_->points();
        const auto& ps = discrete_->probs();
        for (std::size_t i = 0; i < xs.size(); ++i) s += ps[i] * kernel(xs[i]);
        return s;
    }
    return base_->expect(kernel);
}

double SmoothedLaw::moment(int k) const {
    const double v = sigma_ * sigma_;
    switch (k) {
        case 1: return base_->moment(1);
        case 2: return base_->moment(2) + v;
        case 3: return base_->moment(3) + 3.0 * base_->moment(1) * v;
        case 4: return base_->moment(4) + 6.0 * base_->moment(2) * v + 3.0 * v * v;
        default: throw InvalidArgument("moment: order must be in 1..4");
    }
}

double SmoothedLaw::expected_excess(double t) const {
    return base_->expect([&](double y) { return normal_excess(y, sigma_, t); });
}

std::string SmoothedLaw::describe() const { return "smooth(" + base_->describe() + ", sigma=" + num(sigma_) + ")"; }

// ---------------------------------------------------------------------------
// ShiftedLatticeLaw
// ---------------------------------------------------------------------------

ShiftedLatticeLaw::ShiftedLatticeLaw(DiscretePtr base, double h) : base_(std::move(base)), h_(h) {
    if (!base_) throw InvalidArgument("shifted lattice: null base");
    const auto lat = base_->lattice();
    if (!lat) throw InvalidArgument("shifted lattice: base law is not a lattice law");
    if (!(h > 0.0) || h > lat->step * (1.0 + 1e-12))
        throw InvalidArgument("shifted lattice: need 0 < h <= lattice step");
    touch();
}

double ShiftedLatticeLaw::cdf(double y) const {
    const auto& xs = base_->points();
    const auto idx = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), y + 0.5 * h_) - xs.begin());
    if (idx == 0) return 0.0;
    const std::size_t i = idx - 1;
    const double before = i == 0 ? 0.0 : base_->cum()[i - 1];
    const double frac = std::min(1.0, (y - xs[i] + 0.5 * h_) / h_);
    return std::min(1.0, before + base_->probs()[i] * frac);
}

double ShiftedLatticeLaw::sf(double y) const {
    const auto& xs = base_->points();
    const auto idx = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), y + 0.5 * h_) - xs.begin());
    if (idx == 0) return 1.0;
    const std::size_t i = idx - 1;
    const double frac = std::max(0.0, (xs[i] + 0.5 * h_ - y) / h_);
    return std::min(1.0, base_->tail()[i] + base_->probs()[i] * frac);
}

double ShiftedLatticeLaw::pdf(double y) const {
    const auto& xs = base_->points();
    const auto idx = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), y + 0.5 * h_) - xs.begin());
    if (idx == 0) return 0.0;
    const std::size_t i = idx - 1;
    return y < xs[i] + 0.5 * h_ ? base_->probs()[i] / h_ : 0.0;
}

double ShiftedLatticeLaw::quantile(double u) const {
    check_prob(u, "quantile");
    const auto& cum = base_->cum();
    const auto& xs = base_->points();
    if (u == 0.0) return -kInf;
    const auto k = std::min<std::size_t>(
        static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin()), xs.size() - 1);
    const double before = k == 0 ? 0.0 : cum[k - 1];
    return xs[k] - 0.5 * h_ + h_ * std::clamp((u - before) / base_->probs()[k], 0.0, 1.0);
}

double ShiftedLatticeLaw::quantile_upper(double v) const {
    check_prob(v, "quantile_upper");
    const auto& tail = base_->tail();
    const auto& xs = base_->points();
    if (v == 1.0) return -kInf;
    const auto k = std::min<std::size_t>(
        static_cast<std::size_t>(std::partition_point(tail.begin(), tail.end(), [v](double t) { return t > v; }) -
                                 tail.begin()),
        xs.size() - 1);
    return xs[k] + 0.5 * h_ - h_ * std::clamp((v - tail[k]) / base_->probs()[k], 0.0, 1.0);
}

double ShiftedLatticeLaw::moment(int k) const {
    const double v = h_ * h_ / 12.0;
    switch (k) {
        case 1: return base_->moment(1);
        case 2: return base_->moment(2) + v;
        case 3: return base_->moment(3) + 3.0 * base_->moment(1) * v;
        case 4: return base_->moment(4) + 6.0 * base_->moment(2) * v + std::pow(h_, 4) / 80.0;
        default: throw InvalidArgument("moment: order must be in 1..4");
    }
}

double ShiftedLatticeLaw::expected_excess(double t) const {
    return base_->expect([&](double x) { return uniform_excess(x - 0.5 * h_, x + 0.5 * h_, t); });
}

std::vector<double> ShiftedLatticeLaw::z_breaks() const { return base_->z_breaks(); }

std::string ShiftedLatticeLaw::describe() const { return "shifted(" + base_->describe() + ", h=" + num(h_) + ")"; }

// ---------------------------------------------------------------------------
// NormalSquareLaw
// ---------------------------------------------------------------------------

NormalSquareLaw::NormalSquareLaw(double a) : a_(a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw InvalidArgument("normal square: scale must be positive");
    touch();
}

double NormalSquareLaw::cdf(double x) const {
    const double c = 1.0 + x / a_;
    return c <= 0.0 ? 0.0 : 1.0 - 2.0 * normal_sf(std::sqrt(c));
}

double NormalSquareLaw::sf(double x) const {
    const double c = 1.0 + x / a_;
    return c <= 0.0 ? 1.0 : 2.0 * normal_sf(std::sqrt(c));
}

double NormalSquareLaw::pdf(double x) const {
    const double c = 1.0 + x / a_;
    if (c <= 0.0) return 0.0;
    const double r = std::sqrt(c);
    return normal_pdf(r) / (a_ * r);
}

double NormalSquareLaw::quantile(double u) const {
    check_prob(u, "quantile");
    if (u == 0.0) return -kInf;
    if (u == 1.0) return kInf;
    // P(|G| <= r) = u.
    const double r = normal_quantile_upper(0.5 * (1.0 - u));
    return a_ * (r * r - 1.0);
}

double NormalSquareLaw::quantile_upper(double v) const {
    check_prob(v, "quantile_upper");
    if (v == 0.0) return kInf;
    if (v == 1.0) return -kInf;
    const double r = normal_quantile_upper(0.5 * v);
    return a_ * (r * r - 1.0);
}

double NormalSquareLaw::moment(int k) const {
    switch (k) {
        case 1: return 0.0;
        case 2: return 2.0 * a_ * a_;
        case 3: return 8.0 * a_ * a_ * a_;
        case 4: return 60.0 * std::pow(a_, 4);
        default: throw InvalidArgument("moment: order must be in 1..4");
    }
}

double NormalSquareLaw::expected_excess(double t) const {
    const double c = 1.0 + t / a_;
    if (c <= 0.0) return -t;
    const double r = std::sqrt(c);
    return 2.0 * a_ * (r * normal_pdf(r) + (1.0 - c) * normal_sf(r));
}

std::string NormalSquareLaw::describe() const { return "normal_square(a=" + num(a_) + ")"; }

// ---------------------------------------------------------------------------
// FoldedLaw
// ---------------------------------------------------------------------------

FoldedLaw::FoldedLaw(DistPtr base) : base_(std::move(base)) {
    if (!base_) throw InvalidArgument("fold: null base");
    touch();
}

double FoldedLaw::cdf(double x) const {
    if (x < 0.0) return 0.0;
    return std::clamp(1.0 - base_->sf(x) - base_->cdf_left(-x), 0.0, 1.0);
}

double FoldedLaw::sf(double x) const {
    if (x < 0.0) return 1.0;
    return std::clamp(base_->sf(x) + base_->cdf_left(-x), 0.0, 1.0);
}

double FoldedLaw::cdf_left(double x) const {
    if (x <= 0.0) return 0.0;
    return std::clamp(1.0 - base_->sf(-x) - (1.0 - base_->cdf_left(x)), 0.0, 1.0);
}

double FoldedLaw::pdf(double x) const {
    if (x < 0.0) return 0.0;
    return base_->pdf(x) + base_->pdf(-x);
}

Support FoldedLaw::support() const { return {}; }

double FoldedLaw::moment(int k) const {
    if (k < 1 || k > 4) throw InvalidArgument("moment: order must be in 1..4");
    return base_->abs_moment(static_cast<double>(k));
}

double FoldedLaw::abs_moment(double r) const { return base_->abs_moment(r); }

double FoldedLaw::expected_excess(double t) const {
    if (t < 0.0) return base_->abs_moment(1.0) - t;
    // E(-X - t)_+ = (-t - E X) + E(X + t)_+.
    const double neg = (-t - base_->moment(1)) + base_->expected_excess(-t);
    return base_->expected_excess(t) + std::max(0.0, neg);
}

double FoldedLaw::expect(const std::function<double(double)>& f) const {
    return base_->expect([&](double x) { return f(std::abs(x)); });
}

std::string FoldedLaw::describe() const { return "abs(" + base_->describe() + ")"; }

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

DiscretePtr centered_poisson(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda) || lambda > 1e8)
        throw InvalidArgument("poisson: lambda must be in (0, 1e8]");
    const double sd = std::sqrt(lambda);
    const auto lo = static_cast<std::int64_t>(std::max(0.0, std::floor(lambda - 12.0 * sd - 40.0)));
    const auto hi = static_cast<std::int64_t>(std::ceil(lambda + 12.0 * sd + 40.0));
    std::vector<double> pmf;
    pmf.reserve(static_cast<std::size_t>(hi - lo + 1));
    const double loglam = std::log(lambda);
    for (std::int64_t k = lo; k <= hi; ++k) {
        const double kd = static_cast<double>(k);
        pmf.push_back(std::exp(kd * loglam - lambda - std::lgamma(kd + 1.0)));
    }
    // Drop each tail whose total mass is below 1e-15.
    std::size_t first = 0, last = pmf.size();
    double acc = 0.0;
    while (first + 1 < last && acc + pmf[first] < 1e-15) acc += pmf[first++];
    acc = 0.0;
    while (last > first + 1 && acc + pmf[last - 1] < 1e-15) acc += pmf[--last];
    LatticeLaw lat{-lambda, 1.0, {}};
    KahanSum total;
    for (std::size_t i = first; i < last; ++i) total.add(pmf[i]);
    for (std::size_t i = first; i < last; ++i)
        lat.atoms.emplace_back(lo + static_cast<std::int64_t>(i), pmf[i] / total.value());
    return DiscreteLaw::from_lattice(lat);
}

DiscretePtr rademacher() { return DiscreteLaw::from_lattice({-1.0, 2.0, {{0, 0.5}, {1, 0.5}}}); }

DiscretePtr centered_bernoulli(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("bernoulli: p must lie in (0, 1)");
    return DiscreteLaw::from_lattice({-p, 1.0, {{0, 1.0 - p}, {1, p}}});
}

DiscretePtr point_mass(double x) {
    if (!std::isfinite(x)) throw InvalidArgument("point: location must be finite");
    return DiscreteLaw::from_lattice({x, 1.0, {{0, 1.0}}});
}

DistPtr normal(double mean, double variance) { return std::make_shared<NormalLaw>(mean, variance); }

DistPtr centered_exponential_sum(int n) {
    if (n < 1) throw InvalidArgument("exponential sum: n must be >= 1");
    return std::make_shared<GammaLaw>(static_cast<double>(n), static_cast<double>(n));
}

DistPtr make_family(const FamilySpec& spec) {
    const auto& f = spec.family;
    if (f == "normal") return normal(0.0, spec.param > 0.0 ? spec.param : 1.0);
    if (f == "poisson") return centered_poisson(spec.param);
    if (f == "rademacher") return rademacher();
    if (f == "bernoulli") return centered_bernoulli(spec.param);
    if (f == "exponential") return centered_exponential_sum(1);
    if (f == "uniform") return std::make_shared<UniformLaw>(-0.5, 0.5);
    if (f == "point") return point_mass(spec.param);
    if (f == "lattice") {
        if (!spec.lattice) throw InvalidArgument("lattice family needs a lattice law");
        return DiscreteLaw::from_lattice(*spec.lattice);
    }
    throw InvalidArgument("unknown family: " + f);
}

LatticeLaw convolve_n(const LatticeLaw& base, int n, std::size_t cap, bool parallel) {
    base.validate();
    if (n < 1) throw InvalidArgument("convolve_n: n must be >= 1");
    const std::int64_t lo = base.atoms.front().first, hi = base.atoms.back().first;
    const double width = static_cast<double>(hi - lo) * n + 1.0;
    if (width > static_cast<double>(cap))
        throw CapacityError("convolve_n: support of " + num(width) + " atoms exceeds cap " + std::to_string(cap));

    struct Dense {
        std::int64_t start;
        std::vector<double> p;
    };
    auto trim = [](Dense& d) {
        std::size_t first = 0, last = d.p.size();
        double acc = 0.0;
        while (first + 1 < last && acc + d.p[first] < 1e-17) acc += d.p[first++];
        acc = 0.0;
        while (last > first + 1 && acc + d.p[last - 1] < 1e-17) acc += d.p[--last];
        d.p = std::vector<double>(d.p.begin() + static_cast<std::ptrdiff_t>(first),
                                  d.p.begin() + static_cast<std::ptrdiff_t>(last));
        d.start += static_cast<std::int64_t>(first);
    };
    auto product = [&](const Dense& a, const Dense& b) {
        Dense out{a.start + b.start, kernels::convolve(a.p, b.p, parallel)};
        trim(out);
        return out;
    };

    Dense power{lo, std::vector<double>(static_cast<std::size_t>(hi - lo + 1), 0.0)};
    for (const auto& [k, p] : base.atoms) power.p[static_cast<std::size_t>(k - lo)] = p;
    std::optional<Dense> result;
    for (int m = n;;) {
        if (m & 1) result = result ? product(*result, power) : power;
        m >>= 1;
        if (!m) break;
        power = product(power, power);
    }
    LatticeLaw out{base.origin * n, base.step, {}};
    KahanSum total;
    for (double v : result->p) total.add(v);
    for (std::size_t i = 0; i < result->p.size(); ++i)
        if (result->p[i] > 0.0) out.atoms.emplace_back(result->start + static_cast<std::int64_t>(i), result->p[i] / total.value());
    touch();
    return out;
}

DiscretePtr convolve_n(const DiscreteLaw& base, int n, std::size_t cap, bool parallel) {
    const auto lat = base.lattice();
    if (!lat) throw InvalidArgument("convolve_n: base law is not a lattice law");
    return DiscreteLaw::from_lattice(convolve_n(*lat, n, cap, parallel));
}

DiscretePtr lindeberg_jump_part(double beta3) {
    if (beta3 == 0.0 || !std::isfinite(beta3))
        throw InvalidArgument("lindeberg_surrogate: beta3 must be nonzero (use the normal family for beta3 = 0)");
    const double lambda = 1.0 / (8.0 * beta3 * beta3);
    const auto pois = centered_poisson(lambda);
    const auto lat = *pois->lattice();
    const double step = 2.0 * std::abs(beta3);
    LatticeLaw out{0.0, step, {}};
    if (beta3 > 0.0) {
        out.origin = 2.0 * beta3 * lat.origin;
        out.atoms = lat.atoms;
    } else {
        // Reflect: atoms 2 beta (k - lambda) = step (lambda - k).
        const std::int64_t kmax = lat.atoms.back().first;
        out.origin = step * (lambda - static_cast<double>(kmax));
        for (auto it = lat.atoms.rbegin(); it != lat.atoms.rend(); ++it) out.atoms.emplace_back(kmax - it->first, it->second);
    }
    return DiscreteLaw::from_lattice(out);
}

std::shared_ptr<const SmoothedLaw> lindeberg_surrogate(double beta3) {
    return std::make_shared<SmoothedLaw>(lindeberg_jump_part(beta3), std::sqrt(0.5));
}

DistPtr smooth(DistPtr d, double sigma) {
    if (!d) throw InvalidArgument("smooth: null law");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("smooth: sigma must be positive");
    if (auto g = d->gaussian()) return normal(g->first, g->second * g->second + sigma * sigma);
    return std::make_shared<SmoothedLaw>(std::move(d), sigma);
}

DistPtr fold(DistPtr d) {
    if (!d) throw InvalidArgument("fold: null law");
    if (const auto* disc = d->as_discrete()) {
        std::vector<double> x(disc->points()), p(disc->probs());
        for (auto& v : x) v = std::abs(v);
        return DiscreteLaw::from_atoms(std::move(x), std::move(p), true);
    }
    return std::make_shared<FoldedLaw>(std::move(d));
}

double total_variation(const DiscreteLaw& a, const DiscreteLaw& b) {
    const auto &xa = a.points(), &xb = b.points(), &pa = a.probs(), &pb = b.probs();
    std::size_t i = 0, j = 0;
    KahanSum s;
    while (i < xa.size() || j < xb.size()) {
        if (j == xb.size() || (i < xa.size() && xa[i] < xb[j] - 1e-9 * std::max(1.0, std::abs(xb[j])))) {
            s.add(pa[i++]);
        } else if (i == xa.size() || xb[j] < xa[i] - 1e-9 * std::max(1.0, std::abs(xa[i]))) {
            s.add(pb[j++]);
        } else {
            s.add(std::abs(pa[i++] - pb[j++]));
        }
    }
    return 0.5 * s.value();
}

}  // namespace ctl
