#include "ctl/numeric.hpp"

#include <map>
#include <mutex>

#include <boost/math/special_functions/erf.hpp>

namespace ctl {

double normal_quantile(double u) {
    if (!(u >= 0.0 && u <= 1.0)) throw InvalidArgument("normal_quantile: u outside [0,1]");
    if (u == 0.0) return -kInf;
    if (u == 1.0) return kInf;
    if (u > 0.5) return normal_quantile_upper(1.0 - u);
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

double normal_quantile_upper(double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("normal_quantile_upper: v outside [0,1]");
    if (v == 0.0) return kInf;
    if (v == 1.0) return -kInf;
    if (v > 0.5) return -normal_quantile_upper(1.0 - v);
    return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * v);
}

namespace {

GaussLegendreRule build_rule(int n) {
    GaussLegendreRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Recompute the derivative at the converged node.
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[static_cast<std::size_t>(i)] = -x;
        rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        rule.weights[static_cast<std::size_t>(i)] = w;
        rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    return rule;
}

}  // namespace

const GaussLegendreRule& gauss_legendre(int n) {
    if (n < 1 || n > 512) throw InvalidArgument("gauss_legendre: order must be in [1, 512]");
    static std::mutex mu;
    static std::map<int, GaussLegendreRule> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_rule(n)).first;
    return it->second;
}

}  // namespace ctl
