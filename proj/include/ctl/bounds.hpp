#pragma once

// Explicit normal-approximation bounds for S_n = X_1 + ... + X_n (iid,
// centered) against N(0, n sigma^2), with their numerical constants.
// Bounds are uniform in n; the measured side of a comparison fixes n.

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ctl/cost.hpp"
#include "ctl/distribution.hpp"

namespace ctl {

namespace constants {
inline constexpr double gamma0 = 3.0 / 5.0;
inline constexpr double gamma1 = 3.0376;
inline constexpr double gamma2 = 0.64584;
inline constexpr double gamma3 = 1.6917;
inline constexpr double kappa_mu3 = 0.968;    // additive mu3 term, psi_x costs
inline constexpr double phi_mu3 = 1.369;      // additive mu3 term, W_phi
inline constexpr double w2_mu3 = 1.936;       // additive mu3 term, W_2 and W_p
inline constexpr double w2_chain = 4.2835;    // gamma0 + gamma1 + gamma2, rounded up
inline constexpr double w2_universal = 6.825;
inline constexpr double w2_symmetric = 4.140;
inline constexpr double rademacher_lower = 0.63579;
inline constexpr double tail_lambda3 = 42.943;
inline constexpr double tail_trunc = 5.2041;
inline constexpr double tail_scale = 2.8183;
inline constexpr double a1 = 6.5531;
inline constexpr double poisson_w2 = 0.937;
inline constexpr double walk_cap = 33.0 / 16.0;
}  // namespace constants

struct NamedConstant {
    std::string name;
    double value;
    std::string citation;
};

// Every numerical constant used by the bounds, couplings and limits, with a
// short description of the statement it comes from.
const std::vector<NamedConstant>& constant_table();

struct XStats {
    double sigma = 1.0;
    double mu3 = 0.0;      // E X^3
    double lambda3 = 1.0;  // E |X|^3
    std::optional<double> mu4;
    // u -> E(|X|^3 min(|X|, u)); must accept u = +inf when mu4 is finite.
    std::function<double(double)> truncated_third;
    // Lambda_{p+2}(X) = sup_x x^{p+2} P(|X| > x) for the order in use.
    std::optional<double> weak_Lambda_p2;

    // Exact for discrete laws, quadrature otherwise. Throws InvalidArgument
    // unless the law is centered with positive variance.
    static XStats from_law(DistPtr law);

    // sigma > 0, lambda3 >= |mu3|, sigma^3 <= lambda3.
    void validate() const;
    double trunc(double u) const;
};

// C_0(X) = gamma1 sigma^2 + sigma^{-4}(gamma0 lambda3^2 + gamma3 mu3^2).
double c0(const XStats& xs);

struct BoundReport {
    double bound = 0.0;
    std::optional<double> measured;
    std::optional<double> margin;
    std::vector<std::pair<std::string, double>> constants_used;

    BoundReport& measure(double value);
    bool holds(double tol = 1e-9) const { return !margin || *margin >= -tol; }
};

nlohmann::json to_json(const BoundReport& r);

// sqrt(kappa_{psi_x}) <= sqrt(C_0 + gamma2 sigma^{-2} E|X|^3 min(|X|, 8x)) + 0.968 sigma^{-2}|mu3|.
// x = +inf needs mu4. With `squared` the report bounds kappa_{psi_x} itself.
BoundReport thm21_bound(const XStats& xs, double x, bool squared = false);

// W_2 <= 2 sqrt(C_0 + gamma2 sigma^{-2} mu4) + 1.936 sigma^{-2}|mu3|.
BoundReport w2_bound(const XStats& xs);
// 2 sqrt(4.2835 sigma^{-2} mu4 + 1.6917 sigma^{-4} mu3^2) + 1.936 sigma^{-2}|mu3|.
double w2_chain_bound(double sigma, double mu3, double mu4);
// 6.825 sigma^{-1} sqrt(mu4), and 4.140 sigma^{-1} sqrt(mu4) when mu3 = 0.
double w2_universal_bound(double sigma, double mu4);
double w2_symmetric_bound(double sigma, double mu4);

// E(|X|^3 phi'(|X|/4)) and the fallback majorant 8 E(|X|^2 phi(|X|/4)).
double phi_prime_moment(const Distribution& x, const CostFunction& c);
double phi_moment_fallback(const Distribution& x, const CostFunction& c);

// W_phi <= sqrt(2 C_0 + 8 gamma2 sigma^{-2} phi_prime_moment) + 1.369 sigma^{-2}|mu3|.
BoundReport thm22_bound(const CostFunction& c, const XStats& xs, double phi_prime_mom);

// W_p <= 2 (C_0^{p/2} + p 2^{5-3p} gamma2 sigma^{-2} E|X|^{p+2})^{1/p} + 1.936 sigma^{-2}|mu3|,
// for 1 < p < 2.
BoundReport prop_wp_bound(double p, const XStats& xs, double abs_moment_p2);

// H~_{Z_n}(t) <= (42.943 sigma^{-4} lambda3^2 + 5.2041 sigma^{-2} E|X|^3 min(|X|, 2.8183 t)) / t^2,
// clipped at 1. Throws InvalidArgument for t <= 0.
BoundReport thm23_bound(const XStats& xs, double t);

struct Cor24Report {
    double p = 0.0;
    // (a1 sigma^{-2} lambda3)^p + a2 ((p-1)(2-p))^{-1} (p+2) sigma^{-2} Lambda_{p+2}(X); this is kappa~_p.
    std::optional<BoundReport> weak;
    // (a1 sigma^{-2} lambda3)^p + a2 sigma^{-2} E|X|^{p+2}.
    std::optional<BoundReport> strong;
    double a2 = 0.0;

    // kappa~_p of the weak variant when present, else the strong one.
    double kappa_tilde() const;
};

// At least one of xs.weak_Lambda_p2 and abs_moment_p2 must be present;
// p must lie strictly inside (1, 2).
Cor24Report cor24_bound(double p, const XStats& xs, std::optional<double> abs_moment_p2 = std::nullopt);

// |Q~_{S_n}(u) - Q~_{G}(u)| <= (kappa~_p / u)^{1/p}.
double cvar_gap_bound(double kappa_tilde, double p, double u);
// Q~ of N(0, n sigma^2): sigma sqrt(n) exp(-Phi^{-1}(u)^2 / 2) / (u sqrt(2 pi)).
double gaussian_cvar(double sigma, int n, double u);

// W_2^2 <= 0.937 alpha^2 for the Poisson-type laws alpha (Pi(m/alpha^2) - m/alpha^2) vs N(0, m).
double poisson_w2_bound(double alpha);
// kappa_{psi_x}(T_n, G_n) <= 0.937 beta3^2 along the Lindeberg surrogate sums.
double surrogate_chain_bound(double beta3);

// ||phi^{(j)}||_1 for the standard normal density, j in 1..5, by quadrature
// between the zeros of the Hermite polynomial He_j.
double gaussian_derivative_l1(int j);
// The closed forms of the same norms.
double gaussian_derivative_closed_form(int j);
// Zeros of He_j, increasing.
std::vector<double> hermite_zeros(int j);
// Probabilists' Hermite polynomial He_j(x).
double hermite_he(int j, double x);

}  // namespace ctl
