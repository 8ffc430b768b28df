#pragma once

// Large-n limits of transport costs between S_n (iid, centered, unit
// variance) and N(0, n), written in terms of G standard normal and U
// uniform on [0, 1] independent of G.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctl/cost.hpp"
#include "ctl/distribution.hpp"
#include "ctl/transport.hpp"

namespace ctl {

struct LimitSpec {
    double beta3 = 0.0;             // E X^3
    std::optional<double> lattice;  // step h of the unshifted lattice sum
};

struct LimitResult {
    double value = 0.0;
    double abs_error = 0.0;
    std::vector<std::string> warnings;
};

// E c(beta3 (G^2 - 1)/6), or E c(beta3 (G^2 - 1)/6 + h (U - 1/2)) for a
// lattice spec. Adaptive in G (split at G = +-1 and at the cost's kinks),
// 64-point Gauss-Legendre in U; the U error is the gap to a 32-point rule.
LimitResult limit_kappa(const CostFunction& c, const LimitSpec& spec);

// E c*(a g(U)) < inf for a in {1, 1/4, 1/16}, judged from the growth of
// truncated integrals over |G| <= 6, 9, 12.
struct DualIntegrability {
    std::vector<double> scales;
    std::vector<bool> finite;
    bool any() const;
};
DualIntegrability dual_integrability(const CostFunction& c, const Weight& g);

// |beta3| E(g(Phi(G)) |G^2 - 1|)/6. When `phi` is given, g(U) is checked
// for membership in L_{phi*} and a warning is attached if no tested scale
// passes. Throws DivergenceError if the integrand does not decay.
LimitResult limit_weighted(const Weight& g, double beta3, const CostFunction* phi = nullptr);

// E(g(Phi(G)) ell(beta3 (G^2 - 1)/6)).
LimitResult limit_signed(const Weight& g, const std::function<double(double)>& ell, double beta3,
                         const CostFunction* phi = nullptr);

struct WeakMomentLimit {
    double p = 0.0;
    double lambda = 0.0;        // Lambda_p(G^2 - 1)
    double lambda_tilde = 0.0;  // Lambda~_p(G^2 - 1)
    // Limits of Lambda_p(Z_n), Lambda~_p(Z_n): (|beta3|/6)^p times the above.
    double scaled_lambda = 0.0;
    double scaled_lambda_tilde = 0.0;
};

// p in [1, 2).
WeakMomentLimit limit_weak_moment(double p, double beta3 = 6.0);

// || (G^2 - 1)/6 + V ||_p with V uniform on [-1/2, 1/2], or without V.
// The V integral is done in closed form. p in [1, 2].
LimitResult limit_poisson_wp(double p, bool with_uniform = true);

struct ConvergenceRow {
    int n = 0;
    double value = 0.0;
    double abs_error = 0.0;
    double limit = 0.0;
    double gap = 0.0;  // |value - limit|
};

// kappa_c(law(n), N(0, n)) along `ns`, compared with `limit`.
std::vector<ConvergenceRow> convergence_sequence(const CostFunction& c, const std::function<DistPtr(int)>& law,
                                                 const std::vector<int>& ns, double limit);

// |gap| strictly decreasing along the rows.
bool gaps_decreasing(const std::vector<ConvergenceRow>& rows);

}  // namespace ctl
