#pragma once

// Transport costs between one-dimensional laws through the quantile coupling:
// kappa_c(F, G) = int_0^1 c(F^{-1}(u) - G^{-1}(u)) du. Integrals run in
// z = Phi^{-1}(u) over |z| <= 8.5, an integrated band out to |z| = 13, and an
// analytic remainder bound beyond that from the cost's quadratic envelope.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ctl/cost.hpp"
#include "ctl/distribution.hpp"

namespace ctl {

enum class TransportMethod { ZSpaceQuadrature, PiecewiseLattice, ClosedForm };

std::string to_string(TransportMethod m);

struct TransportReport {
    double value = 0.0;
    double abs_error = 0.0;
    TransportMethod method = TransportMethod::ClosedForm;
    std::size_t evaluations = 0;
};

nlohmann::json to_json(const TransportReport& r);

struct TransportOptions {
    double abs_tol = 1e-11;
    double rel_tol = 1e-10;
    std::size_t max_evaluations = 1'000'000;
    bool parallel = true;
};

TransportReport kappa(const CostFunction& c, const Distribution& F, const Distribution& G,
                      const TransportOptions& opt = {});

// kappa with |t|^p, then the p-th root; the error is propagated to first order.
TransportReport wasserstein_p(double p, const Distribution& F, const Distribution& G,
                              const TransportOptions& opt = {});

// sqrt(kappa_phi) for a class-Psi cost (or psi_x).
TransportReport w_phi(const CostFunction& c, const Distribution& F, const Distribution& G,
                      const TransportOptions& opt = {});

// A weight on (0, 1). `of_z`, when set, gives g(Phi(z)) directly and avoids
// the precision loss of forming Phi(z) near 1.
struct Weight {
    std::function<double(double)> of_u;
    std::function<double(double)> of_z;

    double at_z(double z) const;
    static Weight constant(double c);
    // g(u) = |Phi^{-1}(u)|^k.
    static Weight normal_quantile_power(double k);
    static Weight from_u(std::function<double(double)> g);
};

// int_0^1 g(u) |F^{-1}(u) - G^{-1}(u)| du.
TransportReport weighted_cost(const Weight& g, const Distribution& F, const Distribution& G,
                              const TransportOptions& opt = {});

struct SignedReport {
    double value = 0.0;
    double abs_error = 0.0;
    std::size_t evaluations = 0;
};

// int_0^1 g(u) ell(F^{-1}(u) - G^{-1}(u)) du for a Lipschitz ell.
SignedReport signed_functional(const Weight& g, const std::function<double(double)>& ell, const Distribution& F,
                               const Distribution& G, const TransportOptions& opt = {});

struct WitnessResult;

// Test function h with h'(t) = sign(H(t)) phi'(2 d(t, A)), H = G - F the cdf
// gap and A its zero set inside the working interval.
class WitnessFunction {
public:
    WitnessFunction() = default;

    double derivative(double t) const;
    // int_0^t derivative.
    double value_at(double t) const;
    // d(t, A).
    double zero_distance(double t) const;
    const std::vector<double>& zeros() const { return zeros_; }
    bool identically_zero() const { return zero_; }

private:
    friend WitnessResult dual_witness(const CostFunction&, const Distribution&, const Distribution&);
    std::vector<double> zeros_;
    std::function<double(double)> gap_;  // H
    std::function<double(double)> dphi_;
    bool zero_ = false;
};

struct WitnessResult {
    WitnessFunction witness;
    // mu(h) - nu(h) = int h'(t) H(t) dt = int |H| phi'(2 d(t, A)) dt.
    double zeta_lower = 0.0;
    double abs_error = 0.0;
    double working_lo = 0.0, working_hi = 0.0;
};

// Builds the witness for two laws with continuous, strictly increasing cdfs
// (e.g. outputs of smooth()) and equal means. Throws InvalidArgument if the
// means differ, the cdf gap has no sign change on the working interval or an
// input is not continuous. The witness refers to F and G, which must outlive
// it.
WitnessResult dual_witness(const CostFunction& c, const Distribution& F, const Distribution& G);

}  // namespace ctl
