#pragma once

// Tail functionals of a law Z: conditional value at risk
// Q~(u) = (1/u) int_0^u Q(v) dv with Q(v) = F^{-1}(1 - v), the tail
// H(x) = P(Z > x), its majorant
// H~(x) = inf_{t < x} E(Z - t)_+ / (x - t), and the weak moments
// Lambda_q = sup_x x^q H(x), Lambda~_q = sup_x x^q H~(x).

#include <iosfwd>
#include <vector>

#include "ctl/distribution.hpp"

namespace ctl {

struct CvarResult {
    double variational = 0.0;  // inf_t t + E(Z - t)_+ / u
    double integral = 0.0;     // (1/u) int_0^u Q(v) dv
    double argmin = 0.0;
};

// Both routes; throws InvalidArgument unless 0 < u <= 1 and
// DivergenceError if E|Z| is not finite.
CvarResult cvar(const Distribution& d, double u);

// Q~(u) by the integral route (exact for discrete laws).
double qtilde(const Distribution& d, double u);

// H~(x) by golden-section over t in [quantile(1e-12), x), capped at 1.
double htilde(const Distribution& d, double x);

// H~(x) for a discrete law: the infimum sits at an atom below x, at
// t -> -inf (value 1) or at t -> x- (value P(Z = x) when E(Z - x)_+ = 0).
double htilde_exact(const DiscreteLaw& d, double x);

struct WeakMoments {
    double q = 0.0;
    double lambda = 0.0;        // sup_x x^q H(x)
    double lambda_tilde = 0.0;  // sup_x x^q H~(x)
    double calderon = 0.0;      // sup_u u^{1/q} Q~(u)
    double x_lambda = 0.0, x_lambda_tilde = 0.0, u_calderon = 0.0;
};

// 512-point log grids (x over [Q(1 - 1e-10), Q(1e-10)], u over
// [1e-10, 1]) then golden refinement around the best grid point. Discrete
// laws use the exact atom form sup_a a^q P(Z >= a) for Lambda_q. Throws
// DivergenceError if a sup sits at the top of its grid and is still growing.
WeakMoments weak_moments(const Distribution& d, double q);

// Finite joint law of (A, B).
class JointDiscrete {
public:
    struct Atom {
        double a, b, p;
    };

    explicit JointDiscrete(std::vector<Atom> atoms);
    static JointDiscrete independent(const DiscreteLaw& A, const DiscreteLaw& B);
    // (F_A^{-1}(U), F_B^{-1}(U)).
    static JointDiscrete comonotone(const DiscreteLaw& A, const DiscreteLaw& B);

    const std::vector<Atom>& atoms() const { return atoms_; }
    DiscretePtr law_a() const;
    DiscretePtr law_b() const;
    DiscretePtr law_sum() const;
    // Law of |A - B|.
    DiscretePtr law_abs_diff() const;

private:
    DiscretePtr marginal(double wa, double wb, bool abs_value) const;
    std::vector<Atom> atoms_;
};

// max(H~_A(t), H~_B(x - t)) - H~_{A+B}(x), exact discrete evaluation.
double htilde_subadditivity_check(const JointDiscrete& joint, double x, double t);

// Tail functionals of one law, with tabulation.
class TailProfile {
public:
    explicit TailProfile(DistPtr source);

    const Distribution& source() const { return *source_; }
    double Q(double v) const;
    double Qtilde(double u) const;
    double H(double x) const;
    double Htilde(double x) const;
    double lambda(double q) const;
    double lambda_tilde(double q) const;

    // Two RFC-4180 tables: "u,Q,Qtilde" and "x,H,Htilde".
    void write_quantile_csv(std::ostream& os, const std::vector<double>& u_grid) const;
    void write_tail_csv(std::ostream& os, const std::vector<double>& x_grid) const;

private:
    DistPtr source_;
    const DiscreteLaw* discrete_;
};

}  // namespace ctl
