#pragma once

// Even convex transport costs: the Huber-shaped generators psi_x, the
// quadratic-then-power costs g_p, the entropy cost (1+|x|)ln(1+|x|) - |x|,
// plain powers |x|^p and user-supplied members. Class-Psi members (even,
// convex, C^1, concave sublinear derivative with unit curvature at 0) also
// carry their mixing tail y -> nu([y, inf)), which equals the second
// derivative.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctl {

enum class CostKind { PsiX, Gp, Entropy, PowerP, Custom };

class CostFunction {
public:
    using Fn = std::function<double(double)>;

    // psi_x(t) = t^2/4 for |t| <= 2x, |t|x - x^2 beyond.
    static CostFunction psi_x(double x);
    // g_p(x) = x^2/2 on [0,1], x^p/p + 1/2 - 1/p beyond, extended evenly.
    static CostFunction g_p(double p);
    static CostFunction entropy();
    static CostFunction power(double p);

    // A user class-Psi member. Validated on a fixed logarithmic grid against
    // the class conditions; throws InvalidArgument on failure. `kinks` lists
    // the nonnegative points where the mixing tail may jump.
    static CostFunction custom_class_psi(std::string name, Fn eval, Fn deriv, Fn mixing_tail,
                                         std::vector<double> kinks = {});
    // A user even convex cost outside class Psi. Validated for evenness,
    // convexity and eval(0) = 0.
    static CostFunction custom_convex(std::string name, Fn eval, Fn deriv, std::vector<double> kinks = {});

    double eval(double t) const;
    double operator()(double t) const { return eval(t); }
    double deriv(double t) const;

    bool has_mixing_tail() const;
    // nu([y, inf)) for y > 0; throws if the cost has no mixing tail.
    double mixing_tail(double y) const;

    CostKind kind() const { return kind_; }
    double parameter() const { return param_; }
    bool is_class_psi() const;
    const std::string& name() const;

    // Nonnegative |t| values where the cost is only C^1 (or C^0 for p = 1).
    std::span<const double> kinks() const { return kinks_; }

    // a such that eval(t) <= a (1 + t^2) for all t, when such a bound exists.
    std::optional<double> quadratic_envelope() const;

private:
    struct Custom {
        std::string name;
        Fn eval;
        Fn deriv;
        Fn mixing_tail;  // empty when absent
        bool class_psi = false;
    };

    CostFunction(CostKind kind, double param, std::vector<double> kinks, std::string name);

    CostKind kind_;
    double param_;
    std::vector<double> kinks_;
    std::string name_;
    std::shared_ptr<const Custom> custom_;
};

// Young dual sup_t (x t - c(t)). Closed form for the built-in kinds, otherwise
// bisection of deriv(t) = x to 1e-12. Returns +inf when the supremum diverges
// (e.g. psi_x with |x| > x, power p = 1 with |x| > 1).
double young_dual(const CostFunction& c, double x);

// max over the grid of |deriv(z) - int_0^z mixing_tail(y) dy|, the integral by
// adaptive quadrature split at the cost's kinks. Throws if no mixing tail.
double mixture_check(const CostFunction& c, std::span<const double> z_grid);

// Outcome of the numerical class-Psi membership test.
struct ClassPsiCheck {
    bool ok = true;
    std::vector<std::string> failures;
};

// Checks the class conditions for (eval, deriv, mixing_tail) on the fixed
// logarithmic grid. The sublinearity limit deriv(x)/x -> 0 is only checked by
// decay sampling, so a pass is necessary, not sufficient.
ClassPsiCheck check_class_psi(const CostFunction::Fn& eval, const CostFunction::Fn& deriv,
                              const CostFunction::Fn& mixing_tail);

}  // namespace ctl
