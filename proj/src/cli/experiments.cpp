#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <numbers>
#include <sstream>
#include <thread>

#include <omp.h>

#include "ctl/asymptotics.hpp"
#include "ctl/bounds.hpp"
#include "ctl/couplings.hpp"
#include "ctl/experiments.hpp"
#include "ctl/numeric.hpp"
#include "ctl/tails.hpp"
#include "ctl/transport.hpp"

namespace ctl::cli {

namespace {

using Clock = std::chrono::steady_clock;
using coverage::Module;

// Evaluates f(0..count-1) on `jobs` threads; results keep index order. The
// budget is checked before each point starts and after it ends.
template <class F>
std::vector<Row> run_grid(std::size_t count, int jobs, double budget, Clock::time_point start, F&& f) {
    std::vector<Row> out(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> over{false};
    auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };
    auto worker = [&](bool nested) {
        if (nested) omp_set_num_threads(1);
        for (;;) {
            if (over.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            if (elapsed() > budget) {
                over = true;
                return;
            }
            try {
                out[i] = f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
            if (elapsed() > budget) over = true;
        }
    };
    const int n = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
    if (n == 1) {
        worker(false);
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < n; ++k) pool.emplace_back(worker, true);
        for (auto& t : pool) t.join();
    }
    if (over) throw BudgetExceeded("wall-clock budget of " + format_number(budget) + " s exceeded");
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

Row bound_row(std::vector<std::string> params, double measured, double bound, double tol, std::string citation) {
    Row r;
    r.params = std::move(params);
    r.measured = measured;
    r.bound_or_limit = bound;
    r.margin = bound - measured;
    r.status = *r.margin >= -tol ? "pass" : "fail";
    r.citation = std::move(citation);
    return r;
}

Row info_row(std::vector<std::string> params, double measured, std::string citation) {
    Row r;
    r.params = std::move(params);
    r.measured = measured;
    r.status = "info";
    r.citation = std::move(citation);
    return r;
}

std::string fmt(double v) { return format_number(v); }

int as_n(double v) {
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e7) throw ConfigError("grid n must hold positive integers");
    return static_cast<int>(v);
}

// The summand law X and its exact n-fold sums.
struct Family {
    std::string name;
    DistPtr x;
    DiscretePtr discrete;
    std::function<DistPtr(int)> sum;
};

Family family_of(const ExperimentConfig& cfg) {
    Family f;
    f.name = cfg.family;
    FamilySpec spec{cfg.family, cfg.family_param, std::nullopt};
    if (cfg.family == "lattice") {
        if (!cfg.options.contains("lattice")) throw ConfigError("lattice family needs options.lattice");
        spec.lattice = LatticeLaw::from_json(cfg.options.at("lattice"));
    }
    try {
        f.x = make_family(spec);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("family: ") + e.what());
    }
    f.discrete = f.x->as_discrete() ? std::static_pointer_cast<const DiscreteLaw>(f.x) : nullptr;
    if (f.discrete) {
        auto d = f.discrete;
        f.sum = [d](int n) -> DistPtr { return n == 1 ? d : convolve_n(*d, n); };
    } else if (cfg.family == "exponential") {
        f.sum = [](int n) { return centered_exponential_sum(n); };
    } else if (cfg.family == "normal") {
        const double v = f.x->variance();
        f.sum = [v](int n) { return normal(0.0, n * v); };
    } else {
        f.sum = [name = cfg.family](int) -> DistPtr {
            throw ConfigError("family '" + name + "' has no exact n-fold sum");
        };
    }
    return f;
}

std::string family_label(const ExperimentConfig& cfg) {
    if (cfg.family_param == 0.0) return cfg.family;
    return cfg.family + "(" + fmt(cfg.family_param) + ")";
}

CostFunction parse_cost(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind")) throw ConfigError("cost spec must be an object with 'kind'");
    const auto kind = j.at("kind").get<std::string>();
    const double p = j.value("param", 0.0);
    try {
        if (kind == "psi_x") return CostFunction::psi_x(p);
        if (kind == "g_p") return CostFunction::g_p(p);
        if (kind == "entropy") return CostFunction::entropy();
        if (kind == "power") return CostFunction::power(p);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("cost: ") + e.what());
    }
    throw ConfigError("unknown cost kind '" + kind + "'");
}

std::vector<CostFunction> parse_costs(const ExperimentConfig& cfg) {
    if (!cfg.options.contains("costs")) throw ConfigError(cfg.experiment + ": options.costs required");
    const auto& a = cfg.options.at("costs");
    if (!a.is_array() || a.empty()) throw ConfigError(cfg.experiment + ": options.costs must be a non-empty array");
    std::vector<CostFunction> out;
    for (const auto& c : a) out.push_back(parse_cost(c));
    return out;
}

struct Context {
    const ExperimentConfig& cfg;
    const RunOptions& opt;
    double budget;
    Clock::time_point start;

    template <class F>
    std::vector<Row> grid(std::size_t count, F&& f) const {
        return run_grid(count, opt.jobs, budget, start, std::forward<F>(f));
    }
};

// ---------------------------------------------------------------------------
// cost: exact kappa_c(S_n, G_n) against the matching uniform bound
// ---------------------------------------------------------------------------

Table run_cost(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto fam = family_of(cfg);
    const auto xs = XStats::from_law(fam.x);
    const auto costs = parse_costs(cfg);
    std::vector<int> ns;
    for (double v : cfg.grid("n")) ns.push_back(as_n(v));
    const double s2 = xs.sigma * xs.sigma;

    Table t{cfg.experiment, {"family", "n", "cost"}, {}, {}};
    t.rows = ctx.grid(ns.size() * costs.size(), [&](std::size_t i) {
        const int n = ns[i / costs.size()];
        const auto& c = costs[i % costs.size()];
        const auto S = fam.sum(n);
        const auto G = normal(0.0, n * s2);
        const double k = kappa(c, *S, *G).value;
        std::vector<std::string> params{family_label(cfg), std::to_string(n), c.name()};
        const double p = c.parameter();
        switch (c.kind()) {
        case CostKind::PsiX:
            return bound_row(params, k, thm21_bound(xs, p, true).bound, cfg.tolerance,
                             "kappa_psi_x uniform bound, squared");
        case CostKind::Gp:
        case CostKind::Entropy: {
            const double b = thm22_bound(c, xs, phi_prime_moment(*fam.x, c)).bound;
            return bound_row(params, k, b * b, cfg.tolerance, "W_phi uniform bound, squared");
        }
        case CostKind::PowerP:
            if (p > 1 && p < 2) {
                const double b = prop_wp_bound(p, xs, fam.x->abs_moment(p + 2)).bound;
                return bound_row(params, k, std::pow(b, p), cfg.tolerance, "W_p uniform bound, p-th power");
            }
            if (p == 2 && xs.mu4) {
                const double b = w2_bound(xs).bound;
                return bound_row(params, k, b * b, cfg.tolerance, "W2 uniform bound, squared");
            }
            break;
        default: break;
        }
        return info_row(params, k, "no explicit bound for this cost");
    });
    return t;
}

// ---------------------------------------------------------------------------
// bound_check: tail and weak-moment bounds on Z_n = |S_n - G_n|
// ---------------------------------------------------------------------------

Table run_bound_check(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto fam = family_of(cfg);
    if (!fam.discrete) throw ConfigError("bound_check needs a discrete family");
    auto xs = XStats::from_law(fam.x);
    const double sigma = xs.sigma;

    struct Task {
        std::string check;
        int n;
        double arg;
        double p;
    };
    std::vector<Task> tasks;
    std::vector<int> ns;
    for (double v : cfg.grid("n")) ns.push_back(as_n(v));
    for (int n : ns) {
        if (cfg.has_grid("t"))
            for (double tt : cfg.grid("t")) tasks.push_back({"htilde_tail", n, tt, kNaN});
        if (cfg.has_grid("p")) {
            for (double p : cfg.grid("p")) {
                tasks.push_back({"weak_moment", n, kNaN, p});
                tasks.push_back({"calderon_identity", n, kNaN, p});
                if (cfg.has_grid("u"))
                    for (double u : cfg.grid("u")) tasks.push_back({"cvar_gap", n, u, p});
            }
        }
    }
    if (tasks.empty()) throw ConfigError("bound_check: needs grid t or p");

    Table t{cfg.experiment, {"family", "check", "n", "arg", "p"}, {}, {}};
    t.rows = ctx.grid(tasks.size(), [&](std::size_t i) {
        const auto& k = tasks[i];
        const auto S = std::static_pointer_cast<const DiscreteLaw>(fam.sum(k.n));
        const CouplingGapLaw Z(quantile_coupling(S, k.n, sigma));
        std::vector<std::string> params{family_label(cfg), k.check, std::to_string(k.n),
                                        std::isnan(k.arg) ? "" : fmt(k.arg), std::isnan(k.p) ? "" : fmt(k.p)};
        if (k.check == "htilde_tail")
            return bound_row(params, htilde(Z, k.arg), thm23_bound(xs, k.arg).bound, cfg.tolerance,
                             "H~ tail bound on |S_n - G_n|");
        if (k.check == "calderon_identity") {
            const auto w = weak_moments(Z, k.p);
            const double diff = std::abs(w.lambda_tilde - std::pow(w.calderon, k.p));
            const double tol = 1e-8 * std::max(1.0, w.lambda_tilde);
            return bound_row(params, diff, tol, 0.0, "Lambda~_p = Calderon weak norm^p");
        }
        XStats local = xs;
        local.weak_Lambda_p2 = weak_moments(*fold(fam.x), k.p + 2).lambda;
        const auto b = cor24_bound(k.p, local);
        if (k.check == "weak_moment")
            return bound_row(params, weak_moments(Z, k.p).lambda_tilde, b.kappa_tilde(), cfg.tolerance,
                             "weak-moment bound kappa~_p on Lambda~_p(|S_n - G_n|)");
        const double lhs = std::abs(qtilde(*S, k.arg) - gaussian_cvar(sigma, k.n, k.arg));
        return bound_row(params, lhs, cvar_gap_bound(b.kappa_tilde(), k.p, k.arg), cfg.tolerance,
                         "CVaR gap (kappa~_p / u)^{1/p}");
    });
    return t;
}

// ---------------------------------------------------------------------------
// poisson_w2
// ---------------------------------------------------------------------------

Table run_poisson_w2(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto lambdas = cfg.grid("lambda");
    std::vector<std::string> quantities{"w2sq"};
    if (cfg.options.contains("quantities")) quantities = cfg.options.at("quantities").get<std::vector<std::string>>();
    if (quantities.empty()) throw ConfigError("poisson_w2: options.quantities is empty");
    for (const auto& q : quantities)
        if (q != "w2sq" && q != "w1") throw ConfigError("poisson_w2: unknown quantity '" + q + "'");
    Table t{cfg.experiment, {"lambda", "quantity"}, {}, {}};
    t.rows = ctx.grid(lambdas.size() * quantities.size(), [&](std::size_t i) {
        const double lam = lambdas[i / quantities.size()];
        const auto& q = quantities[i % quantities.size()];
        if (!(lam > 0.0)) throw ConfigError("poisson_w2: lambda must be positive");
        const auto X = centered_poisson(lam);
        const auto G = normal(0.0, lam);
        if (q == "w2sq")
            return bound_row({fmt(lam), q}, kappa(CostFunction::power(2), *X, *G).value, poisson_w2_bound(1.0),
                             cfg.tolerance, "Poisson-normal W2 constant: W2^2 <= 0.937");
        return bound_row({fmt(lam), q}, kappa(CostFunction::power(1), *X, *G).value, constants::kappa_mu3,
                         cfg.tolerance, "W1 <= W2 <= sqrt(0.937) <= 0.968");
    });
    return t;
}

// ---------------------------------------------------------------------------
// dyadic_mc
// ---------------------------------------------------------------------------

Table run_dyadic_mc(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto seed = ctx.opt.seed ? ctx.opt.seed : cfg.rng_seed;
    if (!seed) throw ConfigError("dyadic_mc: rng_seed is mandatory (config or --seed)");
    const auto ms = cfg.grid("m");
    const auto samples = cfg.options.value("samples", std::size_t{100'000});
    const int levels = cfg.options.value("levels", kDefaultDyadicLevels);
    if (samples < 2) throw ConfigError("dyadic_mc: samples must be >= 2");
    Table t{cfg.experiment, {"m", "samples", "levels", "se"}, {}, {}};
    t.rows = ctx.grid(ms.size(), [&](std::size_t i) {
        DyadicMcOptions o;
        o.m = ms[i];
        o.levels = levels;
        o.samples = samples;
        o.seed = *seed + i;
        o.parallel = ctx.opt.jobs <= 1;
        const auto s = dyadic_mc(o);
        Row r = bound_row({fmt(o.m), std::to_string(samples), std::to_string(levels), fmt(s.se_sq_gap)},
                          s.mean_sq_gap, poisson_w2_bound(1.0), 0.0, "dyadic Poisson coupling: E(Pi(m) - m - W)^2 <= 0.937");
        r.status = *r.margin >= -3 * s.se_sq_gap ? "pass" : "fail";
        return r;
    });
    return t;
}

// ---------------------------------------------------------------------------
// converge
// ---------------------------------------------------------------------------

Table run_converge(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto fam = family_of(cfg);
    const double var = fam.x->variance();
    if (std::abs(var - 1) > 1e-9) throw ConfigError("converge: the family must have unit variance");
    if (!cfg.options.contains("cost")) throw ConfigError("converge: options.cost required");
    const auto c = parse_cost(cfg.options.at("cost"));
    const bool shift = cfg.options.value("shift", false);
    std::optional<double> step;
    if (fam.discrete) {
        const auto lat = fam.discrete->lattice();
        if (lat) step = lat->step;
    }
    if (shift && !step) throw ConfigError("converge: shift needs a lattice family");
    LimitSpec spec{fam.x->moment(3), shift ? std::nullopt : step};
    const auto lim = limit_kappa(c, spec);
    std::vector<int> ns;
    for (double v : cfg.grid("n")) ns.push_back(as_n(v));
    std::function<DistPtr(int)> law = fam.sum;
    if (shift) {
        law = [&fam, h = *step](int n) -> DistPtr {
            return std::make_shared<ShiftedLatticeLaw>(std::static_pointer_cast<const DiscreteLaw>(fam.sum(n)), h);
        };
    }
    const std::string citation = spec.lattice ? "lattice limit E c(beta3 (G^2 - 1)/6 + h (U - 1/2))"
                                              : "limit E c(beta3 (G^2 - 1)/6)";
    Table t{cfg.experiment, {"family", "cost", "shift", "n", "gap"}, {}, {}};
    t.rows = ctx.grid(ns.size(), [&](std::size_t i) {
        const auto r = convergence_sequence(c, law, {ns[i]}, lim.value).front();
        Row row;
        row.params = {family_label(cfg), c.name(), shift ? "1" : "0", std::to_string(ns[i]), fmt(r.gap)};
        row.measured = r.value;
        row.bound_or_limit = lim.value;
        row.margin = lim.value - r.value;
        row.citation = citation;
        return row;
    });
    // Trend: each gap below the previous one; optional cap on the last gap.
    const double final_gap = cfg.options.value("final_gap", kInf);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const double g = std::abs(*t.rows[i].margin);
        bool ok = i == 0 || g < std::abs(*t.rows[i - 1].margin);
        if (i + 1 == t.rows.size()) ok = ok && g < final_gap;
        t.rows[i].status = ok ? "pass" : "fail";
    }
    return t;
}

// ---------------------------------------------------------------------------
// tails
// ---------------------------------------------------------------------------

Table run_tails(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto fam = family_of(cfg);
    std::vector<int> ns;
    for (double v : cfg.grid("n")) ns.push_back(as_n(v));
    const auto us = cfg.grid("u");
    const auto xsg = cfg.has_grid("x") ? cfg.grid("x") : std::vector<double>{};
    const auto ps = cfg.has_grid("p") ? cfg.grid("p") : std::vector<double>{};
    struct Task {
        std::string check;
        int n;
        double arg;
    };
    std::vector<Task> tasks;
    for (int n : ns) {
        for (double u : us) tasks.push_back({"cvar_identity", n, u});
        for (double x : xsg) tasks.push_back({"htilde_majorant", n, x});
        for (double p : ps) tasks.push_back({"calderon_identity", n, p});
    }
    Table t{cfg.experiment, {"family", "check", "n", "arg"}, {}, {}};
    t.rows = ctx.grid(tasks.size(), [&](std::size_t i) {
        const auto& k = tasks[i];
        const auto S = fam.sum(k.n);
        std::vector<std::string> params{family_label(cfg), k.check, std::to_string(k.n), fmt(k.arg)};
        if (k.check == "cvar_identity") {
            const auto r = cvar(*S, k.arg);
            const double diff = std::abs(r.variational - r.integral);
            return bound_row(params, diff, 1e-8 * std::max(1.0, std::abs(r.integral)), 0.0,
                             "CVaR variational form = quantile integral");
        }
        if (k.check == "htilde_majorant")
            return bound_row(params, S->sf(k.arg), htilde(*S, k.arg), cfg.tolerance, "H <= H~");
        const auto w = weak_moments(*fold(S), k.arg);
        const double diff = std::abs(w.lambda_tilde - std::pow(w.calderon, k.arg));
        return bound_row(params, diff, 1e-8 * std::max(1.0, w.lambda_tilde), 0.0, "Lambda~_p = Calderon weak norm^p");
    });
    for (int n : ns) {
        const TailProfile tp(fam.sum(n));
        std::ostringstream q, h;
        tp.write_quantile_csv(q, us);
        tp.write_tail_csv(h, xsg.empty() ? std::vector<double>{0.0, 1.0, 2.0} : xsg);
        t.side_tables.emplace_back("tails_quantile_n" + std::to_string(n) + ".csv", q.str());
        t.side_tables.emplace_back("tails_tail_n" + std::to_string(n) + ".csv", h.str());
    }
    return t;
}

// ---------------------------------------------------------------------------
// constants
// ---------------------------------------------------------------------------

Table run_constants(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    Table t{cfg.experiment, {"name"}, {}, {}};
    for (const auto& c : constant_table()) t.rows.push_back(info_row({c.name}, c.value, c.citation));
    for (int j = 1; j <= 5; ++j) {
        const double q = gaussian_derivative_l1(j), cf = gaussian_derivative_closed_form(j);
        t.rows.push_back(bound_row({"c" + std::to_string(j) + " quadrature"}, std::abs(q - cf), 1e-8, 0.0,
                                   "||phi^(j)||_1 quadrature vs closed form"));
    }
    const double weighted = 2 / std::sqrt(2 * std::numbers::pi * std::numbers::e) + 1 - 4.0 / 3 * normal_cdf(1.0);
    const auto wl = limit_weighted(Weight::normal_quantile_power(2), 1.0);
    t.rows.push_back(bound_row({"weighted_limit quadrature"}, std::abs(wl.value - weighted), 1e-10, 0.0,
                               "E(G^2 |G^2 - 1|)/6 = 2 (2 pi e)^{-1/2} + 1 - (4/3) Phi(1)"));
    const auto sl = limit_signed(Weight::normal_quantile_power(2), [](double x) { return x; }, 1.0);
    t.rows.push_back(bound_row({"signed_limit quadrature"}, std::abs(sl.value - 1.0 / 3), 1e-10, 0.0,
                               "E(G^2 (G^2 - 1))/6 = 1/3"));
    const auto pw = limit_poisson_wp(2.0);
    t.rows.push_back(bound_row({"sqrt5_over_6 quadrature"}, std::abs(pw.value - std::sqrt(5.0) / 6), 1e-10, 0.0,
                               "||(G^2 - 1)/6 + V||_2 = sqrt(5)/6"));
    const double lower = std::sqrt(2 * (1 - std::sqrt(2 / std::numbers::pi)));
    t.rows.push_back(bound_row({"rademacher_lower check"}, constants::rademacher_lower, lower, 0.0,
                               "0.63579 <= sqrt(2 (1 - sqrt(2/pi)))"));
    (void)ctx.budget;
    return t;
}

}  // namespace

std::vector<Module> claimed_modules(const std::string& tag) {
    if (tag == "cost") return {Module::CostKernel, Module::Distributions, Module::Transport, Module::Bounds};
    if (tag == "bound_check") return {Module::Distributions, Module::Couplings, Module::Tails, Module::Bounds};
    if (tag == "poisson_w2") return {Module::CostKernel, Module::Distributions, Module::Transport, Module::Bounds};
    if (tag == "dyadic_mc") return {Module::Couplings, Module::Bounds};
    if (tag == "converge")
        return {Module::CostKernel, Module::Distributions, Module::Transport, Module::Asymptotics};
    if (tag == "tails") return {Module::Distributions, Module::Tails};
    if (tag == "constants") return {Module::Bounds, Module::Asymptotics};
    throw ConfigError("unknown experiment '" + tag + "'");
}

ExperimentConfig default_config(const std::string& tag, bool small) {
    nlohmann::json j = {{"schema_version", kSchemaVersion}, {"experiment", tag}};
    if (tag == "cost") {
        j["family"] = "rademacher";
        j["grids"] = {{"n", small ? nlohmann::json{1, 4} : nlohmann::json{1, 4, 16, 64, 256}}};
        j["options"]["costs"] = {{{"kind", "psi_x"}, {"param", 1}},  {{"kind", "entropy"}},
                                 {{"kind", "g_p"}, {"param", 1.5}},  {{"kind", "power"}, {"param", 1.5}},
                                 {{"kind", "power"}, {"param", 2}}};
    } else if (tag == "bound_check") {
        j["family"] = "rademacher";
        j["grids"] = {{"n", small ? nlohmann::json{8} : nlohmann::json{32, 64}},
                      {"t", {1, 2, 5, 10, 20}},
                      {"p", {1.5}},
                      {"u", {0.1, 0.01}}};
    } else if (tag == "poisson_w2") {
        j["grids"] = {{"lambda", small ? nlohmann::json{0.5, 2} : nlohmann::json{0.25, 0.5, 1, 2, 4, 8, 16, 32, 64}}};
    } else if (tag == "dyadic_mc") {
        j["rng_seed"] = 20240601;
        j["grids"] = {{"m", small ? nlohmann::json{1} : nlohmann::json{0.5, 1, 2, 8, 32}}};
        j["options"] = {{"samples", small ? 2000 : 100000}, {"levels", kDefaultDyadicLevels}};
    } else if (tag == "converge") {
        j["family"] = {{"name", "poisson"}, {"param", 1}};
        j["grids"] = {{"n", small ? nlohmann::json{4, 16} : nlohmann::json{16, 64, 256, 1024}}};
        j["options"] = {{"cost", {{"kind", "power"}, {"param", 2}}}, {"shift", false}};
    } else if (tag == "tails") {
        j["family"] = {{"name", "poisson"}, {"param", 1}};
        j["grids"] = {{"n", small ? nlohmann::json{4} : nlohmann::json{4, 32}},
                      {"u", {0.5, 0.1, 0.01, 0.001}},
                      {"x", {0.5, 1, 2, 4}},
                      {"p", {1, 1.5}}};
    } else if (tag == "constants") {
        // no grids
    } else {
        throw ConfigError("unknown experiment '" + tag + "'");
    }
    return ExperimentConfig::from_json(j);
}

Table run(const ExperimentConfig& cfg, const RunOptions& opt) {
    if (opt.jobs < 1) throw ConfigError("--jobs must be >= 1");
    const Context ctx{cfg, opt, effective_budget(cfg, opt), Clock::now()};
    const auto& e = cfg.experiment;
    if (e == "cost") return run_cost(ctx);
    if (e == "bound_check") return run_bound_check(ctx);
    if (e == "poisson_w2") return run_poisson_w2(ctx);
    if (e == "dyadic_mc") return run_dyadic_mc(ctx);
    if (e == "converge") return run_converge(ctx);
    if (e == "tails") return run_tails(ctx);
    if (e == "constants") return run_constants(ctx);
    throw ConfigError("unknown experiment '" + e + "'");
}

std::vector<SelfTestResult> coverage_self_test(const std::string& scratch_dir) {
    std::vector<SelfTestResult> out;
    for (const auto& tag : experiment_tags()) {
        SelfTestResult r;
        r.experiment = tag;
        coverage::reset();
        try {
            const auto cfg = default_config(tag, true);
            const auto t = run(cfg);
            write_outputs(t, cfg, scratch_dir);
            r.ran = true;
        } catch (const std::exception& ex) {
            r.error = ex.what();
        }
        for (auto m : claimed_modules(tag))
            if (!coverage::touched(m)) r.missing.emplace_back(coverage::name(m));
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace ctl::cli
