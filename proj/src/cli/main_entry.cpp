#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ctl/experiments.hpp"

namespace ctl::cli {

namespace {

ExperimentConfig load_config(const std::string& path, const std::string& tag) {
    if (path.empty()) return default_config(tag);
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    if (j.is_object() && !j.contains("experiment")) j["experiment"] = tag;
    auto cfg = ExperimentConfig::from_json(j);
    if (cfg.experiment != tag)
        throw ConfigError("config " + path + " is for '" + cfg.experiment + "', not '" + tag + "'");
    return cfg;
}

int run_one(const std::string& tag, const std::string& config, int jobs, std::optional<std::uint64_t> seed,
            const std::string& out) {
    auto cfg = load_config(config, tag);
    RunOptions opt;
    opt.jobs = jobs;
    opt.seed = seed;
    if (seed) cfg.rng_seed = seed;
    const auto table = run(cfg, opt);
    const std::string dir = out.empty() ? cfg.output_path : out;
    write_outputs(table, cfg, dir);
    std::printf("%s: %zu rows, %zu pass, %zu fail, %zu info -> %s/%s.csv\n", tag.c_str(), table.rows.size(),
                table.count("pass"), table.count("fail"), table.count("info"), dir.c_str(), tag.c_str());
    return static_cast<int>(table.ok() ? ExitCode::Ok : ExitCode::Failed);
}

int run_self_test(const std::string& out) {
    const auto results = coverage_self_test(out.empty() ? "ctl_selftest" : out);
    bool ok = true;
    for (const auto& r : results) {
        std::string missing;
        for (const auto& m : r.missing) missing += (missing.empty() ? "" : ",") + m;
        const bool pass = r.ran && r.missing.empty();
        ok = ok && pass;
        std::printf("%s %s%s%s\n", pass ? "PASS" : "FAIL", r.experiment.c_str(),
                    missing.empty() ? "" : (" missing=" + missing).c_str(), r.error.empty() ? "" : (" error=" + r.error).c_str());
    }
    return static_cast<int>(ok ? ExitCode::Ok : ExitCode::Failed);
}

}  // namespace

int main_entry(int argc, char** argv) {
    CLI::App app{"ctl: exact transport costs, couplings and normal-approximation bounds"};
    app.require_subcommand(1);
    std::string config, out;
    int jobs = 1;
    std::optional<std::uint64_t> seed;
    std::string chosen;

    for (const auto& tag : experiment_tags()) {
        auto* sub = app.add_subcommand(tag, "run the " + tag + " experiment");
        sub->add_option("--config", config, "JSON experiment config (default: built-in grid)");
        sub->add_option("--jobs", jobs, "worker threads for grid points")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "RNG seed, overrides the config");
        sub->add_option("--out", out, "output directory (default: config output_path)");
        sub->callback([&chosen, tag] { chosen = tag; });
    }
    auto* self = app.add_subcommand("selftest", "run every experiment on a small grid and check module coverage");
    self->add_option("--out", out, "scratch directory");
    self->callback([&chosen] { chosen = "selftest"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::ConfigError);
    }

    try {
        if (chosen == "selftest") return run_self_test(out);
        return run_one(chosen, config, jobs, seed, out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return static_cast<int>(ExitCode::ConfigError);
    } catch (const InvalidArgument& e) {
        std::fprintf(stderr, "invalid argument: %s\n", e.what());
        return static_cast<int>(ExitCode::ConfigError);
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return static_cast<int>(ExitCode::ConfigError);
    } catch (const BudgetExceeded& e) {
        std::fprintf(stderr, "budget: %s\n", e.what());
        return static_cast<int>(ExitCode::Budget);
    } catch (const Error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return static_cast<int>(ExitCode::Numerical);
    }
}

}  // namespace ctl::cli
