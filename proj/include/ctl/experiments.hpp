#pragma once

// Declarative experiment runner behind the ctl command-line tool. Each
// experiment evaluates a grid of points, one CSV row per point, with the
// fixed columns experiment, <params...>, measured, bound_or_limit, margin,
// status, citation. Rows come out in grid order whatever --jobs is.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctl/coverage.hpp"
#include "ctl/error.hpp"

namespace ctl::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr double kDefaultMaxSeconds = 300.0;

enum class ExitCode : int {
    Ok = 0,
    Failed = 1,       // some row has status fail
    ConfigError = 2,  // unreadable or invalid config, bad flags
    Budget = 3,       // wall-clock cap exceeded
    Numerical = 4,    // divergence, convergence or capacity error
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class BudgetExceeded : public Error {
public:
    using Error::Error;
};

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    std::string experiment;
    std::string family = "rademacher";
    double family_param = 0.0;
    // Named grids, e.g. "n", "lambda", "t", "u", "p", "m", "x".
    nlohmann::json grids = nlohmann::json::object();
    std::optional<std::uint64_t> rng_seed;
    std::string output_path = ".";
    double max_seconds = kDefaultMaxSeconds;
    double tolerance = 1e-9;
    // Experiment-specific settings (costs, samples, levels, shift...).
    nlohmann::json options = nlohmann::json::object();

    // Throws ConfigError on a missing or wrong-typed field, unknown
    // experiment tag, schema mismatch or empty grid.
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    std::vector<double> grid(const std::string& name) const;
    bool has_grid(const std::string& name) const;
};

struct Row {
    std::vector<std::string> params;
    double measured = 0.0;
    std::optional<double> bound_or_limit;
    std::optional<double> margin;
    std::string status;  // pass, fail or info
    std::string citation;
};

struct Table {
    std::string experiment;
    std::vector<std::string> param_names;
    std::vector<Row> rows;
    // Extra CSV files written next to the main table: (file name, contents).
    std::vector<std::pair<std::string, std::string>> side_tables;

    std::size_t count(const std::string& status) const;
    bool ok() const { return count("fail") == 0; }
};

struct RunOptions {
    int jobs = 1;
    std::optional<std::uint64_t> seed;  // overrides the config
    std::optional<double> max_seconds;  // overrides config and environment
};

const std::vector<std::string>& experiment_tags();
// Library modules each experiment claims to exercise.
std::vector<coverage::Module> claimed_modules(const std::string& tag);
// Built-in config for a tag; `small` shrinks grids for self-tests.
ExperimentConfig default_config(const std::string& tag, bool small = false);

// Cap in seconds from RunOptions, then CTL_MAX_SECONDS, then the config.
double effective_budget(const ExperimentConfig& cfg, const RunOptions& opt);

Table run(const ExperimentConfig& cfg, const RunOptions& opt = {});

// RFC-4180 with CRLF line ends.
void write_csv(std::ostream& os, const Table& t);
std::string csv_field(const std::string& s);
std::string format_number(double v);
nlohmann::json summary(const Table& t, const ExperimentConfig& cfg);

// Writes <out>/<experiment>.csv and <experiment>.json (plus any side tables).
void write_outputs(const Table& t, const ExperimentConfig& cfg, const std::string& out_dir);

struct SelfTestResult {
    std::string experiment;
    std::vector<std::string> missing;  // claimed but untouched modules
    bool ran = false;
    std::string error;
};

// Runs each experiment's small config and checks module coverage.
std::vector<SelfTestResult> coverage_self_test(const std::string& scratch_dir);

// Entry point of the ctl tool.
int main_entry(int argc, char** argv);

}  // namespace ctl::cli
