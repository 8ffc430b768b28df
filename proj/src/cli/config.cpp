#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ctl/experiments.hpp"

namespace ctl::cli {

const std::vector<std::string>& experiment_tags() {
    static const std::vector<std::string> tags = {"cost",      "bound_check", "poisson_w2", "dyadic_mc",
                                                  "converge", "tails",       "constants"};
    return tags;
}

namespace {

bool known_tag(const std::string& t) {
    const auto& tags = experiment_tags();
    return std::find(tags.begin(), tags.end(), t) != tags.end();
}

template <class T>
T get_field(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config: field '") + key + "' has the wrong type");
    }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    ExperimentConfig c;
    if (!j.contains("schema_version")) throw ConfigError("config: schema_version missing");
    c.schema_version = get_field<int>(j, "schema_version", 0);
    if (c.schema_version != kSchemaVersion)
        throw ConfigError("config: unsupported schema_version " + std::to_string(c.schema_version));
    c.experiment = get_field<std::string>(j, "experiment", "");
    if (!known_tag(c.experiment)) throw ConfigError("config: unknown experiment '" + c.experiment + "'");

    if (j.contains("family")) {
        const auto& f = j.at("family");
        if (f.is_string()) {
            c.family = f.get<std::string>();
        } else if (f.is_object()) {
            c.family = get_field<std::string>(f, "name", c.family);
            c.family_param = get_field<double>(f, "param", 0.0);
        } else {
            throw ConfigError("config: family must be a string or an object");
        }
    }
    if (j.contains("grids")) {
        const auto& g = j.at("grids");
        if (!g.is_object()) throw ConfigError("config: grids must be an object");
        for (const auto& [name, values] : g.items()) {
            if (!values.is_array()) throw ConfigError("config: grid '" + name + "' must be an array");
            if (values.empty()) throw ConfigError("config: grid '" + name + "' is empty");
            for (const auto& v : values)
                if (!v.is_number()) throw ConfigError("config: grid '" + name + "' must hold numbers");
        }
        c.grids = g;
    }
    if (j.contains("rng_seed")) {
        const auto& s = j.at("rng_seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
            throw ConfigError("config: rng_seed must be a nonnegative integer");
        c.rng_seed = s.get<std::uint64_t>();
    }
    c.output_path = get_field<std::string>(j, "output_path", c.output_path);
    c.max_seconds = get_field<double>(j, "max_seconds", c.max_seconds);
    if (!(c.max_seconds > 0.0)) throw ConfigError("config: max_seconds must be positive");
    c.tolerance = get_field<double>(j, "tolerance", c.tolerance);
    if (!(c.tolerance >= 0.0)) throw ConfigError("config: tolerance must be nonnegative");
    if (j.contains("options")) {
        if (!j.at("options").is_object()) throw ConfigError("config: options must be an object");
        c.options = j.at("options");
    }
    return c;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["experiment"] = experiment;
    j["family"] = {{"name", family}, {"param", family_param}};
    j["grids"] = grids;
    if (rng_seed) j["rng_seed"] = *rng_seed;
    j["output_path"] = output_path;
    j["max_seconds"] = max_seconds;
    j["tolerance"] = tolerance;
    j["options"] = options;
    return j;
}

bool ExperimentConfig::has_grid(const std::string& name) const { return grids.contains(name); }

std::vector<double> ExperimentConfig::grid(const std::string& name) const {
    if (!grids.contains(name)) throw ConfigError("config: grid '" + name + "' required by " + experiment);
    auto v = grids.at(name).get<std::vector<double>>();
    if (v.empty()) throw ConfigError("config: grid '" + name + "' is empty");
    return v;
}

double effective_budget(const ExperimentConfig& cfg, const RunOptions& opt) {
    if (opt.max_seconds) return *opt.max_seconds;
    if (const char* env = std::getenv("CTL_MAX_SECONDS")) {
        char* end = nullptr;
        const double v = std::strtod(env, &end);
        if (end == env || *end != '\0' || !(v > 0.0)) throw ConfigError("CTL_MAX_SECONDS must be a positive number");
        return v;
    }
    return cfg.max_seconds;
}

std::size_t Table::count(const std::string& status) const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [&](const Row& r) { return r.status == status; }));
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

void write_csv(std::ostream& os, const Table& t) {
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_field(cells[i]);
        os << "\r\n";
    };
    std::vector<std::string> head{"experiment"};
    head.insert(head.end(), t.param_names.begin(), t.param_names.end());
    for (const char* c : {"measured", "bound_or_limit", "margin", "status", "citation"}) head.emplace_back(c);
    line(head);
    for (const auto& r : t.rows) {
        std::vector<std::string> cells{t.experiment};
        cells.insert(cells.end(), r.params.begin(), r.params.end());
        cells.push_back(format_number(r.measured));
        cells.push_back(r.bound_or_limit ? format_number(*r.bound_or_limit) : "");
        cells.push_back(r.margin ? format_number(*r.margin) : "");
        cells.push_back(r.status);
        cells.push_back(r.citation);
        line(cells);
    }
}

nlohmann::json summary(const Table& t, const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["experiment"] = t.experiment;
    j["rows"] = t.rows.size();
    j["pass"] = t.count("pass");
    j["fail"] = t.count("fail");
    j["info"] = t.count("info");
    j["status"] = t.ok() ? "pass" : "fail";
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& r : t.rows)
        if (r.margin && r.status != "info") worst = std::min(worst, *r.margin);
    j["min_margin"] = std::isfinite(worst) ? nlohmann::json(worst) : nlohmann::json(nullptr);
    j["csv"] = t.experiment + ".csv";
    auto& side = j["side_tables"] = nlohmann::json::array();
    for (const auto& s : t.side_tables) side.push_back(s.first);
    j["config"] = cfg.to_json();
    return j;
}

void write_outputs(const Table& t, const ExperimentConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + out_dir + ": " + ec.message());
    auto open = [&](const std::string& name) {
        std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
        if (!f) throw ConfigError("cannot write " + (fs::path(out_dir) / name).string());
        return f;
    };
    {
        auto f = open(t.experiment + ".csv");
        write_csv(f, t);
    }
    for (const auto& [name, body] : t.side_tables) {
        auto f = open(name);
        f << body;
    }
    auto f = open(t.experiment + ".json");
    f << summary(t, cfg).dump(2) << "\n";
}

}  // namespace ctl::cli
