#pragma once

// JSON run configuration for the command-line tool. Every key is optional;
// unknown keys are rejected so that typos do not silently fall back to
// defaults.

#include "elastic/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace elastic {

using json = nlohmann::json;

enum class ScheduleUnits {
    relative,  ///< sigma is a fraction of the bbox diagonal, lambda is divided by the mean area
    absolute,
};

struct LevelConfig {
    double sigma = 0.2;
    double lambda = 10.0;
    std::optional<double> tau;
    /// Overrides on top of the run-wide optimiser settings.
    json optim = json::object();
};

struct ScheduleConfig {
    ScheduleUnits units = ScheduleUnits::relative;
    std::vector<LevelConfig> levels{{0.2, 10.0, {}, json::object()},
                                    {0.1, 100.0, {}, json::object()},
                                    {0.05, 1000.0, {}, json::object()}};
    InitKind init = InitKind::decimate_source;
    std::optional<std::string> template_path;
    std::optional<std::size_t> init_faces;
    bool subdivide = true;
};

struct RunConfig {
    double srnf_weight = 1.0;
    double srcf_weight = 0.0;
    std::optional<double> tau;
    ScheduleConfig schedule;
    OptimConfig optim{};
    OptimConfig inversion = default_inversion_optim();
    std::size_t geodesic_samples = 5;
    int karcher_iterations = 1;
    bool allow_inconsistent_orientation = false;
    std::uint64_t seed = 0;
    int jobs = 0;
    std::optional<std::string> out;
};

namespace detail {

inline void check_keys(const json& j, std::string_view where,
                       std::initializer_list<std::string_view> allowed)
{
    if (!j.is_object()) {
        throw ConfigError(std::string(where) + " must be a JSON object");
    }
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw ConfigError("unknown config key '" + item.key() + "' in " + std::string(where));
        }
    }
}

template <class T>
void read_value(const json& j, const char* key, T& out, std::string_view where)
{
    if (!j.contains(key) || j.at(key).is_null()) {
        return;
    }
    try {
        out = j.at(key).get<T>();
    }
    catch (const json::exception&) {
        throw ConfigError("config key '" + std::string(where) + "." + key
                          + "' has the wrong type");
    }
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& out, std::string_view where)
{
    if (!j.contains(key) || j.at(key).is_null()) {
        return;
    }
    T v{};
    read_value(j, key, v, where);
    out = v;
}

inline void apply_optim(const json& j, OptimConfig& c, std::string_view where)
{
    check_keys(j, where,
               {"memory", "max_iters", "grad_tol", "rel_f_tol", "wolfe_c1", "wolfe_c2",
                "max_line_search"});
    read_value(j, "memory", c.memory, where);
    read_value(j, "max_iters", c.max_iters, where);
    read_value(j, "grad_tol", c.grad_tol, where);
    read_value(j, "rel_f_tol", c.rel_f_tol, where);
    read_value(j, "wolfe_c1", c.wolfe_c1, where);
    read_value(j, "wolfe_c2", c.wolfe_c2, where);
    read_value(j, "max_line_search", c.max_line_search, where);
    try {
        c.validate();
    }
    catch (const ConfigError& e) {
        throw ConfigError(std::string(where) + ": " + e.what());
    }
}

inline json optim_to_json(const OptimConfig& c)
{
    return {{"memory", c.memory},       {"max_iters", c.max_iters},
            {"grad_tol", c.grad_tol},   {"rel_f_tol", c.rel_f_tol},
            {"wolfe_c1", c.wolfe_c1},   {"wolfe_c2", c.wolfe_c2},
            {"max_line_search", c.max_line_search}};
}

inline std::string_view init_name(InitKind k)
{
    switch (k) {
    case InitKind::decimate_source: return "decimate_source";
    case InitKind::decimate_target: return "decimate_target";
    case InitKind::template_mesh: return "template";
    }
    return "decimate_source";
}

} // namespace detail

inline RunConfig parse_run_config(const json& j)
{
    using detail::read_value;
    RunConfig c;
    detail::check_keys(j, "config",
                       {"srnf_weight", "srcf_weight", "tau", "schedule", "optim", "inversion",
                        "geodesic", "karcher", "allow_inconsistent_orientation", "seed", "jobs",
                        "out"});
    read_value(j, "srnf_weight", c.srnf_weight, "config");
    read_value(j, "srcf_weight", c.srcf_weight, "config");
    detail::read_optional(j, "tau", c.tau, "config");
    read_value(j, "allow_inconsistent_orientation", c.allow_inconsistent_orientation, "config");
    read_value(j, "seed", c.seed, "config");
    read_value(j, "jobs", c.jobs, "config");
    detail::read_optional(j, "out", c.out, "config");
    if (j.contains("optim")) {
        detail::apply_optim(j.at("optim"), c.optim, "optim");
    }
    if (j.contains("inversion")) {
        detail::apply_optim(j.at("inversion"), c.inversion, "inversion");
    }
    if (j.contains("geodesic")) {
        detail::check_keys(j.at("geodesic"), "geodesic", {"samples"});
        read_value(j.at("geodesic"), "samples", c.geodesic_samples, "geodesic");
    }
    if (j.contains("karcher")) {
        detail::check_keys(j.at("karcher"), "karcher", {"iterations"});
        read_value(j.at("karcher"), "iterations", c.karcher_iterations, "karcher");
    }
    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        detail::check_keys(s, "schedule",
                           {"units", "levels", "init", "template", "init_faces", "subdivide"});
        auto& sc = c.schedule;
        std::string units = "relative";
        read_value(s, "units", units, "schedule");
        if (units == "relative") {
            sc.units = ScheduleUnits::relative;
        }
        else if (units == "absolute") {
            sc.units = ScheduleUnits::absolute;
        }
        else {
            throw ConfigError("schedule.units must be 'relative' or 'absolute'");
        }
        std::string init = "decimate_source";
        read_value(s, "init", init, "schedule");
        if (init == "decimate_source") {
            sc.init = InitKind::decimate_source;
        }
        else if (init == "decimate_target") {
            sc.init = InitKind::decimate_target;
        }
        else if (init == "template") {
            sc.init = InitKind::template_mesh;
        }
        else {
            throw ConfigError("schedule.init must be decimate_source, decimate_target or template");
        }
        detail::read_optional(s, "template", sc.template_path, "schedule");
        detail::read_optional(s, "init_faces", sc.init_faces, "schedule");
        read_value(s, "subdivide", sc.subdivide, "schedule");
        if (s.contains("levels")) {
            if (!s.at("levels").is_array() || s.at("levels").empty()) {
                throw ConfigError("schedule.levels must be a non-empty array");
            }
            sc.levels.clear();
            for (std::size_t i = 0; i < s.at("levels").size(); ++i) {
                const json& l = s.at("levels")[i];
                const std::string where = "schedule.levels[" + std::to_string(i) + "]";
                detail::check_keys(l, where, {"sigma", "lambda", "tau", "optim"});
                if (!l.contains("sigma") || !l.contains("lambda")) {
                    throw ConfigError(where + " needs both 'sigma' and 'lambda'");
                }
                LevelConfig lc;
                read_value(l, "sigma", lc.sigma, where);
                read_value(l, "lambda", lc.lambda, where);
                detail::read_optional(l, "tau", lc.tau, where);
                if (l.contains("optim")) {
                    lc.optim = l.at("optim");
                    OptimConfig probe;
                    detail::apply_optim(lc.optim, probe, where + ".optim");
                }
                if (!(lc.sigma > 0.0) || !(lc.lambda > 0.0)) {
                    throw ConfigError(where + ": sigma and lambda must be positive");
                }
                sc.levels.push_back(std::move(lc));
            }
        }
    }
    if (c.schedule.init == InitKind::template_mesh && !c.schedule.template_path) {
        throw ConfigError("schedule.init = template requires schedule.template");
    }
    if (c.geodesic_samples < 2) {
        throw ConfigError("geodesic.samples must be at least 2");
    }
    if (c.karcher_iterations < 1) {
        throw ConfigError("karcher.iterations must be positive");
    }
    if (c.jobs < 0) {
        throw ConfigError("jobs must be nonnegative");
    }
    MatchConfig probe;
    probe.srnf_weight = c.srnf_weight;
    probe.srcf_weight = c.srcf_weight;
    probe.kernel.tau = c.tau;
    probe.validate();
    return c;
}

/// Parses a JSON document; syntax errors name the line and column.
inline RunConfig parse_run_config_text(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    }
    catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON config: ") + e.what());
    }
    return parse_run_config(j);
}

inline RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config_text(ss.str());
}

/// The fully resolved configuration, defaults included.
inline json to_json(const RunConfig& c)
{
    json levels = json::array();
    for (const auto& l : c.schedule.levels) {
        OptimConfig o = c.optim;
        detail::apply_optim(l.optim, o, "level optim");
        levels.push_back({{"sigma", l.sigma},
                          {"lambda", l.lambda},
                          {"tau", l.tau ? json(*l.tau) : json(nullptr)},
                          {"optim", detail::optim_to_json(o)}});
    }
    json schedule = {
        {"units", c.schedule.units == ScheduleUnits::relative ? "relative" : "absolute"},
        {"levels", levels},
        {"init", detail::init_name(c.schedule.init)},
        {"template", c.schedule.template_path ? json(*c.schedule.template_path) : json(nullptr)},
        {"init_faces", c.schedule.init_faces ? json(*c.schedule.init_faces) : json(nullptr)},
        {"subdivide", c.schedule.subdivide},
    };
    return {{"srnf_weight", c.srnf_weight},
            {"srcf_weight", c.srcf_weight},
            {"tau", c.tau ? json(*c.tau) : json(nullptr)},
            {"schedule", schedule},
            {"optim", detail::optim_to_json(c.optim)},
            {"inversion", detail::optim_to_json(c.inversion)},
            {"geodesic", {{"samples", c.geodesic_samples}}},
            {"karcher", {{"iterations", c.karcher_iterations}}},
            {"allow_inconsistent_orientation", c.allow_inconsistent_orientation},
            {"seed", c.seed},
            {"jobs", c.jobs},
            {"out", c.out ? json(*c.out) : json(nullptr)}};
}

inline MatchConfig base_match_config(const RunConfig& c)
{
    MatchConfig m;
    m.srnf_weight = c.srnf_weight;
    m.srcf_weight = c.srcf_weight;
    m.kernel.tau = c.tau;
    return m;
}

/// Absolute schedule for a pair of input meshes. `template_mesh` must be
/// provided when the config asks for template initialisation.
inline MultiResSchedule make_schedule(const RunConfig& c, const TriangleMesh& q0,
                                      const TriangleMesh& q1,
                                      const std::optional<TriangleMesh>& template_mesh = {})
{
    MultiResSchedule s;
    for (const auto& l : c.schedule.levels) {
        LevelSpec spec{l.sigma, l.lambda, l.tau, c.optim};
        detail::apply_optim(l.optim, spec.optim, "level optim");
        s.levels.push_back(spec);
    }
    if (c.schedule.units == ScheduleUnits::relative) {
        s.levels = resolve_relative(std::move(s.levels), ScheduleScale::of(q0, q1));
    }
    s.init.kind = c.schedule.init;
    s.init.faces = c.schedule.init_faces;
    s.subdivide_between_levels = c.schedule.subdivide;
    if (s.init.kind == InitKind::template_mesh) {
        if (!template_mesh) {
            throw ConfigError("template initialisation requested but no template mesh loaded");
        }
        s.init.template_mesh = template_mesh;
    }
    return s;
}

} // namespace elastic
