// elasticmatch: command-line front end for elastic surface matching.
//
//   elasticmatch match    SOURCE TARGET     --out DIR [--config FILE]
//   elasticmatch geodesic SOURCE TARGET     --out DIR [--samples N]
//   elasticmatch invert   TARGET --init M   --out DIR
//   elasticmatch distmat  LIST              --out DIR
//   elasticmatch karcher  LIST --template M --out DIR [--iterations N]
//
// Exit codes: 0 success, 1 input or configuration error, 2 optimisation
// degraded, 3 internal error.

#include "elastic/elastic.hpp"
#include "elastic/run_config.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#ifndef ELASTICMATCH_VERSION
#define ELASTICMATCH_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace elastic;

namespace {

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel g_log_level = LogLevel::info;

template <class... Args>
void log(LogLevel level, const Args&... args)
{
    if (level > g_log_level) {
        return;
    }
    std::ostringstream os;
    os << "[elasticmatch] ";
    (os << ... << args);
    std::cerr << os.str() << '\n';
}

void init_logging(bool quiet)
{
    if (const char* env = std::getenv("ELASTICMATCH_LOG")) {
        const std::string v = env;
        if (v == "error") {
            g_log_level = LogLevel::error;
        }
        else if (v == "info") {
            g_log_level = LogLevel::info;
        }
        else if (v == "debug") {
            g_log_level = LogLevel::debug;
        }
        else {
            log(LogLevel::error, "ignoring ELASTICMATCH_LOG=", v, " (expected error, info or debug)");
        }
    }
    if (quiet) {
        g_log_level = LogLevel::error;
    }
}

/// Optimisation finished, but in a degraded state.
struct Degraded {
    std::string reason;
};

std::uint64_t fnv1a_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string hex(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

struct Common {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    bool quiet = false;
};

struct Run {
    RunConfig config;
    fs::path out;
    json inputs = json::object();
    json timings = json::object();
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

Run start_run(const Common& common)
{
    init_logging(common.quiet);
    Run run;
    if (!common.config_path.empty()) {
        run.config = load_run_config(common.config_path);
    }
    if (common.seed) {
        run.config.seed = *common.seed;
    }
    if (common.jobs) {
        if (*common.jobs < 0) {
            throw ConfigError("--jobs must be nonnegative");
        }
        run.config.jobs = *common.jobs;
    }
    if (!common.out.empty()) {
        run.config.out = common.out;
    }
    if (!run.config.out) {
        throw ConfigError("no output directory: pass --out or set 'out' in the config");
    }
    run.out = *run.config.out;
#ifdef _OPENMP
    if (run.config.jobs > 0) {
        omp_set_num_threads(run.config.jobs);
    }
#endif
    std::error_code ec;
    fs::create_directories(run.out, ec);
    if (ec) {
        throw IoError("cannot create output directory " + run.out.string() + ": " + ec.message());
    }
    return run;
}

TriangleMesh load_input(Run& run, const std::string& role, const fs::path& path)
{
    auto mesh = load_mesh(path);
    const auto conflicts = orientation_conflicts(mesh);
    if (conflicts > 0 && !run.config.allow_inconsistent_orientation) {
        throw MeshError(path.string() + ": " + std::to_string(conflicts)
                        + " edges are used twice in the same direction (inconsistent "
                          "orientation); set allow_inconsistent_orientation to accept");
    }
    run.inputs[role] = {{"path", path.string()},
                        {"fnv1a64", hex(fnv1a_file(path))},
                        {"vertices", mesh.num_vertices()},
                        {"faces", mesh.num_faces()},
                        {"textured", mesh.has_texture()}};
    log(LogLevel::debug, "loaded ", role, " ", path.string(), ": ", mesh.num_vertices(),
        " vertices, ", mesh.num_faces(), " faces");
    return mesh;
}

std::vector<fs::path> read_list(const fs::path& list)
{
    std::ifstream in(list);
    if (!in) {
        throw IoError("cannot open mesh list " + list.string());
    }
    std::vector<fs::path> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') {
            continue;
        }
        const auto e = line.find_last_not_of(" \t\r");
        fs::path p = line.substr(b, e - b + 1);
        out.push_back(p.is_absolute() ? p : list.parent_path() / p);
    }
    return out;
}

std::optional<TriangleMesh> load_template(Run& run)
{
    if (run.config.schedule.init != InitKind::template_mesh) {
        return std::nullopt;
    }
    return load_input(run, "template", *run.config.schedule.template_path);
}

json terms_json(const EnergyTerms& t)
{
    return {{"srnf", t.srnf},
            {"srcf", t.srcf},
            {"varifold_source", t.varifold_source},
            {"varifold_target", t.varifold_target},
            {"total", t.total}};
}

json levels_json(const std::vector<LevelReport>& levels)
{
    json out = json::array();
    for (const auto& l : levels) {
        out.push_back({{"faces", l.faces},
                       {"sigma", l.spec.sigma},
                       {"lambda", l.spec.lambda},
                       {"tau", l.spec.tau ? json(*l.spec.tau) : json(nullptr)},
                       {"initial", terms_json(l.initial)},
                       {"final", terms_json(l.final)},
                       {"iterations", l.optim.iterations},
                       {"evaluations", l.optim.evaluations},
                       {"final_grad_norm", l.optim.final_grad_norm},
                       {"status", to_string(l.optim.status)}});
    }
    return out;
}

json level_timings(const std::vector<LevelReport>& levels)
{
    json out = json::array();
    for (const auto& l : levels) {
        out.push_back(l.seconds);
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
}

void finish_report(Run& run, const std::string& command, json body)
{
    run.timings["total"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - run.start).count();
    body["command"] = command;
    body["version"] = "elasticmatch " ELASTICMATCH_VERSION;
    body["config"] = to_json(run.config);
    body["inputs"] = run.inputs;
    body["timings"] = run.timings;
    write_text(run.out / "report.json", body.dump(2) + "\n");
    log(LogLevel::info, "wrote ", (run.out / "report.json").string());
}

void log_levels(const std::vector<LevelReport>& levels)
{
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto& l = levels[i];
        log(LogLevel::info, "level ", i + 1, "/", levels.size(), ": ", l.faces, " faces, energy ",
            l.initial.total, " -> ", l.final.total, " (", l.optim.iterations, " iterations, ",
            to_string(l.optim.status), ")");
    }
}

MultiResSchedule schedule_for(Run& run, const TriangleMesh& q0, const TriangleMesh& q1,
                              const std::optional<TriangleMesh>& tmpl)
{
    auto s = make_schedule(run.config, q0, q1, tmpl);
    for (const auto& w : s.warnings()) {
        log(LogLevel::info, "warning: ", w);
    }
    return s;
}

int cmd_match(const Common& common, const std::string& source, const std::string& target)
{
    Run run = start_run(common);
    const auto q0 = load_input(run, "source", source);
    const auto q1 = load_input(run, "target", target);
    const auto tmpl = load_template(run);
    const auto schedule = schedule_for(run, q0, q1, tmpl);
    const auto r = multires_match(q0, q1, schedule, base_match_config(run.config));
    log_levels(r.levels);
    save_mesh(r.source, run.out / "matched_source.ply");
    save_mesh(r.target, run.out / "matched_target.ply");
    run.timings["levels"] = level_timings(r.levels);
    const auto status = r.final_status();
    finish_report(run, "match",
                  {{"levels", levels_json(r.levels)},
                   {"final", terms_json(r.levels.back().final)},
                   {"status", to_string(status)}});
    if (status == OptimStatus::line_search_failed) {
        throw Degraded{"line search failed at the final level"};
    }
    return 0;
}

int cmd_geodesic(const Common& common, const std::string& source, const std::string& target,
                 std::optional<std::size_t> samples)
{
    Run run = start_run(common);
    if (samples) {
        if (*samples < 2) {
            throw ConfigError("--samples must be at least 2");
        }
        run.config.geodesic_samples = *samples;
    }
    const auto q0 = load_input(run, "source", source);
    const auto q1 = load_input(run, "target", target);
    const auto tmpl = load_template(run);
    const auto schedule = schedule_for(run, q0, q1, tmpl);
    const auto g = geodesic(q0, q1, schedule, base_match_config(run.config),
                            run.config.geodesic_samples, run.config.inversion);
    log_levels(g.matching.levels);
    json samples_json = json::array();
    for (std::size_t i = 0; i < g.path.samples.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "geodesic_%03zu.ply", i);
        save_mesh(g.path.samples[i], run.out / name);
        samples_json.push_back({{"file", name},
                                {"time", g.path.times[i]},
                                {"residual", g.path.residuals[i]},
                                {"relative_residual", g.path.relative_residuals[i]},
                                {"status", to_string(g.path.statuses[i])}});
        log(LogLevel::debug, "sample ", i, " t=", g.path.times[i],
            " relative residual ", g.path.relative_residuals[i]);
    }
    run.timings["levels"] = level_timings(g.matching.levels);
    const auto status = g.matching.final_status();
    finish_report(run, "geodesic",
                  {{"levels", levels_json(g.matching.levels)},
                   {"final", terms_json(g.matching.levels.back().final)},
                   {"samples", samples_json},
                   {"status", to_string(status)}});
    if (status == OptimStatus::line_search_failed) {
        throw Degraded{"line search failed at the final matching level"};
    }
    return 0;
}

int cmd_invert(const Common& common, const std::string& target_path, const std::string& init_path)
{
    Run run = start_run(common);
    const auto target_mesh = load_input(run, "target", target_path);
    const auto init = load_input(run, "init", init_path);
    require_same_combinatorics(target_mesh, init);
    InversionTarget target{srnf(target_mesh), std::nullopt, 0.0};
    if (run.config.srcf_weight > 0.0) {
        target.srcf = srcf(target_mesh);
        target.srcf_weight = run.config.srcf_weight;
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto r = invert_srnf(target, init, run.config.inversion);
    run.timings["inversion"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.mesh.texture = init.texture;
    save_mesh(r.mesh, run.out / "inverted.ply");
    log(LogLevel::info, "inversion: ", r.report.iterations, " iterations, relative residual ",
        r.relative_residual, " (", to_string(r.report.status), ")");
    finish_report(run, "invert",
                  {{"iterations", r.report.iterations},
                   {"evaluations", r.report.evaluations},
                   {"residual", r.residual},
                   {"relative_residual", r.relative_residual},
                   {"status", to_string(r.report.status)}});
    if (r.report.status == OptimStatus::line_search_failed) {
        throw Degraded{"line search failed during inversion"};
    }
    return 0;
}

int cmd_distmat(const Common& common, const std::string& list)
{
    Run run = start_run(common);
    const auto paths = read_list(list);
    if (paths.size() < 2) {
        throw ConfigError("the mesh list must name at least two meshes");
    }
    std::vector<TriangleMesh> meshes;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        meshes.push_back(load_input(run, "mesh_" + std::to_string(i), paths[i]));
    }
    const auto tmpl = load_template(run);
    const auto base = base_match_config(run.config);
    const auto m = distance_matrix(
        meshes,
        [&](const TriangleMesh& a, const TriangleMesh& b) {
            return make_schedule(run.config, a, b, tmpl);
        },
        base, run.config.jobs);

    std::ostringstream csv;
    csv << std::setprecision(9);
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
            csv << (j ? "," : "") << m.values(i, j);
        }
        csv << '\n';
    }
    write_text(run.out / "distmat.csv", csv.str());

    const fs::path pair_dir = run.out / "pairs";
    fs::create_directories(pair_dir);
    json failures = json::array();
    for (const auto& f : m.failures) {
        failures.push_back({{"i", f.i}, {"j", f.j}, {"reason", f.reason}});
        log(LogLevel::error, "pair (", f.i, ", ", f.j, ") failed: ", f.reason);
    }
    json pair_times = json::array();
    for (const auto& p : m.pairs) {
        char name[48];
        std::snprintf(name, sizeof name, "pair_%03zu_%03zu.json", p.i, p.j);
        json log_body = {{"i", p.i},
                         {"j", p.j},
                         {"value", std::isfinite(p.value) ? json(p.value) : json(nullptr)},
                         {"from_first", levels_json(p.from_first)},
                         {"from_second", levels_json(p.from_second)}};
        write_text(pair_dir / name, log_body.dump(2) + "\n");
        pair_times.push_back({level_timings(p.from_first), level_timings(p.from_second)});
        log(LogLevel::debug, "pair (", p.i, ", ", p.j, "): ", p.value);
    }
    run.timings["pairs"] = pair_times;
    finish_report(run, "distmat",
                  {{"size", meshes.size()}, {"failures", failures}, {"matrix", "distmat.csv"}});
    if (!m.failures.empty()) {
        throw Degraded{std::to_string(m.failures.size()) + " pair(s) failed"};
    }
    return 0;
}

int cmd_karcher(const Common& common, const std::string& list, const std::string& template_path,
                std::optional<int> iterations)
{
    Run run = start_run(common);
    if (iterations) {
        if (*iterations < 1) {
            throw ConfigError("--iterations must be positive");
        }
        run.config.karcher_iterations = *iterations;
    }
    if (template_path.empty()) {
        throw ConfigError("karcher requires --template");
    }
    const auto paths = read_list(list);
    if (paths.empty()) {
        throw ConfigError("the mesh list is empty");
    }
    std::vector<TriangleMesh> meshes;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        meshes.push_back(load_input(run, "mesh_" + std::to_string(i), paths[i]));
    }
    const auto tmpl = load_input(run, "template", template_path);
    // Per-step schedules are scaled with the template and the first input.
    auto schedule = make_schedule(run.config, tmpl, meshes.front(), tmpl);
    KarcherOptions opts;
    opts.iterations = run.config.karcher_iterations;
    opts.seed = run.config.seed;
    opts.inversion = run.config.inversion;
    const auto r = karcher_mean(meshes, tmpl, schedule, base_match_config(run.config), opts);
    save_mesh(r.mean, run.out / "mean.ply");

    std::ostringstream trace;
    trace << std::setprecision(17)
          << "pass,input,weight,match_energy,inversion_residual,inversion_status\n";
    json steps = json::array();
    for (const auto& s : r.trace) {
        trace << s.pass << ',' << s.input << ',' << s.weight << ',' << s.match_energy.total << ','
              << s.inversion_residual << ',' << to_string(s.inversion_status) << '\n';
        steps.push_back({{"pass", s.pass},
                         {"input", s.input},
                         {"weight", s.weight},
                         {"match", terms_json(s.match_energy)},
                         {"inversion_residual", s.inversion_residual},
                         {"inversion_status", to_string(s.inversion_status)}});
        log(LogLevel::info, "pass ", s.pass, " input ", s.input, ": match energy ",
            s.match_energy.total, ", inversion residual ", s.inversion_residual);
    }
    write_text(run.out / "trace.csv", trace.str());
    finish_report(run, "karcher", {{"steps", steps}, {"mean", "mean.ply"}});
    for (const auto& s : r.trace) {
        if (s.inversion_status == OptimStatus::line_search_failed) {
            throw Degraded{"line search failed during a Karcher inversion"};
        }
    }
    return 0;
}

void add_common(CLI::App& app, Common& c)
{
    app.add_option("--config", c.config_path, "JSON run configuration");
    app.add_option("--out", c.out, "output directory");
    app.add_option("--seed", c.seed, "random seed (overrides the config)");
    app.add_option("--jobs", c.jobs, "worker threads, 0 = all cores (overrides the config)");
    app.add_flag("--quiet", c.quiet, "only report errors");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Elastic shape matching of triangle meshes with varifold relaxation",
                 "elasticmatch"};
    app.set_version_flag("--version", "elasticmatch " ELASTICMATCH_VERSION);
    app.require_subcommand(1);
    Common common;

    std::string source, target, init, list, tmpl;
    std::optional<std::size_t> samples;
    std::optional<int> iterations;

    auto* match = app.add_subcommand("match", "multi-resolution matching of two surfaces");
    match->add_option("source", source, "source mesh (OFF or PLY)")->required();
    match->add_option("target", target, "target mesh (OFF or PLY)")->required();
    add_common(*match, common);

    auto* geo = app.add_subcommand("geodesic", "match, then sample the geodesic in between");
    geo->add_option("source", source, "source mesh")->required();
    geo->add_option("target", target, "target mesh")->required();
    geo->add_option("--samples", samples, "number of samples including both endpoints");
    add_common(*geo, common);

    auto* inv = app.add_subcommand("invert", "recover a mesh from the SRNF of TARGET");
    inv->add_option("target", target, "mesh whose SRNF is inverted")->required();
    inv->add_option("--init", init, "initial mesh with the same combinatorics")->required();
    add_common(*inv, common);

    auto* dist = app.add_subcommand("distmat", "pairwise discrepancy matrix");
    dist->add_option("list", list, "text file with one mesh path per line")->required();
    add_common(*dist, common);

    auto* karcher = app.add_subcommand("karcher", "Karcher mean of a population");
    karcher->add_option("list", list, "text file with one mesh path per line")->required();
    karcher->add_option("--template", tmpl, "initial mean; fixes the mesh structure");
    karcher->add_option("--iterations", iterations, "passes over the population");
    add_common(*karcher, common);

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (match->parsed()) {
            return cmd_match(common, source, target);
        }
        if (geo->parsed()) {
            return cmd_geodesic(common, source, target, samples);
        }
        if (inv->parsed()) {
            return cmd_invert(common, target, init);
        }
        if (dist->parsed()) {
            return cmd_distmat(common, list);
        }
        if (karcher->parsed()) {
            return cmd_karcher(common, list, tmpl, iterations);
        }
    }
    catch (const Degraded& d) {
        log(LogLevel::error, "degraded result: ", d.reason);
        return 2;
    }
    catch (const ConfigError& e) {
        log(LogLevel::error, "configuration error: ", e.what());
        return 1;
    }
    catch (const ShapeMismatchError& e) {
        log(LogLevel::error, "input error: ", e.what());
        return 1;
    }
    catch (const MeshError& e) {
        log(LogLevel::error, "input error: ", e.what());
        return 1;
    }
    catch (const IoError& e) {
        log(LogLevel::error, "I/O error: ", e.what());
        return 1;
    }
    catch (const std::exception& e) {
        log(LogLevel::error, "internal error: ", e.what());
        return 3;
    }
    return 3;
}
