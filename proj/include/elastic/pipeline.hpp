#pragma once

#include "elastic/energy.hpp"
#include "elastic/lbfgs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace elastic {

// --- schedules -------------------------------------------------------------

struct LevelSpec {
    double sigma = 1.0;
    double lambda = 1.0;
    /// Texture kernel scale for this level; falls back to the base config.
    std::optional<double> tau;
    OptimConfig optim{};
};

enum class InitKind { decimate_source, decimate_target, template_mesh };

struct InitMode {
    InitKind kind = InitKind::decimate_source;
    /// Required for template_mesh.
    std::optional<TriangleMesh> template_mesh;
    /// Face budget of the decimated initial mesh. Unset: chosen so that the
    /// last level has about as many faces as the decimated input.
    std::optional<std::size_t> faces;
};

/// Coarse-to-fine matching plan with absolute kernel scales and weights.
struct MultiResSchedule {
    std::vector<LevelSpec> levels;
    InitMode init{};
    bool subdivide_between_levels = true;

    void validate() const
    {
        if (levels.empty()) {
            throw ConfigError("a schedule needs at least one level");
        }
        for (const auto& l : levels) {
            if (!(l.sigma > 0.0) || !(l.lambda > 0.0)) {
                throw ConfigError("level sigma and lambda must be positive");
            }
            l.optim.validate();
        }
        if (init.kind == InitKind::template_mesh && !init.template_mesh) {
            throw ConfigError("template initialisation requires a template mesh");
        }
        if (init.faces && *init.faces < 4) {
            throw ConfigError("initial face budget must be at least 4");
        }
    }

    /// Non-fatal issues: sigma should not increase and lambda should not
    /// decrease from one level to the next.
    std::vector<std::string> warnings() const
    {
        std::vector<std::string> out;
        for (std::size_t i = 1; i < levels.size(); ++i) {
            if (levels[i].sigma > levels[i - 1].sigma) {
                out.push_back("sigma increases at level " + std::to_string(i));
            }
            if (levels[i].lambda < levels[i - 1].lambda) {
                out.push_back("lambda decreases at level " + std::to_string(i));
            }
        }
        return out;
    }
};

/// Reference length and area used to turn relative schedules into absolute
/// ones: the larger bounding-box diagonal and the mean total area.
struct ScheduleScale {
    double diagonal = 1.0;
    double area = 1.0;

    static ScheduleScale of(const TriangleMesh& q0, const TriangleMesh& q1)
    {
        return {std::max(bbox_diagonal(q0), bbox_diagonal(q1)),
                0.5 * (total_area(q0) + total_area(q1))};
    }
};

/// Converts levels given as (sigma / diagonal, lambda * area) into absolute
/// values. Lambda multiplies squared varifold distances (area^2) against
/// feature terms (area), hence the 1/area normalisation.
inline std::vector<LevelSpec> resolve_relative(std::vector<LevelSpec> levels,
                                               const ScheduleScale& s)
{
    if (!(s.diagonal > 0.0) || !(s.area > 0.0)) {
        throw MeshError("cannot scale a schedule for meshes without extent or area");
    }
    for (auto& l : levels) {
        l.sigma *= s.diagonal;
        l.lambda /= s.area;
    }
    return levels;
}

/// Three levels, sigma = D/5, D/10, D/20 and lambda = 10, 100, 1000 in
/// relative units.
inline std::vector<LevelSpec> default_relative_levels()
{
    return {{0.2, 10.0, {}, {}}, {0.1, 100.0, {}, {}}, {0.05, 1000.0, {}, {}}};
}

inline MultiResSchedule default_schedule(const TriangleMesh& q0, const TriangleMesh& q1)
{
    MultiResSchedule s;
    s.levels = resolve_relative(default_relative_levels(), ScheduleScale::of(q0, q1));
    return s;
}

/// Config of one level, derived from the base config.
inline MatchConfig level_config(const MatchConfig& base, const LevelSpec& level)
{
    MatchConfig cfg = base;
    cfg.lambda = level.lambda;
    cfg.kernel.sigma = level.sigma;
    if (level.tau) {
        cfg.kernel.tau = level.tau;
    }
    return cfg;
}

// --- single-level matching -------------------------------------------------

struct MatchResult {
    TriangleMesh source;  ///< optimised q0t
    TriangleMesh target;  ///< optimised q1t
    EnergyTerms initial;
    EnergyTerms final;
    OptimReport report;
};

/// Minimises the symmetric energy over the vertices of (q0t, q1t).
inline MatchResult match(const TriangleMesh& q0t, const TriangleMesh& q1t, const TriangleMesh& q0,
                         const TriangleMesh& q1, const MatchConfig& cfg, const OptimConfig& opt)
{
    require_same_combinatorics(q0t, q1t);
    const SymmetricMatchingProblem problem(q0, q1, cfg);
    MatchResult r{q0t, q1t, {}, {}, {}};
    const std::size_t nv = q0t.num_vertices();
    SymmetricGradient grad;
    auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        unflatten(x.head(3 * nv), r.source.vertices);
        unflatten(x.tail(3 * nv), r.target.vertices);
        const double e = problem.terms(r.source, r.target, &grad).total;
        g.head(3 * nv) = flatten(grad.source);
        g.tail(3 * nv) = flatten(grad.target);
        return e;
    };
    Eigen::VectorXd x(6 * nv);
    x << flatten(q0t.vertices), flatten(q1t.vertices);
    r.initial = problem.terms(q0t, q1t);
    r.report = minimize(objective, x, opt);
    unflatten(x.head(3 * nv), r.source.vertices);
    unflatten(x.tail(3 * nv), r.target.vertices);
    r.final = problem.terms(r.source, r.target);
    return r;
}

// --- multi-resolution ------------------------------------------------------

struct LevelReport {
    LevelSpec spec;
    std::size_t faces = 0;
    EnergyTerms initial;
    EnergyTerms final;
    OptimReport optim;
    double seconds = 0.0;
};

struct MultiResResult {
    TriangleMesh source;
    TriangleMesh target;
    std::vector<LevelReport> levels;

    OptimStatus final_status() const { return levels.back().optim.status; }
};

namespace detail {

inline std::size_t default_init_faces(std::size_t faces, std::size_t n_levels,
                                      bool subdivide)
{
    if (!subdivide) {
        return faces;
    }
    double f = static_cast<double>(faces);
    for (std::size_t i = 1; i < n_levels; ++i) {
        f /= 4.0;
    }
    return std::max<std::size_t>(20, static_cast<std::size_t>(std::ceil(f)));
}

inline void anchor_texture(TriangleMesh& on_anchor_side, TriangleMesh& other,
                           const TriangleMesh& anchor)
{
    if (!anchor.texture) {
        on_anchor_side.texture.reset();
        other.texture.reset();
        return;
    }
    on_anchor_side.texture = transfer_texture(on_anchor_side, anchor).texture;
    other.texture = on_anchor_side.texture;
}

} // namespace detail

/// Initial low-resolution mesh shared by q0t and q1t.
inline TriangleMesh initial_mesh(const TriangleMesh& q0, const TriangleMesh& q1,
                                 const MultiResSchedule& schedule)
{
    const auto& init = schedule.init;
    if (init.kind == InitKind::template_mesh) {
        return *init.template_mesh;
    }
    const TriangleMesh& anchor = init.kind == InitKind::decimate_target ? q1 : q0;
    const std::size_t faces = init.faces.value_or(detail::default_init_faces(
        anchor.num_faces(), schedule.levels.size(), schedule.subdivide_between_levels));
    return decimate(anchor, faces);
}

/// Coarse-to-fine symmetric matching: both free meshes start as the same
/// low-resolution mesh, are optimised at each level and subdivided in
/// between. Textures, if present, are carried from the input on the
/// initialisation side by nearest-vertex transfer after every subdivision.
inline MultiResResult multires_match(const TriangleMesh& q0, const TriangleMesh& q1,
                                     const MultiResSchedule& schedule, const MatchConfig& base)
{
    schedule.validate();
    validate(q0);
    validate(q1);
    const bool anchor_is_target = schedule.init.kind == InitKind::decimate_target;
    const TriangleMesh& anchor = anchor_is_target ? q1 : q0;

    MultiResResult out;
    out.source = initial_mesh(q0, q1, schedule);
    validate(out.source);
    out.target = out.source;
    auto refresh_texture = [&] {
        if (anchor_is_target) {
            detail::anchor_texture(out.target, out.source, anchor);
        }
        else {
            detail::anchor_texture(out.source, out.target, anchor);
        }
    };
    refresh_texture();

    for (std::size_t i = 0; i < schedule.levels.size(); ++i) {
        if (i > 0 && schedule.subdivide_between_levels) {
            out.source = subdivide(out.source);
            out.target = subdivide(out.target);
            refresh_texture();
        }
        const auto& spec = schedule.levels[i];
        const auto t0 = std::chrono::steady_clock::now();
        auto r = match(out.source, out.target, q0, q1, level_config(base, spec), spec.optim);
        LevelReport lr{spec, out.source.num_faces(), r.initial, r.final, std::move(r.report), 0.0};
        lr.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.source = std::move(r.source);
        out.target = std::move(r.target);
        out.levels.push_back(std::move(lr));
    }
    return out;
}

// --- SRNF inversion and geodesics ------------------------------------------

/// Optimiser settings for inversion: tighter than matching defaults because
/// the residual itself is the quantity of interest.
inline OptimConfig default_inversion_optim()
{
    OptimConfig c;
    c.max_iters = 3000;
    c.grad_tol = 1e-12;
    c.rel_f_tol = 1e-12;
    return c;
}

struct InversionResult {
    TriangleMesh mesh;
    OptimReport report;
    double residual = 0.0;           ///< final inversion energy
    double relative_residual = 0.0;  ///< residual / |target SRNF|^2
};

/// Finds a mesh with the combinatorics of `init` whose SRNF approximates the
/// target. The result is translated so that its vertex centroid equals the
/// centroid of `init`.
inline InversionResult invert_srnf(const InversionTarget& target, const TriangleMesh& init,
                                   const OptimConfig& opt = default_inversion_optim())
{
    validate(init);
    if (target.srnf.values.size() != init.num_faces()) {
        throw ShapeMismatchError("SRNF target does not match the initial mesh");
    }
    InversionResult r{init, {}, 0.0, 0.0};
    std::vector<Vec3> grad(init.num_vertices());
    auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        unflatten(x, r.mesh.vertices);
        std::fill(grad.begin(), grad.end(), Vec3::Zero());
        const double e = inversion_energy(r.mesh, target, grad);
        g = flatten(grad);
        return e;
    };
    Eigen::VectorXd x = flatten(init.vertices);
    r.report = minimize(objective, x, opt);
    unflatten(x, r.mesh.vertices);
    const Vec3 shift = centroid(init) - centroid(r.mesh);
    for (auto& v : r.mesh.vertices) {
        v += shift;
    }
    r.residual = inversion_energy(r.mesh, target);
    const double norm = field_norm_sq(target.srnf.values);
    r.relative_residual = norm > 0.0 ? r.residual / norm : r.residual;
    return r;
}

struct GeodesicPath {
    std::vector<TriangleMesh> samples;
    std::vector<double> times;
    /// Inversion energy per sample; zero at the endpoints.
    std::vector<double> residuals;
    std::vector<double> relative_residuals;
    std::vector<OptimStatus> statuses;
};

/// Samples the straight SRNF line between two meshes of equal combinatorics
/// at n uniform times and inverts each interior point, starting from the
/// linear interpolation of vertex positions.
inline GeodesicPath geodesic_between(const TriangleMesh& q0t, const TriangleMesh& q1t,
                                     std::size_t n_samples,
                                     const OptimConfig& opt = default_inversion_optim())
{
    if (n_samples < 2) {
        throw std::invalid_argument("a geodesic needs at least two samples");
    }
    require_same_combinatorics(q0t, q1t);
    const auto n0 = srnf(q0t).values;
    const auto n1 = srnf(q1t).values;
    GeodesicPath path;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n_samples - 1);
        path.times.push_back(t);
        if (i == 0 || i + 1 == n_samples) {
            path.samples.push_back(i == 0 ? q0t : q1t);
            path.residuals.push_back(0.0);
            path.relative_residuals.push_back(0.0);
            path.statuses.push_back(OptimStatus::converged_grad);
            continue;
        }
        InversionTarget target;
        target.srnf.values.resize(n0.size());
        for (std::size_t f = 0; f < n0.size(); ++f) {
            target.srnf.values[f] = (1.0 - t) * n0[f] + t * n1[f];
        }
        TriangleMesh init = q0t;
        for (std::size_t v = 0; v < init.num_vertices(); ++v) {
            init.vertices[v] = (1.0 - t) * q0t.vertices[v] + t * q1t.vertices[v];
        }
        auto r = invert_srnf(target, init, opt);
        path.samples.push_back(std::move(r.mesh));
        path.residuals.push_back(r.residual);
        path.relative_residuals.push_back(r.relative_residual);
        path.statuses.push_back(r.report.status);
    }
    return path;
}

struct GeodesicResult {
    MultiResResult matching;
    GeodesicPath path;
};

inline GeodesicResult geodesic(const TriangleMesh& q0, const TriangleMesh& q1,
                               const MultiResSchedule& schedule, const MatchConfig& base,
                               std::size_t n_samples,
                               const OptimConfig& inversion = default_inversion_optim())
{
    if (n_samples < 2) {
        throw std::invalid_argument("a geodesic needs at least two samples");
    }
    GeodesicResult g;
    g.matching = multires_match(q0, q1, schedule, base);
    g.path = geodesic_between(g.matching.source, g.matching.target, n_samples, inversion);
    return g;
}

// --- discrepancies ---------------------------------------------------------

namespace detail {

/// Total order on meshes used to make pairwise quantities exactly symmetric.
inline bool mesh_less(const TriangleMesh& a, const TriangleMesh& b)
{
    auto key = [](const TriangleMesh& m) {
        return std::make_tuple(m.num_vertices(), m.num_faces(), m.has_texture());
    };
    if (key(a) != key(b)) {
        return key(a) < key(b);
    }
    for (std::size_t i = 0; i < a.num_vertices(); ++i) {
        for (int k = 0; k < 3; ++k) {
            if (a.vertices[i][k] != b.vertices[i][k]) {
                return a.vertices[i][k] < b.vertices[i][k];
            }
        }
    }
    if (a.faces != b.faces) {
        return a.faces < b.faces;
    }
    return a.texture < b.texture;
}

} // namespace detail

struct DiscrepancyResult {
    double value = 0.0;
    /// Runs initialised from the first and second mesh of the canonical order.
    MultiResResult from_first;
    MultiResResult from_second;
};

/// Mean of the final symmetric energies of two multi-resolution runs, one
/// initialised with each input's topology. The inputs are put in a canonical
/// order first, so swapping them gives the same bits. A template
/// initialisation in `schedule` is ignored.
inline DiscrepancyResult discrepancy_detailed(const TriangleMesh& a, const TriangleMesh& b,
                                              const MultiResSchedule& schedule,
                                              const MatchConfig& base)
{
    const bool swap = detail::mesh_less(b, a);
    const TriangleMesh& q0 = swap ? b : a;
    const TriangleMesh& q1 = swap ? a : b;
    MultiResSchedule s = schedule;
    s.init.template_mesh.reset();
    s.init.kind = InitKind::decimate_source;
    DiscrepancyResult r;
    r.from_first = multires_match(q0, q1, s, base);
    s.init.kind = InitKind::decimate_target;
    r.from_second = multires_match(q0, q1, s, base);
    r.value = 0.5 * (r.from_first.levels.back().final.total
                     + r.from_second.levels.back().final.total);
    return r;
}

inline double discrepancy(const TriangleMesh& a, const TriangleMesh& b,
                          const MultiResSchedule& schedule, const MatchConfig& base)
{
    return discrepancy_detailed(a, b, schedule, base).value;
}

struct PairFailure {
    std::size_t i = 0;
    std::size_t j = 0;
    std::string reason;
};

/// Level reports of both runs behind one matrix entry.
struct PairRecord {
    std::size_t i = 0;
    std::size_t j = 0;
    double value = 0.0;
    std::vector<LevelReport> from_first;
    std::vector<LevelReport> from_second;
};

struct DistanceMatrix {
    Eigen::MatrixXd values;
    std::vector<PairFailure> failures;
    std::vector<PairRecord> pairs;  ///< upper-triangle order
};

/// Schedule for one pair; lets callers scale relative schedules per pair.
using PairSchedule = std::function<MultiResSchedule(const TriangleMesh&, const TriangleMesh&)>;

/// Pairwise discrepancies. Pairs run as independent parallel jobs (at most
/// `jobs` threads, 0 = runtime default); a pair that throws is recorded as
/// NaN together with the error message.
inline DistanceMatrix distance_matrix(const std::vector<TriangleMesh>& meshes,
                                      const PairSchedule& schedule_for, const MatchConfig& base,
                                      int jobs = 0)
{
    if (meshes.size() < 2) {
        throw std::invalid_argument("a distance matrix needs at least two meshes");
    }
    const auto n = meshes.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            pairs.emplace_back(i, j);
        }
    }
    std::vector<PairRecord> records(pairs.size());
    std::vector<std::string> error(pairs.size());
    const int threads = jobs > 0 ? jobs : max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(pairs.size()); ++p) {
        const auto [i, j] = pairs[p];
        auto& rec = records[p];
        rec.i = i;
        rec.j = j;
        try {
            const auto s = detail::mesh_less(meshes[j], meshes[i])
                               ? schedule_for(meshes[j], meshes[i])
                               : schedule_for(meshes[i], meshes[j]);
            auto d = discrepancy_detailed(meshes[i], meshes[j], s, base);
            rec.value = d.value;
            rec.from_first = std::move(d.from_first.levels);
            rec.from_second = std::move(d.from_second.levels);
        }
        catch (const std::exception& e) {
            rec.value = std::numeric_limits<double>::quiet_NaN();
            error[p] = e.what();
        }
    }
    DistanceMatrix m;
    m.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto [i, j] = pairs[p];
        const auto a = static_cast<Eigen::Index>(i);
        const auto b = static_cast<Eigen::Index>(j);
        m.values(a, b) = m.values(b, a) = records[p].value;
        if (!error[p].empty()) {
            m.failures.push_back({i, j, error[p]});
        }
    }
    m.pairs = std::move(records);
    return m;
}

inline DistanceMatrix distance_matrix(const std::vector<TriangleMesh>& meshes,
                                      const MultiResSchedule& schedule, const MatchConfig& base,
                                      int jobs = 0)
{
    return distance_matrix(
        meshes, [&](const TriangleMesh&, const TriangleMesh&) { return schedule; }, base, jobs);
}

// --- Karcher mean ----------------------------------------------------------

struct KarcherOptions {
    int iterations = 1;
    std::uint64_t seed = 0;
    OptimConfig inversion = default_inversion_optim();
};

struct KarcherStep {
    int pass = 0;             ///< 1-based outer iteration
    std::size_t input = 0;    ///< index into the input list
    double weight = 0.0;      ///< 1 / ((pass - 1) n + j)
    EnergyTerms match_energy; ///< final symmetric energy of the match
    double inversion_residual = 0.0;
    OptimStatus inversion_status = OptimStatus::converged_grad;
};

struct KarcherResult {
    TriangleMesh mean;
    std::vector<KarcherStep> trace;
};

namespace detail {

/// Fisher-Yates shuffle with an explicit bounded draw, so the permutation
/// for a given seed does not depend on the standard library.
inline void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng)
{
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::uint64_t bound = i;
        const std::uint64_t reject_below = (0 - bound) % bound;
        std::uint64_t x = rng();
        while (x < reject_below) {
            x = rng();
        }
        std::swap(v[i - 1], v[static_cast<std::size_t>(x % bound)]);
    }
}

} // namespace detail

/// Iterative geodesic centroid. Each step matches the current mean (as
/// template, without subdivision) to one input, moves a fraction along the
/// straight SRNF line and inverts.
inline KarcherResult karcher_mean(const std::vector<TriangleMesh>& meshes,
                                  const TriangleMesh& template_mesh,
                                  const MultiResSchedule& schedule, const MatchConfig& base,
                                  const KarcherOptions& options = {})
{
    if (meshes.empty()) {
        throw std::invalid_argument("Karcher mean of an empty population");
    }
    if (options.iterations < 1) {
        throw ConfigError("Karcher iterations must be positive");
    }
    validate(template_mesh);
    KarcherResult r{template_mesh, {}};
    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> order(meshes.size());
    const auto n = meshes.size();
    for (int pass = 1; pass <= options.iterations; ++pass) {
        for (std::size_t i = 0; i < n; ++i) {
            order[i] = i;
        }
        detail::shuffle(order, rng);
        for (std::size_t j = 1; j <= n; ++j) {
            MultiResSchedule s = schedule;
            s.init.kind = InitKind::template_mesh;
            s.init.template_mesh = r.mean;
            s.subdivide_between_levels = false;
            const auto& qj = meshes[order[j - 1]];
            const auto m = multires_match(r.mean, qj, s, base);
            const double w = 1.0 / static_cast<double>((pass - 1) * n + j);

            InversionTarget target;
            const auto na = srnf(m.source).values;
            const auto nb = srnf(m.target).values;
            target.srnf.values.resize(na.size());
            TriangleMesh init = m.source;
            for (std::size_t f = 0; f < na.size(); ++f) {
                target.srnf.values[f] = na[f] + w * (nb[f] - na[f]);
            }
            for (std::size_t v = 0; v < init.num_vertices(); ++v) {
                init.vertices[v] += w * (m.target.vertices[v] - m.source.vertices[v]);
            }
            auto inv = invert_srnf(target, init, options.inversion);
            r.trace.push_back({pass, order[j - 1], w, m.levels.back().final, inv.residual,
                               inv.report.status});
            r.mean = std::move(inv.mesh);
            r.mean.texture = template_mesh.texture;
        }
    }
    return r;
}

} // namespace elastic
