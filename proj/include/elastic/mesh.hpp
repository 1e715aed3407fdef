#pragma once

#include "elastic/types.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace elastic {

/// Triangulated surface with optional per-vertex scalar texture.
///
/// Faces are index triples; the counter-clockwise order (v0, v1, v2) defines
/// the outward normal (v1 - v0) x (v2 - v0).
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::optional<std::vector<double>> texture;

    std::size_t num_vertices() const noexcept { return vertices.size(); }
    std::size_t num_faces() const noexcept { return faces.size(); }
    bool has_texture() const noexcept { return texture.has_value(); }

    bool operator==(const TriangleMesh&) const = default;
};

/// Per-face quantities derived from vertex positions.
struct FaceGeometry {
    std::vector<Vec3> normals;
    std::vector<double> areas;
    std::vector<Vec3> barycenters;
    std::optional<std::vector<double>> face_texture;
    /// Faces whose area fell under the degenerate threshold.
    std::size_t degenerate_count = 0;
};

/// Throws MeshError when an index is out of range, a face repeats a vertex,
/// or the texture length differs from the vertex count.
inline void validate(const TriangleMesh& mesh)
{
    const auto nv = static_cast<std::int64_t>(mesh.vertices.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        for (auto i : t) {
            if (i < 0 || i >= nv) {
                throw MeshError("face " + std::to_string(f) + " references vertex "
                                + std::to_string(i) + " but the mesh has "
                                + std::to_string(nv) + " vertices");
            }
        }
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
            throw MeshError("face " + std::to_string(f) + " repeats a vertex index");
        }
    }
    if (mesh.texture && mesh.texture->size() != mesh.vertices.size()) {
        throw MeshError("texture has " + std::to_string(mesh.texture->size())
                        + " values for " + std::to_string(nv) + " vertices");
    }
}

inline bool same_combinatorics(const TriangleMesh& a, const TriangleMesh& b) noexcept
{
    return a.vertices.size() == b.vertices.size() && a.faces == b.faces;
}

inline void require_same_combinatorics(const TriangleMesh& a, const TriangleMesh& b)
{
    if (!same_combinatorics(a, b)) {
        throw ShapeMismatchError("meshes do not share combinatorics ("
                                 + std::to_string(a.num_vertices()) + "/"
                                 + std::to_string(a.num_faces()) + " vs "
                                 + std::to_string(b.num_vertices()) + "/"
                                 + std::to_string(b.num_faces()) + " vertices/faces)");
    }
}

inline double bbox_diagonal(std::span<const Vec3> points) noexcept
{
    if (points.empty()) {
        return 0.0;
    }
    Vec3 lo = points.front();
    Vec3 hi = points.front();
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

inline double bbox_diagonal(const TriangleMesh& mesh) noexcept
{
    return bbox_diagonal(mesh.vertices);
}

/// Areas at or below this value are treated as degenerate (zero normal).
inline double degenerate_area_threshold(std::span<const Vec3> points) noexcept
{
    const double d = bbox_diagonal(points);
    return 1e-12 * d * d;
}

inline double degenerate_area_threshold(const TriangleMesh& mesh) noexcept
{
    return degenerate_area_threshold(mesh.vertices);
}

inline Vec3 centroid(const TriangleMesh& mesh) noexcept
{
    Vec3 c = Vec3::Zero();
    for (const auto& v : mesh.vertices) {
        c += v;
    }
    return mesh.vertices.empty() ? c : Vec3(c / static_cast<double>(mesh.vertices.size()));
}

namespace detail {

/// (v1 - v0) x (v2 - v0): twice the area-weighted normal.
inline Vec3 face_cross(std::span<const Vec3> v, const Face& f) noexcept
{
    return (v[f[1]] - v[f[0]]).cross(v[f[2]] - v[f[0]]);
}

/// Pulls an adjoint on the face cross product c = e1 x e2 back to the corners.
inline std::array<Vec3, 3> cross_vjp(std::span<const Vec3> v, const Face& f, const Vec3& cbar)
{
    const Vec3 e1 = v[f[1]] - v[f[0]];
    const Vec3 e2 = v[f[2]] - v[f[0]];
    const Vec3 g1 = e2.cross(cbar);
    const Vec3 g2 = cbar.cross(e1);
    return {Vec3(-g1 - g2), g1, g2};
}

} // namespace detail

inline double total_area(const TriangleMesh& mesh) noexcept
{
    double a = 0.0;
    for (const auto& f : mesh.faces) {
        a += 0.5 * detail::face_cross(mesh.vertices, f).norm();
    }
    return a;
}

/// Per-vertex texture averaged onto faces; empty when the mesh has none.
inline std::optional<std::vector<double>> face_texture(const TriangleMesh& mesh)
{
    if (!mesh.texture) {
        return std::nullopt;
    }
    const auto& t = *mesh.texture;
    std::vector<double> out(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        out[f] = (t[tri[0]] + t[tri[1]] + t[tri[2]]) / 3.0;
    }
    return out;
}

inline FaceGeometry face_geometry(const TriangleMesh& mesh)
{
    const std::size_t nf = mesh.faces.size();
    const double threshold = degenerate_area_threshold(mesh);
    FaceGeometry g;
    g.normals.resize(nf);
    g.areas.resize(nf);
    g.barycenters.resize(nf);
    std::vector<char> degenerate(nf, 0);

    const std::span<const Vec3> v(mesh.vertices);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(nf); ++i) {
        const Face& f = mesh.faces[i];
        const Vec3 c = detail::face_cross(v, f);
        const double len = c.norm();
        const double area = 0.5 * len;
        g.barycenters[i] = (v[f[0]] + v[f[1]] + v[f[2]]) / 3.0;
        if (area > threshold) {
            g.normals[i] = c / len;
            g.areas[i] = area;
        }
        else {
            g.normals[i] = Vec3::Zero();
            g.areas[i] = 0.0;
            degenerate[i] = 1;
        }
    }
    for (char d : degenerate) {
        g.degenerate_count += static_cast<std::size_t>(d);
    }
    g.face_texture = face_texture(mesh);
    return g;
}

/// Number of directed edges used by more than one face. Zero for a
/// consistently oriented manifold mesh.
inline std::size_t orientation_conflicts(const TriangleMesh& mesh)
{
    std::map<std::pair<std::int32_t, std::int32_t>, int> directed;
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            ++directed[{f[k], f[(k + 1) % 3]}];
        }
    }
    std::size_t conflicts = 0;
    for (const auto& [edge, count] : directed) {
        if (count > 1) {
            conflicts += static_cast<std::size_t>(count - 1);
        }
    }
    return conflicts;
}

/// Unique undirected edges as (min, max) pairs in first-encounter order.
inline std::vector<std::pair<std::int32_t, std::int32_t>> edges(const TriangleMesh& mesh)
{
    std::vector<std::pair<std::int32_t, std::int32_t>> out;
    std::set<std::pair<std::int32_t, std::int32_t>> seen;
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            auto e = std::minmax(f[k], f[(k + 1) % 3]);
            if (seen.insert(e).second) {
                out.emplace_back(e);
            }
        }
    }
    return out;
}

inline long euler_characteristic(const TriangleMesh& mesh)
{
    return static_cast<long>(mesh.num_vertices()) - static_cast<long>(edges(mesh).size())
           + static_cast<long>(mesh.num_faces());
}

// --- rigid and affine helpers ---------------------------------------------

inline TriangleMesh translated(TriangleMesh mesh, const Vec3& t)
{
    for (auto& v : mesh.vertices) {
        v += t;
    }
    return mesh;
}

inline TriangleMesh scaled(TriangleMesh mesh, double s)
{
    for (auto& v : mesh.vertices) {
        v *= s;
    }
    return mesh;
}

inline TriangleMesh transformed(TriangleMesh mesh, const Mat3& r, const Vec3& t)
{
    for (auto& v : mesh.vertices) {
        v = r * v + t;
    }
    return mesh;
}

inline TriangleMesh with_flipped_faces(TriangleMesh mesh)
{
    for (auto& f : mesh.faces) {
        std::swap(f[1], f[2]);
    }
    return mesh;
}

// --- resampling -----------------------------------------------------------

/// Splits every face at its edge midpoints into four faces with the same
/// orientation. Midpoint vertices are appended after the originals in the
/// order their edges are first met.
inline TriangleMesh subdivide(const TriangleMesh& mesh)
{
    TriangleMesh out;
    out.vertices = mesh.vertices;
    if (mesh.texture) {
        out.texture = *mesh.texture;
    }
    std::map<std::pair<std::int32_t, std::int32_t>, std::int32_t> midpoint;
    auto mid = [&](std::int32_t a, std::int32_t b) {
        const auto key = std::minmax(a, b);
        auto [it, inserted] = midpoint.try_emplace(key, 0);
        if (inserted) {
            it->second = static_cast<std::int32_t>(out.vertices.size());
            out.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
            if (out.texture) {
                out.texture->push_back(0.5 * ((*mesh.texture)[a] + (*mesh.texture)[b]));
            }
        }
        return it->second;
    };
    out.faces.reserve(4 * mesh.faces.size());
    for (const auto& f : mesh.faces) {
        const auto ab = mid(f[0], f[1]);
        const auto bc = mid(f[1], f[2]);
        const auto ca = mid(f[2], f[0]);
        out.faces.push_back({f[0], ab, ca});
        out.faces.push_back({ab, f[1], bc});
        out.faces.push_back({ca, bc, f[2]});
        out.faces.push_back({ab, bc, ca});
    }
    return out;
}

namespace detail {

class EdgeCollapser {
  public:
    explicit EdgeCollapser(const TriangleMesh& mesh)
        : pos_(mesh.vertices)
        , faces_(mesh.faces)
        , face_alive_(mesh.faces.size(), 1)
        , vertex_alive_(mesh.vertices.size(), 1)
        , vertex_faces_(mesh.vertices.size())
        , live_faces_(mesh.faces.size())
    {
        if (mesh.texture) {
            texture_ = *mesh.texture;
        }
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            for (auto v : faces_[f]) {
                vertex_faces_[v].push_back(static_cast<std::int32_t>(f));
            }
        }
    }

    TriangleMesh run(std::size_t target_faces)
    {
        bool progress_since_rebuild = true;
        rebuild_queue();
        while (live_faces_ > target_faces) {
            if (queue_.empty()) {
                if (!progress_since_rebuild) {
                    throw MeshError("decimation cannot reach " + std::to_string(target_faces)
                                    + " faces: no valid edge collapse left at "
                                    + std::to_string(live_faces_) + " faces");
                }
                progress_since_rebuild = false;
                rebuild_queue();
                continue;
            }
            const auto [len, u, v] = queue_.top();
            queue_.pop();
            if (!vertex_alive_[u] || !vertex_alive_[v]) {
                continue;
            }
            if (shared_faces(u, v).empty()) {
                continue;
            }
            const double current = (pos_[u] - pos_[v]).squaredNorm();
            if (current != len) {
                queue_.emplace(current, u, v);
                continue;
            }
            if (!can_collapse(u, v)) {
                continue;
            }
            collapse(u, v);
            progress_since_rebuild = true;
        }
        return compact();
    }

  private:
    using Entry = std::tuple<double, std::int32_t, std::int32_t>;

    std::vector<std::int32_t> shared_faces(std::int32_t u, std::int32_t v) const
    {
        std::vector<std::int32_t> out;
        for (auto f : vertex_faces_[u]) {
            const auto& t = faces_[f];
            if (t[0] == v || t[1] == v || t[2] == v) {
                out.push_back(f);
            }
        }
        return out;
    }

    std::set<std::int32_t> neighbors(std::int32_t u) const
    {
        std::set<std::int32_t> out;
        for (auto f : vertex_faces_[u]) {
            for (auto w : faces_[f]) {
                if (w != u) {
                    out.insert(w);
                }
            }
        }
        return out;
    }

    bool is_boundary_vertex(std::int32_t u) const
    {
        for (auto w : neighbors(u)) {
            if (shared_faces(u, w).size() == 1) {
                return true;
            }
        }
        return false;
    }

    bool can_collapse(std::int32_t u, std::int32_t v) const
    {
        const auto shared = shared_faces(u, v);
        if (shared.size() > 2) {
            return false;
        }
        std::set<std::int32_t> opposite;
        for (auto f : shared) {
            for (auto w : faces_[f]) {
                if (w != u && w != v) {
                    opposite.insert(w);
                }
            }
        }
        const auto nu = neighbors(u);
        const auto nv = neighbors(v);
        std::set<std::int32_t> common;
        std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(),
                              std::inserter(common, common.end()));
        if (common != opposite) {
            return false;
        }
        if (shared.size() == 2 && is_boundary_vertex(u) && is_boundary_vertex(v)) {
            return false;
        }

        // Surviving faces must not duplicate one another and must keep their
        // orientation once u and v merge at the midpoint.
        const Vec3 merged = 0.5 * (pos_[u] + pos_[v]);
        std::set<std::array<std::int32_t, 3>> u_sets;
        for (auto f : vertex_faces_[u]) {
            if (std::find(shared.begin(), shared.end(), f) != shared.end()) {
                continue;
            }
            auto t = faces_[f];
            std::sort(t.begin(), t.end());
            u_sets.insert(t);
        }
        for (auto w : {u, v}) {
            for (auto f : vertex_faces_[w]) {
                if (std::find(shared.begin(), shared.end(), f) != shared.end()) {
                    continue;
                }
                Face t = faces_[f];
                const Vec3 before = face_cross(pos_, t);
                std::array<Vec3, 3> p{pos_[t[0]], pos_[t[1]], pos_[t[2]]};
                for (int k = 0; k < 3; ++k) {
                    if (t[k] == u || t[k] == v) {
                        p[k] = merged;
                        t[k] = u;
                    }
                }
                const Vec3 after = (p[1] - p[0]).cross(p[2] - p[0]);
                if (after.dot(before) <= 0.0) {
                    return false;
                }
                if (w == v) {
                    std::sort(t.begin(), t.end());
                    if (u_sets.count(t)) {
                        return false;
                    }
                }
            }
        }
        return true;
    }

    void collapse(std::int32_t u, std::int32_t v)
    {
        const auto shared = shared_faces(u, v);
        for (auto f : shared) {
            face_alive_[f] = 0;
            --live_faces_;
            for (auto w : faces_[f]) {
                auto& list = vertex_faces_[w];
                list.erase(std::remove(list.begin(), list.end(), f), list.end());
            }
        }
        pos_[u] = 0.5 * (pos_[u] + pos_[v]);
        if (!texture_.empty()) {
            texture_[u] = 0.5 * (texture_[u] + texture_[v]);
        }
        for (auto f : vertex_faces_[v]) {
            for (auto& w : faces_[f]) {
                if (w == v) {
                    w = u;
                }
            }
            vertex_faces_[u].push_back(f);
        }
        vertex_faces_[v].clear();
        vertex_alive_[v] = 0;
        for (auto w : neighbors(u)) {
            push_edge(u, w);
        }
    }

    void push_edge(std::int32_t a, std::int32_t b)
    {
        const auto [lo, hi] = std::minmax(a, b);
        queue_.emplace((pos_[lo] - pos_[hi]).squaredNorm(), lo, hi);
    }

    void rebuild_queue()
    {
        queue_ = {};
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            if (!face_alive_[f]) {
                continue;
            }
            const auto& t = faces_[f];
            for (int k = 0; k < 3; ++k) {
                push_edge(t[k], t[(k + 1) % 3]);
            }
        }
    }

    TriangleMesh compact() const
    {
        TriangleMesh out;
        std::vector<std::int32_t> remap(pos_.size(), -1);
        for (std::size_t i = 0; i < pos_.size(); ++i) {
            if (vertex_alive_[i] && !vertex_faces_[i].empty()) {
                remap[i] = static_cast<std::int32_t>(out.vertices.size());
                out.vertices.push_back(pos_[i]);
            }
        }
        if (!texture_.empty()) {
            out.texture.emplace();
            for (std::size_t i = 0; i < pos_.size(); ++i) {
                if (remap[i] >= 0) {
                    out.texture->push_back(texture_[i]);
                }
            }
        }
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            if (face_alive_[f]) {
                const auto& t = faces_[f];
                out.faces.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
            }
        }
        return out;
    }

    std::vector<Vec3> pos_;
    std::vector<double> texture_;
    std::vector<Face> faces_;
    std::vector<char> face_alive_;
    std::vector<char> vertex_alive_;
    std::vector<std::vector<std::int32_t>> vertex_faces_;
    std::size_t live_faces_;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue_;
};

} // namespace detail

/// Shortest-edge-collapse decimation down to at most `target_faces` faces.
///
/// Collapses merge an edge at its midpoint and are only taken when the link
/// condition holds, no face flips and no duplicate face appears, so topology
/// and orientation are preserved. Throws MeshError when the target cannot be
/// reached under these constraints.
inline TriangleMesh decimate(const TriangleMesh& mesh, std::size_t target_faces)
{
    if (target_faces < 4) {
        throw std::invalid_argument("decimate: target_faces must be at least 4");
    }
    validate(mesh);
    if (mesh.num_faces() <= target_faces) {
        return mesh;
    }
    return detail::EdgeCollapser(mesh).run(target_faces);
}

/// Copies onto every vertex of `coarse` the texture of its nearest `source`
/// vertex. Ties go to the lowest source index.
inline TriangleMesh transfer_texture(TriangleMesh coarse, const TriangleMesh& source)
{
    if (!source.texture) {
        throw MeshError("transfer_texture: source mesh has no texture");
    }
    const auto& src = source.vertices;
    std::vector<double> out(coarse.vertices.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(coarse.vertices.size()); ++i) {
        const Vec3& p = coarse.vertices[i];
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < src.size(); ++j) {
            const double d = (src[j] - p).squaredNorm();
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        out[i] = (*source.texture)[best_j];
    }
    coarse.texture = std::move(out);
    return coarse;
}

} // namespace elastic
