#pragma once

#include "elastic/mesh.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace elastic {

/// Square root normal field: one 3-vector n_f * sqrt(A_f) per face.
struct SrnfField {
    std::vector<Vec3> values;
};

/// Square root curvature field: one 3-vector per vertex.
struct SrcfField {
    std::vector<Vec3> values;
};

namespace detail {

/// Sum of nonnegative terms taken in ascending order, so that any permutation
/// of the input gives the same bits. Linear-time LSD radix sort on the bit
/// patterns, which order like the values for nonnegative doubles.
inline double ordered_sum(const std::vector<double>& terms)
{
    std::vector<std::uint64_t> keys(terms.size()), scratch(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
        keys[i] = std::bit_cast<std::uint64_t>(terms[i]);
    }
    for (int shift = 0; shift < 64; shift += 8) {
        std::array<std::size_t, 257> start{};
        for (const auto k : keys) {
            ++start[((k >> shift) & 0xff) + 1];
        }
        if (std::find(start.begin() + 1, start.end(), keys.size()) != start.end()) {
            continue;
        }
        std::partial_sum(start.begin(), start.end(), start.begin());
        for (const auto k : keys) {
            scratch[start[(k >> shift) & 0xff]++] = k;
        }
        keys.swap(scratch);
    }
    double s = 0.0;
    for (const auto k : keys) {
        s += std::bit_cast<double>(k);
    }
    return s;
}

} // namespace detail

/// Sum of squared differences of two equally sized vector fields.
inline double field_distance_sq(std::span<const Vec3> a, std::span<const Vec3> b)
{
    if (a.size() != b.size()) {
        throw ShapeMismatchError("field sizes differ (" + std::to_string(a.size()) + " vs "
                                 + std::to_string(b.size()) + ")");
    }
    std::vector<double> terms(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        terms[i] = (a[i] - b[i]).squaredNorm();
    }
    return detail::ordered_sum(terms);
}

inline double field_norm_sq(std::span<const Vec3> a)
{
    double s = 0.0;
    for (const auto& v : a) {
        s += v.squaredNorm();
    }
    return s;
}

namespace detail {

inline void require_direction(const TriangleMesh& mesh, std::span<const Vec3> h)
{
    if (h.size() != mesh.num_vertices()) {
        throw ShapeMismatchError("direction has " + std::to_string(h.size())
                                 + " vectors for " + std::to_string(mesh.num_vertices())
                                 + " vertices");
    }
}

inline Vec3 srnf_of_cross(const Vec3& c, double area_threshold) noexcept
{
    const double len = c.norm();
    if (!(0.5 * len > area_threshold)) {
        return Vec3::Zero();
    }
    return c / std::sqrt(2.0 * len);
}

/// Scatters per-face corner gradients into per-vertex accumulators in face
/// order, so results do not depend on thread scheduling.
inline void scatter_corners(std::span<const Face> faces,
                            const std::vector<std::array<Vec3, 3>>& corner, std::span<Vec3> out)
{
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            out[faces[f][k]] += corner[f][k];
        }
    }
}

} // namespace detail

inline SrnfField srnf(const TriangleMesh& mesh)
{
    const double threshold = degenerate_area_threshold(mesh);
    SrnfField out;
    out.values.resize(mesh.num_faces());
    const std::span<const Vec3> v(mesh.vertices);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t f = 0; f < static_cast<std::ptrdiff_t>(mesh.num_faces()); ++f) {
        out.values[f] = detail::srnf_of_cross(detail::face_cross(v, mesh.faces[f]), threshold);
    }
    return out;
}

inline double srnf_distance_sq(const TriangleMesh& a, const TriangleMesh& b)
{
    require_same_combinatorics(a, b);
    return field_distance_sq(srnf(a).values, srnf(b).values);
}

/// Directional derivative of the SRNF at `mesh` along per-vertex displacements
/// `h`. Degenerate faces have zero derivative.
inline SrnfField srnf_jvp(const TriangleMesh& mesh, std::span<const Vec3> h)
{
    detail::require_direction(mesh, h);
    const double threshold = degenerate_area_threshold(mesh);
    const std::span<const Vec3> v(mesh.vertices);
    SrnfField out;
    out.values.resize(mesh.num_faces());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(mesh.num_faces()); ++i) {
        const Face& f = mesh.faces[i];
        const Vec3 c = detail::face_cross(v, f);
        const double len = c.norm();
        if (!(0.5 * len > threshold)) {
            out.values[i] = Vec3::Zero();
            continue;
        }
        const Vec3 e1 = v[f[1]] - v[f[0]];
        const Vec3 e2 = v[f[2]] - v[f[0]];
        const Vec3 dc = (h[f[1]] - h[f[0]]).cross(e2) + e1.cross(h[f[2]] - h[f[0]]);
        const Vec3 n = c / len;
        out.values[i] = (dc - 0.5 * n * n.dot(dc)) / std::sqrt(2.0 * len);
    }
    return out;
}

/// Adds J^T * adjoint to `grad`, where J is the Jacobian of srnf(mesh) with
/// respect to the vertex positions.
inline void srnf_vjp_accumulate(const TriangleMesh& mesh, std::span<const Vec3> adjoint,
                                std::span<Vec3> grad)
{
    if (adjoint.size() != mesh.num_faces()) {
        throw ShapeMismatchError("SRNF adjoint has the wrong number of faces");
    }
    detail::require_direction(mesh, grad);
    const double threshold = degenerate_area_threshold(mesh);
    const std::span<const Vec3> v(mesh.vertices);
    std::vector<std::array<Vec3, 3>> corner(mesh.num_faces());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(mesh.num_faces()); ++i) {
        const Face& f = mesh.faces[i];
        const Vec3 c = detail::face_cross(v, f);
        const double len = c.norm();
        if (!(0.5 * len > threshold)) {
            corner[i] = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
            continue;
        }
        const Vec3 n = c / len;
        const Vec3& g = adjoint[i];
        const Vec3 cbar = (g - 0.5 * n * n.dot(g)) / std::sqrt(2.0 * len);
        corner[i] = detail::cross_vjp(v, f, cbar);
    }
    detail::scatter_corners(mesh.faces, corner, grad);
}

/// Gradient of srnf_distance_sq(a, b) with respect to the vertices of `a`.
inline std::vector<Vec3> srnf_distance_sq_gradient(const TriangleMesh& a, const TriangleMesh& b)
{
    require_same_combinatorics(a, b);
    const auto qa = srnf(a).values;
    const auto qb = srnf(b).values;
    std::vector<Vec3> adjoint(qa.size());
    for (std::size_t f = 0; f < qa.size(); ++f) {
        adjoint[f] = 2.0 * (qa[f] - qb[f]);
    }
    std::vector<Vec3> grad(a.num_vertices(), Vec3::Zero());
    srnf_vjp_accumulate(a, adjoint, grad);
    return grad;
}

/// G_q(h, h): squared L2 norm of the SRNF directional derivative.
inline double srnf_metric_form(const TriangleMesh& mesh, std::span<const Vec3> h)
{
    return field_norm_sq(srnf_jvp(mesh, h).values);
}

/// Left Riemann sum of G along a uniformly sampled path on [0, 1].
inline double path_energy(std::span<const TriangleMesh> path)
{
    if (path.size() < 2) {
        throw std::invalid_argument("path_energy needs at least two samples");
    }
    for (std::size_t i = 1; i < path.size(); ++i) {
        require_same_combinatorics(path.front(), path[i]);
    }
    const double dt = 1.0 / static_cast<double>(path.size() - 1);
    double energy = 0.0;
    std::vector<Vec3> velocity(path.front().num_vertices());
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        for (std::size_t k = 0; k < velocity.size(); ++k) {
            velocity[k] = (path[i + 1].vertices[k] - path[i].vertices[k]) / dt;
        }
        energy += srnf_metric_form(path[i], velocity) * dt;
    }
    return energy;
}

// --- square root curvature field -------------------------------------------

namespace detail {

struct SrcfParts {
    std::vector<Vec3> numerator;   // 1/2 sum_f e_f x n_f
    std::vector<double> area_sum;  // sum_f A_f over incident faces
    std::vector<Vec3> values;
};

/// e is the edge opposite the corner, oriented along the face's cyclic order.
inline SrcfParts srcf_parts(const TriangleMesh& mesh, bool strict)
{
    const double threshold = degenerate_area_threshold(mesh);
    const std::span<const Vec3> v(mesh.vertices);
    SrcfParts p;
    p.numerator.assign(mesh.num_vertices(), Vec3::Zero());
    p.area_sum.assign(mesh.num_vertices(), 0.0);
    for (const auto& f : mesh.faces) {
        const Vec3 c = face_cross(v, f);
        const double len = c.norm();
        if (!(0.5 * len > threshold)) {
            continue;
        }
        const Vec3 n = c / len;
        for (int k = 0; k < 3; ++k) {
            const Vec3 e = v[f[(k + 2) % 3]] - v[f[(k + 1) % 3]];
            p.numerator[f[k]] += 0.5 * e.cross(n);
            p.area_sum[f[k]] += 0.5 * len;
        }
    }
    p.values.resize(mesh.num_vertices());
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
        if (p.area_sum[i] > 0.0) {
            p.values[i] = p.numerator[i] / std::sqrt(p.area_sum[i] / 3.0);
        }
        else if (strict) {
            throw MeshError("vertex " + std::to_string(i)
                            + " has no incident face with positive area");
        }
        else {
            p.values[i] = Vec3::Zero();
        }
    }
    return p;
}

} // namespace detail

/// Vertices without an incident face of positive area raise MeshError.
inline SrcfField srcf(const TriangleMesh& mesh)
{
    return {detail::srcf_parts(mesh, true).values};
}

inline double srcf_distance_sq(const TriangleMesh& a, const TriangleMesh& b)
{
    require_same_combinatorics(a, b);
    return field_distance_sq(srcf(a).values, srcf(b).values);
}

/// Adds J^T * adjoint to `grad` for the SRCF map. Vertices without positive
/// incident area contribute nothing.
inline void srcf_vjp_accumulate(const TriangleMesh& mesh, std::span<const Vec3> adjoint,
                                std::span<Vec3> grad)
{
    detail::require_direction(mesh, adjoint);
    detail::require_direction(mesh, grad);
    const auto parts = detail::srcf_parts(mesh, false);
    const std::size_t nv = mesh.num_vertices();
    std::vector<Vec3> num_bar(nv, Vec3::Zero());
    std::vector<double> area_bar(nv, 0.0);
    for (std::size_t i = 0; i < nv; ++i) {
        const double s = parts.area_sum[i];
        if (s > 0.0) {
            num_bar[i] = adjoint[i] / std::sqrt(s / 3.0);
            area_bar[i] = -adjoint[i].dot(parts.values[i]) / (2.0 * s);
        }
    }

    const double threshold = degenerate_area_threshold(mesh);
    const std::span<const Vec3> v(mesh.vertices);
    std::vector<std::array<Vec3, 3>> corner(mesh.num_faces());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(mesh.num_faces()); ++i) {
        const Face& f = mesh.faces[i];
        auto& out = corner[i];
        out = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
        const Vec3 c = detail::face_cross(v, f);
        const double len = c.norm();
        if (!(0.5 * len > threshold)) {
            continue;
        }
        const Vec3 n = c / len;
        Vec3 n_bar = Vec3::Zero();
        double a_bar = 0.0;
        for (int k = 0; k < 3; ++k) {
            const int a = (k + 1) % 3;
            const int b = (k + 2) % 3;
            const Vec3 e = v[f[b]] - v[f[a]];
            const Vec3& pb = num_bar[f[k]];
            n_bar += 0.5 * pb.cross(e);
            const Vec3 e_bar = 0.5 * n.cross(pb);
            out[b] += e_bar;
            out[a] -= e_bar;
            a_bar += area_bar[f[k]];
        }
        const Vec3 c_bar = (n_bar - n * n.dot(n_bar)) / len + 0.5 * a_bar * n;
        const auto g = detail::cross_vjp(v, f, c_bar);
        for (int k = 0; k < 3; ++k) {
            out[k] += g[k];
        }
    }
    detail::scatter_corners(mesh.faces, corner, grad);
}

/// Gradient of srcf_distance_sq(a, b) with respect to the vertices of `a`.
inline std::vector<Vec3> srcf_distance_sq_gradient(const TriangleMesh& a, const TriangleMesh& b)
{
    require_same_combinatorics(a, b);
    const auto qa = srcf(a).values;
    const auto qb = srcf(b).values;
    std::vector<Vec3> adjoint(qa.size());
    for (std::size_t i = 0; i < qa.size(); ++i) {
        adjoint[i] = 2.0 * (qa[i] - qb[i]);
    }
    std::vector<Vec3> grad(a.num_vertices(), Vec3::Zero());
    srcf_vjp_accumulate(a, adjoint, grad);
    return grad;
}

} // namespace elastic
