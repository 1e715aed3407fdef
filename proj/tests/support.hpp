#pragma once

// Independent reference computations and random inputs shared by the tests.

#include "elastic/elastic.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace elastic::testing {

/// Single triangles used by the hand-computed checks.
inline TriangleMesh triangle(const Vec3& a, const Vec3& b, const Vec3& c)
{
    TriangleMesh m;
    m.vertices = {a, b, c};
    m.faces = {{0, 1, 2}};
    return m;
}

inline TriangleMesh t0() { return triangle({0, 0, 0}, {1, 0, 0}, {0, 1, 0}); }
inline TriangleMesh t1() { return triangle({0, 0, 0}, {2, 0, 0}, {0, 1, 0}); }

inline Vec3 gaussian_vec(std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    return {n(rng), n(rng), n(rng)};
}

inline std::vector<Vec3> random_field(std::size_t n, std::mt19937_64& rng)
{
    std::vector<Vec3> h(n);
    for (auto& v : h) {
        v = gaussian_vec(rng);
    }
    return h;
}

inline Mat3 random_rotation(std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    return q.toRotationMatrix();
}

/// Randomly jittered latitude/longitude ellipsoid with at most 168 faces.
inline TriangleMesh random_closed_mesh(std::mt19937_64& rng, double jitter = 0.05)
{
    std::uniform_int_distribution<int> lat(3, 8), lon(3, 12);
    std::uniform_real_distribution<double> axis(0.6, 1.6);
    auto m = uv_ellipsoid(lat(rng), lon(rng), axis(rng), axis(rng), axis(rng));
    for (auto& v : m.vertices) {
        v += jitter * gaussian_vec(rng);
    }
    return m;
}

/// Jittered open grid (has boundary vertices).
inline TriangleMesh random_open_mesh(std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> cells(2, 7);
    auto m = grid(cells(rng), cells(rng));
    for (auto& v : m.vertices) {
        v += 0.05 * gaussian_vec(rng);
    }
    return m;
}

inline TriangleMesh displaced(const TriangleMesh& m, const std::vector<Vec3>& h, double eps)
{
    TriangleMesh out = m;
    for (std::size_t i = 0; i < h.size(); ++i) {
        out.vertices[i] += eps * h[i];
    }
    return out;
}

/// Central difference of f at m in direction h.
inline double fd_directional(const std::function<double(const TriangleMesh&)>& f,
                             const TriangleMesh& m, const std::vector<Vec3>& h, double eps)
{
    return (f(displaced(m, h, eps)) - f(displaced(m, h, -eps))) / (2.0 * eps);
}

inline double dot(const std::vector<Vec3>& a, const std::vector<Vec3>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i].dot(b[i]);
    }
    return s;
}

inline double relative_error(double a, double b)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

/// Vertex and face permutation plus a cyclic rotation of each face, which
/// preserves the orientation. Returns the permuted mesh.
inline TriangleMesh relabeled(const TriangleMesh& m, std::mt19937_64& rng,
                              std::vector<std::size_t>* vertex_perm = nullptr,
                              std::vector<std::size_t>* face_perm = nullptr)
{
    std::vector<std::size_t> vp(m.num_vertices()), fp(m.num_faces());
    std::iota(vp.begin(), vp.end(), 0);
    std::iota(fp.begin(), fp.end(), 0);
    std::shuffle(vp.begin(), vp.end(), rng);
    std::shuffle(fp.begin(), fp.end(), rng);
    // vertex vp[k] of the old mesh becomes vertex k of the new one
    std::vector<std::int32_t> new_index(m.num_vertices());
    TriangleMesh out;
    out.vertices.resize(m.num_vertices());
    if (m.texture) {
        out.texture = std::vector<double>(m.num_vertices());
    }
    for (std::size_t k = 0; k < vp.size(); ++k) {
        new_index[vp[k]] = static_cast<std::int32_t>(k);
        out.vertices[k] = m.vertices[vp[k]];
        if (m.texture) {
            (*out.texture)[k] = (*m.texture)[vp[k]];
        }
    }
    std::uniform_int_distribution<int> rot(0, 2);
    for (std::size_t k = 0; k < fp.size(); ++k) {
        const Face& f = m.faces[fp[k]];
        const int r = rot(rng);
        out.faces.push_back({new_index[f[r]], new_index[f[(r + 1) % 3]], new_index[f[(r + 2) % 3]]});
    }
    if (vertex_perm) {
        *vertex_perm = vp;
    }
    if (face_perm) {
        *face_perm = fp;
    }
    return out;
}

/// Applies given vertex/face permutations (as produced by relabeled) without
/// rotating the faces.
inline TriangleMesh permuted(const TriangleMesh& m, const std::vector<std::size_t>& vp,
                             const std::vector<std::size_t>& fp)
{
    std::vector<std::int32_t> new_index(m.num_vertices());
    TriangleMesh out;
    out.vertices.resize(m.num_vertices());
    for (std::size_t k = 0; k < vp.size(); ++k) {
        new_index[vp[k]] = static_cast<std::int32_t>(k);
        out.vertices[k] = m.vertices[vp[k]];
    }
    for (std::size_t k = 0; k < fp.size(); ++k) {
        const Face& f = m.faces[fp[k]];
        out.faces.push_back({new_index[f[0]], new_index[f[1]], new_index[f[2]]});
    }
    return out;
}

/// Mean curvature vector by the cotangent formula,
/// 1/2 sum_j (cot a_ij + cot b_ij)(v_j - v_i), divided by sqrt(A_i / 3)
/// with A_i the area of the incident faces. Built from the edge list, not the
/// face-sum form used by the library.
inline Vec3 cotangent_srcf(const TriangleMesh& m, std::size_t vi)
{
    const auto i = static_cast<std::int32_t>(vi);
    Vec3 lap = Vec3::Zero();
    double area = 0.0;
    auto cot = [](const Vec3& a, const Vec3& b) { return a.dot(b) / a.cross(b).norm(); };
    for (const auto& f : m.faces) {
        const auto* it = std::find(f.begin(), f.end(), i);
        if (it == f.end()) {
            continue;
        }
        const Vec3& p = m.vertices[vi];
        const auto k = it - f.begin();
        const Vec3& a = m.vertices[f[(k + 1) % 3]];
        const Vec3& b = m.vertices[f[(k + 2) % 3]];
        area += 0.5 * (a - p).cross(b - p).norm();
        // edge (i, a) is opposite the angle at b; edge (i, b) opposite the angle at a
        lap += 0.5 * cot(p - b, a - b) * (a - p);
        lap += 0.5 * cot(p - a, b - a) * (b - p);
    }
    return lap / std::sqrt(area / 3.0);
}

/// Root mean square length of a vector field.
inline double rms(const std::vector<Vec3>& v)
{
    double s = 0.0;
    for (const auto& x : v) {
        s += x.squaredNorm();
    }
    return std::sqrt(s / static_cast<double>(std::max<std::size_t>(1, v.size())));
}

} // namespace elastic::testing
