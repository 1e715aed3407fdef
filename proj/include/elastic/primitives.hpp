#pragma once

#include "elastic/mesh.hpp"

#include <cmath>
#include <numbers>

// Synthetic test surfaces. All closed surfaces are oriented outward.

namespace elastic {

namespace detail {

/// Flips faces whose normal points against `outward(barycenter)`.
template <class Outward>
void orient_faces(TriangleMesh& mesh, Outward&& outward)
{
    for (auto& f : mesh.faces) {
        const Vec3 c = face_cross(mesh.vertices, f);
        const Vec3 b = (mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0;
        if (c.dot(outward(b)) < 0.0) {
            std::swap(f[1], f[2]);
        }
    }
}

} // namespace detail

/// Regular icosahedron refined `level` times (20 * 4^level faces), projected
/// onto the sphere of the given radius.
inline TriangleMesh icosphere(int level, double radius = 1.0)
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriangleMesh mesh;
    mesh.vertices = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                     {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                     {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                  {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                  {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                  {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (auto& v : mesh.vertices) {
        v.normalize();
    }
    for (int i = 0; i < level; ++i) {
        mesh = subdivide(mesh);
        for (auto& v : mesh.vertices) {
            v.normalize();
        }
    }
    for (auto& v : mesh.vertices) {
        v *= radius;
    }
    detail::orient_faces(mesh, [](const Vec3& b) { return b; });
    return mesh;
}

/// Latitude/longitude triangulation of an axis-aligned ellipsoid with
/// semi-axes (a, b, c): 2 * n_lon * (n_lat - 1) faces.
inline TriangleMesh uv_ellipsoid(int n_lat, int n_lon, double a, double b, double c)
{
    using std::numbers::pi;
    TriangleMesh mesh;
    mesh.vertices.push_back({0, 0, c});
    for (int i = 1; i < n_lat; ++i) {
        const double theta = pi * i / n_lat;
        for (int j = 0; j < n_lon; ++j) {
            const double phi = 2.0 * pi * j / n_lon;
            mesh.vertices.push_back({a * std::sin(theta) * std::cos(phi),
                                     b * std::sin(theta) * std::sin(phi), c * std::cos(theta)});
        }
    }
    mesh.vertices.push_back({0, 0, -c});
    const auto south = static_cast<std::int32_t>(mesh.vertices.size() - 1);
    auto ring = [&](int i, int j) {
        return static_cast<std::int32_t>(1 + (i - 1) * n_lon + (j % n_lon));
    };
    for (int j = 0; j < n_lon; ++j) {
        mesh.faces.push_back({0, ring(1, j), ring(1, j + 1)});
    }
    for (int i = 1; i + 1 < n_lat; ++i) {
        for (int j = 0; j < n_lon; ++j) {
            mesh.faces.push_back({ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)});
            mesh.faces.push_back({ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)});
        }
    }
    for (int j = 0; j < n_lon; ++j) {
        mesh.faces.push_back({south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)});
    }
    detail::orient_faces(mesh, [&](const Vec3& p) {
        return Vec3(p.x() / (a * a), p.y() / (b * b), p.z() / (c * c));
    });
    return mesh;
}

inline TriangleMesh uv_sphere(int n_lat, int n_lon, double radius = 1.0)
{
    return uv_ellipsoid(n_lat, n_lon, radius, radius, radius);
}

/// Torus around the z axis with tube centre radius `major` and tube radius
/// `minor`: 2 * n_major * n_minor faces.
inline TriangleMesh torus(double major, double minor, int n_major, int n_minor)
{
    using std::numbers::pi;
    TriangleMesh mesh;
    for (int i = 0; i < n_major; ++i) {
        const double u = 2.0 * pi * i / n_major;
        for (int j = 0; j < n_minor; ++j) {
            const double v = 2.0 * pi * j / n_minor;
            mesh.vertices.push_back({(major + minor * std::cos(v)) * std::cos(u),
                                     (major + minor * std::cos(v)) * std::sin(u),
                                     minor * std::sin(v)});
        }
    }
    auto id = [&](int i, int j) {
        return static_cast<std::int32_t>((i % n_major) * n_minor + (j % n_minor));
    };
    for (int i = 0; i < n_major; ++i) {
        for (int j = 0; j < n_minor; ++j) {
            mesh.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            mesh.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    detail::orient_faces(mesh, [&](const Vec3& p) {
        Vec3 axis(p.x(), p.y(), 0.0);
        const double r = axis.norm();
        const Vec3 tube_centre = r > 0 ? Vec3(axis * (major / r)) : Vec3::Zero();
        return Vec3(p - tube_centre);
    });
    return mesh;
}

/// Planar grid over [0, sx] x [0, sy] in the z = 0 plane, normals +z:
/// 2 * nx * ny faces.
inline TriangleMesh grid(int nx, int ny, double sx = 1.0, double sy = 1.0)
{
    TriangleMesh mesh;
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            mesh.vertices.push_back({sx * i / nx, sy * j / ny, 0.0});
        }
    }
    auto id = [&](int i, int j) { return static_cast<std::int32_t>(j * (nx + 1) + i); };
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            mesh.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            mesh.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return mesh;
}

} // namespace elastic
