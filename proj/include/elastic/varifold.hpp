#pragma once

#include "elastic/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

namespace elastic {

/// Kernel on orientations. Only the orientation-blind Binet kernel (n1.n2)^2
/// is provided.
enum class ZonalKernel { binet };

/// k = exp(-|x1-x2|^2 / sigma^2) * (n1.n2)^2 [* exp(-|z1-z2|^2 / tau^2)]
struct KernelConfig {
    double sigma = 1.0;
    ZonalKernel zonal = ZonalKernel::binet;
    /// Texture scale; the texture factor is used only when set and both
    /// arguments carry textures.
    std::optional<double> tau;

    void validate() const
    {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            throw ConfigError("kernel sigma must be a positive finite number");
        }
        if (tau && (!(*tau > 0.0) || !std::isfinite(*tau))) {
            throw ConfigError("kernel tau must be a positive finite number");
        }
    }
};

/// Dirac-sum representation of a (functional) varifold: one atom per face.
struct VarifoldAtoms {
    std::vector<Vec3> centers;
    std::vector<Vec3> normals;
    std::vector<double> weights;
    std::optional<std::vector<double>> textures;

    std::size_t size() const noexcept { return centers.size(); }
};

inline VarifoldAtoms atoms(const TriangleMesh& mesh)
{
    auto g = face_geometry(mesh);
    return {std::move(g.barycenters), std::move(g.normals), std::move(g.areas),
            std::move(g.face_texture)};
}

/// Gradient of a scalar with respect to atom centers, normals and weights.
struct AtomAdjoint {
    std::vector<Vec3> centers;
    std::vector<Vec3> normals;
    std::vector<double> weights;

    explicit AtomAdjoint(std::size_t n = 0)
        : centers(n, Vec3::Zero()), normals(n, Vec3::Zero()), weights(n, 0.0)
    {}
};

namespace detail {

/// Structure-of-arrays copy of the atoms for the kernel loops.
struct PackedAtoms {
    std::vector<double> x, y, z, nx, ny, nz, w, t;

    explicit PackedAtoms(const VarifoldAtoms& a, bool with_texture)
    {
        const std::size_t n = a.size();
        x.resize(n), y.resize(n), z.resize(n);
        nx.resize(n), ny.resize(n), nz.resize(n);
        w = a.weights;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = a.centers[i].x(), y[i] = a.centers[i].y(), z[i] = a.centers[i].z();
            nx[i] = a.normals[i].x(), ny[i] = a.normals[i].y(), nz[i] = a.normals[i].z();
        }
        if (with_texture) {
            t = *a.textures;
        }
    }
    std::size_t size() const noexcept { return x.size(); }
};

inline bool use_texture(const VarifoldAtoms& a, const VarifoldAtoms& b, const KernelConfig& k)
{
    if (!k.tau) {
        return false;
    }
    if (a.textures.has_value() != b.textures.has_value()) {
        throw ConfigError("texture kernel requested but only one varifold carries a texture");
    }
    return a.textures.has_value();
}

inline void check_atoms(const VarifoldAtoms& a)
{
    const auto n = a.size();
    if (a.normals.size() != n || a.weights.size() != n || (a.textures && a.textures->size() != n)) {
        throw ShapeMismatchError("varifold atom arrays have inconsistent lengths");
    }
}

/// Strict weak order on atom sets used to fix the summation order of inner().
inline bool atoms_less(const VarifoldAtoms& a, const VarifoldAtoms& b)
{
    if (a.size() != b.size()) {
        return a.size() < b.size();
    }
    auto cmp_vec = [](const std::vector<Vec3>& u, const std::vector<Vec3>& v) {
        for (std::size_t i = 0; i < u.size(); ++i) {
            for (int k = 0; k < 3; ++k) {
                if (u[i][k] != v[i][k]) {
                    return u[i][k] < v[i][k] ? -1 : 1;
                }
            }
        }
        return 0;
    };
    if (int c = cmp_vec(a.centers, b.centers)) {
        return c < 0;
    }
    if (int c = cmp_vec(a.normals, b.normals)) {
        return c < 0;
    }
    if (a.weights != b.weights) {
        return a.weights < b.weights;
    }
    return a.textures < b.textures;
}

/// Copy of `a` with the atoms sorted lexicographically by center, normal,
/// weight and texture, so that sums over it ignore the face labeling.
inline VarifoldAtoms canonical(const VarifoldAtoms& a)
{
    std::vector<std::size_t> order(a.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto key = [&](std::size_t i) {
        return std::tuple(a.centers[i].x(), a.centers[i].y(), a.centers[i].z(), a.normals[i].x(),
                          a.normals[i].y(), a.normals[i].z(), a.weights[i],
                          a.textures ? (*a.textures)[i] : 0.0);
    };
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return key(i) < key(j); });
    VarifoldAtoms out;
    out.centers.reserve(a.size());
    out.normals.reserve(a.size());
    out.weights.reserve(a.size());
    if (a.textures) {
        out.textures.emplace().reserve(a.size());
    }
    for (std::size_t i : order) {
        out.centers.push_back(a.centers[i]);
        out.normals.push_back(a.normals[i]);
        out.weights.push_back(a.weights[i]);
        if (a.textures) {
            out.textures->push_back((*a.textures)[i]);
        }
    }
    return out;
}

/// sum_i sum_j k(a_i, b_j) w_i w_j, one row per outer atom, rows summed in
/// index order.
inline double inner_ordered(const VarifoldAtoms& a, const VarifoldAtoms& b, const KernelConfig& k)
{
    const bool tex = use_texture(a, b, k);
    const PackedAtoms pa(a, tex), pb(b, tex);
    const double inv_s2 = 1.0 / (k.sigma * k.sigma);
    const double inv_t2 = tex ? 1.0 / (*k.tau * *k.tau) : 0.0;
    const std::size_t nb = pb.size();
    std::vector<double> rows(pa.size(), 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pa.size()); ++i) {
        const double xi = pa.x[i], yi = pa.y[i], zi = pa.z[i];
        const double nxi = pa.nx[i], nyi = pa.ny[i], nzi = pa.nz[i];
        const double ti = tex ? pa.t[i] : 0.0;
        double s = 0.0;
        for (std::size_t j = 0; j < nb; ++j) {
            const double dx = xi - pb.x[j], dy = yi - pb.y[j], dz = zi - pb.z[j];
            double arg = (dx * dx + dy * dy + dz * dz) * inv_s2;
            if (tex) {
                const double dt = ti - pb.t[j];
                arg += dt * dt * inv_t2;
            }
            const double dot = nxi * pb.nx[j] + nyi * pb.ny[j] + nzi * pb.nz[j];
            s += std::exp(-arg) * dot * dot * pb.w[j];
        }
        rows[i] = s * pa.w[i];
    }
    double total = 0.0;
    for (double r : rows) {
        total += r;
    }
    return total;
}

} // namespace detail

/// Kernel inner product <mu_a, mu_b>. Symmetric and independent of the atom
/// order bit for bit: both atom sets and the argument order are normalised
/// before summation.
inline double inner(const VarifoldAtoms& a, const VarifoldAtoms& b, const KernelConfig& k)
{
    k.validate();
    detail::check_atoms(a);
    detail::check_atoms(b);
    const auto ca = detail::canonical(a);
    const auto cb = detail::canonical(b);
    return detail::atoms_less(cb, ca) ? detail::inner_ordered(cb, ca, k)
                                      : detail::inner_ordered(ca, cb, k);
}

inline double norm_sq(const VarifoldAtoms& a, const KernelConfig& k)
{
    return inner(a, a, k);
}

struct VarifoldDistance {
    double value = 0.0;  ///< clamped at zero
    double raw = 0.0;    ///< |a|^2 - 2<a,b> + |b|^2 before clamping
    bool clamped = false;
};

inline VarifoldDistance distance_sq_detailed(const VarifoldAtoms& a, const VarifoldAtoms& b,
                                             const KernelConfig& k)
{
    VarifoldDistance d;
    d.raw = norm_sq(a, k) - 2.0 * inner(a, b, k) + norm_sq(b, k);
    d.clamped = d.raw < 0.0;
    d.value = d.clamped ? 0.0 : d.raw;
    return d;
}

inline double distance_sq(const VarifoldAtoms& a, const VarifoldAtoms& b, const KernelConfig& k)
{
    return distance_sq_detailed(a, b, k).value;
}

/// Squared kernel distance between two meshes of arbitrary connectivity.
inline double distance_sq(const TriangleMesh& a, const TriangleMesh& b, const KernelConfig& k)
{
    return distance_sq(atoms(a), atoms(b), k);
}

/// Adds coeff * d<a, b>/d(atoms of a) into `adj` and returns <a, b>.
///
/// For the gradient of |a|^2 pass b = a and twice the coefficient.
inline double accumulate_inner_gradient(const VarifoldAtoms& a, const VarifoldAtoms& b,
                                        const KernelConfig& k, double coeff, AtomAdjoint& adj)
{
    k.validate();
    detail::check_atoms(a);
    detail::check_atoms(b);
    const bool tex = detail::use_texture(a, b, k);
    const detail::PackedAtoms pa(a, tex), pb(b, tex);
    const double inv_s2 = 1.0 / (k.sigma * k.sigma);
    const double inv_t2 = tex ? 1.0 / (*k.tau * *k.tau) : 0.0;
    const std::size_t nb = pb.size();
    std::vector<double> rows(pa.size(), 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pa.size()); ++i) {
        const double xi = pa.x[i], yi = pa.y[i], zi = pa.z[i];
        const double nxi = pa.nx[i], nyi = pa.ny[i], nzi = pa.nz[i];
        const double ti = tex ? pa.t[i] : 0.0;
        double s0 = 0.0;                     // sum k w_j
        double sx = 0.0, sy = 0.0, sz = 0.0; // sum k w_j (c_i - c_j)
        double mx = 0.0, my = 0.0, mz = 0.0; // sum rho tau (n_i.n_j) w_j n_j
        for (std::size_t j = 0; j < nb; ++j) {
            const double dx = xi - pb.x[j], dy = yi - pb.y[j], dz = zi - pb.z[j];
            double arg = (dx * dx + dy * dy + dz * dz) * inv_s2;
            if (tex) {
                const double dt = ti - pb.t[j];
                arg += dt * dt * inv_t2;
            }
            const double dot = nxi * pb.nx[j] + nyi * pb.ny[j] + nzi * pb.nz[j];
            const double rw = std::exp(-arg) * pb.w[j];
            const double kw = rw * dot * dot;
            s0 += kw;
            sx += kw * dx, sy += kw * dy, sz += kw * dz;
            const double m = rw * dot;
            mx += m * pb.nx[j], my += m * pb.ny[j], mz += m * pb.nz[j];
        }
        const double wi = pa.w[i];
        rows[i] = s0 * wi;
        adj.weights[i] += coeff * s0;
        adj.centers[i] += coeff * (-2.0 * wi * inv_s2) * Vec3(sx, sy, sz);
        adj.normals[i] += coeff * (2.0 * wi) * Vec3(mx, my, mz);
    }
    double total = 0.0;
    for (double r : rows) {
        total += r;
    }
    return total;
}

/// Pulls an atom adjoint back to the mesh vertices (textures are constant).
inline void atoms_vjp_accumulate(const TriangleMesh& mesh, const AtomAdjoint& adj,
                                 std::span<Vec3> grad)
{
    if (adj.centers.size() != mesh.num_faces() || grad.size() != mesh.num_vertices()) {
        throw ShapeMismatchError("atom adjoint does not match the mesh");
    }
    const double threshold = degenerate_area_threshold(mesh);
    const std::span<const Vec3> v(mesh.vertices);
    std::vector<std::array<Vec3, 3>> corner(mesh.num_faces());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(mesh.num_faces()); ++i) {
        const Face& f = mesh.faces[i];
        const Vec3 cb = adj.centers[i] / 3.0;
        auto& out = corner[i];
        out = {cb, cb, cb};
        const Vec3 c = detail::face_cross(v, f);
        const double len = c.norm();
        if (!(0.5 * len > threshold)) {
            continue;
        }
        const Vec3 n = c / len;
        const Vec3& nb = adj.normals[i];
        const Vec3 c_bar = (nb - n * n.dot(nb)) / len + 0.5 * adj.weights[i] * n;
        const auto g = detail::cross_vjp(v, f, c_bar);
        for (int k = 0; k < 3; ++k) {
            out[k] += g[k];
        }
    }
    for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
        for (int k = 0; k < 3; ++k) {
            grad[mesh.faces[f][k]] += corner[f][k];
        }
    }
}

/// Gradient of distance_sq(a, b) with respect to the vertices of `a`.
inline std::vector<Vec3> distance_sq_gradient(const TriangleMesh& a, const TriangleMesh& b,
                                              const KernelConfig& k)
{
    const auto aa = atoms(a);
    const auto ab = atoms(b);
    AtomAdjoint adj(aa.size());
    accumulate_inner_gradient(aa, aa, k, 2.0, adj);
    accumulate_inner_gradient(aa, ab, k, -2.0, adj);
    std::vector<Vec3> grad(a.num_vertices(), Vec3::Zero());
    atoms_vjp_accumulate(a, adj, grad);
    return grad;
}

} // namespace elastic
