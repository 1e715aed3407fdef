#pragma once

#include "elastic/features.hpp"
#include "elastic/varifold.hpp"

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace elastic {

/// Weights of the relaxed matching energies. All terms are squared distances.
struct MatchConfig {
    double lambda = 1.0;
    KernelConfig kernel{};
    double srnf_weight = 1.0;
    double srcf_weight = 0.0;

    void validate() const
    {
        kernel.validate();
        if (!(lambda > 0.0) || !std::isfinite(lambda)) {
            throw ConfigError("lambda must be a positive finite number");
        }
        if (!(srnf_weight >= 0.0) || !(srcf_weight >= 0.0) || !std::isfinite(srnf_weight)
            || !std::isfinite(srcf_weight)) {
            throw ConfigError("feature weights must be finite and nonnegative");
        }
        if (!(srnf_weight + srcf_weight > 0.0)) {
            throw ConfigError("at least one feature weight must be positive");
        }
    }
};

/// Per-term breakdown. Feature terms are already weighted; varifold terms are
/// the raw squared distances before multiplication by lambda.
struct EnergyTerms {
    double srnf = 0.0;
    double srcf = 0.0;
    double varifold_source = 0.0;
    double varifold_target = 0.0;
    double total = 0.0;

    double features() const noexcept { return srnf + srcf; }
    double varifold() const noexcept { return varifold_source + varifold_target; }
};

// --- flat coordinate views -------------------------------------------------

inline Eigen::VectorXd flatten(std::span<const Vec3> v)
{
    Eigen::VectorXd x(3 * static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        x.segment<3>(3 * static_cast<Eigen::Index>(i)) = v[i];
    }
    return x;
}

inline void unflatten(const Eigen::Ref<const Eigen::VectorXd>& x, std::span<Vec3> out)
{
    if (x.size() != 3 * static_cast<Eigen::Index>(out.size())) {
        throw ShapeMismatchError("flat vector length does not match the vertex count");
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x.segment<3>(3 * static_cast<Eigen::Index>(i));
    }
}

namespace detail {

inline std::vector<Vec3> field_difference(std::span<const Vec3> a, std::span<const Vec3> b,
                                          double scale)
{
    std::vector<Vec3> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        d[i] = scale * (a[i] - b[i]);
    }
    return d;
}

/// Feature terms between two meshes of equal combinatorics, with optional
/// gradients for either side.
inline void feature_terms(const TriangleMesh& a, const TriangleMesh& b, const MatchConfig& cfg,
                          EnergyTerms& terms, std::span<Vec3> grad_a, std::span<Vec3> grad_b)
{
    if (cfg.srnf_weight > 0.0) {
        const auto na = srnf(a).values;
        const auto nb = srnf(b).values;
        terms.srnf = cfg.srnf_weight * field_distance_sq(na, nb);
        if (!grad_a.empty() || !grad_b.empty()) {
            const auto r = field_difference(na, nb, 2.0 * cfg.srnf_weight);
            if (!grad_a.empty()) {
                srnf_vjp_accumulate(a, r, grad_a);
            }
            if (!grad_b.empty()) {
                const auto neg = field_difference(nb, na, 2.0 * cfg.srnf_weight);
                srnf_vjp_accumulate(b, neg, grad_b);
            }
        }
    }
    if (cfg.srcf_weight > 0.0) {
        const auto pa = srcf_parts(a, true).values;
        const auto pb = srcf_parts(b, true).values;
        terms.srcf = cfg.srcf_weight * field_distance_sq(pa, pb);
        if (!grad_a.empty()) {
            srcf_vjp_accumulate(a, field_difference(pa, pb, 2.0 * cfg.srcf_weight), grad_a);
        }
        if (!grad_b.empty()) {
            srcf_vjp_accumulate(b, field_difference(pb, pa, 2.0 * cfg.srcf_weight), grad_b);
        }
    }
}

/// Raw |free - fixed|^2 in the kernel metric; adds coeff * gradient into
/// `grad` when it is non-empty.
inline double varifold_term(const TriangleMesh& free_mesh, const VarifoldAtoms& fixed,
                            double fixed_norm_sq, const KernelConfig& k, double coeff,
                            std::span<Vec3> grad)
{
    const auto af = atoms(free_mesh);
    if (grad.empty()) {
        return inner(af, af, k) - 2.0 * inner(af, fixed, k) + fixed_norm_sq;
    }
    AtomAdjoint adj(af.size());
    const double self = accumulate_inner_gradient(af, af, k, 2.0 * coeff, adj);
    const double cross = accumulate_inner_gradient(af, fixed, k, -2.0 * coeff, adj);
    atoms_vjp_accumulate(free_mesh, adj, grad);
    return self - 2.0 * cross + fixed_norm_sq;
}

} // namespace detail

// --- asymmetric ------------------------------------------------------------

/// w_N |N(q0) - N(q1t)|^2 + w_Phi |Phi(q0) - Phi(q1t)|^2 + lambda |mu(q1t) - mu(q1)|^2
inline EnergyTerms asymmetric_terms(const TriangleMesh& q0, const TriangleMesh& q1t,
                                    const TriangleMesh& q1, const MatchConfig& cfg,
                                    std::span<Vec3> grad_q1t = {})
{
    cfg.validate();
    require_same_combinatorics(q0, q1t);
    EnergyTerms t;
    detail::feature_terms(q0, q1t, cfg, t, {}, grad_q1t);
    const auto a1 = atoms(q1);
    t.varifold_target = detail::varifold_term(q1t, a1, inner(a1, a1, cfg.kernel), cfg.kernel,
                                              cfg.lambda, grad_q1t);
    t.total = t.features() + cfg.lambda * t.varifold();
    return t;
}

inline double asymmetric_energy(const TriangleMesh& q0, const TriangleMesh& q1t,
                                const TriangleMesh& q1, const MatchConfig& cfg)
{
    return asymmetric_terms(q0, q1t, q1, cfg).total;
}

/// Gradient with respect to the vertices of q1t.
inline std::vector<Vec3> asymmetric_gradient(const TriangleMesh& q0, const TriangleMesh& q1t,
                                             const TriangleMesh& q1, const MatchConfig& cfg)
{
    std::vector<Vec3> g(q1t.num_vertices(), Vec3::Zero());
    asymmetric_terms(q0, q1t, q1, cfg, g);
    return g;
}

// --- symmetric -------------------------------------------------------------

struct SymmetricGradient {
    std::vector<Vec3> source;  ///< with respect to q0t
    std::vector<Vec3> target;  ///< with respect to q1t
};

/// Evaluates the symmetric energy repeatedly for fixed boundary meshes q0, q1
/// and a fixed combinatorics of the free pair (q0t, q1t).
class SymmetricMatchingProblem {
  public:
    SymmetricMatchingProblem(const TriangleMesh& q0, const TriangleMesh& q1, MatchConfig cfg)
        : cfg_(cfg), a0_(atoms(q0)), a1_(atoms(q1))
    {
        cfg_.validate();
        n0_ = inner(a0_, a0_, cfg_.kernel);
        n1_ = inner(a1_, a1_, cfg_.kernel);
    }

    const MatchConfig& config() const noexcept { return cfg_; }

    /// lambda |mu(q0) - mu(q0t)|^2 + features(q0t, q1t) + lambda |mu(q1t) - mu(q1)|^2
    EnergyTerms terms(const TriangleMesh& q0t, const TriangleMesh& q1t,
                      SymmetricGradient* grad = nullptr) const
    {
        require_same_combinatorics(q0t, q1t);
        std::span<Vec3> g0, g1;
        if (grad) {
            grad->source.assign(q0t.num_vertices(), Vec3::Zero());
            grad->target.assign(q1t.num_vertices(), Vec3::Zero());
            g0 = grad->source;
            g1 = grad->target;
        }
        EnergyTerms t;
        detail::feature_terms(q0t, q1t, cfg_, t, g0, g1);
        t.varifold_source = detail::varifold_term(q0t, a0_, n0_, cfg_.kernel, cfg_.lambda, g0);
        t.varifold_target = detail::varifold_term(q1t, a1_, n1_, cfg_.kernel, cfg_.lambda, g1);
        t.total = t.features() + cfg_.lambda * t.varifold();
        return t;
    }

  private:
    MatchConfig cfg_;
    VarifoldAtoms a0_, a1_;
    double n0_ = 0.0, n1_ = 0.0;
};

inline EnergyTerms symmetric_terms(const TriangleMesh& q0t, const TriangleMesh& q1t,
                                   const TriangleMesh& q0, const TriangleMesh& q1,
                                   const MatchConfig& cfg)
{
    return SymmetricMatchingProblem(q0, q1, cfg).terms(q0t, q1t);
}

inline double symmetric_energy(const TriangleMesh& q0t, const TriangleMesh& q1t,
                               const TriangleMesh& q0, const TriangleMesh& q1,
                               const MatchConfig& cfg)
{
    return symmetric_terms(q0t, q1t, q0, q1, cfg).total;
}

/// Joint gradient with respect to (q0t, q1t).
inline SymmetricGradient symmetric_gradient(const TriangleMesh& q0t, const TriangleMesh& q1t,
                                            const TriangleMesh& q0, const TriangleMesh& q1,
                                            const MatchConfig& cfg)
{
    SymmetricGradient g;
    SymmetricMatchingProblem(q0, q1, cfg).terms(q0t, q1t, &g);
    return g;
}

// --- inversion -------------------------------------------------------------

/// Target fields for recovering a mesh from its SRNF (optionally also SRCF).
struct InversionTarget {
    SrnfField srnf;
    std::optional<SrcfField> srcf;
    double srcf_weight = 0.0;
};

/// sum_f |N_f(q) - N~_f|^2 [+ w sum_v |Phi_v(q) - Phi~_v|^2], optionally with
/// its gradient added into `grad`.
inline double inversion_energy(const TriangleMesh& q, const InversionTarget& target,
                               std::span<Vec3> grad = {})
{
    if (target.srnf.values.size() != q.num_faces()) {
        throw ShapeMismatchError("SRNF target has " + std::to_string(target.srnf.values.size())
                                 + " values for " + std::to_string(q.num_faces()) + " faces");
    }
    if (!grad.empty() && grad.size() != q.num_vertices()) {
        throw ShapeMismatchError("gradient buffer does not match the vertex count");
    }
    const auto n = srnf(q).values;
    double e = field_distance_sq(n, target.srnf.values);
    if (!grad.empty()) {
        srnf_vjp_accumulate(q, detail::field_difference(n, target.srnf.values, 2.0), grad);
    }
    if (target.srcf && target.srcf_weight > 0.0) {
        if (target.srcf->values.size() != q.num_vertices()) {
            throw ShapeMismatchError("SRCF target does not match the vertex count");
        }
        const auto p = detail::srcf_parts(q, true).values;
        e += target.srcf_weight * field_distance_sq(p, target.srcf->values);
        if (!grad.empty()) {
            srcf_vjp_accumulate(
                q, detail::field_difference(p, target.srcf->values, 2.0 * target.srcf_weight),
                grad);
        }
    }
    return e;
}

inline std::vector<Vec3> inversion_gradient(const TriangleMesh& q, const InversionTarget& target)
{
    std::vector<Vec3> g(q.num_vertices(), Vec3::Zero());
    inversion_energy(q, target, g);
    return g;
}

} // namespace elastic
