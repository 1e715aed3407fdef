#include "support.hpp"

#include <gtest/gtest.h>

using namespace elastic;
using namespace elastic::testing;

namespace {

MatchConfig config(double lambda, double sigma, double srcf_weight = 0.0)
{
    MatchConfig cfg;
    cfg.lambda = lambda;
    cfg.kernel.sigma = sigma;
    cfg.srcf_weight = srcf_weight;
    return cfg;
}

/// Free pair sharing the combinatorics of a small ellipsoid, plus unrelated
/// boundary meshes.
struct Scene {
    TriangleMesh q0, q1, q0t, q1t;
};

Scene random_scene(std::mt19937_64& rng)
{
    Scene s;
    s.q0 = random_closed_mesh(rng);
    s.q1 = random_closed_mesh(rng);
    s.q0t = displaced(s.q0, random_field(s.q0.num_vertices(), rng), 0.05);
    s.q1t = displaced(s.q0, random_field(s.q0.num_vertices(), rng), 0.2);
    return s;
}

double norm(const std::vector<Vec3>& v) { return std::sqrt(dot(v, v)); }

/// Central-difference gradient, one coordinate at a time.
std::vector<Vec3> fd_gradient(const std::function<double(const TriangleMesh&)>& f,
                              const TriangleMesh& m)
{
    const double eps = 1e-5 * bbox_diagonal(m);
    std::vector<Vec3> g(m.num_vertices());
    TriangleMesh x = m;
    for (std::size_t i = 0; i < m.num_vertices(); ++i) {
        for (int k = 0; k < 3; ++k) {
            x.vertices[i][k] = m.vertices[i][k] + eps;
            const double up = f(x);
            x.vertices[i][k] = m.vertices[i][k] - eps;
            const double down = f(x);
            x.vertices[i][k] = m.vertices[i][k];
            g[i][k] = (up - down) / (2.0 * eps);
        }
    }
    return g;
}

double relative_norm_error(const std::vector<Vec3>& g, const std::vector<Vec3>& ref)
{
    std::vector<Vec3> d(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        d[i] = g[i] - ref[i];
    }
    return norm(d) / norm(ref);
}

} // namespace

TEST(MatchConfig, Validation)
{
    EXPECT_NO_THROW(config(1.0, 1.0).validate());
    EXPECT_THROW(config(0.0, 1.0).validate(), ConfigError);
    EXPECT_THROW(config(1.0, -1.0).validate(), ConfigError);
    auto cfg = config(1.0, 1.0);
    cfg.srnf_weight = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.srcf_weight = 0.5;
    EXPECT_NO_THROW(cfg.validate());
    cfg.srcf_weight = -0.5;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Flatten, RoundTrip)
{
    std::mt19937_64 rng(80);
    const auto v = random_field(7, rng);
    const auto x = flatten(v);
    ASSERT_EQ(x.size(), 21);
    EXPECT_EQ(x[3], v[1].x());
    std::vector<Vec3> back(7);
    unflatten(x, back);
    EXPECT_EQ(back, v);
}

TEST(AsymmetricEnergy, ExactConfigurationsAreZero)
{
    const auto m = icosphere(1);
    const auto cfg = config(10.0, 0.5, 0.3);
    EXPECT_EQ(asymmetric_energy(m, m, m, cfg), 0.0);
    const auto g = asymmetric_gradient(m, m, m, cfg);
    EXPECT_LT(norm(g), 1e-10 * total_area(m));
}

TEST(AsymmetricEnergy, TranslatedTargetComposesVarifoldExample)
{
    const auto cfg = config(3.0, 1.0);
    const auto q1 = translated(t0(), Vec3(1, 0, 0));
    const double e = asymmetric_energy(t0(), t0(), q1, cfg);
    EXPECT_NEAR(e, 3.0 * 0.5 * (1.0 - std::exp(-1.0)), 1e-14);
}

TEST(AsymmetricEnergy, SingleTriangleTerms)
{
    const auto terms = asymmetric_terms(t0(), t1(), t1(), config(2.0, 1.0));
    EXPECT_NEAR(terms.srnf, std::pow(1.0 - std::sqrt(0.5), 2), 1e-15);
    EXPECT_EQ(terms.varifold_target, 0.0);
    EXPECT_EQ(terms.varifold_source, 0.0);
    EXPECT_EQ(terms.total, terms.srnf);
}

TEST(AsymmetricEnergy, LinearInLambda)
{
    std::mt19937_64 rng(81);
    const auto s = random_scene(rng);
    const auto a = asymmetric_terms(s.q0, s.q1t, s.q1, config(1.5, 0.6));
    const auto b = asymmetric_terms(s.q0, s.q1t, s.q1, config(3.0, 0.6));
    EXPECT_EQ(a.features(), b.features());
    EXPECT_EQ(a.varifold_target, b.varifold_target);
    EXPECT_LT(relative_error(b.total - b.features(), 2.0 * (a.total - a.features())), 1e-14);

    const auto ga = asymmetric_gradient(s.q0, s.q1t, s.q1, config(1.5, 0.6));
    const auto gb = asymmetric_gradient(s.q0, s.q1t, s.q1, config(3.0, 0.6));
    const auto gf = asymmetric_gradient(s.q0, s.q1t, s.q1, config(1e-300, 0.6));
    for (std::size_t i = 0; i < ga.size(); ++i) {
        const Vec3 va = ga[i] - gf[i];
        const Vec3 vb = gb[i] - gf[i];
        EXPECT_LT((vb - 2.0 * va).norm(), 1e-12 * (1.0 + vb.norm()));
    }
}

TEST(AsymmetricEnergy, RequiresSharedCombinatorics)
{
    EXPECT_THROW(asymmetric_energy(icosphere(1), icosphere(2), icosphere(1), config(1, 1)),
                 ShapeMismatchError);
    EXPECT_NO_THROW(asymmetric_energy(icosphere(1), icosphere(1), torus(1, 0.3, 8, 6), config(1, 1)));
}

TEST(AsymmetricGradient, MatchesFiniteDifferences)
{
    std::mt19937_64 rng(82);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = random_scene(rng);
        const auto cfg = config(5.0, 0.5, trial % 2 ? 0.2 : 0.0);
        const auto g = asymmetric_gradient(s.q0, s.q1t, s.q1, cfg);
        const auto f = [&](const TriangleMesh& x) { return asymmetric_energy(s.q0, x, s.q1, cfg); };
        EXPECT_LT(relative_norm_error(g, fd_gradient(f, s.q1t)), 1e-5);
    }
}

TEST(SymmetricEnergy, ExactConfigurationIsZero)
{
    const auto m = icosphere(1);
    const auto cfg = config(10.0, 0.5);
    EXPECT_EQ(symmetric_energy(m, m, m, m, cfg), 0.0);
    const auto g = symmetric_gradient(m, m, m, m, cfg);
    EXPECT_LT(norm(g.source) + norm(g.target), 1e-10 * total_area(m));
}

TEST(SymmetricEnergy, SwapLeavesValueUnchanged)
{
    std::mt19937_64 rng(83);
    for (int trial = 0; trial < 5; ++trial) {
        const auto s = random_scene(rng);
        const auto cfg = config(4.0, 0.7, trial % 2 ? 0.1 : 0.0);
        const double forward = symmetric_energy(s.q0t, s.q1t, s.q0, s.q1, cfg);
        const double backward = symmetric_energy(s.q1t, s.q0t, s.q1, s.q0, cfg);
        EXPECT_LT(relative_error(forward, backward), 1e-14);
    }
}

TEST(SymmetricEnergy, ReducesToAsymmetric)
{
    std::mt19937_64 rng(84);
    const auto s = random_scene(rng);
    const auto cfg = config(4.0, 0.7);
    const auto sym = symmetric_terms(s.q0, s.q1t, s.q0, s.q1, cfg);
    const auto asym = asymmetric_terms(s.q0, s.q1t, s.q1, cfg);
    EXPECT_EQ(sym.varifold_source, 0.0);
    EXPECT_EQ(sym.total, asym.total);
}

TEST(SymmetricEnergy, RigidMotionInvariance)
{
    std::mt19937_64 rng(85);
    for (int trial = 0; trial < 5; ++trial) {
        const auto s = random_scene(rng);
        const Mat3 r = random_rotation(rng);
        const Vec3 h = 3.0 * gaussian_vec(rng);
        const auto cfg = config(4.0, 0.7, 0.2);
        const double base = symmetric_energy(s.q0t, s.q1t, s.q0, s.q1, cfg);
        const double moved = symmetric_energy(transformed(s.q0t, r, h), transformed(s.q1t, r, h),
                                              transformed(s.q0, r, h), transformed(s.q1, r, h), cfg);
        EXPECT_LT(relative_error(moved, base), 1e-9);
    }
}

TEST(SymmetricGradient, MatchesFiniteDifferences)
{
    std::mt19937_64 rng(86);
    for (int trial = 0; trial < 8; ++trial) {
        const auto s = random_scene(rng);
        const auto cfg = config(5.0, 0.5, trial % 2 ? 0.3 : 0.0);
        const auto g = symmetric_gradient(s.q0t, s.q1t, s.q0, s.q1, cfg);
        const auto f0 = [&](const TriangleMesh& x) {
            return symmetric_energy(x, s.q1t, s.q0, s.q1, cfg);
        };
        const auto f1 = [&](const TriangleMesh& x) {
            return symmetric_energy(s.q0t, x, s.q0, s.q1, cfg);
        };
        EXPECT_LT(relative_norm_error(g.source, fd_gradient(f0, s.q0t)), 1e-5);
        EXPECT_LT(relative_norm_error(g.target, fd_gradient(f1, s.q1t)), 1e-5);
    }
}

TEST(SymmetricGradient, BlindToJointTranslation)
{
    std::mt19937_64 rng(87);
    const auto s = random_scene(rng);
    const auto cfg = config(5.0, 0.5);
    // translating the boundary meshes together with the free pair
    const Vec3 d = gaussian_vec(rng);
    const auto h = [&](const TriangleMesh& m) { return std::vector<Vec3>(m.num_vertices(), d); };
    const double eps = 1e-4;
    const auto shifted = [&](double t) {
        return symmetric_energy(translated(s.q0t, t * d), translated(s.q1t, t * d),
                                translated(s.q0, t * d), translated(s.q1, t * d), cfg);
    };
    const double scale = symmetric_energy(s.q0t, s.q1t, s.q0, s.q1, cfg);
    EXPECT_LT(std::abs(shifted(eps) - shifted(-eps)) / (2.0 * eps), 1e-9 * scale);

    // the feature part of the gradient is orthogonal to a joint translation
    // of the free pair
    const auto gf = symmetric_gradient(s.q0t, s.q1t, s.q0, s.q1, config(1e-300, 0.5));
    EXPECT_LT(std::abs(dot(gf.source, h(s.q0t)) + dot(gf.target, h(s.q1t))), 1e-9 * scale);
}

TEST(SymmetricProblem, ReusesBoundaryAtoms)
{
    std::mt19937_64 rng(88);
    const auto s = random_scene(rng);
    const auto cfg = config(2.0, 0.5);
    const SymmetricMatchingProblem problem(s.q0, s.q1, cfg);
    SymmetricGradient g;
    const auto t = problem.terms(s.q0t, s.q1t, &g);
    // the gradient path sums the kernel in a different order
    EXPECT_LT(relative_error(t.total, symmetric_energy(s.q0t, s.q1t, s.q0, s.q1, cfg)), 1e-13);
    const auto ref = symmetric_gradient(s.q0t, s.q1t, s.q0, s.q1, cfg);
    EXPECT_EQ(g.source, ref.source);
    EXPECT_EQ(g.target, ref.target);
}

TEST(InversionEnergy, HandEvaluatedAndTrivialCases)
{
    InversionTarget target{srnf(t1()), std::nullopt, 0.0};
    target.srnf.values[0] = Vec3(0, 0, 1);
    EXPECT_NEAR(inversion_energy(t0(), target), std::pow(1.0 - std::sqrt(0.5), 2), 1e-15);
    EXPECT_NEAR(inversion_energy(t0(), target), 0.0857864, 1e-7);

    std::mt19937_64 rng(89);
    const auto m = random_closed_mesh(rng);
    const InversionTarget own{srnf(m), srcf(m), 0.5};
    EXPECT_EQ(inversion_energy(m, own), 0.0);
    EXPECT_LT(inversion_energy(translated(m, Vec3(4, -1, 2)), own), 1e-20);
    EXPECT_THROW(inversion_energy(icosphere(2), own), ShapeMismatchError);
}

TEST(InversionGradient, MatchesFiniteDifferences)
{
    std::mt19937_64 rng(90);
    for (int trial = 0; trial < 8; ++trial) {
        const auto m = random_closed_mesh(rng);
        const auto other = displaced(m, random_field(m.num_vertices(), rng), 0.1);
        InversionTarget target{srnf(other), std::nullopt, 0.0};
        if (trial % 2) {
            target.srcf = srcf(other);
            target.srcf_weight = 0.25;
        }
        const auto g = inversion_gradient(m, target);
        const auto f = [&](const TriangleMesh& x) { return inversion_energy(x, target); };
        EXPECT_LT(relative_norm_error(g, fd_gradient(f, m)), 1e-5);
    }
}
