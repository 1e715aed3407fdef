#include "support.hpp"

#include <gtest/gtest.h>

using namespace elastic;
using namespace elastic::testing;

namespace {

TriangleMesh regular_tetrahedron()
{
    TriangleMesh m;
    m.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    m.faces = {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}};
    return m;
}

/// Planar fan around vertex 0 with a jittered rim.
TriangleMesh planar_fan(std::mt19937_64& rng, int spokes)
{
    std::uniform_real_distribution<double> r(0.5, 1.5);
    TriangleMesh m;
    m.vertices.push_back(Vec3::Zero());
    for (int k = 0; k < spokes; ++k) {
        const double a = 2.0 * M_PI * k / spokes;
        const double rad = r(rng);
        m.vertices.emplace_back(rad * std::cos(a), rad * std::sin(a), 0.0);
    }
    for (int k = 0; k < spokes; ++k) {
        m.faces.push_back({0, k + 1, (k + 1) % spokes + 1});
    }
    return m;
}

std::vector<Vec3> fd_srnf(const TriangleMesh& m, const std::vector<Vec3>& h, double eps)
{
    const auto plus = srnf(displaced(m, h, eps)).values;
    const auto minus = srnf(displaced(m, h, -eps)).values;
    std::vector<Vec3> d(plus.size());
    for (std::size_t f = 0; f < d.size(); ++f) {
        d[f] = (plus[f] - minus[f]) / (2.0 * eps);
    }
    return d;
}

double frobenius_relative(const std::vector<Vec3>& a, const std::vector<Vec3>& b)
{
    double diff = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]).squaredNorm();
        ref += b[i].squaredNorm();
    }
    return std::sqrt(diff / std::max(ref, 1e-300));
}

std::vector<Vec3> constant_field(std::size_t n, const Vec3& v) { return std::vector<Vec3>(n, v); }

} // namespace

TEST(Srnf, HandEvaluatedTriangles)
{
    EXPECT_TRUE(srnf(t0()).values[0].isApprox(Vec3(0, 0, std::sqrt(0.5)), 1e-15));
    EXPECT_TRUE(srnf(t1()).values[0].isApprox(Vec3(0, 0, 1.0), 1e-15));
    EXPECT_NEAR(srnf_distance_sq(t0(), t1()), std::pow(1.0 - std::sqrt(0.5), 2), 1e-15);
    EXPECT_NEAR(srnf_distance_sq(t0(), t1()), 0.0857864, 1e-7);
}

TEST(Srnf, DegenerateFaceIsZero)
{
    const auto q = srnf(triangle({0, 0, 0}, {1, 0, 0}, {3, 0, 0}));
    EXPECT_EQ(q.values[0], Vec3::Zero());
}

TEST(Srnf, TranslationLeavesFieldUnchanged)
{
    std::mt19937_64 rng(21);
    const auto m = random_closed_mesh(rng);
    const auto a = srnf(m).values;
    const auto b = srnf(translated(m, Vec3(5, 5, 5))).values;
    for (std::size_t f = 0; f < a.size(); ++f) {
        EXPECT_LT((a[f] - b[f]).norm(), 1e-12 * (1.0 + a[f].norm()));
    }
    EXPECT_LT(srnf_distance_sq(m, translated(m, Vec3(5, 5, 5))), 1e-20);
    EXPECT_EQ(srnf_distance_sq(m, m), 0.0);
}

TEST(Srnf, RotationEquivariance)
{
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = random_closed_mesh(rng);
        const Mat3 r = random_rotation(rng);
        const auto a = srnf(m).values;
        const auto b = srnf(transformed(m, r, Vec3::Zero())).values;
        for (std::size_t f = 0; f < a.size(); ++f) {
            EXPECT_LT((r * a[f] - b[f]).norm(), 1e-12);
        }
    }
}

TEST(Srnf, SquaredNormIsArea)
{
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = random_closed_mesh(rng);
        const auto q = srnf(m).values;
        const auto g = face_geometry(m);
        for (std::size_t f = 0; f < q.size(); ++f) {
            EXPECT_NEAR(q[f].squaredNorm(), g.areas[f], 1e-13 * (1.0 + g.areas[f]));
        }
    }
}

TEST(Srnf, RelabelingInvariance)
{
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_closed_mesh(rng);
        auto b = a;
        for (auto& v : b.vertices) {
            v += 0.1 * gaussian_vec(rng);
        }
        std::vector<std::size_t> vp, fp;
        relabeled(a, rng, &vp, &fp);
        EXPECT_EQ(srnf_distance_sq(permuted(a, vp, fp), permuted(b, vp, fp)),
                  srnf_distance_sq(a, b));
    }
}

TEST(Srnf, TriangleInequality)
{
    std::mt19937_64 rng(25);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = random_closed_mesh(rng);
        const auto b = displaced(a, random_field(a.num_vertices(), rng), 0.2);
        const auto c = displaced(a, random_field(a.num_vertices(), rng), 0.2);
        const double ab = std::sqrt(srnf_distance_sq(a, b));
        const double bc = std::sqrt(srnf_distance_sq(b, c));
        const double ac = std::sqrt(srnf_distance_sq(a, c));
        EXPECT_LE(ac, ab + bc + 1e-10);
    }
}

TEST(Srnf, DistanceRequiresSameCombinatorics)
{
    EXPECT_THROW(srnf_distance_sq(icosphere(1), icosphere(2)), ShapeMismatchError);
    auto flipped = t0();
    flipped.faces[0] = {0, 2, 1};
    EXPECT_THROW(srnf_distance_sq(t0(), flipped), ShapeMismatchError);
}

TEST(SrnfJvp, ZeroAndTranslationDirections)
{
    std::mt19937_64 rng(31);
    const auto m = random_closed_mesh(rng);
    for (const auto& v : srnf_jvp(m, constant_field(m.num_vertices(), Vec3::Zero())).values) {
        EXPECT_EQ(v, Vec3::Zero());
    }
    const auto d = srnf_jvp(m, constant_field(m.num_vertices(), Vec3(0.3, -2.0, 1.1))).values;
    for (const auto& v : d) {
        EXPECT_LT(v.norm(), 1e-12);
    }
    EXPECT_THROW(srnf_jvp(m, constant_field(m.num_vertices() + 1, Vec3::Zero())),
                 ShapeMismatchError);
}

TEST(SrnfJvp, MatchesFiniteDifferences)
{
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = trial % 4 == 3 ? random_open_mesh(rng) : random_closed_mesh(rng);
        const auto h = random_field(m.num_vertices(), rng);
        const double eps = 1e-5 * bbox_diagonal(m);
        EXPECT_LT(frobenius_relative(srnf_jvp(m, h).values, fd_srnf(m, h, eps)), 1e-6);
    }
}

TEST(SrnfJvp, DegenerateFaceHasZeroDerivative)
{
    const auto m = triangle({0, 0, 0}, {1, 0, 0}, {2, 0, 0});
    std::mt19937_64 rng(33);
    const auto d = srnf_jvp(m, random_field(3, rng)).values;
    EXPECT_EQ(d[0], Vec3::Zero());
}

TEST(SrnfVjp, IsAdjointOfJvp)
{
    std::mt19937_64 rng(34);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = trial % 2 ? random_open_mesh(rng) : random_closed_mesh(rng);
        const auto h = random_field(m.num_vertices(), rng);
        const auto w = random_field(m.num_faces(), rng);
        std::vector<Vec3> g(m.num_vertices(), Vec3::Zero());
        srnf_vjp_accumulate(m, w, g);
        const double lhs = dot(srnf_jvp(m, h).values, w);
        const double rhs = dot(h, g);
        EXPECT_LT(relative_error(lhs, rhs), 1e-12);
    }
}

TEST(SrnfVjp, GradientOfDistanceMatchesFiniteDifferences)
{
    std::mt19937_64 rng(35);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_closed_mesh(rng);
        const auto b = displaced(a, random_field(a.num_vertices(), rng), 0.1);
        const auto qa = srnf(a).values;
        const auto qb = srnf(b).values;
        std::vector<Vec3> adj(qa.size());
        for (std::size_t f = 0; f < qa.size(); ++f) {
            adj[f] = 2.0 * (qa[f] - qb[f]);
        }
        std::vector<Vec3> g(a.num_vertices(), Vec3::Zero());
        srnf_vjp_accumulate(a, adj, g);
        const auto h = random_field(a.num_vertices(), rng);
        const double fd = fd_directional([&](const TriangleMesh& x) { return srnf_distance_sq(x, b); },
                                         a, h, 1e-6);
        EXPECT_LT(relative_error(dot(g, h), fd), 1e-6);
    }
}

TEST(SrnfMetricForm, QuadraticAndTranslationBlind)
{
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = random_closed_mesh(rng);
        const auto h = random_field(m.num_vertices(), rng);
        std::vector<Vec3> h2(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) {
            h2[i] = 2.0 * h[i];
        }
        const double g = srnf_metric_form(m, h);
        EXPECT_GE(g, 0.0);
        EXPECT_LT(relative_error(srnf_metric_form(m, h2), 4.0 * g), 1e-12);
        EXPECT_EQ(srnf_metric_form(m, constant_field(m.num_vertices(), Vec3::Zero())), 0.0);
        EXPECT_LT(srnf_metric_form(m, constant_field(m.num_vertices(), gaussian_vec(rng))), 1e-22);
    }
}

TEST(SrnfMetricForm, MatchesFiniteDifferenceNorm)
{
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = random_closed_mesh(rng);
        const auto h = random_field(m.num_vertices(), rng);
        const double fd = field_norm_sq(fd_srnf(m, h, 1e-5 * bbox_diagonal(m)));
        EXPECT_LT(relative_error(srnf_metric_form(m, h), fd), 1e-5);
    }
}

TEST(PathEnergy, ConstantAndTwoSamplePaths)
{
    std::mt19937_64 rng(51);
    const auto a = random_closed_mesh(rng);
    const std::vector<TriangleMesh> constant{a, a, a, a};
    EXPECT_EQ(path_energy(constant), 0.0);

    const auto b = displaced(a, random_field(a.num_vertices(), rng), 0.1);
    std::vector<Vec3> h(a.num_vertices());
    for (std::size_t i = 0; i < h.size(); ++i) {
        h[i] = b.vertices[i] - a.vertices[i];
    }
    const std::vector<TriangleMesh> two{a, b};
    EXPECT_LT(relative_error(path_energy(two), srnf_metric_form(a, h)), 1e-13);

    EXPECT_THROW(path_energy(std::vector<TriangleMesh>{a}), std::invalid_argument);
    EXPECT_THROW(path_energy(std::vector<TriangleMesh>{a, icosphere(1)}), ShapeMismatchError);
}

TEST(PathEnergy, LinearPathBoundsChordalDistance)
{
    std::mt19937_64 rng(52);
    for (double magnitude : {0.05, 0.01, 0.002}) {
        for (int trial = 0; trial < 5; ++trial) {
            const auto a = icosphere(1);
            const auto b = displaced(a, random_field(a.num_vertices(), rng), magnitude);
            std::vector<TriangleMesh> path;
            for (int i = 0; i < 16; ++i) {
                const double t = i / 15.0;
                TriangleMesh s = a;
                for (std::size_t v = 0; v < s.vertices.size(); ++v) {
                    s.vertices[v] = (1.0 - t) * a.vertices[v] + t * b.vertices[v];
                }
                path.push_back(std::move(s));
            }
            const double e = path_energy(path);
            const double d = srnf_distance_sq(a, b);
            EXPECT_GE(e, d - 1e-8 * total_area(a));
            if (magnitude <= 0.002) {
                EXPECT_LT(e / d, 1.01);
            }
        }
    }
}

TEST(Srcf, PlanarInteriorVertexIsZero)
{
    std::mt19937_64 rng(61);
    for (int spokes = 3; spokes < 10; ++spokes) {
        const auto m = planar_fan(rng, spokes);
        EXPECT_LT(srcf(m).values[0].norm(), 1e-10);
    }
    const auto g = grid(5, 4);
    const auto field = srcf(g).values;
    const auto boundary = [&](std::size_t v) {
        const auto& p = g.vertices[v];
        return p.x() < 1e-12 || p.y() < 1e-12 || p.x() > 1.0 - 1e-12 || p.y() > 1.0 - 1e-12;
    };
    for (std::size_t v = 0; v < g.num_vertices(); ++v) {
        if (!boundary(v)) {
            EXPECT_LT(field[v].norm(), 1e-10);
        }
    }
}

TEST(Srcf, TetrahedronApexMatchesCotangentFormula)
{
    const auto m = regular_tetrahedron();
    const auto field = srcf(m).values;
    for (std::size_t v = 0; v < 4; ++v) {
        EXPECT_LT((field[v] - cotangent_srcf(m, v)).norm(), 1e-10);
    }
}

TEST(Srcf, RandomClosedMeshesMatchCotangentFormula)
{
    std::mt19937_64 rng(62);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = random_closed_mesh(rng, 0.02);
        const auto field = srcf(m).values;
        for (std::size_t v = 0; v < m.num_vertices(); ++v) {
            const Vec3 ref = cotangent_srcf(m, v);
            EXPECT_LT((field[v] - ref).norm(), 1e-10 * (1.0 + ref.norm()));
        }
    }
}

TEST(Srcf, ScalingByTwoMatchesOracle)
{
    const auto m = regular_tetrahedron();
    const auto big = scaled(m, 2.0);
    const auto field = srcf(big).values;
    for (std::size_t v = 0; v < 4; ++v) {
        const Vec3 ref = cotangent_srcf(big, v);
        EXPECT_LT((field[v] - ref).norm(), 1e-10);
        // edge lengths grow by s and sqrt(area) by s, so the field is scale free
        EXPECT_LT((ref - cotangent_srcf(m, v)).norm(), 1e-10);
    }
}

TEST(Srcf, DistanceInvariances)
{
    std::mt19937_64 rng(63);
    const auto m = random_closed_mesh(rng);
    EXPECT_EQ(srcf_distance_sq(m, m), 0.0);
    EXPECT_LT(srcf_distance_sq(m, translated(m, Vec3(2, -1, 3))), 1e-20);
    EXPECT_LT(srcf_distance_sq(grid(4, 4), scaled(grid(4, 4), 1.7)), 1e-10 * 16);
    EXPECT_THROW(srcf_distance_sq(icosphere(0), icosphere(1)), ShapeMismatchError);
}

TEST(Srcf, IsolatedVertexIsAnError)
{
    auto m = t0();
    m.vertices.emplace_back(5, 5, 5);
    EXPECT_THROW(srcf(m), MeshError);
}

TEST(SrcfVjp, MatchesFiniteDifferences)
{
    std::mt19937_64 rng(64);
    for (int trial = 0; trial < 12; ++trial) {
        const auto m = trial % 3 == 2 ? random_open_mesh(rng) : random_closed_mesh(rng);
        const auto w = random_field(m.num_vertices(), rng);
        std::vector<Vec3> g(m.num_vertices(), Vec3::Zero());
        srcf_vjp_accumulate(m, w, g);
        const auto h = random_field(m.num_vertices(), rng);
        const auto f = [&](const TriangleMesh& x) { return dot(srcf(x).values, w); };
        // jittered grids are strongly curved, so the step must be small
        const double fd = fd_directional(f, m, h, 1e-7 * bbox_diagonal(m));
        EXPECT_LT(relative_error(dot(g, h), fd), 1e-6);
    }
}

TEST(DistanceGradient, SrnfAndSrcfMatchFiniteDifferences)
{
    std::mt19937_64 rng(65);
    for (int trial = 0; trial < 6; ++trial) {
        const auto a = random_closed_mesh(rng);
        const auto b = displaced(a, random_field(a.num_vertices(), rng), 0.1);
        const auto h = random_field(a.num_vertices(), rng);
        const double eps = 1e-7 * bbox_diagonal(a);
        const double fd_n = fd_directional([&](const TriangleMesh& x) { return srnf_distance_sq(x, b); },
                                           a, h, eps);
        const double fd_c = fd_directional([&](const TriangleMesh& x) { return srcf_distance_sq(x, b); },
                                           a, h, eps);
        EXPECT_LT(relative_error(dot(srnf_distance_sq_gradient(a, b), h), fd_n), 1e-6);
        EXPECT_LT(relative_error(dot(srcf_distance_sq_gradient(a, b), h), fd_c), 1e-6);
    }
    EXPECT_THROW(srnf_distance_sq_gradient(icosphere(1), icosphere(2)), ShapeMismatchError);
    const auto m = icosphere(1);
    for (const auto& g : srcf_distance_sq_gradient(m, m)) {
        EXPECT_EQ(g, Vec3::Zero());
    }
}

TEST(FieldDistance, OrderedSumIsSortedAscendingSum)
{
    std::mt19937_64 rng(66);
    std::exponential_distribution<double> spread(0.1);
    std::vector<double> terms(1000);
    for (auto& t : terms) {
        t = std::exp(-spread(rng)) * (rng() % 7 == 0 ? 0.0 : 1.0);
    }
    auto sorted = terms;
    std::sort(sorted.begin(), sorted.end());
    double expected = 0.0;
    for (const double t : sorted) {
        expected += t;
    }
    EXPECT_EQ(detail::ordered_sum(terms), expected);
    std::shuffle(terms.begin(), terms.end(), rng);
    EXPECT_EQ(detail::ordered_sum(terms), expected);
    EXPECT_EQ(detail::ordered_sum({}), 0.0);
}
