#include "sphcloud/mls.hpp"
#include "sphcloud/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

using namespace sphcloud;

namespace
{

using Poly = std::function<double(double, double)>;

/** Frame over a graph z = f(x, y) sampled at given plane points, axes aligned with the world. */
LocalFrame graph_frame(const std::vector<Vec2>& xy, const Poly& f)
{
    std::vector<Vec3> pts;
    for (const auto& p : xy) pts.emplace_back(p.x(), p.y(), f(p.x(), p.y()) - f(0, 0));
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return pts[a].norm() < pts[b].norm(); });
    LocalFrame fr;
    fr.center = 0;
    for (auto i : order) {
        fr.neighbors.push_back(static_cast<Index>(i));
        fr.distances.push_back(pts[i].norm());
        fr.local_coords.push_back(xy[i]);
        fr.heights.push_back(pts[i].z());
    }
    return fr;
}

/** Origin plus n jittered points in the disk of radius r. */
std::vector<Vec2> stencil(std::size_t n, double r, std::uint64_t seed)
{
    synth::Rng rng(seed);
    std::vector<Vec2> xy{Vec2::Zero()};
    for (std::size_t i = 1; i < n; ++i) {
        const double t = 2 * kPi * (static_cast<double>(i) + rng.uniform(-0.3, 0.3)) / static_cast<double>(n - 1);
        const double rad = r * std::sqrt(rng.uniform(0.05, 1.0));
        xy.emplace_back(rad * std::cos(t), rad * std::sin(t));
    }
    return xy;
}

/**
 * Graph Laplace-Beltrami by the divergence form (1/W) div(W g^-1 grad u),
 * with the divergence taken by central differences of the analytic flux.
 * Independent of the closed-form coefficients.
 */
double graph_lb_oracle(double x, double y, const std::function<Vec2(double, double)>& grad_f,
                       const std::function<Vec2(double, double)>& grad_u)
{
    auto flux = [&](double a, double b) {
        const Vec2 g = grad_f(a, b);
        const double W = std::sqrt(1 + g.squaredNorm());
        Eigen::Matrix2d ginv;
        ginv << 1 + g.y() * g.y(), -g.x() * g.y(), -g.x() * g.y(), 1 + g.x() * g.x();
        ginv /= W * W;
        return Vec2(W * ginv * grad_u(a, b));
    };
    const double e = 1e-5;
    const double div = (flux(x + e, y).x() - flux(x - e, y).x()) / (2 * e) +
                       (flux(x, y + e).y() - flux(x, y - e).y()) / (2 * e);
    return div / std::sqrt(1 + grad_f(x, y).squaredNorm());
}

PointCloud planar_grid(int m, double spacing)
{
    std::vector<Vec3> pts;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) pts.emplace_back(i * spacing, j * spacing, 0.0);
    return PointCloud(pts);
}

double row_l1(const SparseRow& r)
{
    double s = 0;
    for (double v : r.values) s += std::abs(v);
    return s;
}

}  // namespace

TEST(Weight, StatedValues)
{
    auto w = WeightKind::for_stencil(WeightVariant::proposed, 0.3, 25);
    EXPECT_EQ(weight(w, 0.0), 1.0);
    EXPECT_NEAR(weight(w, 0.3), 0.04 * std::exp(-5.0), 1e-17);
    auto sp = WeightKind::for_stencil(WeightVariant::special, 0.3, 25);
    EXPECT_EQ(weight(sp, 0.0), 1.0);
    EXPECT_EQ(weight(sp, 0.1), 1.0 / 25);
    auto wd = WeightKind::for_stencil(WeightVariant::wendland, 1.0, 25);
    EXPECT_EQ(weight(wd, 0.0), 1.0);
    EXPECT_EQ(weight(wd, 1.05), 0.0);
    EXPECT_NEAR(weight(wd, 0.525), std::pow(0.5, 4) * 3.0, 1e-15);
    auto ex = WeightKind::for_stencil(WeightVariant::exponential, 2.0, 25);
    EXPECT_NEAR(weight(ex, 2.0), std::exp(-1.0), 1e-16);
    auto is = WeightKind::for_stencil(WeightVariant::inverse_square, 1.0, 25);
    EXPECT_NEAR(weight(is, 0.0), 100.0, 1e-12);
    EXPECT_EQ(weight(WeightKind::for_stencil(WeightVariant::constant, 1.0, 25), 0.7), 1.0);
}

TEST(Weight, NonnegativeAndProposedStrictlyDecreasing)
{
    for (auto v : {WeightVariant::constant, WeightVariant::exponential, WeightVariant::inverse_square,
                   WeightVariant::wendland, WeightVariant::special, WeightVariant::proposed}) {
        auto w = WeightKind::for_stencil(v, 1.0, 25);
        for (double d = 0; d <= 2.0; d += 0.01) EXPECT_GE(weight(w, d), 0.0) << to_string(v);
    }
    auto w = WeightKind::for_stencil(WeightVariant::proposed, 1.0, 25);
    for (double d = 0.01; d < 1.5; d += 0.01) EXPECT_GT(weight(w, d), weight(w, d + 0.01));
}

TEST(Weight, ParseNames)
{
    EXPECT_EQ(parse_weight("gaussian"), WeightVariant::exponential);
    EXPECT_EQ(parse_weight("proposed"), WeightVariant::proposed);
    EXPECT_FALSE(parse_weight("nope").has_value());
    for (auto v : {WeightVariant::constant, WeightVariant::exponential, WeightVariant::inverse_square,
                   WeightVariant::wendland, WeightVariant::special, WeightVariant::proposed})
        EXPECT_EQ(parse_weight(to_string(v)), v);
}

TEST(MlsFit, ReproducesBasisMember)
{
    auto frame = graph_frame(stencil(25, 0.2, 1), [](double x, double y) { return 3 + 2 * x - y + x * x; });
    // heights are measured from the center, so shift the stated constant back in
    for (double& h : frame.heights) h += 3.0;
    auto fit = mls_fit(frame, WeightVariant::proposed);
    const std::array<double, 6> want{3, 2, -1, 1, 0, 0};
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(fit.coefficients[j], want[j], 1e-9) << j;
}

TEST(MlsFit, ZeroHeightsGiveZeroCoefficients)
{
    auto frame = graph_frame(stencil(25, 0.2, 2), [](double, double) { return 0.0; });
    auto fit = mls_fit(frame, WeightVariant::proposed);
    for (double c : fit.coefficients) EXPECT_EQ(c, 0.0);
}

TEST(MlsFit, DerivativeRowsExactOnQuadratics)
{
    synth::Rng rng(3);
    for (auto v : {WeightVariant::proposed, WeightVariant::wendland, WeightVariant::exponential,
                   WeightVariant::special, WeightVariant::inverse_square, WeightVariant::constant}) {
        for (int trial = 0; trial < 20; ++trial) {
            std::array<double, 6> c;
            for (double& x : c) x = rng.uniform(-2, 2);
            auto frame = graph_frame(stencil(25, rng.uniform(0.05, 0.5), 100 + trial),
                                     [](double x, double y) { return 0.3 * x * y - 0.2 * y * y; });
            std::vector<double> u;
            for (const auto& p : frame.local_coords) {
                const double x = p.x(), y = p.y();
                u.push_back(c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y);
            }
            auto fit = mls_fit(frame, v);
            auto d = fit.derivatives(u);
            EXPECT_NEAR(d[dx], c[1], 1e-9);
            EXPECT_NEAR(d[dy], c[2], 1e-9);
            EXPECT_NEAR(d[dxx], 2 * c[3], 1e-9);
            EXPECT_NEAR(d[dxy], c[4], 1e-9);
            EXPECT_NEAR(d[dyy], 2 * c[5], 1e-9);
        }
    }
}

TEST(MlsFit, FirstDerivativeErrorIsSecondOrder)
{
    // cubic graph; the quadratic fit's first derivatives at the origin err by O(h^2)
    auto f = [](double x, double y) { return 0.5 * x - 0.3 * y + 0.8 * x * x * x - 0.6 * x * y * y + 0.4 * y * y * y; };
    std::vector<double> err;
    for (double r : {0.2, 0.1, 0.05, 0.025}) {
        auto fit = mls_fit(graph_frame(stencil(25, r, 7), f), WeightVariant::proposed);
        err.push_back(std::hypot(fit.fx() - 0.5, fit.fy() + 0.3));
    }
    for (std::size_t i = 1; i < err.size(); ++i) {
        const double rate = std::log2(err[i - 1] / err[i]);
        EXPECT_GT(rate, 1.7) << "radius step " << i;
    }
}

TEST(MlsFit, TooSmallStencilAndIllConditioned)
{
    auto small = graph_frame(stencil(6, 0.2, 1), [](double, double) { return 0.0; });
    try {
        (void)mls_fit(small, WeightVariant::proposed);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientPoints);
    }
    // all samples on one line in the plane: the quadratic basis is not identifiable
    std::vector<Vec2> line;
    for (int i = 0; i < 10; ++i) line.emplace_back(0.01 * i, 0.02 * i);
    try {
        (void)mls_fit(graph_frame(line, [](double, double) { return 0.0; }), WeightVariant::proposed);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IllConditionedStencil);
    }
}

TEST(LbCoefficients, FlatPatchIsPlanarLaplacian)
{
    auto a = lb_coefficients(0, 0, 0, 0, 0);
    EXPECT_EQ(a, (std::array<double, 5>{0, 0, 1, 0, 1}));
}

TEST(LbCoefficients, MatchDivergenceFormOracle)
{
    // f and u are smooth test functions with hand-written gradients
    auto f = [](double x, double y) { return std::sin(x) * std::cos(2 * y) + 0.3 * x * y; };
    auto grad_f = [](double x, double y) {
        return Vec2(std::cos(x) * std::cos(2 * y) + 0.3 * y, -2 * std::sin(x) * std::sin(2 * y) + 0.3 * x);
    };
    auto grad_u = [](double x, double y) { return Vec2(std::exp(x) * y * y, 2 * std::exp(x) * y + 1); };
    (void)f;
    synth::Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
        const double p = std::cos(x) * std::cos(2 * y) + 0.3 * y;
        const double q = -2 * std::sin(x) * std::sin(2 * y) + 0.3 * x;
        const double r = -std::sin(x) * std::cos(2 * y);
        const double s = -2 * std::cos(x) * std::sin(2 * y) + 0.3;
        const double t = -4 * std::sin(x) * std::cos(2 * y);
        const double ux = std::exp(x) * y * y, uy = 2 * std::exp(x) * y + 1;
        const double uxx = std::exp(x) * y * y, uxy = 2 * std::exp(x) * y, uyy = 2 * std::exp(x);
        auto a = lb_coefficients(p, q, r, s, t);
        const double closed = a[0] * ux + a[1] * uy + a[2] * uxx + a[3] * uxy + a[4] * uyy;
        EXPECT_NEAR(closed, graph_lb_oracle(x, y, grad_f, grad_u), 1e-7) << "trial " << trial;
    }
}

TEST(LbOperator, FlatGridParaboloidIsFour)
{
    const PointCloud grid = planar_grid(20, 0.05);
    auto op = assemble_lb(grid, 25, WeightVariant::proposed);
    Eigen::VectorXd u(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) u[i] = grid[i].x() * grid[i].x() + grid[i].y() * grid[i].y();
    Eigen::VectorXd lu = op.apply(u);
    for (Eigen::Index i = 0; i < lu.size(); ++i) EXPECT_NEAR(lu[i], 4.0, 1e-4) << i;
}

TEST(LbOperator, SparsityAndConstantAnnihilation)
{
    PointCloud cloud(synth::blob(3000, 2));
    const std::size_t k = 25;
    auto op = assemble_lb(cloud, k, WeightVariant::proposed);
    ASSERT_EQ(op.size(), cloud.size());
    double scale = 0;
    for (std::size_t i = 0; i < op.size(); ++i) {
        auto r = op.row(static_cast<Index>(i));
        EXPECT_LE(r.columns.size(), k);
        scale = std::max(scale, row_l1(r));
    }
    Eigen::VectorXd one = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(cloud.size()));
    EXPECT_LE(op.apply(one).lpNorm<Eigen::Infinity>(), 1e-8 * scale);
}

TEST(LbOperator, SphereRayleighQuotientsNearMinusTwo)
{
    PointCloud cloud(synth::sphere(10000, 0));
    auto op = assemble_lb(cloud, 25, WeightVariant::proposed);
    for (int axis = 0; axis < 3; ++axis) {
        Eigen::VectorXd u(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) u[i] = cloud[i][axis];
        const double rq = u.dot(op.apply(u)) / u.dot(u);
        EXPECT_GE(rq, -2.4);
        EXPECT_LE(rq, -1.6);
    }
}

TEST(LbOperator, SphereZCoordinateEigenfunctionPointwise)
{
    PointCloud cloud(synth::sphere(10000, 1));
    auto op = assemble_lb(cloud, 25, WeightVariant::proposed);
    Eigen::VectorXd z(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) z[i] = cloud[i].z();
    Eigen::VectorXd lz = op.apply(z);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (std::abs(z[i]) < 0.5) continue;  // relative error is meaningless near the zero set
        EXPECT_NEAR(lz[i] / (-2 * z[i]), 1.0, 0.1) << i;
        ++checked;
    }
    EXPECT_GT(checked, 4000u);
}

class FrameInvariance : public ::testing::TestWithParam<WeightVariant>
{
};

TEST_P(FrameInvariance, NormalFlipAndInPlaneRotation)
{
    PointCloud cloud(synth::blob(1500, 4));
    auto lb = assemble_lb_full(cloud, 25, GetParam());
    for (std::size_t s = 0; s < cloud.size(); s += 7) {
        const auto& f = lb.frames[s];
        const SparseRow base = lb_row(lb.fits[s]);
        const double tol_scale = row_l1(base);

        Eigen::Matrix3d flipped;
        flipped << f.e1(), -f.e2(), -f.e3();
        const SparseRow a = lb_row(mls_fit(f.rebased(flipped, cloud.points()), GetParam()));
        const double th = 0.37 + 0.1 * static_cast<double>(s % 13);
        Eigen::Matrix3d rotated;
        rotated << std::cos(th) * f.e1() + std::sin(th) * f.e2(), -std::sin(th) * f.e1() + std::cos(th) * f.e2(),
            f.e3();
        const SparseRow b = lb_row(mls_fit(f.rebased(rotated, cloud.points()), GetParam()));
        ASSERT_EQ(a.columns, base.columns);
        ASSERT_EQ(b.columns, base.columns);
        for (std::size_t j = 0; j < base.values.size(); ++j) {
            ASSERT_NEAR(a.values[j], base.values[j], 1e-9 * tol_scale) << "flip, point " << s;
            ASSERT_NEAR(b.values[j], base.values[j], 1e-8 * tol_scale) << "rotation, point " << s;
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Weights, FrameInvariance,
                         ::testing::Values(WeightVariant::proposed, WeightVariant::wendland,
                                           WeightVariant::exponential, WeightVariant::special),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(MeanCurvature, UnitSphereMagnitudeIsOne)
{
    PointCloud cloud(synth::sphere(5000, 3));
    auto lb = assemble_lb_full(cloud, 25, WeightVariant::proposed);
    auto h = mean_curvature(lb.fits);
    double worst = 0;
    for (double v : h) worst = std::max(worst, std::abs(std::abs(v) - 1.0));
    EXPECT_LT(worst, 0.05);
}

TEST(LbOperator, AssemblyIsThreadCountIndependent)
{
    PointCloud cloud(synth::blob(2000, 1));
    set_max_threads(1);
    auto a = assemble_lb(cloud, 25, WeightVariant::proposed);
    set_max_threads(4);
    auto b = assemble_lb(cloud, 25, WeightVariant::proposed);
    set_max_threads(0);
    EXPECT_EQ((a.matrix() - b.matrix()).norm(), 0.0);
}
