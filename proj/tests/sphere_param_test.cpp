#include "sphcloud/meshing.hpp"
#include "sphcloud/sphere_param.hpp"
#include "sphcloud/synth.hpp"

#include <gtest/gtest.h>

using namespace sphcloud;

namespace
{

ErrorCode error_of(const std::function<void()>& fn, std::string* what = nullptr)
{
    try {
        fn();
    } catch (const Error& e) {
        if (what) *what = e.what();
        return e.code();
    }
    return ErrorCode::Io;  // sentinel: no error
}

double mean_distortion(const std::vector<Vec3>& cloud, const std::vector<Vec3>& images)
{
    SphericalMap map;
    map.images = images;
    auto m = induce_mesh(cloud, map);
    return angle_distortion(m.source, m.sphere).mean_abs_delta;
}

Complex cross_ratio(Complex a, Complex b, Complex c, Complex d) { return (a - c) * (b - d) / ((b - c) * (a - d)); }

// A converged, balanced map of a modest sphere cloud shared by several tests.
struct Fixture {
    std::vector<Vec3> cloud = synth::sphere(3000, 21);
    SphericalMap map = parameterize(PointCloud(cloud));
};

const Fixture& fixture()
{
    static const Fixture f;
    return f;
}

}  // namespace

TEST(Regularity, KnownTriangles)
{
    EXPECT_NEAR(regularity({kPi / 3, kPi / 3, kPi / 3}), 0.0, 1e-15);
    EXPECT_NEAR(regularity({kPi / 2, kPi / 4, kPi / 4}), kPi / 3, 1e-15);
    EXPECT_NEAR(regularity({kPi / 6, kPi / 3, kPi / 2}), kPi / 3, 1e-15);
    EXPECT_NEAR(regularity(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, std::sqrt(3.0) / 2, 0)), 0.0, 1e-12);
    EXPECT_TRUE(std::isinf(regularity(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0))));
    EXPECT_TRUE(std::isinf(regularity({kPi, 0, 0})));
}

TEST(MostRegularTriple, MatchesBruteForceSearchOrder)
{
    auto pts = synth::blob(400, 3);
    PointCloud cloud(pts);
    KdTree tree(cloud);
    auto frames = build_frames(cloud, tree, 12);
    auto t = most_regular_triple(cloud.points(), frames);

    // reference: strict improvement while walking s, then i < j by neighbor rank
    double best = std::numeric_limits<double>::infinity();
    std::array<Index, 3> ids{-1, -1, -1};
    for (std::size_t s = 0; s < frames.size(); ++s)
        for (std::size_t i = 1; i < 12; ++i)
            for (std::size_t j = i + 1; j < 12; ++j) {
                const auto& nb = frames[s].neighbors;
                double r = regularity(pts[s], pts[nb[i]], pts[nb[j]]);
                if (r < best) {
                    best = r;
                    ids = {static_cast<Index>(s), nb[i], nb[j]};
                }
            }
    EXPECT_EQ(t.ids, ids);
    EXPECT_EQ(t.regularity, best);
}

TEST(MostRegularTriple, TiesKeepTheFirstCenter)
{
    // a triangular lattice: many exactly equal candidates, the first center must win
    std::vector<Vec3> pts;
    for (int j = 0; j < 8; ++j)
        for (int i = 0; i < 8; ++i) pts.emplace_back(i + 0.5 * (j % 2), j * 0.75, 0.0);
    PointCloud cloud(pts);
    KdTree tree(cloud);
    auto frames = build_frames(cloud, tree, 9);
    auto t = most_regular_triple(cloud.points(), frames);
    double first_best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < 9; ++i)
        for (std::size_t j = i + 1; j < 9; ++j)
            first_best = std::min(first_best, regularity(pts[0], pts[frames[0].neighbors[i]], pts[frames[0].neighbors[j]]));
    if (first_best == t.regularity) {
        EXPECT_EQ(t.ids[0], 0);
    }
    for (std::size_t s = 0; s < static_cast<std::size_t>(t.ids[0]); ++s)
        for (std::size_t i = 1; i < 9; ++i)
            for (std::size_t j = i + 1; j < 9; ++j)
                ASSERT_GT(regularity(pts[s], pts[frames[s].neighbors[i]], pts[frames[s].neighbors[j]]), t.regularity);
}

TEST(MostRegularTriple, PicksPlantedEquilateralTriangle)
{
    auto pts = synth::sphere(500, 8);
    // replace two neighbors of point 0 so that they form an exactly equilateral triangle with it
    KdTree tree(pts);
    auto nb = tree.knn(Index{0}, 3);
    const Vec3 n = pts[0];
    const Vec3 u = n.unitOrthogonal(), v = n.cross(u);
    const double e = 0.5 * nb.distances[1];
    pts[nb.neighbors[1]] = pts[0] + e * u;
    pts[nb.neighbors[2]] = pts[0] + e * (0.5 * u + std::sqrt(3.0) / 2 * v);
    PointCloud cloud(pts);
    KdTree t2(cloud);
    auto frames = build_frames(cloud, t2, 10);
    auto t = most_regular_triple(cloud.points(), frames);
    std::array<Index, 3> sorted = t.ids, want{0, nb.neighbors[1], nb.neighbors[2]};
    std::sort(sorted.begin(), sorted.end());
    std::sort(want.begin(), want.end());
    EXPECT_EQ(sorted, want);
    EXPECT_LT(t.regularity, 1e-12);
}

TEST(MostRegularTriple, TargetsAreSimilarCenteredAndUnitLongestEdge)
{
    auto pts = synth::ellipsoid(800, 2, 1, 1, 4);
    PointCloud cloud(pts);
    KdTree tree(cloud);
    auto frames = build_frames(cloud, tree, 15);
    auto t = most_regular_triple(cloud.points(), frames);
    auto a3 = triangle_angles(pts[t.ids[0]], pts[t.ids[1]], pts[t.ids[2]]);
    auto lift = [](Complex z) { return Vec3(z.real(), z.imag(), 0); };
    auto a2 = triangle_angles(lift(t.targets[0]), lift(t.targets[1]), lift(t.targets[2]));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(a2[i], a3[i], 1e-12);
    EXPECT_NEAR(std::abs(t.targets[0] + t.targets[1] + t.targets[2]), 0.0, 1e-15);
    double longest = 0;
    for (int i = 0; i < 3; ++i) longest = std::max(longest, std::abs(t.targets[i] - t.targets[(i + 1) % 3]));
    EXPECT_NEAR(longest, 1.0, 1e-15);

    // orientation follows the winning stencil's local frame
    const auto& f = frames[t.ids[0]];
    const Vec2 pi = f.local_coords[t.neighbor_positions[0]], pj = f.local_coords[t.neighbor_positions[1]];
    const double local = pi.x() * pj.y() - pi.y() * pj.x();
    const Complex d1 = t.targets[1] - t.targets[0], d2 = t.targets[2] - t.targets[0];
    EXPECT_GT(local * (d1.real() * d2.imag() - d1.imag() * d2.real()), 0);
}

TEST(PinnedCount, RoundsAndClamps)
{
    EXPECT_EQ(pinned_count(1000, 10), 100u);
    EXPECT_EQ(pinned_count(5000, 10), 500u);
    EXPECT_EQ(pinned_count(10, 10), 3u);
    EXPECT_EQ(pinned_count(25, 10), 3u);   // 2.5 rounds up to 3
    EXPECT_EQ(pinned_count(35, 10), 4u);   // 3.5 rounds up to 4
    EXPECT_EQ(pinned_count(4, 49), 3u);    // capped at n - 1
    EXPECT_EQ(pinned_count(100, 49.5), 50u);
}

TEST(Outermost, LargestModulusWithInfinityAndIdTies)
{
    std::vector<PlanePoint> w{finite({1, 0}), finite({0, 3}), PlanePoint::infinity(), finite({-3, 0}),
                              finite({0.5, 0}), finite({0, -2})};
    EXPECT_EQ(outermost(w, 1), (std::vector<Index>{2}));
    EXPECT_EQ(outermost(w, 2), (std::vector<Index>{1, 2}));  // tie at modulus 3 goes to id 1
    EXPECT_EQ(outermost(w, 4), (std::vector<Index>{1, 2, 3, 5}));
}

TEST(InitialMap, PinsTheTripleExactly)
{
    auto pts = synth::blob(1500, 6);
    auto lb = assemble_lb_full(PointCloud(pts), 25, WeightVariant::proposed);
    auto t = most_regular_triple(pts, lb.frames);
    auto phi = initial_map(lb.op, t);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(phi[t.ids[i]], t.targets[i]);
    for (const auto& z : phi) ASSERT_TRUE(std::isfinite(z.real()) && std::isfinite(z.imag()));
}

TEST(NormalizePlaneMap, ZeroMeanUnitMedianAndConformal)
{
    synth::Rng rng(3);
    std::vector<Complex> z(101);
    for (auto& w : z) w = Complex(rng.uniform(2, 3), rng.uniform(-1, 0));
    auto n = normalize_plane_map(z);
    Complex mean(0, 0);
    for (const auto& w : n) mean += w;
    EXPECT_NEAR(std::abs(mean) / 101.0, 0.0, 1e-15);
    std::vector<double> mod;
    for (const auto& w : n) mod.push_back(std::abs(w));
    std::nth_element(mod.begin(), mod.begin() + 50, mod.end());
    EXPECT_NEAR(mod[50], 1.0, 1e-15);
    // a similarity: all pairwise distance ratios are kept
    const double ratio = std::abs(n[3] - n[7]) / std::abs(z[3] - z[7]);
    for (int i = 0; i + 1 < 101; ++i)
        EXPECT_NEAR(std::abs(n[i] - n[i + 1]) / std::abs(z[i] - z[i + 1]), ratio, 1e-12 * ratio);
}

TEST(SouthCorrection, ReducesDistortionAndStaysOnSphere)
{
    auto pts = synth::sphere(5000, 12);
    auto lb = assemble_lb_full(PointCloud(pts), 25, WeightVariant::proposed);
    auto t = most_regular_triple(pts, lb.frames);
    auto phi = normalize_plane_map(initial_map(lb.op, t));
    std::vector<Vec3> lifted;
    for (const auto& z : phi) lifted.push_back(inv_north(finite(z)));
    auto corrected = south_correction(lb.op, phi, 10);
    for (const auto& p : corrected) ASSERT_NEAR(p.norm(), 1.0, 1e-12);
    EXPECT_LT(mean_distortion(pts, corrected), mean_distortion(pts, lifted));
}

TEST(PinnedPlaneSolve, KeepsOutermostPointsFixed)
{
    auto pts = synth::sphere(2000, 13);
    auto op = assemble_lb(PointCloud(pts), 25, WeightVariant::proposed);
    std::vector<PlanePoint> w;
    for (const auto& p : pts) w.push_back(proj_south(p));
    auto out = pinned_plane_solve(op, w, 10);
    for (Index id : outermost(w, pinned_count(w.size(), 10))) {
        ASSERT_EQ(out[id].infinite, w[id].infinite);
        if (w[id].infinite) continue;
        ASSERT_LE(std::abs(out[id].value - w[id].value), 1e-12);
    }
}

TEST(Balance, LambdaFromSpreads)
{
    const auto& fx = fixture();
    PointCloud cloud(fx.cloud);
    KdTree tree(cloud);
    // double the north chart of a balanced map: d_p / d_s becomes 4 and lambda must be 1/2
    std::vector<Vec3> skewed;
    for (const auto& p : fx.map.images) {
        PlanePoint w = proj_north(p);
        if (w.is_finite()) w.value *= 2.0;
        skewed.push_back(inv_north(w));
    }
    auto b = balance(skewed, tree, 25);
    EXPECT_NEAR(b.info.d_p / b.info.d_s, 4.0, 1e-9);
    EXPECT_NEAR(b.info.lambda, 0.5, 1e-9);
    EXPECT_DOUBLE_EQ(b.info.lambda, std::sqrt(b.info.d_p * b.info.d_s) / b.info.d_p);
    for (std::size_t i = 0; i < skewed.size(); ++i) ASSERT_LE((b.images[i] - fx.map.images[i]).norm(), 1e-9);
}

TEST(Balance, EqualizesSpreadsAndKeepsProduct)
{
    for (std::uint64_t seed : {1u, 2u}) {
        auto pts = synth::ellipsoid(2000, 2, 1, 1, seed);
        ParamConfig cfg;
        cfg.balance = false;
        auto raw = parameterize(PointCloud(pts), cfg);
        // parameterize works on the normalized cloud, neighbors are scale-free
        PointCloud cloud(pts);
        auto b = balance(raw.images, cloud, 25);
        const auto& i = b.info;
        EXPECT_NEAR(i.d_p_after / i.d_s_after, 1.0, 1e-9);
        EXPECT_NEAR(i.d_p_after * i.d_s_after / (i.d_p * i.d_s), 1.0, 1e-9);
        for (const auto& p : b.images) ASSERT_NEAR(p.norm(), 1.0, 1e-12);
    }
}

TEST(Balance, BalancedInputIsAFixedPoint)
{
    const auto& fx = fixture();
    auto b = balance(fx.map.images, PointCloud(fx.cloud), 25);
    EXPECT_NEAR(b.info.lambda, 1.0, 1e-12);
    for (std::size_t i = 0; i < b.images.size(); ++i) ASSERT_LE((b.images[i] - fx.map.images[i]).norm(), 1e-12);
}

TEST(Balance, PreservesCrossRatios)
{
    auto pts = synth::ellipsoid(2000, 1, 2, 1, 7);
    ParamConfig cfg;
    cfg.balance = false;
    auto raw = parameterize(PointCloud(pts), cfg);
    auto b = balance(raw.images, PointCloud(pts), 25);
    ASSERT_GT(std::abs(b.info.lambda - 1.0), 1e-3);  // a real rescaling, not a no-op
    synth::Rng rng(4);
    auto pick = [&] { return static_cast<std::size_t>(rng.uniform(0, 1) * pts.size()) % pts.size(); };
    for (int trial = 0; trial < 1000; ++trial) {
        std::array<std::size_t, 4> id{pick(), pick(), pick(), pick()};
        if (std::set<std::size_t>(id.begin(), id.end()).size() < 4) continue;
        // cross-ratios in the south chart, which balancing also only rescales
        Complex before = cross_ratio(proj_south(raw.images[id[0]]).value, proj_south(raw.images[id[1]]).value,
                                     proj_south(raw.images[id[2]]).value, proj_south(raw.images[id[3]]).value);
        Complex after = cross_ratio(proj_south(b.images[id[0]]).value, proj_south(b.images[id[1]]).value,
                                    proj_south(b.images[id[2]]).value, proj_south(b.images[id[3]]).value);
        ASSERT_LE(std::abs(after - before), 1e-9 * std::abs(before));
    }
}

TEST(Balance, CollapsedPoleNeighborhoodIsAnError)
{
    auto pts = synth::sphere(100, 9);
    KdTree tree(pts);
    const Vec3 p0 = Vec3(1, 0, 0.5).normalized();
    std::vector<Vec3> f(pts.size(), p0);
    // the farthest cloud point gets a distinct, lower image; the pole cluster stays collapsed
    auto all = tree.knn(Index{0}, pts.size());
    f[all.neighbors.back()] = Vec3(0, 0, -1);
    std::string what;
    EXPECT_EQ(error_of([&] { (void)balance(f, tree, 8); }, &what), ErrorCode::DegeneratePoleNeighborhood);
    EXPECT_NE(what.find("degenerate pole neighborhood"), std::string::npos);
}

TEST(NsIterate, ConvergedMapIsAFixedPoint)
{
    auto pts = synth::sphere(2000, 14);
    ParamConfig cfg;
    cfg.balance = false;
    auto map = parameterize(PointCloud(pts), cfg);
    ASSERT_TRUE(map.converged);
    if (map.mirrored) {
        for (auto& p : map.images) p.x() = -p.x();
    }
    PointCloud cloud = normalized(PointCloud(pts), Normalization::of(PointCloud(pts)));
    auto op = assemble_lb(cloud, cfg.k, cfg.weight);
    auto again = ns_iterate(op, map.images, cfg);
    EXPECT_TRUE(again.converged);
    EXPECT_EQ(again.iterations, 1);
}

TEST(NsIterate, EllipsoidConvergesWithinFifty)
{
    auto pts = synth::ellipsoid(5000, 2, 1, 1, 0);
    auto map = parameterize(PointCloud(pts));
    EXPECT_TRUE(map.converged);
    EXPECT_LE(map.iterations, 50);
    ASSERT_FALSE(map.history.empty());
    EXPECT_LT(map.history.back(), 1e-4);
    for (double m : map.history) EXPECT_TRUE(std::isfinite(m));
    for (const auto& p : map.images) ASSERT_NEAR(p.norm(), 1.0, 1e-12);
}

TEST(NsIterate, NonConvergenceReturnsBestIterate)
{
    auto pts = synth::blob(1500, 5);
    PointCloud cloud = normalized(PointCloud(pts), Normalization::of(PointCloud(pts)));
    auto lb = assemble_lb_full(cloud, 25, WeightVariant::proposed);
    auto t = most_regular_triple(cloud.points(), lb.frames);
    auto f = south_correction(lb.op, normalize_plane_map(initial_map(lb.op, t)), 10);
    ParamConfig cfg;
    cfg.epsilon = 1e-300;
    cfg.max_ns_iters = 4;
    auto res = ns_iterate(lb.op, f, cfg);
    EXPECT_FALSE(res.converged);
    ASSERT_EQ(res.history.size(), 4u);
    // replay to find the iterate with the smallest movement
    auto g = f;
    std::size_t best = 0;
    std::vector<std::vector<Vec3>> iterates;
    for (int it = 0; it < 4; ++it) {
        g = south_step(lb.op, north_step(lb.op, g, 10), 10);
        iterates.push_back(g);
        if (res.history[it] < res.history[best]) best = static_cast<std::size_t>(it);
    }
    EXPECT_EQ(res.images, iterates[best]);
    cfg.max_ns_iters = 0;
    auto none = ns_iterate(lb.op, f, cfg);
    EXPECT_EQ(none.iterations, 0);
    EXPECT_EQ(none.images, f);
}

TEST(Parameterize, SphereIsNearlyConformalAndDeterministic)
{
    const auto& fx = fixture();
    EXPECT_TRUE(fx.map.converged);
    EXPECT_EQ(fx.map.images.size(), fx.cloud.size());
    for (const auto& p : fx.map.images) ASSERT_NEAR(p.norm(), 1.0, 1e-12);
    auto m = induce_mesh(fx.cloud, fx.map);
    auto q = angle_distortion(m.source, m.sphere);
    EXPECT_LT(q.mean_abs_delta, 2.0);
    EXPECT_GE(q.delaunay_ratio, 0.99);
    EXPECT_GT(signed_volume(m.source), 0);
    auto again = parameterize(PointCloud(fx.cloud));
    EXPECT_EQ(again.images, fx.map.images);
    EXPECT_EQ(again.history, fx.map.history);
    std::vector<std::string> stages;
    for (const auto& [name, secs] : fx.map.stage_seconds) stages.push_back(name);
    EXPECT_EQ(stages, (std::vector<std::string>{"assemble", "triple", "initial", "south", "ns", "balance", "orient"}));
}

TEST(Parameterize, ScaleAndTranslationDoNotMatter)
{
    auto pts = synth::blob(1500, 2);
    auto moved = pts;
    for (auto& p : moved) p = 8.0 * p + Vec3(3, -1, 2);
    auto a = parameterize(PointCloud(pts)), b = parameterize(PointCloud(moved));
    ASSERT_EQ(a.images.size(), b.images.size());
    for (std::size_t i = 0; i < a.images.size(); ++i) ASSERT_LE((a.images[i] - b.images[i]).norm(), 1e-9);
}

TEST(Parameterize, ConfigAndStageErrors)
{
    auto pts = synth::sphere(200, 1);
    auto run = [&](ParamConfig cfg) { return error_of([&] { (void)parameterize(PointCloud(pts), cfg); }); };
    ParamConfig c;
    c.k = 5;
    EXPECT_EQ(run(c), ErrorCode::InvalidInput);
    c = {};
    c.r_percent = 50;
    EXPECT_EQ(run(c), ErrorCode::InvalidInput);
    c = {};
    c.epsilon = 0;
    EXPECT_EQ(run(c), ErrorCode::InvalidInput);
    c = {};
    c.k = 201;
    EXPECT_EQ(run(c), ErrorCode::InsufficientPoints);

    // a line with a few stray points: stencils on the line are degenerate
    std::vector<Vec3> line;
    for (int i = 0; i < 60; ++i) line.emplace_back(i * 0.1, 0, 0);
    line.emplace_back(0, 1, 0);
    line.emplace_back(0, 0, 1);
    std::string what;
    EXPECT_EQ(error_of([&] { (void)parameterize(PointCloud(line)); }, &what), ErrorCode::DegenerateNeighborhood);
    EXPECT_NE(what.find("stage assemble"), std::string::npos) << what;
}
