#pragma once

#include "sphcloud/common.hpp"
#include "sphcloud/mesh.hpp"
#include "sphcloud/meshing.hpp"
#include "sphcloud/mls.hpp"
#include "sphcloud/pointcloud.hpp"
#include "sphcloud/projection.hpp"
#include "sphcloud/solve.hpp"
#include "sphcloud/sphere_map.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <type_traits>
#include <vector>

namespace sphcloud
{

struct ParamConfig {
    std::size_t k = 25;
    double r_percent = 10;
    double epsilon = 1e-4;
    int max_ns_iters = 100;
    WeightVariant weight = WeightVariant::proposed;
    SolveOptions solver;
    std::size_t candidate_stride = 1;  // triple search visits every stride-th center
    bool balance = true;

    void validate() const
    {
        if (k < 7) throw Error(ErrorCode::InvalidInput, "k must be at least 7, got " + std::to_string(k));
        if (!(r_percent > 0 && r_percent < 50))
            throw Error(ErrorCode::InvalidInput, "r must lie in (0, 50), got " + std::to_string(r_percent));
        if (!(epsilon > 0)) throw Error(ErrorCode::InvalidInput, "epsilon must be positive");
        if (max_ns_iters < 0) throw Error(ErrorCode::InvalidInput, "max_ns_iters must be nonnegative");
        if (candidate_stride == 0) throw Error(ErrorCode::InvalidInput, "candidate stride must be positive");
    }
};

/** Sum of deviations of the three angles from pi/3; +inf for a degenerate triangle. */
inline double regularity(const std::array<double, 3>& angles)
{
    for (double a : angles)
        if (!(a > 0) || !std::isfinite(a)) return std::numeric_limits<double>::infinity();
    double r = 0;
    for (double a : angles) r += std::abs(a - kPi / 3);
    return r;
}

inline double regularity(const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 u = b - a, v = c - a;
    if (u.cross(v).norm() <= 1e-14 * u.norm() * v.norm()) return std::numeric_limits<double>::infinity();
    return regularity(triangle_angles(a, b, c));
}

struct Triple {
    std::array<Index, 3> ids{-1, -1, -1};
    std::array<Complex, 3> targets;
    double regularity = std::numeric_limits<double>::infinity();
    std::size_t center_position = 0;  // (s, i, j) of the winner, i and j neighbor positions
    std::array<std::size_t, 2> neighbor_positions{0, 0};
};

/**
 * Plane targets with the shape of the triangle (a, b, c): a at 0, b on the
 * positive real axis, c on the side given by `ccw`; then centered at the
 * centroid and scaled to unit longest edge.
 */
inline std::array<Complex, 3> similar_triangle(const Vec3& a, const Vec3& b, const Vec3& c, bool ccw)
{
    const double lab = (b - a).norm(), lac = (c - a).norm();
    const double theta = corner_angle(a, b, c);
    std::array<Complex, 3> t{Complex(0, 0), Complex(lab, 0), std::polar(lac, ccw ? theta : -theta)};
    const Complex centroid = (t[0] + t[1] + t[2]) / 3.0;
    double longest = 0;
    for (int i = 0; i < 3; ++i) longest = std::max(longest, std::abs(t[i] - t[(i + 1) % 3]));
    for (auto& z : t) z = (z - centroid) / longest;
    return t;
}

/**
 * Most regular triple [z_s, z_s^i, z_s^j] over all centers s and neighbor
 * positions 1 <= i < j. Ties keep the first in (s, i, j) order.
 */
inline Triple most_regular_triple(std::span<const Vec3> points, std::span<const LocalFrame> frames,
                                  std::size_t stride = 1)
{
    Triple best;
    for (std::size_t s = 0; s < frames.size(); s += stride) {
        const auto& nb = frames[s].neighbors;
        const Vec3& zs = points[s];
        for (std::size_t i = 1; i < nb.size(); ++i) {
            for (std::size_t j = i + 1; j < nb.size(); ++j) {
                double r = regularity(zs, points[nb[i]], points[nb[j]]);
                if (r < best.regularity) {
                    best.regularity = r;
                    best.ids = {static_cast<Index>(s), nb[i], nb[j]};
                    best.center_position = s;
                    best.neighbor_positions = {i, j};
                }
            }
        }
    }
    if (best.ids[0] < 0) throw Error(ErrorCode::DegenerateGeometry, "no nondegenerate triple in any stencil");
    const auto& f = frames[static_cast<std::size_t>(best.ids[0])];
    const Vec2& pi = f.local_coords[best.neighbor_positions[0]];
    const Vec2& pj = f.local_coords[best.neighbor_positions[1]];
    const bool ccw = pi.x() * pj.y() - pi.y() * pj.x() >= 0;
    best.targets = similar_triangle(points[best.ids[0]], points[best.ids[1]], points[best.ids[2]], ccw);
    return best;
}

/** Planar map with only the triple pinned to its targets. */
inline std::vector<Complex> initial_map(const SparseOperator& op, const Triple& triple, const SolveOptions& opts = {})
{
    ConstrainedSystem sys;
    sys.op = &op;
    sys.pinned.assign(triple.ids.begin(), triple.ids.end());
    sys.values.assign(triple.targets.begin(), triple.targets.end());
    return solve(sys, opts);
}

/**
 * Similarity of the plane applied to the initial map before lifting it to
 * the sphere: translate to zero mean, scale to unit median modulus.
 *
 * With only three pinned points the far field of the map sits near a
 * constant, away from 0, and occupies a tiny region. Centering puts that
 * region around the south pole and the scaling spreads the cloud over
 * both hemispheres. A similarity is conformal, so the corrected map is the
 * solution for an equally shaped target triangle.
 */
inline std::vector<Complex> normalize_plane_map(std::vector<Complex> phi)
{
    if (phi.empty()) return phi;
    Complex mean(0, 0);
    for (const auto& z : phi) mean += z;
    mean /= static_cast<double>(phi.size());
    std::vector<double> mod(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        phi[i] -= mean;
        mod[i] = std::abs(phi[i]);
    }
    auto mid = mod.begin() + static_cast<std::ptrdiff_t>(mod.size() / 2);
    std::nth_element(mod.begin(), mid, mod.end());
    if (*mid > 0)
        for (auto& z : phi) z /= *mid;
    return phi;
}

/** Number of pinned points for a percentage: round(n r / 100) clamped to [3, n - 1]. */
inline std::size_t pinned_count(std::size_t n, double r_percent)
{
    auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) * r_percent / 100.0));
    return std::clamp<std::size_t>(m, 3, n - 1);
}

/** Ids of the `count` largest-modulus plane points; infinity counts as largest, ties by id. */
inline std::vector<Index> outermost(std::span<const PlanePoint> w, std::size_t count)
{
    std::vector<double> mod(w.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        mod[i] = w[i].infinite ? std::numeric_limits<double>::infinity() : std::abs(w[i].value);
    std::vector<Index> ids(w.size());
    std::iota(ids.begin(), ids.end(), Index{0});
    auto by_modulus = [&](Index a, Index b) { return mod[a] != mod[b] ? mod[a] > mod[b] : a < b; };
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(count), ids.end(), by_modulus);
    ids.resize(count);
    std::sort(ids.begin(), ids.end());
    return ids;
}

/**
 * Laplace solve in a plane chart keeping the outermost r% fixed at their
 * current positions (psi(x) = x). Points at infinity stay there.
 */
inline std::vector<PlanePoint> pinned_plane_solve(const SparseOperator& op, std::span<const PlanePoint> w,
                                                  double r_percent, const SolveOptions& opts = {})
{
    ConstrainedSystem sys;
    sys.op = &op;
    sys.pinned = outermost(w, pinned_count(w.size(), r_percent));
    sys.values.reserve(sys.pinned.size());
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (Index id : sys.pinned) sys.values.push_back(w[id].infinite ? Complex(nan, nan) : w[id].value);
    if (opts.kind == SolverKind::iterative) {
        sys.initial.resize(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) sys.initial[i] = w[i].infinite ? Complex(0, 0) : w[i].value;
    }
    auto sol = solve(sys, opts);
    std::vector<PlanePoint> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = finite(sol[i]);
    for (Index id : sys.pinned) out[id] = w[id];
    return out;
}

namespace detail
{
template <class Proj>
std::vector<PlanePoint> project_all(std::span<const Vec3> f, Proj proj)
{
    std::vector<PlanePoint> w(f.size());
    parallel_for(f.size(), [&](std::size_t i) { w[i] = proj(f[i]); });
    return w;
}

template <class Inv>
std::vector<Vec3> lift_all(std::span<const PlanePoint> w, Inv inv)
{
    std::vector<Vec3> f(w.size());
    parallel_for(w.size(), [&](std::size_t i) { f[i] = inv(w[i]); });
    return f;
}

inline double mean_squared_movement(std::span<const Vec3> a, std::span<const Vec3> b)
{
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).squaredNorm();
    return s / static_cast<double>(a.size());
}
}  // namespace detail

/** Pinned solve after the south projection, lifted back to the sphere. */
inline std::vector<Vec3> south_step(const SparseOperator& op, std::span<const Vec3> f, double r_percent,
                                    const SolveOptions& opts = {})
{
    auto w = detail::project_all(f, [](const Vec3& p) { return proj_south(p); });
    auto psi = pinned_plane_solve(op, w, r_percent, opts);
    return detail::lift_all(psi, [](const PlanePoint& z) { return inv_south(z); });
}

inline std::vector<Vec3> north_step(const SparseOperator& op, std::span<const Vec3> f, double r_percent,
                                    const SolveOptions& opts = {})
{
    auto w = detail::project_all(f, [](const Vec3& p) { return proj_north(p); });
    auto phi = pinned_plane_solve(op, w, r_percent, opts);
    return detail::lift_all(phi, [](const PlanePoint& z) { return inv_north(z); });
}

/**
 * Lifts the initial planar map with the inverse north projection, then
 * re-solves in the south chart with the outermost r% held fixed.
 */
inline std::vector<Vec3> south_correction(const SparseOperator& op, std::span<const Complex> phi, double r_percent,
                                          const SolveOptions& opts = {})
{
    std::vector<Vec3> f(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) f[i] = inv_north(finite(phi[i]));
    return south_step(op, f, r_percent, opts);
}

/** Northernmost and southernmost image ids; ties go to the lowest id. */
inline std::pair<Index, Index> pole_points(std::span<const Vec3> f)
{
    Index north = 0, south = 0;
    for (std::size_t i = 1; i < f.size(); ++i) {
        if (f[i].z() > f[north].z()) north = static_cast<Index>(i);
        if (f[i].z() < f[south].z()) south = static_cast<Index>(i);
    }
    return {north, south};
}

/**
 * Mean plane distance from the pole point to the images of its cloud
 * neighborhood, in the north (d_p) and south (d_s) charts.
 */
inline std::pair<double, double> pole_spreads(std::span<const Vec3> f, const KdTree& cloud_index, std::size_t k,
                                              Index north, Index south)
{
    auto spread = [&](Index pole, auto proj) {
        const auto nb = cloud_index.knn(pole, k);
        const PlanePoint x = proj(f[pole]);
        if (x.infinite) return std::numeric_limits<double>::infinity();
        double sum = 0;
        for (Index id : nb.neighbors) {
            const PlanePoint w = proj(f[id]);
            if (w.infinite) return std::numeric_limits<double>::infinity();
            sum += std::abs(w.value - x.value);
        }
        return sum / static_cast<double>(nb.size());
    };
    return {spread(north, [](const Vec3& p) { return proj_north(p); }),
            spread(south, [](const Vec3& p) { return proj_south(p); })};
}

struct BalanceResult {
    std::vector<Vec3> images;
    BalanceInfo info;
};

/**
 * Scales the north chart by lambda = sqrt(d_p d_s) / d_p so that the two
 * pole spreads become equal; their product is unchanged.
 */
inline BalanceResult balance(std::span<const Vec3> f, const KdTree& cloud_index, std::size_t k)
{
    BalanceResult out;
    auto& info = out.info;
    std::tie(info.north, info.south) = pole_points(f);
    std::tie(info.d_p, info.d_s) = pole_spreads(f, cloud_index, k, info.north, info.south);
    auto usable = [](double d) { return d > 0 && std::isfinite(d); };
    if (!usable(info.d_p) || !usable(info.d_s))
        throw Error(ErrorCode::DegeneratePoleNeighborhood,
                    "d_p = " + std::to_string(info.d_p) + ", d_s = " + std::to_string(info.d_s));
    info.lambda = std::sqrt(info.d_p * info.d_s) / info.d_p;
    out.images.resize(f.size());
    const double lambda = info.lambda;
    parallel_for(f.size(), [&](std::size_t i) {
        PlanePoint w = proj_north(f[i]);
        if (w.is_finite()) w.value *= lambda;
        out.images[i] = inv_north(w);
    });
    std::tie(info.d_p_after, info.d_s_after) = pole_spreads(out.images, cloud_index, k, info.north, info.south);
    return out;
}

inline BalanceResult balance(std::span<const Vec3> f, const PointCloud& cloud, std::size_t k)
{
    return balance(f, KdTree(cloud), k);
}

struct NsResult {
    std::vector<Vec3> images;
    std::vector<double> history;
    int iterations = 0;
    bool converged = false;
};

/**
 * North-South reiterations until the mean squared movement drops below
 * epsilon. Without convergence the iterate with the smallest movement is
 * returned and `converged` stays false.
 */
inline NsResult ns_iterate(const SparseOperator& op, std::vector<Vec3> f, const ParamConfig& cfg)
{
    NsResult res;
    std::vector<Vec3> best = f;
    double best_move = std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.max_ns_iters; ++it) {
        auto g = north_step(op, f, cfg.r_percent, cfg.solver);
        g = south_step(op, g, cfg.r_percent, cfg.solver);
        const double move = detail::mean_squared_movement(g, f);
        res.history.push_back(move);
        res.iterations = it + 1;
        f = std::move(g);
        if (move < best_move) {
            best_move = move;
            best = f;
        }
        if (move < cfg.epsilon) {
            res.converged = true;
            break;
        }
    }
    res.images = res.converged || res.history.empty() ? std::move(f) : std::move(best);
    return res;
}

namespace detail
{
class StageClock
{
public:
    explicit StageClock(std::vector<std::pair<std::string, double>>& sink) : sink_(sink) {}

    template <class Fn>
    auto run(const std::string& stage, Fn&& fn)
    {
        auto t0 = std::chrono::steady_clock::now();
        auto record = [&] {
            sink_.emplace_back(stage,
                               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        };
        try {
            if constexpr (std::is_void_v<decltype(fn())>) {
                fn();
                record();
            } else {
                auto r = fn();
                record();
                return r;
            }
        } catch (const Error& e) {
            throw Error(e.code(), "stage " + stage + ": " + e.detail());
        }
    }

private:
    std::vector<std::pair<std::string, double>>& sink_;
};
}  // namespace detail

/**
 * Full pipeline on a cloud: operator assembly, triple selection, initial
 * map, south correction, N-S reiterations, balancing, orientation fix.
 * The cloud is normalized internally; images do not depend on its scale.
 */
inline SphericalMap parameterize(const PointCloud& input, const ParamConfig& cfg = {})
{
    cfg.validate();
    if (cfg.k > input.size())
        throw Error(ErrorCode::InsufficientPoints,
                    "k = " + std::to_string(cfg.k) + " exceeds cloud size " + std::to_string(input.size()));
    SphericalMap map;
    detail::StageClock clock(map.stage_seconds);

    const PointCloud cloud = normalized(input, Normalization::of(input));
    LbAssembly lb = clock.run("assemble", [&] { return assemble_lb_full(cloud, cfg.k, cfg.weight); });
    Triple triple =
        clock.run("triple", [&] { return most_regular_triple(cloud.points(), lb.frames, cfg.candidate_stride); });
    map.triple = triple.ids;
    auto phi = clock.run("initial",
                         [&] { return normalize_plane_map(initial_map(lb.op, triple, cfg.solver)); });
    auto f = clock.run("south", [&] { return south_correction(lb.op, phi, cfg.r_percent, cfg.solver); });
    NsResult ns = clock.run("ns", [&] { return ns_iterate(lb.op, std::move(f), cfg); });
    map.images = std::move(ns.images);
    map.history = std::move(ns.history);
    map.iterations = ns.iterations;
    map.converged = ns.converged;
    if (cfg.balance) {
        auto b = clock.run("balance", [&] { return balance(map.images, cloud, cfg.k); });
        map.images = std::move(b.images);
        map.balance = b.info;
    }
    clock.run("orient", [&] {
        TriMesh sphere = spherical_delaunay(map.images);
        TriMesh source{std::vector<Vec3>(cloud.points().begin(), cloud.points().end()), sphere.faces};
        if (signed_volume(source) < 0) {
            for (auto& p : map.images) p.x() = -p.x();
            map.mirrored = true;
        }
    });
    return map;
}

}  // namespace sphcloud
