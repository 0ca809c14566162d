#pragma once

#include "sphcloud/common.hpp"
#include "sphcloud/hull.hpp"
#include "sphcloud/mesh.hpp"
#include "sphcloud/mls.hpp"
#include "sphcloud/pointcloud.hpp"
#include "sphcloud/sphere_map.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

namespace sphcloud
{

/** Tolerance on |p| - 1 for points handed to the spherical mesher. */
constexpr double kUnitTolerance = 1e-9;

/**
 * Spherical Delaunay triangulation as the boundary of the convex hull.
 * Every input point becomes a vertex; faces are oriented outward.
 */
inline TriMesh spherical_delaunay(std::span<const Vec3> points, std::uint64_t seed = 0x5eed)
{
    if (points.size() < 4)
        throw Error(ErrorCode::InsufficientPoints, "spherical triangulation needs at least 4 points, got " +
                                                       std::to_string(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!points[i].allFinite() || std::abs(points[i].norm() - 1.0) > kUnitTolerance)
            throw Error(ErrorCode::InvalidInput, "point " + std::to_string(i) + " is not on the unit sphere");
    }
    if (auto dup = detail::find_duplicate(points))
        throw Error(ErrorCode::DegenerateGeometry, "points " + std::to_string(dup->first) + " and " +
                                                       std::to_string(dup->second) + " coincide on the sphere");

    ConvexHull hull(points, seed);
    if (!hull.interior_points().empty())
        throw Error(ErrorCode::DegenerateGeometry,
                    std::to_string(hull.interior_points().size()) + " points are not hull vertices");
    TriMesh mesh;
    mesh.vertices.assign(points.begin(), points.end());
    mesh.faces.assign(hull.faces().begin(), hull.faces().end());
    if (!(signed_volume(mesh) > 1e-14))
        throw Error(ErrorCode::DegenerateGeometry, "points lie on a common great circle");
    return mesh;
}

/** Source and sphere meshes sharing the connectivity of the parameterization. */
struct InducedMesh {
    TriMesh source;
    TriMesh sphere;
};

inline InducedMesh induce_mesh(std::span<const Vec3> cloud_points, const SphericalMap& map)
{
    if (cloud_points.size() != map.images.size())
        throw Error(ErrorCode::MismatchedConnectivity, "map has " + std::to_string(map.images.size()) +
                                                           " images for " + std::to_string(cloud_points.size()) +
                                                           " points");
    InducedMesh out;
    out.sphere = spherical_delaunay(map.images);
    out.source.vertices.assign(cloud_points.begin(), cloud_points.end());
    out.source.faces = out.sphere.faces;
    return out;
}

inline InducedMesh induce_mesh(const PointCloud& cloud, const SphericalMap& map)
{
    return induce_mesh(cloud.points(), map);
}

/**
 * Fraction of edges with two incident faces whose opposite angles sum to
 * at most pi. Angles are Euclidean corner angles of the embedded faces.
 */
inline double delaunay_ratio(const TriMesh& mesh)
{
    std::unordered_map<std::uint64_t, double> opposite;  // directed edge -> angle opposite to it
    opposite.reserve(mesh.faces.size() * 3);
    for (const auto& f : mesh.faces) {
        auto ang = triangle_angles(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
        for (int i = 0; i < 3; ++i) opposite[detail::edge_key(f[(i + 1) % 3], f[(i + 2) % 3])] = ang[i];
    }
    std::size_t total = 0, good = 0;
    for (const auto& [key, a] : opposite) {
        Index u = static_cast<Index>(key >> 32), v = static_cast<Index>(key & 0xffffffffu);
        if (u > v) continue;
        auto it = opposite.find(detail::edge_key(v, u));
        if (it == opposite.end()) continue;
        ++total;
        if (a + it->second <= kPi + 1e-12) ++good;
    }
    return total == 0 ? 1.0 : static_cast<double>(good) / static_cast<double>(total);
}

struct QualityReport {
    std::vector<double> angle_diffs;  // |delta| per corner, degrees, 3 per face
    double mean_abs_delta = 0;
    double sd_abs_delta = 0;
    double max_abs_delta = 0;
    double delaunay_ratio = 0;
    std::vector<double> mean_curvature;
};

/**
 * Per-corner angle differences in degrees between two meshes with the same
 * connectivity, with summary statistics. The Delaunay ratio is that of `source`.
 */
inline QualityReport angle_distortion(const TriMesh& source, const TriMesh& sphere)
{
    if (source.faces != sphere.faces || source.vertices.size() != sphere.vertices.size())
        throw Error(ErrorCode::MismatchedConnectivity, "meshes do not share connectivity");
    QualityReport q;
    const std::size_t F = source.faces.size();
    q.angle_diffs.resize(3 * F);
    parallel_for(F, [&](std::size_t i) {
        const auto& f = source.faces[i];
        auto a = triangle_angles(source.vertices[f[0]], source.vertices[f[1]], source.vertices[f[2]]);
        auto b = triangle_angles(sphere.vertices[f[0]], sphere.vertices[f[1]], sphere.vertices[f[2]]);
        for (int c = 0; c < 3; ++c) q.angle_diffs[3 * i + c] = std::abs(a[c] - b[c]) * 180.0 / kPi;
    });
    if (!q.angle_diffs.empty()) {
        double sum = 0, sq = 0;
        for (double d : q.angle_diffs) {
            sum += d;
            q.max_abs_delta = std::max(q.max_abs_delta, d);
        }
        q.mean_abs_delta = sum / static_cast<double>(q.angle_diffs.size());
        for (double d : q.angle_diffs) sq += (d - q.mean_abs_delta) * (d - q.mean_abs_delta);
        q.sd_abs_delta = std::sqrt(sq / static_cast<double>(q.angle_diffs.size()));
    }
    q.delaunay_ratio = delaunay_ratio(source);
    return q;
}

/**
 * Mean curvature per point from the MLS fits, signed so that a convex
 * surface with the given outward normals has H > 0 (unit sphere: H = 1).
 */
inline std::vector<double> oriented_mean_curvature(std::span<const LocalFrame> frames, std::span<const MlsFit> fits,
                                                   std::span<const Vec3> outward_normals)
{
    std::vector<double> h(fits.size());
    for (std::size_t i = 0; i < fits.size(); ++i) {
        double sign = frames[i].e3().dot(outward_normals[i]) >= 0 ? -1.0 : 1.0;
        h[i] = sign * mean_curvature(fits[i]);
    }
    return h;
}

/**
 * @brief Maps sphere samples back onto the cloud through a parameterization
 *
 * The ray from the origin through a sample hits one face of the spherical
 * Delaunay mesh; the barycentric weights of the hit point combine the
 * corresponding cloud points. Faces are located with a bounding-volume
 * hierarchy over their spherical caps.
 */
class SphereInterpolator
{
public:
    SphereInterpolator(std::span<const Vec3> cloud_points, const SphericalMap& map)
        : SphereInterpolator(cloud_points, spherical_delaunay(map.images))
    {
    }

    SphereInterpolator(std::span<const Vec3> cloud_points, TriMesh sphere_mesh)
        : sphere_(std::move(sphere_mesh)), targets_(cloud_points.begin(), cloud_points.end())
    {
        if (targets_.size() != sphere_.vertices.size())
            throw Error(ErrorCode::MismatchedConnectivity, "cloud and sphere mesh differ in size");
        exact_.reserve(sphere_.vertices.size());
        for (std::size_t i = 0; i < sphere_.vertices.size(); ++i)
            exact_.emplace(key(sphere_.vertices[i]), static_cast<Index>(i));
        build_bvh();
    }

    struct Hit {
        Index face = -1;
        std::array<double, 3> weights{0, 0, 0};
        bool snapped = false;
    };

    /** Face hit by the ray through `s`, found through the hierarchy. */
    [[nodiscard]] Hit locate(const Vec3& s) const
    {
        Hit best;
        double best_min = -std::numeric_limits<double>::infinity();
        std::vector<int> stack{0};
        while (!stack.empty()) {
            const Node& node = nodes_[stack.back()];
            stack.pop_back();
            if ((s.array() < node.lo.array()).any() || (s.array() > node.hi.array()).any()) continue;
            if (node.count > 0) {
                for (int i = 0; i < node.count; ++i) consider(order_[node.first + i], s, best, best_min);
            } else {
                stack.push_back(node.left);
                stack.push_back(node.right);
            }
        }
        if (best_min >= -kInsideSlack) return finish(best);
        return snap(s);
    }

    /** Same as locate() by scanning every face; the reference for tests. */
    [[nodiscard]] Hit locate_linear(const Vec3& s) const
    {
        Hit best;
        double best_min = -std::numeric_limits<double>::infinity();
        for (std::size_t f = 0; f < sphere_.faces.size(); ++f) consider(static_cast<Index>(f), s, best, best_min);
        if (best_min >= -kInsideSlack) return finish(best);
        return snap(s);
    }

    /** Interpolated cloud position for a unit-sphere sample. */
    [[nodiscard]] Vec3 operator()(const Vec3& s) const
    {
        if (auto it = exact_.find(key(s)); it != exact_.end()) return targets_[static_cast<std::size_t>(it->second)];
        Hit h = locate(s);
        if (h.snapped) ++snapped_;
        const auto& f = sphere_.faces[static_cast<std::size_t>(h.face)];
        return h.weights[0] * targets_[f[0]] + h.weights[1] * targets_[f[1]] + h.weights[2] * targets_[f[2]];
    }

    [[nodiscard]] std::vector<Vec3> map(std::span<const Vec3> samples) const
    {
        std::vector<Vec3> out(samples.size());
        parallel_for(samples.size(), [&](std::size_t i) { out[i] = (*this)(samples[i]); });
        return out;
    }

    /** Number of samples that missed every face and were snapped to the nearest one. */
    [[nodiscard]] std::size_t snapped_count() const noexcept { return snapped_; }

    [[nodiscard]] const TriMesh& sphere_mesh() const noexcept { return sphere_; }

private:
    static constexpr double kInsideSlack = 1e-12;

    struct Node {
        Vec3 lo, hi;
        int left = -1, right = -1;
        int first = 0, count = 0;
    };

    static std::array<double, 3> key(const Vec3& p) { return {p.x() + 0.0, p.y() + 0.0, p.z() + 0.0}; }

    struct KeyHash {
        std::size_t operator()(const std::array<double, 3>& p) const noexcept
        {
            return detail::Vec3BitsHash{}(p);
        }
    };

    // Unnormalized barycentrics of the ray through s: determinants that are
    // all nonnegative exactly when the ray crosses the face.
    [[nodiscard]] std::array<double, 3> raw_weights(Index face, const Vec3& s) const
    {
        const auto& f = sphere_.faces[static_cast<std::size_t>(face)];
        const Vec3 &a = sphere_.vertices[f[0]], &b = sphere_.vertices[f[1]], &c = sphere_.vertices[f[2]];
        return {s.dot(b.cross(c)), a.dot(s.cross(c)), a.dot(b.cross(s))};
    }

    void consider(Index face, const Vec3& s, Hit& best, double& best_min) const
    {
        auto w = raw_weights(face, s);
        double total = w[0] + w[1] + w[2];
        if (!(total > 0)) return;
        double m = std::min({w[0], w[1], w[2]}) / total;
        if (m > best_min) {
            best_min = m;
            best.face = face;
            best.weights = {w[0] / total, w[1] / total, w[2] / total};
        }
    }

    static Hit finish(Hit h)
    {
        for (double& w : h.weights) w = std::max(w, 0.0);
        double t = h.weights[0] + h.weights[1] + h.weights[2];
        for (double& w : h.weights) w /= t;
        return h;
    }

    [[nodiscard]] Hit snap(const Vec3& s) const
    {
        Hit best;
        double best_min = -std::numeric_limits<double>::infinity();
        for (std::size_t f = 0; f < sphere_.faces.size(); ++f) consider(static_cast<Index>(f), s, best, best_min);
        if (best.face < 0) throw Error(ErrorCode::DegenerateGeometry, "sample direction meets no face");
        best = finish(best);
        best.snapped = true;
        return best;
    }

    void build_bvh()
    {
        const std::size_t F = sphere_.faces.size();
        boxes_lo_.resize(F);
        boxes_hi_.resize(F);
        centers_.resize(F);
        for (std::size_t i = 0; i < F; ++i) {
            const auto& f = sphere_.faces[i];
            const Vec3 &a = sphere_.vertices[f[0]], &b = sphere_.vertices[f[1]], &c = sphere_.vertices[f[2]];
            Vec3 lo = a.cwiseMin(b).cwiseMin(c), hi = a.cwiseMax(b).cwiseMax(c);
            // The cap over the face bulges at most 1 - d beyond the face,
            // with d the distance of the face plane from the origin.
            Vec3 n = (b - a).cross(c - a);
            double nn = n.norm();
            double d = nn > 0 ? a.dot(n) / nn : -1.0;
            double pad = d > 0 ? (1.0 - d) + 1e-9 : 2.0;
            lo.array() -= pad;
            hi.array() += pad;
            boxes_lo_[i] = lo;
            boxes_hi_[i] = hi;
            centers_[i] = (a + b + c) / 3.0;
        }
        order_.resize(F);
        std::iota(order_.begin(), order_.end(), Index{0});
        nodes_.clear();
        nodes_.reserve(2 * F / 4 + 1);
        build_node(0, static_cast<int>(F));
    }

    int build_node(int begin, int end)
    {
        int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
        Vec3 clo = lo, chi = hi;
        for (int i = begin; i < end; ++i) {
            Index f = order_[i];
            lo = lo.cwiseMin(boxes_lo_[f]);
            hi = hi.cwiseMax(boxes_hi_[f]);
            clo = clo.cwiseMin(centers_[f]);
            chi = chi.cwiseMax(centers_[f]);
        }
        nodes_[id].lo = lo;
        nodes_[id].hi = hi;
        if (end - begin <= 4) {
            nodes_[id].first = begin;
            nodes_[id].count = end - begin;
            return id;
        }
        int axis;
        (chi - clo).maxCoeff(&axis);
        int mid = (begin + end) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](Index x, Index y) {
                             if (centers_[x][axis] != centers_[y][axis]) return centers_[x][axis] < centers_[y][axis];
                             return x < y;
                         });
        int left = build_node(begin, mid);
        int right = build_node(mid, end);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    TriMesh sphere_;
    std::vector<Vec3> targets_;
    std::unordered_map<std::array<double, 3>, Index, KeyHash> exact_;
    std::vector<Vec3> boxes_lo_, boxes_hi_, centers_;
    std::vector<Index> order_;
    std::vector<Node> nodes_;
    mutable std::atomic<std::size_t> snapped_{0};
};

/**
 * Cube-sphere template: each cube face split into r x r quads, vertices
 * normalized onto the unit sphere. 6r^2 faces, 6r^2 + 2 vertices.
 */
inline QuadMesh cube_sphere(int resolution)
{
    if (resolution < 1) throw Error(ErrorCode::InvalidInput, "resolution must be positive");
    const int r = resolution;
    QuadMesh mesh;
    std::map<std::array<int, 3>, Index> ids;
    auto vertex = [&](std::array<int, 3> g) {
        auto [it, inserted] = ids.try_emplace(g, static_cast<Index>(mesh.vertices.size()));
        if (inserted) {
            Vec3 p(-1.0 + 2.0 * g[0] / r, -1.0 + 2.0 * g[1] / r, -1.0 + 2.0 * g[2] / r);
            mesh.vertices.push_back(p.normalized());
        }
        return it->second;
    };
    for (int axis = 0; axis < 3; ++axis) {
        for (int side = 0; side < 2; ++side) {
            int u_axis = (axis + 1) % 3, v_axis = (axis + 2) % 3;
            if (side == 0) std::swap(u_axis, v_axis);  // keep faces outward on the negative side
            for (int i = 0; i < r; ++i) {
                for (int j = 0; j < r; ++j) {
                    auto grid = [&](int a, int b) {
                        std::array<int, 3> g{};
                        g[axis] = side == 0 ? 0 : r;
                        g[u_axis] = a;
                        g[v_axis] = b;
                        return vertex(g);
                    };
                    mesh.faces.push_back({grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1)});
                }
            }
        }
    }
    return mesh;
}

/** Regular icosahedron inscribed in the unit sphere, faces outward. */
inline TriMesh icosahedron()
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh m;
    const double raw[12][3] = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                               {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (const auto& p : raw) m.vertices.push_back(Vec3(p[0], p[1], p[2]).normalized());
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
               {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (auto& f : m.faces)
        if (m.vertices[f[0]].dot(m.vertices[f[1]].cross(m.vertices[f[2]])) < 0) std::swap(f[1], f[2]);
    return m;
}

/**
 * One step of Loop subdivision on a closed triangle mesh. Even vertices use
 * the beta rule, odd (edge) vertices the 3/8, 1/8 stencil. With
 * `to_sphere`, all vertices are renormalized to unit length afterwards.
 */
inline TriMesh loop_subdivide(const TriMesh& mesh, bool to_sphere)
{
    const std::size_t V = mesh.vertices.size();
    std::unordered_map<std::uint64_t, Index> edge_vertex;
    std::unordered_map<std::uint64_t, std::array<Index, 2>> edge_opposite;  // undirected key -> opposite corners
    std::vector<std::vector<Index>> ring(V);
    edge_vertex.reserve(mesh.faces.size() * 2);
    TriMesh out;
    out.vertices.resize(V);

    auto undirected = [](Index a, Index b) { return detail::edge_key(std::min(a, b), std::max(a, b)); };
    for (const auto& f : mesh.faces) {
        for (int i = 0; i < 3; ++i) {
            Index a = f[i], b = f[(i + 1) % 3], c = f[(i + 2) % 3];
            auto k = undirected(a, b);
            auto [it, inserted] = edge_opposite.try_emplace(k, std::array<Index, 2>{c, -1});
            if (!inserted) {
                it->second[1] = c;
            } else {
                edge_vertex[k] = static_cast<Index>(V + edge_vertex.size());
                ring[a].push_back(b);
                ring[b].push_back(a);
            }
        }
    }
    out.vertices.resize(V + edge_vertex.size());
    for (std::size_t v = 0; v < V; ++v) {
        const double n = static_cast<double>(ring[v].size());
        const double beta = ring[v].size() == 3 ? 3.0 / 16.0 : 3.0 / (8.0 * n);
        Vec3 sum = Vec3::Zero();
        for (Index u : ring[v]) sum += mesh.vertices[u];
        out.vertices[v] = (1.0 - n * beta) * mesh.vertices[v] + beta * sum;
    }
    for (const auto& [k, id] : edge_vertex) {
        Index a = static_cast<Index>(k >> 32), b = static_cast<Index>(k & 0xffffffffu);
        const auto& opp = edge_opposite.at(k);
        Vec3 p = 0.375 * (mesh.vertices[a] + mesh.vertices[b]);
        if (opp[1] >= 0)
            p += 0.125 * (mesh.vertices[opp[0]] + mesh.vertices[opp[1]]);
        else
            p = 0.5 * (mesh.vertices[a] + mesh.vertices[b]);
        out.vertices[id] = p;
    }
    out.faces.reserve(4 * mesh.faces.size());
    for (const auto& f : mesh.faces) {
        Index ab = edge_vertex.at(undirected(f[0], f[1]));
        Index bc = edge_vertex.at(undirected(f[1], f[2]));
        Index ca = edge_vertex.at(undirected(f[2], f[0]));
        out.faces.push_back({f[0], ab, ca});
        out.faces.push_back({f[1], bc, ab});
        out.faces.push_back({f[2], ca, bc});
        out.faces.push_back({ab, bc, ca});
    }
    if (to_sphere)
        for (auto& p : out.vertices) p.normalize();
    return out;
}

inline TriMesh icosphere(int subdivisions)
{
    TriMesh m = icosahedron();
    for (int i = 0; i < subdivisions; ++i) m = loop_subdivide(m, true);
    return m;
}

/** Cube-sphere template carried onto the cloud. */
inline QuadMesh quad_mesh(const SphereInterpolator& interp, int resolution)
{
    QuadMesh q = cube_sphere(resolution);
    q.vertices = interp.map(q.vertices);
    return q;
}

/**
 * Multilevel meshes: an icosphere subdivided `base_subdivisions` times,
 * then `levels` further Loop steps, every level carried onto the cloud.
 * Returns levels + 1 meshes, coarsest first.
 */
inline std::vector<TriMesh> multilevel(const SphereInterpolator& interp, int levels, int base_subdivisions = 3)
{
    if (levels < 0 || base_subdivisions < 0) throw Error(ErrorCode::InvalidInput, "levels must be nonnegative");
    std::vector<TriMesh> out;
    TriMesh sphere = icosphere(base_subdivisions);
    for (int l = 0; l <= levels; ++l) {
        if (l > 0) sphere = loop_subdivide(sphere, true);
        TriMesh m;
        m.faces = sphere.faces;
        m.vertices = interp.map(sphere.vertices);
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace sphcloud
