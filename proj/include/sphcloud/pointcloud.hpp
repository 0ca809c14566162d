#pragma once

#include "sphcloud/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sphcloud
{

namespace detail
{
struct Vec3BitsHash {
    std::size_t operator()(const std::array<double, 3>& p) const noexcept
    {
        std::size_t h = 1469598103934665603ull;
        for (double v : p) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            h ^= bits + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        }
        return h;
    }
};

/** Returns the first pair (earlier, later) of exactly coinciding points, if any. */
inline std::optional<std::pair<Index, Index>> find_duplicate(std::span<const Vec3> pts)
{
    std::unordered_map<std::array<double, 3>, Index, Vec3BitsHash> seen;
    seen.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::array<double, 3> key{pts[i].x(), pts[i].y(), pts[i].z()};
        for (double& v : key) v = v == 0.0 ? 0.0 : v;  // -0 == +0
        auto [it, inserted] = seen.emplace(key, static_cast<Index>(i));
        if (!inserted) return std::pair{it->second, static_cast<Index>(i)};
    }
    return std::nullopt;
}
}  // namespace detail

/**
 * @brief Ordered set of distinct 3D samples
 *
 * Construction validates the invariants: at least four points, finite
 * coordinates, no two points coinciding exactly. Point ids are positions.
 */
class PointCloud
{
public:
    PointCloud() = default;

    explicit PointCloud(std::vector<Vec3> points) : points_{std::move(points)}
    {
        if (points_.size() < 4)
            throw Error(ErrorCode::InsufficientPoints,
                        "a point cloud needs at least 4 points, got " + std::to_string(points_.size()));
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (!points_[i].allFinite())
                throw Error(ErrorCode::InvalidInput, "non-finite coordinate at point " + std::to_string(i));
        }
        if (auto dup = detail::find_duplicate(points_))
            throw Error(ErrorCode::DuplicatePoint, "points " + std::to_string(dup->first) + " and " +
                                                       std::to_string(dup->second) + " coincide");
    }

    [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
    [[nodiscard]] const Vec3& operator[](Index i) const { return points_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] std::span<const Vec3> points() const noexcept { return points_; }

    [[nodiscard]] Vec3 centroid() const
    {
        Vec3 c = Vec3::Zero();
        for (const auto& p : points_) c += p;
        return c / static_cast<double>(points_.size());
    }

    /** Largest distance from the centroid. */
    [[nodiscard]] double bounding_radius() const
    {
        Vec3 c = centroid();
        double r = 0;
        for (const auto& p : points_) r = std::max(r, (p - c).norm());
        return r;
    }

private:
    std::vector<Vec3> points_;
};

/** Similarity that moves a cloud to its centroid and unit bounding radius. */
struct Normalization {
    Vec3 center = Vec3::Zero();
    double scale = 1.0;

    [[nodiscard]] Vec3 apply(const Vec3& p) const { return (p - center) / scale; }
    [[nodiscard]] Vec3 undo(const Vec3& q) const { return q * scale + center; }

    static Normalization of(const PointCloud& cloud)
    {
        Normalization n;
        n.center = cloud.centroid();
        n.scale = cloud.bounding_radius();
        if (!(n.scale > 0)) n.scale = 1.0;
        return n;
    }
};

inline PointCloud normalized(const PointCloud& cloud, const Normalization& n)
{
    std::vector<Vec3> pts;
    pts.reserve(cloud.size());
    for (const auto& p : cloud.points()) pts.push_back(n.apply(p));
    return PointCloud(std::move(pts));
}

/**
 * k nearest cloud points of a center, closest first. For a cloud point
 * query the center itself is neighbors[0] with distance 0. Equal distances
 * are ordered by ascending point id.
 */
struct NeighborSet {
    Index center = -1;
    std::vector<Index> neighbors;
    std::vector<double> distances;

    [[nodiscard]] std::size_t size() const noexcept { return neighbors.size(); }
};

/**
 * @brief Exact k-NN over a static point set (Euclidean)
 *
 * Balanced kd-tree split on the widest axis. Immutable after construction,
 * so concurrent queries are safe.
 */
class KdTree
{
public:
    explicit KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end())
    {
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), Index{0});
        if (!points_.empty()) build(0, static_cast<Index>(order_.size()));
    }

    explicit KdTree(const PointCloud& cloud) : KdTree(cloud.points()) {}

    [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }

    /** Neighborhood of cloud point `center`, including itself. */
    [[nodiscard]] NeighborSet knn(Index center, std::size_t k) const
    {
        NeighborSet out = knn(points_.at(static_cast<std::size_t>(center)), k);
        out.center = center;
        return out;
    }

    /** k nearest points of an arbitrary query location. */
    [[nodiscard]] NeighborSet knn(const Vec3& query, std::size_t k) const
    {
        if (k > points_.size())
            throw Error(ErrorCode::InsufficientPoints, "k = " + std::to_string(k) + " exceeds cloud size " +
                                                           std::to_string(points_.size()));
        NeighborSet out;
        if (k == 0) return out;
        std::vector<Candidate> heap;
        heap.reserve(k + 1);
        search(0, query, k, heap);
        std::sort_heap(heap.begin(), heap.end());
        out.neighbors.reserve(k);
        out.distances.reserve(k);
        for (const auto& c : heap) {
            out.neighbors.push_back(c.id);
            out.distances.push_back(std::sqrt(c.d2));
        }
        return out;
    }

private:
    struct Candidate {
        double d2;
        Index id;
        bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && id < o.id); }
    };

    struct Node {
        Index begin, end;
        int axis = -1;  // -1 marks a leaf
        double split = 0;
        Index left = -1, right = -1;
    };

    static constexpr Index kLeafSize = 12;

    Index build(Index begin, Index end)
    {
        Index id = static_cast<Index>(nodes_.size());
        nodes_.push_back(Node{begin, end});
        if (end - begin <= kLeafSize) return id;

        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
        Vec3 hi = -lo;
        for (Index i = begin; i < end; ++i) {
            lo = lo.cwiseMin(points_[order_[i]]);
            hi = hi.cwiseMax(points_[order_[i]]);
        }
        int axis;
        (hi - lo).maxCoeff(&axis);
        Index mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](Index a, Index b) {
                             double va = points_[a][axis], vb = points_[b][axis];
                             return va < vb || (va == vb && a < b);
                         });
        double split = points_[order_[mid]][axis];
        Index left = build(begin, mid);
        Index right = build(mid, end);
        nodes_[id].axis = axis;
        nodes_[id].split = split;
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void search(Index node_id, const Vec3& q, std::size_t k, std::vector<Candidate>& heap) const
    {
        const Node& node = nodes_[node_id];
        if (node.axis < 0) {
            for (Index i = node.begin; i < node.end; ++i) {
                Index pid = order_[i];
                Candidate c{(points_[pid] - q).squaredNorm(), pid};
                if (heap.size() < k) {
                    heap.push_back(c);
                    std::push_heap(heap.begin(), heap.end());
                } else if (c < heap.front()) {
                    std::pop_heap(heap.begin(), heap.end());
                    heap.back() = c;
                    std::push_heap(heap.begin(), heap.end());
                }
            }
            return;
        }
        double diff = q[node.axis] - node.split;
        Index near = diff < 0 ? node.left : node.right;
        Index far = diff < 0 ? node.right : node.left;
        search(near, q, k, heap);
        // <= keeps equal-distance candidates with smaller ids reachable
        if (heap.size() < k || diff * diff <= heap.front().d2) search(far, q, k, heap);
    }

    std::vector<Vec3> points_;
    std::vector<Index> order_;
    std::vector<Node> nodes_;
};

/**
 * @brief Local coordinate system of a neighborhood
 *
 * basis columns are (e1, e2, e3), with e3 the least-variance principal
 * direction. Neighbor i satisfies
 *   z_i = origin + x_i e1 + y_i e2 + heights_i e3.
 */
struct LocalFrame {
    Index center = -1;
    Vec3 origin = Vec3::Zero();
    Eigen::Matrix3d basis = Eigen::Matrix3d::Identity();
    std::vector<Index> neighbors;
    std::vector<double> distances;
    std::vector<Vec2> local_coords;
    std::vector<double> heights;

    [[nodiscard]] Vec3 e1() const { return basis.col(0); }
    [[nodiscard]] Vec3 e2() const { return basis.col(1); }
    [[nodiscard]] Vec3 e3() const { return basis.col(2); }
    [[nodiscard]] std::size_t size() const noexcept { return neighbors.size(); }

    /** Same frame expressed in another orthonormal basis with the same origin. */
    [[nodiscard]] LocalFrame rebased(const Eigen::Matrix3d& new_basis, std::span<const Vec3> positions) const
    {
        LocalFrame f = *this;
        f.basis = new_basis;
        f.project(positions);
        return f;
    }

    void project(std::span<const Vec3> positions)
    {
        local_coords.resize(neighbors.size());
        heights.resize(neighbors.size());
        for (std::size_t i = 0; i < neighbors.size(); ++i) {
            Vec3 d = positions[static_cast<std::size_t>(neighbors[i])] - origin;
            local_coords[i] = Vec2(d.dot(e1()), d.dot(e2()));
            heights[i] = d.dot(e3());
        }
    }
};

/**
 * PCA frame of a neighborhood. The covariance is centered at the neighbor
 * mean; the frame origin is the center point itself.
 */
inline LocalFrame local_frame(std::span<const Vec3> positions, const NeighborSet& nbrs)
{
    if (nbrs.neighbors.empty()) throw Error(ErrorCode::InvalidInput, "empty neighborhood");
    const std::size_t k = nbrs.size();
    Vec3 mean = Vec3::Zero();
    for (Index id : nbrs.neighbors) mean += positions[static_cast<std::size_t>(id)];
    mean /= static_cast<double>(k);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (Index id : nbrs.neighbors) {
        Vec3 d = positions[static_cast<std::size_t>(id)] - mean;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Vec3& lambda = eig.eigenvalues();  // ascending
    if (!(lambda[2] > 0) || lambda[1] <= 1e-12 * lambda[2])
        throw Error(ErrorCode::DegenerateNeighborhood,
                    "neighbors of point " + std::to_string(nbrs.center) + " are collinear or coincident");

    LocalFrame f;
    f.center = nbrs.center;
    f.origin = positions[static_cast<std::size_t>(nbrs.neighbors.front())];
    Vec3 e3 = eig.eigenvectors().col(0).normalized();
    Vec3 e1 = eig.eigenvectors().col(2);
    e1 = (e1 - e1.dot(e3) * e3).normalized();
    Vec3 e2 = e3.cross(e1);
    f.basis.col(0) = e1;
    f.basis.col(1) = e2;
    f.basis.col(2) = e3;
    f.neighbors = nbrs.neighbors;
    f.distances = nbrs.distances;
    f.project(positions);
    return f;
}

inline LocalFrame local_frame(const PointCloud& cloud, const NeighborSet& nbrs)
{
    return local_frame(cloud.points(), nbrs);
}

/** k-NN neighborhoods and frames for every point of a cloud. */
inline std::vector<LocalFrame> build_frames(const PointCloud& cloud, const KdTree& index, std::size_t k)
{
    if (k > cloud.size())
        throw Error(ErrorCode::InsufficientPoints,
                    "k = " + std::to_string(k) + " exceeds cloud size " + std::to_string(cloud.size()));
    std::vector<LocalFrame> frames(cloud.size());
    parallel_for(cloud.size(), [&](std::size_t i) {
        frames[i] = local_frame(cloud, index.knn(static_cast<Index>(i), k));
    });
    return frames;
}

}  // namespace sphcloud
