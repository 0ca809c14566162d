#pragma once

#include "sphcloud/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace sphcloud
{

// Exact orientation predicate. Floating-point filter first, then
// nonoverlapping-expansion arithmetic for the exact sign, and finally a
// symbolic perturbation of every coordinate so that no four points are ever
// reported coplanar.
namespace predicates
{

using Expansion = std::vector<double>;

inline void two_sum(double a, double b, double& x, double& y)
{
    x = a + b;
    double bv = x - a;
    double av = x - bv;
    y = (a - av) + (b - bv);
}

inline void fast_two_sum(double a, double b, double& x, double& y)
{
    x = a + b;
    y = b - (x - a);
}

inline void two_product(double a, double b, double& x, double& y)
{
    x = a * b;
    y = std::fma(a, b, -x);
}

/** e + b, zero components eliminated. */
inline Expansion grow(const Expansion& e, double b)
{
    Expansion h;
    h.reserve(e.size() + 1);
    double q = b, hh;
    for (double ei : e) {
        two_sum(q, ei, q, hh);
        if (hh != 0.0) h.push_back(hh);
    }
    if (q != 0.0 || h.empty()) h.push_back(q);
    return h;
}

inline Expansion sum(Expansion e, const Expansion& f)
{
    for (double fi : f) e = grow(e, fi);
    return e;
}

/** e * b, zero components eliminated. */
inline Expansion scale(const Expansion& e, double b)
{
    Expansion h;
    if (e.empty() || b == 0.0) return {0.0};
    h.reserve(2 * e.size());
    double q, hh;
    two_product(e[0], b, q, hh);
    if (hh != 0.0) h.push_back(hh);
    for (std::size_t i = 1; i < e.size(); ++i) {
        double t1, t0, s;
        two_product(e[i], b, t1, t0);
        two_sum(q, t0, s, hh);
        if (hh != 0.0) h.push_back(hh);
        fast_two_sum(t1, s, q, hh);
        if (hh != 0.0) h.push_back(hh);
    }
    if (q != 0.0 || h.empty()) h.push_back(q);
    return h;
}

inline int sign(const Expansion& e)
{
    for (auto it = e.rbegin(); it != e.rend(); ++it) {
        if (*it > 0) return 1;
        if (*it < 0) return -1;
    }
    return 0;
}

/** Exact sign of a 4x4 determinant of doubles. */
inline int det4_sign(const std::array<std::array<double, 4>, 4>& m)
{
    static constexpr std::array<std::array<int, 4>, 24> perms = [] {
        std::array<std::array<int, 4>, 24> p{};
        std::array<int, 4> a{0, 1, 2, 3};
        int n = 0;
        do p[n++] = a;
        while (std::next_permutation(a.begin(), a.end()));
        return p;
    }();
    Expansion total{0.0};
    for (const auto& p : perms) {
        int inversions = 0;
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j) inversions += p[i] > p[j];
        double first = m[0][p[0]];
        if (first == 0.0 || m[1][p[1]] == 0.0 || m[2][p[2]] == 0.0 || m[3][p[3]] == 0.0) continue;
        Expansion term{inversions % 2 ? -first : first};
        for (int r = 1; r < 4; ++r) term = scale(term, m[r][p[r]]);
        total = sum(std::move(total), term);
    }
    return sign(total);
}

/**
 * Sign of (a-d) . ((b-d) x (c-d)). Positive when d lies below the plane of
 * a, b, c oriented counterclockwise seen from above. Exact; 0 only for
 * truly coplanar input.
 */
inline int orient3d_exact(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d)
{
    const Vec3 ad = a - d, bd = b - d, cd = c - d;
    const double det = ad.dot(bd.cross(cd));
    const double permanent = (std::abs(ad.x()) * (std::abs(bd.y() * cd.z()) + std::abs(bd.z() * cd.y())) +
                              std::abs(ad.y()) * (std::abs(bd.z() * cd.x()) + std::abs(bd.x() * cd.z())) +
                              std::abs(ad.z()) * (std::abs(bd.x() * cd.y()) + std::abs(bd.y() * cd.x())));
    constexpr double eps = std::numeric_limits<double>::epsilon() / 2;
    constexpr double bound = (7.0 + 56.0 * eps) * eps;
    if (det > bound * permanent) return 1;
    if (-det > bound * permanent) return -1;
    std::array<std::array<double, 4>, 4> m{{{a.x(), a.y(), a.z(), 1.0},
                                            {b.x(), b.y(), b.z(), 1.0},
                                            {c.x(), c.y(), c.z(), 1.0},
                                            {d.x(), d.y(), d.z(), 1.0}}};
    return det4_sign(m);
}

/**
 * orient3d under simulation of simplicity. Coordinate j of the point with
 * id i is perturbed by eps^(2^(3 rank(i) + j)); the first nonvanishing
 * coefficient of the perturbed determinant gives the sign. Never 0 for four
 * distinct ids.
 */
inline int orient3d_sos(const Vec3& a, Index ia, const Vec3& b, Index ib, const Vec3& c, Index ic, const Vec3& d,
                        Index id)
{
    int s = orient3d_exact(a, b, c, d);
    if (s != 0) return s;

    // Row order by ascending id; track the permutation parity.
    std::array<const Vec3*, 4> pts{&a, &b, &c, &d};
    std::array<Index, 4> ids{ia, ib, ic, id};
    std::array<int, 4> order{0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](int x, int y) { return ids[x] < ids[y]; });
    int inversions = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) inversions += order[i] > order[j];
    const int parity = inversions % 2 ? -1 : 1;

    // The homogeneous 4x4 determinant with rows (p, 1) equals orient3d.
    for (unsigned mask = 1; mask < (1u << 12); ++mask) {
        std::array<std::array<double, 4>, 4> m{};
        unsigned used_cols = 0;
        bool valid = true;
        for (int r = 0; r < 4 && valid; ++r) {
            unsigned bits = (mask >> (3 * r)) & 7u;
            const Vec3& p = *pts[order[r]];
            if (bits == 0) {
                m[r] = {p.x(), p.y(), p.z(), 1.0};
                continue;
            }
            if (bits & (bits - 1)) {
                valid = false;
                break;
            }
            if (used_cols & bits) {
                valid = false;
                break;
            }
            used_cols |= bits;
            int col = bits == 1 ? 0 : (bits == 2 ? 1 : 2);
            m[r] = {0.0, 0.0, 0.0, 0.0};
            m[r][col] = 1.0;
        }
        if (!valid) continue;
        int t = det4_sign(m);
        if (t != 0) return t * parity;
    }
    return 0;  // unreachable for distinct ids
}

}  // namespace predicates

/** Oriented triangle; vertices counterclockwise seen from outside. */
using Triangle = std::array<Index, 3>;

/**
 * @brief 3D convex hull by randomized incremental insertion
 *
 * Maintains a conflict graph between hull faces and not-yet-inserted
 * points. Degenerate configurations are resolved by symbolic perturbation
 * keyed on point id, so the output is always a triangulated simplicial
 * polytope. Insertion order is a seeded shuffle.
 */
class ConvexHull
{
public:
    explicit ConvexHull(std::span<const Vec3> points, std::uint64_t seed = 0x5eed) : pts_(points.begin(), points.end())
    {
        if (pts_.size() < 4) throw Error(ErrorCode::InsufficientPoints, "convex hull needs at least 4 points");
        build(seed);
    }

    [[nodiscard]] const std::vector<Triangle>& faces() const noexcept { return result_; }

    /** Points that are not vertices of the final hull, ascending. */
    [[nodiscard]] const std::vector<Index>& interior_points() const noexcept { return interior_; }

private:
    struct Face {
        std::array<Index, 3> v;
        std::array<int, 3> nbr{-1, -1, -1};  // across edge (v[i], v[i+1])
        std::vector<Index> conflicts;
        bool alive = true;
        bool visible = false;
    };

    bool sees(const Face& f, Index p) const
    {
        return predicates::orient3d_sos(pts_[f.v[0]], f.v[0], pts_[f.v[1]], f.v[1], pts_[f.v[2]], f.v[2], pts_[p],
                                        p) < 0;
    }

    int add_face(Index a, Index b, Index c)
    {
        Face f;
        f.v = {a, b, c};
        faces_.push_back(std::move(f));
        return static_cast<int>(faces_.size()) - 1;
    }

    static int edge_slot(const Face& f, Index a, Index b)
    {
        for (int i = 0; i < 3; ++i)
            if (f.v[i] == a && f.v[(i + 1) % 3] == b) return i;
        return -1;
    }

    void build(std::uint64_t seed)
    {
        const Index n = static_cast<Index>(pts_.size());
        std::vector<Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Index{0});
        std::mt19937_64 rng(seed);
        for (Index i = n - 1; i > 0; --i)
            std::swap(order[i], order[static_cast<Index>(rng() % static_cast<std::uint64_t>(i + 1))]);

        // Initial simplex: first four points in insertion order spanning a tetrahedron.
        const Index p0 = order[0];
        Index p1 = -1, p2 = -1, p3 = -1;
        std::size_t s1 = 0, s2 = 0, s3 = 0;
        for (std::size_t i = 1; i < order.size() && p1 < 0; ++i)
            if (pts_[order[i]] != pts_[p0]) p1 = order[s1 = i];
        for (std::size_t i = 1; i < order.size() && p1 >= 0 && p2 < 0; ++i) {
            if (i == s1) continue;
            if ((pts_[p1] - pts_[p0]).cross(pts_[order[i]] - pts_[p0]).squaredNorm() > 0) p2 = order[s2 = i];
        }
        for (std::size_t i = 1; i < order.size() && p2 >= 0 && p3 < 0; ++i) {
            if (i == s1 || i == s2) continue;
            if (predicates::orient3d_exact(pts_[p0], pts_[p1], pts_[p2], pts_[order[i]]) != 0) p3 = order[s3 = i];
        }
        if (p3 < 0) throw Error(ErrorCode::DegenerateGeometry, "all points are coplanar");
        {
            std::vector<Index> rest;
            rest.reserve(order.size());
            for (std::size_t i = 0; i < order.size(); ++i)
                if (i != 0 && i != s1 && i != s2 && i != s3) rest.push_back(order[i]);
            order = {p0, p1, p2, p3};
            order.insert(order.end(), rest.begin(), rest.end());
        }

        const std::array<Index, 4> tet{p0, p1, p2, p3};
        const std::array<std::array<int, 4>, 4> tri{{{0, 1, 2, 3}, {0, 3, 1, 2}, {1, 3, 2, 0}, {2, 3, 0, 1}}};
        for (const auto& t : tri) {
            Index a = tet[t[0]], b = tet[t[1]], c = tet[t[2]], d = tet[t[3]];
            if (predicates::orient3d_exact(pts_[a], pts_[b], pts_[c], pts_[d]) < 0) std::swap(b, c);
            add_face(a, b, c);
        }
        for (int f = 0; f < 4; ++f)
            for (int e = 0; e < 3; ++e) {
                Index a = faces_[f].v[e], b = faces_[f].v[(e + 1) % 3];
                for (int g = 0; g < 4; ++g)
                    if (g != f && edge_slot(faces_[g], b, a) >= 0) faces_[f].nbr[e] = g;
            }

        point_conflicts_.assign(static_cast<std::size_t>(n), {});
        for (std::size_t i = 4; i < order.size(); ++i) {
            Index p = order[i];
            for (int f = 0; f < 4; ++f) {
                if (sees(faces_[f], p)) {
                    faces_[f].conflicts.push_back(p);
                    point_conflicts_[p].push_back(f);
                }
            }
        }

        std::vector<std::uint32_t> stamp(static_cast<std::size_t>(n), 0);
        std::uint32_t round = 0;
        std::vector<int> start_of(static_cast<std::size_t>(n), -1), end_of(static_cast<std::size_t>(n), -1);

        for (std::size_t i = 4; i < order.size(); ++i) {
            const Index p = order[i];
            std::vector<int> visible;
            for (int f : point_conflicts_[p])
                if (faces_[f].alive) visible.push_back(f);
            point_conflicts_[p].clear();
            point_conflicts_[p].shrink_to_fit();
            if (visible.empty()) continue;
            for (int f : visible) faces_[f].visible = true;

            struct HorizonEdge {
                Index a, b;
                int inside, outside;
            };
            std::vector<HorizonEdge> horizon;
            for (int f : visible)
                for (int e = 0; e < 3; ++e) {
                    int g = faces_[f].nbr[e];
                    if (!faces_[g].visible) horizon.push_back({faces_[f].v[e], faces_[f].v[(e + 1) % 3], f, g});
                }

            std::vector<int> created;
            created.reserve(horizon.size());
            for (const auto& h : horizon) {
                int nf = add_face(h.a, h.b, p);
                created.push_back(nf);
                faces_[nf].nbr[0] = h.outside;
                faces_[h.outside].nbr[edge_slot(faces_[h.outside], h.b, h.a)] = nf;
                start_of[h.a] = nf;
                end_of[h.b] = nf;
            }
            for (int nf : created) {
                Face& f = faces_[nf];
                f.nbr[1] = start_of[f.v[1]];  // edge (b, p) borders the face starting at b
                f.nbr[2] = end_of[f.v[0]];    // edge (p, a) borders the face ending at a
            }
            for (const auto& h : horizon) start_of[h.a] = end_of[h.b] = -1;

            for (std::size_t j = 0; j < horizon.size(); ++j) {
                const auto& h = horizon[j];
                int nf = created[j];
                ++round;
                for (int src : {h.inside, h.outside}) {
                    for (Index q : faces_[src].conflicts) {
                        if (q == p || stamp[q] == round) continue;
                        stamp[q] = round;
                        if (sees(faces_[nf], q)) {
                            faces_[nf].conflicts.push_back(q);
                            point_conflicts_[q].push_back(nf);
                        }
                    }
                }
            }
            for (int f : visible) {
                faces_[f].alive = false;
                faces_[f].conflicts.clear();
                faces_[f].conflicts.shrink_to_fit();
            }
        }

        std::vector<char> used(static_cast<std::size_t>(n), 0);
        for (const auto& f : faces_) {
            if (!f.alive) continue;
            result_.push_back(f.v);
            for (Index v : f.v) used[v] = 1;
        }
        // includes earlier vertices swallowed by later insertions
        for (Index p = 0; p < n; ++p)
            if (!used[p]) interior_.push_back(p);
    }

    std::vector<Vec3> pts_;
    std::vector<Face> faces_;
    std::vector<std::vector<int>> point_conflicts_;
    std::vector<Triangle> result_;
    std::vector<Index> interior_;
};

}  // namespace sphcloud
