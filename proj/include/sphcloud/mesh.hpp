#pragma once

#include "sphcloud/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sphcloud
{

/**
 * @brief Indexed polygon mesh with fixed face arity
 *
 * Faces list vertex ids counterclockwise seen from outside.
 */
template <std::size_t Arity>
struct PolyMesh {
    static_assert(Arity == 3 || Arity == 4);
    using Face = std::array<Index, Arity>;

    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    [[nodiscard]] std::size_t num_vertices() const noexcept { return vertices.size(); }
    [[nodiscard]] std::size_t num_faces() const noexcept { return faces.size(); }
};

using TriMesh = PolyMesh<3>;
using QuadMesh = PolyMesh<4>;

namespace detail
{
inline std::uint64_t edge_key(Index a, Index b)
{
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}
}  // namespace detail

/** Undirected edge (lo, hi) mapped to its incident faces. */
template <std::size_t Arity>
std::map<std::pair<Index, Index>, std::vector<Index>> edge_faces(const PolyMesh<Arity>& mesh)
{
    std::map<std::pair<Index, Index>, std::vector<Index>> out;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        for (std::size_t i = 0; i < Arity; ++i) {
            Index a = face[i], b = face[(i + 1) % Arity];
            out[{std::min(a, b), std::max(a, b)}].push_back(static_cast<Index>(f));
        }
    }
    return out;
}

struct TopologyReport {
    std::size_t vertices = 0;
    std::size_t edges = 0;
    std::size_t faces = 0;
    long euler = 0;
    bool closed = false;             // every edge has exactly two incident faces
    bool oriented = false;           // each edge used once in each direction
    bool manifold_vertices = false;  // every vertex link is a single cycle
    bool all_vertices_used = false;
    bool degenerate_faces = false;   // repeated vertex ids in a face

    [[nodiscard]] bool is_closed_genus0() const
    {
        return closed && oriented && manifold_vertices && all_vertices_used && !degenerate_faces && euler == 2;
    }
};

template <std::size_t Arity>
TopologyReport check_topology(const PolyMesh<Arity>& mesh)
{
    TopologyReport r;
    r.vertices = mesh.vertices.size();
    r.faces = mesh.faces.size();

    std::unordered_map<std::uint64_t, int> directed;
    directed.reserve(mesh.faces.size() * Arity);
    std::vector<char> used(mesh.vertices.size(), 0);
    for (const auto& face : mesh.faces) {
        for (std::size_t i = 0; i < Arity; ++i) {
            for (std::size_t j = i + 1; j < Arity; ++j)
                if (face[i] == face[j]) r.degenerate_faces = true;
            Index a = face[i], b = face[(i + 1) % Arity];
            if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= used.size() ||
                static_cast<std::size_t>(b) >= used.size())
                return r;
            used[a] = 1;
            ++directed[detail::edge_key(a, b)];
        }
    }
    r.all_vertices_used = std::all_of(used.begin(), used.end(), [](char c) { return c != 0; });

    bool closed = true, oriented = true;
    std::size_t undirected = 0;
    for (const auto& [key, count] : directed) {
        Index a = static_cast<Index>(key >> 32), b = static_cast<Index>(key & 0xffffffffu);
        auto rev = directed.find(detail::edge_key(b, a));
        int back = rev == directed.end() ? 0 : rev->second;
        if (count != 1 || back != 1) oriented = false;
        if (count + back != 2) closed = false;
        if (a < b || back == 0) ++undirected;
    }
    r.closed = closed;
    r.oriented = oriented;
    r.edges = undirected;
    r.euler = static_cast<long>(r.vertices) - static_cast<long>(r.edges) + static_cast<long>(r.faces);

    // Link of v: for each corner at v, an arc next(v) -> prev(v). A manifold
    // vertex of a closed oriented mesh has a single cycle of arcs.
    std::vector<std::vector<std::pair<Index, Index>>> link(mesh.vertices.size());
    for (const auto& face : mesh.faces)
        for (std::size_t i = 0; i < Arity; ++i)
            link[face[i]].push_back({face[(i + 1) % Arity], face[(i + Arity - 1) % Arity]});
    bool manifold = true;
    for (const auto& arcs : link) {
        if (arcs.empty()) continue;
        std::unordered_map<Index, Index> next;
        for (auto [from, to] : arcs) {
            if (next.count(from)) {
                manifold = false;
                break;
            }
            next[from] = to;
        }
        if (!manifold) break;
        std::size_t steps = 0;
        Index start = arcs.front().first, cur = start;
        do {
            auto it = next.find(cur);
            if (it == next.end()) {
                manifold = false;
                break;
            }
            cur = it->second;
            ++steps;
        } while (cur != start && steps <= arcs.size());
        if (steps != arcs.size()) manifold = false;
        if (!manifold) break;
    }
    r.manifold_vertices = manifold;
    return r;
}

/** Volume enclosed by a closed triangle mesh; positive for outward orientation. */
inline double signed_volume(const TriMesh& mesh)
{
    double v = 0;
    for (const auto& f : mesh.faces)
        v += mesh.vertices[f[0]].dot(mesh.vertices[f[1]].cross(mesh.vertices[f[2]]));
    return v / 6.0;
}

/** Interior angle at `at` between the edges towards `u` and `v`, in radians. */
inline double corner_angle(const Vec3& at, const Vec3& u, const Vec3& v)
{
    const Vec3 a = u - at, b = v - at;
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

/** Corner angles of triangle f, in vertex order. */
inline std::array<double, 3> triangle_angles(const Vec3& a, const Vec3& b, const Vec3& c)
{
    return {corner_angle(a, b, c), corner_angle(b, c, a), corner_angle(c, a, b)};
}

/** Area-weighted vertex normals of a triangle mesh. */
inline std::vector<Vec3> vertex_normals(const TriMesh& mesh)
{
    std::vector<Vec3> n(mesh.vertices.size(), Vec3::Zero());
    for (const auto& f : mesh.faces) {
        Vec3 fn = (mesh.vertices[f[1]] - mesh.vertices[f[0]]).cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
        for (Index v : f) n[v] += fn;
    }
    for (auto& v : n) {
        double len = v.norm();
        if (len > 0) v /= len;
    }
    return n;
}

}  // namespace sphcloud
