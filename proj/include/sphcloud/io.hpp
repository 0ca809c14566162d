#pragma once

#include "sphcloud/common.hpp"
#include "sphcloud/mesh.hpp"
#include "sphcloud/pointcloud.hpp"
#include "sphcloud/sphere_map.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace sphcloud::io
{

enum class CloudFormat { xyz, ply, obj };
enum class MeshFormat { obj, ply };

namespace detail
{
inline std::string lower_extension(const std::filesystem::path& path)
{
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

[[noreturn]] inline void fail(const std::filesystem::path& path, std::size_t line, const std::string& what)
{
    throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(line) + ": " + what);
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> tokens(std::string_view s)
{
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    for (std::string t; in >> t;) out.push_back(std::move(t));
    return out;
}

/** Strict float parse of a whole token. */
inline bool parse_double(const std::string& t, double& v)
{
    if (t.empty()) return false;
    char* end = nullptr;
    v = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

inline bool parse_index(const std::string& t, long long& v)
{
    if (t.empty()) return false;
    char* end = nullptr;
    v = std::strtoll(t.c_str(), &end, 10);
    return end == t.c_str() + t.size();
}

inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in)
{
    std::ifstream in(path, mode);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for reading");
    return in;
}

inline std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::out | std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path)
{
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write to " + path.string() + " failed");
}

/** Where each point came from: a line number, or a record number for binary PLY. */
struct Sourced {
    std::vector<Vec3> points;
    std::vector<std::size_t> origin;
    bool binary = false;
};

/** PLY header as far as readers here need it. */
struct PlyProperty {
    std::string name;
    std::string type;
    bool list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

struct PlyHeader {
    bool binary = false;
    std::vector<PlyElement> elements;
    std::size_t lines = 0;  // header lines, including end_header
};

inline std::size_t ply_type_size(const std::string& t)
{
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    return 0;
}

inline PlyHeader read_ply_header(std::istream& in, const std::filesystem::path& path)
{
    PlyHeader h;
    std::string line;
    bool have_format = false;
    while (std::getline(in, line)) {
        ++h.lines;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto t = tokens(line);
        if (h.lines == 1) {
            if (t.size() != 1 || t[0] != "ply") fail(path, 1, "missing 'ply' magic");
            continue;
        }
        if (t.empty() || t[0] == "comment" || t[0] == "obj_info") continue;
        if (t[0] == "format") {
            if (t.size() < 2) fail(path, h.lines, "malformed format line");
            if (t[1] == "ascii") h.binary = false;
            else if (t[1] == "binary_little_endian") h.binary = true;
            else fail(path, h.lines, "unsupported PLY format '" + t[1] + "'");
            have_format = true;
        } else if (t[0] == "element") {
            long long n = 0;
            if (t.size() != 3 || !parse_index(t[2], n) || n < 0) fail(path, h.lines, "malformed element line");
            h.elements.push_back({t[1], static_cast<std::size_t>(n), {}});
        } else if (t[0] == "property") {
            if (h.elements.empty()) fail(path, h.lines, "property before any element");
            PlyProperty p;
            if (t.size() == 5 && t[1] == "list") {
                p = {t[4], t[3], true, t[2]};
                if (!ply_type_size(p.count_type)) fail(path, h.lines, "unknown PLY type '" + p.count_type + "'");
            } else if (t.size() == 3) {
                p = {t[2], t[1], false, {}};
            } else {
                fail(path, h.lines, "malformed property line");
            }
            if (!ply_type_size(p.type)) fail(path, h.lines, "unknown PLY type '" + p.type + "'");
            h.elements.back().properties.push_back(std::move(p));
        } else if (t[0] == "end_header") {
            if (!have_format) fail(path, h.lines, "missing format line");
            return h;
        } else {
            fail(path, h.lines, "unexpected header keyword '" + t[0] + "'");
        }
    }
    fail(path, h.lines, "header ends without end_header");
}

/** Reads one little-endian binary scalar of the given PLY type as double. */
inline bool read_binary_scalar(std::istream& in, const std::string& type, double& v)
{
    unsigned char b[8];
    const std::size_t n = ply_type_size(type);
    if (!in.read(reinterpret_cast<char*>(b), static_cast<std::streamsize>(n))) return false;
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < n; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    if (type == "float" || type == "float32") {
        std::uint32_t u = static_cast<std::uint32_t>(bits);
        float f;
        std::memcpy(&f, &u, 4);
        v = f;
    } else if (type == "double" || type == "float64") {
        std::memcpy(&v, &bits, 8);
    } else if (type == "char" || type == "int8") {
        v = static_cast<std::int8_t>(bits);
    } else if (type == "short" || type == "int16") {
        v = static_cast<std::int16_t>(bits);
    } else if (type == "int" || type == "int32") {
        v = static_cast<std::int32_t>(bits);
    } else {
        v = static_cast<double>(bits);
    }
    return true;
}

/**
 * Walks every element of a PLY body and hands each record's values to
 * `sink(element, record, values, lists, origin)`. Scalars go to `values` in
 * property order; list properties go to `lists`.
 */
template <class Sink>
void read_ply_body(std::istream& in, const PlyHeader& h, const std::filesystem::path& path, Sink&& sink)
{
    std::size_t line_no = h.lines;
    std::vector<double> values;
    std::vector<std::vector<double>> lists;
    for (const auto& el : h.elements) {
        for (std::size_t r = 0; r < el.count; ++r) {
            values.clear();
            lists.clear();
            std::size_t origin = r;
            if (h.binary) {
                for (const auto& p : el.properties) {
                    double v = 0;
                    if (p.list) {
                        if (!read_binary_scalar(in, p.count_type, v) || v < 0)
                            fail(path, 0, "truncated binary " + el.name + " record " + std::to_string(r));
                        std::vector<double> items(static_cast<std::size_t>(v));
                        for (double& it : items)
                            if (!read_binary_scalar(in, p.type, it))
                                fail(path, 0, "truncated binary " + el.name + " record " + std::to_string(r));
                        lists.push_back(std::move(items));
                    } else {
                        if (!read_binary_scalar(in, p.type, v))
                            fail(path, 0, "truncated binary " + el.name + " record " + std::to_string(r));
                        values.push_back(v);
                    }
                }
            } else {
                std::string line;
                do {
                    if (!std::getline(in, line)) fail(path, line_no, "unexpected end of file in " + el.name + " data");
                    ++line_no;
                } while (trim(line).empty());
                origin = line_no;
                auto t = tokens(line);
                std::size_t pos = 0;
                auto next = [&](double& v) {
                    if (pos >= t.size() || !parse_double(t[pos], v)) fail(path, line_no, "malformed " + el.name + " line");
                    ++pos;
                };
                for (const auto& p : el.properties) {
                    double v = 0;
                    next(v);
                    if (p.list) {
                        if (v < 0) fail(path, line_no, "negative list length");
                        std::vector<double> items(static_cast<std::size_t>(v));
                        for (double& it : items) next(it);
                        lists.push_back(std::move(items));
                    } else {
                        values.push_back(v);
                    }
                }
                if (pos != t.size()) fail(path, line_no, "extra values on " + el.name + " line");
            }
            sink(el, r, values, lists, origin);
        }
    }
}

inline std::array<int, 3> ply_xyz_slots(const PlyElement& el, const std::filesystem::path& path)
{
    std::array<int, 3> slot{-1, -1, -1};
    int scalar = 0;
    for (const auto& p : el.properties) {
        if (p.list) continue;
        if (p.name == "x") slot[0] = scalar;
        if (p.name == "y") slot[1] = scalar;
        if (p.name == "z") slot[2] = scalar;
        ++scalar;
    }
    if (slot[0] < 0 || slot[1] < 0 || slot[2] < 0) fail(path, 0, "vertex element lacks x, y or z");
    return slot;
}

inline Sourced read_ply_points(const std::filesystem::path& path)
{
    auto in = open_in(path, std::ios::in | std::ios::binary);
    const PlyHeader h = read_ply_header(in, path);
    auto it = std::find_if(h.elements.begin(), h.elements.end(), [](const PlyElement& e) { return e.name == "vertex"; });
    if (it == h.elements.end()) fail(path, h.lines, "no vertex element");
    const auto slot = ply_xyz_slots(*it, path);
    Sourced s;
    s.binary = h.binary;
    read_ply_body(in, h, path, [&](const PlyElement& el, std::size_t r, const std::vector<double>& v,
                                   const std::vector<std::vector<double>>&, std::size_t origin) {
        if (el.name != "vertex") return;
        s.points.emplace_back(v[slot[0]], v[slot[1]], v[slot[2]]);
        s.origin.push_back(h.binary ? r : origin);
    });
    return s;
}

inline Sourced read_text_points(const std::filesystem::path& path, CloudFormat format,
                                std::vector<std::string>* warnings)
{
    auto in = open_in(path);
    Sourced s;
    std::string line;
    std::size_t line_no = 0, faces = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = line;
        if (auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        body = trim(body);
        if (body.empty()) continue;
        auto t = tokens(body);
        if (format == CloudFormat::obj) {
            if (t[0] == "f") {
                ++faces;
                continue;
            }
            if (t[0] != "v") continue;  // normals, texture coordinates, groups
            t.erase(t.begin());
            // an optional w or per-vertex color may follow
            if (t.size() < 3) fail(path, line_no, "expected 'v x y z'");
            t.resize(3);
        } else if (t.size() != 3) {
            fail(path, line_no, "expected three coordinates, got " + std::to_string(t.size()) + " fields");
        }
        Vec3 p;
        for (int i = 0; i < 3; ++i)
            if (!parse_double(t[i], p[i])) fail(path, line_no, "cannot parse '" + t[i] + "' as a number");
        s.points.push_back(p);
        s.origin.push_back(line_no);
    }
    if (faces > 0 && warnings)
        warnings->push_back(path.string() + ": ignored " + std::to_string(faces) + " face lines");
    return s;
}
}  // namespace detail

inline CloudFormat cloud_format_of(const std::filesystem::path& path)
{
    const std::string ext = detail::lower_extension(path);
    if (ext == ".ply") return CloudFormat::ply;
    if (ext == ".obj") return CloudFormat::obj;
    return CloudFormat::xyz;
}

inline MeshFormat mesh_format_of(const std::filesystem::path& path)
{
    return detail::lower_extension(path) == ".ply" ? MeshFormat::ply : MeshFormat::obj;
}

/**
 * Loads a cloud from XYZ, PLY or OBJ, chosen by extension (anything else is
 * read as XYZ). Parse errors and duplicate points are reported with line
 * numbers, or record numbers for binary PLY. Non-fatal notes, such as
 * ignored OBJ faces, are appended to `warnings`.
 */
inline PointCloud read_cloud(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr)
{
    const CloudFormat format = cloud_format_of(path);
    detail::Sourced s =
        format == CloudFormat::ply ? detail::read_ply_points(path) : detail::read_text_points(path, format, warnings);
    for (std::size_t i = 0; i < s.points.size(); ++i)
        if (!s.points[i].allFinite())
            detail::fail(path, s.binary ? 0 : s.origin[i], "non-finite coordinate");
    if (s.points.size() < 4)
        throw Error(ErrorCode::InsufficientPoints,
                    path.string() + " holds " + std::to_string(s.points.size()) + " points, at least 4 needed");
    if (auto dup = sphcloud::detail::find_duplicate(s.points)) {
        const auto a = s.origin[static_cast<std::size_t>(dup->first)];
        const auto b = s.origin[static_cast<std::size_t>(dup->second)];
        const std::string unit = s.binary ? "vertex records " : "lines ";
        throw Error(ErrorCode::DuplicatePoint, path.string() + ": same point on " + unit + std::to_string(std::min(a, b)) +
                                                   " and " + std::to_string(std::max(a, b)));
    }
    return PointCloud(std::move(s.points));
}

/** One "x y z" line per point at 17 significant digits. */
inline void write_xyz(std::span<const Vec3> points, const std::filesystem::path& path)
{
    auto out = detail::open_out(path);
    for (const auto& p : points)
        out << detail::format_double(p.x()) << ' ' << detail::format_double(p.y()) << ' '
            << detail::format_double(p.z()) << '\n';
    detail::finish(out, path);
}

template <std::size_t Arity>
void write_mesh(const PolyMesh<Arity>& mesh, const std::filesystem::path& path, MeshFormat format)
{
    auto out = detail::open_out(path);
    auto coords = [&](const Vec3& p) {
        out << detail::format_double(p.x()) << ' ' << detail::format_double(p.y()) << ' '
            << detail::format_double(p.z());
    };
    if (format == MeshFormat::obj) {
        for (const auto& v : mesh.vertices) {
            out << "v ";
            coords(v);
            out << '\n';
        }
        for (const auto& f : mesh.faces) {
            out << 'f';
            for (Index i : f) out << ' ' << i + 1;
            out << '\n';
        }
    } else {
        out << "ply\nformat ascii 1.0\nelement vertex " << mesh.vertices.size()
            << "\nproperty double x\nproperty double y\nproperty double z\nelement face " << mesh.faces.size()
            << "\nproperty list uchar int vertex_indices\nend_header\n";
        for (const auto& v : mesh.vertices) {
            coords(v);
            out << '\n';
        }
        for (const auto& f : mesh.faces) {
            out << Arity;
            for (Index i : f) out << ' ' << i;
            out << '\n';
        }
    }
    detail::finish(out, path);
}

template <std::size_t Arity>
void write_mesh(const PolyMesh<Arity>& mesh, const std::filesystem::path& path)
{
    write_mesh(mesh, path, mesh_format_of(path));
}

/**
 * Reads an OBJ or PLY mesh whose faces all have `Arity` corners. OBJ face
 * tokens may carry texture/normal suffixes ("3/1/2"); negative indices are
 * relative to the end of the vertex list.
 */
template <std::size_t Arity>
PolyMesh<Arity> read_mesh(const std::filesystem::path& path)
{
    PolyMesh<Arity> mesh;
    auto check_face = [&](const std::vector<long long>& idx, std::size_t line) {
        if (idx.size() != Arity)
            detail::fail(path, line, "face has " + std::to_string(idx.size()) + " corners, expected " +
                                         std::to_string(Arity));
        std::array<Index, Arity> f;
        for (std::size_t c = 0; c < Arity; ++c) f[c] = static_cast<Index>(idx[c]);
        mesh.faces.push_back(f);
    };
    if (mesh_format_of(path) == MeshFormat::ply) {
        auto in = detail::open_in(path, std::ios::in | std::ios::binary);
        const auto h = detail::read_ply_header(in, path);
        auto vit = std::find_if(h.elements.begin(), h.elements.end(),
                                [](const detail::PlyElement& e) { return e.name == "vertex"; });
        if (vit == h.elements.end()) detail::fail(path, h.lines, "no vertex element");
        const auto slot = detail::ply_xyz_slots(*vit, path);
        detail::read_ply_body(in, h, path,
                              [&](const detail::PlyElement& el, std::size_t, const std::vector<double>& v,
                                  const std::vector<std::vector<double>>& lists, std::size_t origin) {
                                  if (el.name == "vertex") {
                                      mesh.vertices.emplace_back(v[slot[0]], v[slot[1]], v[slot[2]]);
                                  } else if (el.name == "face") {
                                      if (lists.empty()) detail::fail(path, origin, "face without index list");
                                      std::vector<long long> idx(lists[0].begin(), lists[0].end());
                                      check_face(idx, origin);
                                  }
                              });
    } else {
        auto in = detail::open_in(path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string_view body = line;
            if (auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
            auto t = detail::tokens(body);
            if (t.empty()) continue;
            if (t[0] == "v") {
                Vec3 p;
                if (t.size() < 4) detail::fail(path, line_no, "expected 'v x y z'");
                for (int i = 0; i < 3; ++i)
                    if (!detail::parse_double(t[i + 1], p[i])) detail::fail(path, line_no, "malformed vertex");
                mesh.vertices.push_back(p);
            } else if (t[0] == "f") {
                std::vector<long long> idx;
                for (std::size_t i = 1; i < t.size(); ++i) {
                    long long v = 0;
                    if (!detail::parse_index(t[i].substr(0, t[i].find('/')), v) || v == 0)
                        detail::fail(path, line_no, "malformed face index '" + t[i] + "'");
                    idx.push_back(v > 0 ? v - 1 : static_cast<long long>(mesh.vertices.size()) + v);
                }
                check_face(idx, line_no);
            }
        }
    }
    const auto n = static_cast<Index>(mesh.vertices.size());
    for (const auto& f : mesh.faces)
        for (Index i : f)
            if (i < 0 || i >= n) throw Error(ErrorCode::Io, path.string() + ": face index out of range");
    return mesh;
}

/** Sidecar lines "index x y z" pairing each cloud point with its sphere image. */
inline void write_map(const SphericalMap& map, const std::filesystem::path& path)
{
    auto out = detail::open_out(path);
    for (std::size_t i = 0; i < map.images.size(); ++i) {
        const Vec3& p = map.images[i];
        out << i << ' ' << detail::format_double(p.x()) << ' ' << detail::format_double(p.y()) << ' '
            << detail::format_double(p.z()) << '\n';
    }
    detail::finish(out, path);
}

/**
 * Reads a sidecar written by write_map. Every index in [0, n) must occur
 * exactly once and every image must be a unit vector to 1e-9.
 */
inline std::vector<Vec3> read_map(const std::filesystem::path& path)
{
    auto in = detail::open_in(path);
    std::vector<std::pair<long long, Vec3>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = line;
        if (auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        auto t = detail::tokens(body);
        if (t.empty()) continue;
        long long id = 0;
        Vec3 p;
        if (t.size() != 4 || !detail::parse_index(t[0], id)) detail::fail(path, line_no, "expected 'index x y z'");
        for (int i = 0; i < 3; ++i)
            if (!detail::parse_double(t[i + 1], p[i])) detail::fail(path, line_no, "malformed coordinate");
        if (!(std::abs(p.norm() - 1.0) <= 1e-9)) detail::fail(path, line_no, "image is not a unit vector");
        rows.emplace_back(id, p);
    }
    std::vector<Vec3> images(rows.size());
    std::vector<char> seen(rows.size(), 0);
    for (const auto& [id, p] : rows) {
        if (id < 0 || static_cast<std::size_t>(id) >= rows.size() || seen[static_cast<std::size_t>(id)])
            throw Error(ErrorCode::Io, path.string() + ": indices must be a permutation of 0.." +
                                           std::to_string(rows.size() - 1));
        seen[static_cast<std::size_t>(id)] = 1;
        images[static_cast<std::size_t>(id)] = p;
    }
    return images;
}

}  // namespace sphcloud::io
