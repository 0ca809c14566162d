#pragma once

#include "sphcloud/disk_experiment.hpp"
#include "sphcloud/io.hpp"
#include "sphcloud/meshing.hpp"
#include "sphcloud/report.hpp"
#include "sphcloud/sphere_param.hpp"
#include "sphcloud/synth.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

namespace sphcloud::cli
{

namespace fs = std::filesystem;

/** Everything a command needs, filled by the parser before any compute. */
struct RunConfig {
    std::string command;
    fs::path input;
    fs::path output;
    fs::path report;
    fs::path map;
    fs::path meta;
    fs::path sphere_out;
    ParamConfig param;
    std::string weight = "proposed";
    std::string solver = "direct";
    std::uint64_t seed = 0;
    unsigned threads = 0;
    bool curvature = false;

    int resolution = 16;
    int levels = 2;
    int base_subdivisions = 3;

    std::string shape;
    std::size_t count = 1000;
    double noise = 0;
    std::size_t holes = 0;
    double hole_radius = 0.15;
    double max_disp = 0.3;
    std::vector<double> axes{2, 1, 1};

    std::size_t disk_points = 2000;
    double mobius_re = 0.3;
    double mobius_im = 0;
};

namespace detail
{
/** Runs fn, re-raising library errors with the CLI stage in front. */
template <class Fn>
auto staged(const char* stage, Fn&& fn)
{
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), std::string("stage ") + stage + ": " + e.detail());
    }
}

inline void finalize(RunConfig& rc)
{
    rc.param.weight = *parse_weight(rc.weight);
    rc.param.solver.kind = rc.solver == "iterative" ? SolverKind::iterative : SolverKind::direct;
    rc.param.validate();
}

inline SphericalMap load_or_param(const RunConfig& rc, const PointCloud& cloud)
{
    if (rc.map.empty()) return parameterize(cloud, rc.param);
    SphericalMap map;
    map.images = staged("read map", [&] { return io::read_map(rc.map); });
    if (map.images.size() != cloud.size())
        throw Error(ErrorCode::InvalidInput, "stage read map: map has " + std::to_string(map.images.size()) +
                                                 " entries for a cloud of " + std::to_string(cloud.size()));
    return map;
}

/** Induced mesh, with the report and optional curvature in cloud units. */
inline std::pair<InducedMesh, QualityReport> evaluate(const RunConfig& rc, const PointCloud& cloud,
                                                      const SphericalMap& map)
{
    InducedMesh m = staged("triangulate", [&] { return induce_mesh(cloud, map); });
    QualityReport q = staged("metrics", [&] { return angle_distortion(m.source, m.sphere); });
    if (rc.curvature) {
        q.mean_curvature = staged("curvature", [&] {
            const auto norm = Normalization::of(cloud);
            const LbAssembly lb = assemble_lb_full(normalized(cloud, norm), rc.param.k, rc.param.weight);
            auto h = oriented_mean_curvature(lb.frames, lb.fits, vertex_normals(m.source));
            for (double& v : h) v /= norm.scale;
            return h;
        });
    }
    return {std::move(m), std::move(q)};
}

inline std::uint64_t substream(std::uint64_t seed, std::uint64_t salt)
{
    // splitmix64 finalizer keeps the derived streams apart
    std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline int cmd_param(const RunConfig& rc, std::ostream& out)
{
    const PointCloud cloud = staged("read", [&] { return io::read_cloud(rc.input); });
    const SphericalMap map = parameterize(cloud, rc.param);
    fs::path meta = rc.meta.empty() ? fs::path(rc.output).replace_extension(".json") : rc.meta;
    staged("write", [&] {
        io::write_map(map, rc.output);
        report::write_json(report::map_json(map, rc.param), meta);
        return 0;
    });
    out << "points " << map.size() << "  iterations " << map.iterations << "  converged "
        << (map.converged ? "yes" : "no") << '\n';
    return 0;
}

inline int cmd_mesh(const RunConfig& rc, std::ostream& out)
{
    const PointCloud cloud = staged("read", [&] { return io::read_cloud(rc.input); });
    const SphericalMap map = load_or_param(rc, cloud);
    auto [mesh, quality] = evaluate(rc, cloud, map);
    staged("write", [&] {
        io::write_mesh(mesh.source, rc.output);
        if (!rc.sphere_out.empty()) io::write_mesh(mesh.sphere, rc.sphere_out);
        if (!rc.report.empty()) {
            auto j = report::quality_json(quality);
            j["topology"] = report::topology_json(check_topology(mesh.source));
            if (rc.map.empty()) j["param"] = report::map_json(map, rc.param);
            report::write_json(j, rc.report);
        }
        return 0;
    });
    out << "faces " << mesh.source.num_faces() << "  mean|delta| " << quality.mean_abs_delta << "  delaunay ratio "
        << quality.delaunay_ratio << '\n';
    return 0;
}

inline int cmd_quad(const RunConfig& rc, std::ostream& out)
{
    const PointCloud cloud = staged("read", [&] { return io::read_cloud(rc.input); });
    const SphericalMap map = load_or_param(rc, cloud);
    QuadMesh q = staged("quad", [&] {
        SphereInterpolator interp(cloud.points(), map);
        return quad_mesh(interp, rc.resolution);
    });
    staged("write", [&] {
        io::write_mesh(q, rc.output);
        return 0;
    });
    out << "quads " << q.num_faces() << "  vertices " << q.num_vertices() << '\n';
    return 0;
}

inline int cmd_multilevel(const RunConfig& rc, std::ostream& out)
{
    const PointCloud cloud = staged("read", [&] { return io::read_cloud(rc.input); });
    const SphericalMap map = load_or_param(rc, cloud);
    auto meshes = staged("multilevel", [&] {
        SphereInterpolator interp(cloud.points(), map);
        return multilevel(interp, rc.levels, rc.base_subdivisions);
    });
    const std::string ext = rc.output.has_extension() ? rc.output.extension().string() : ".obj";
    for (std::size_t l = 0; l < meshes.size(); ++l) {
        fs::path p = rc.output;
        p.replace_filename(rc.output.stem().string() + "_level" + std::to_string(l) + ext);
        staged("write", [&] {
            io::write_mesh(meshes[l], p);
            return 0;
        });
        out << p.string() << "  vertices " << meshes[l].num_vertices() << '\n';
    }
    return 0;
}

inline int cmd_metrics(const RunConfig& rc, std::ostream& out)
{
    const PointCloud cloud = staged("read", [&] { return io::read_cloud(rc.input); });
    const SphericalMap map = load_or_param(rc, cloud);
    auto [mesh, quality] = evaluate(rc, cloud, map);
    auto j = report::quality_json(quality);
    j["topology"] = report::topology_json(check_topology(mesh.source));
    if (rc.report.empty()) {
        out << j.dump(2) << '\n';
    } else {
        staged("write", [&] {
            report::write_json(j, rc.report);
            return 0;
        });
    }
    return 0;
}

inline int cmd_bench(const RunConfig& rc, std::ostream& out)
{
    DiskExperimentConfig cfg;
    cfg.n = rc.disk_points;
    cfg.seed = rc.seed;
    cfg.a = Complex(rc.mobius_re, rc.mobius_im);
    cfg.k = rc.param.k;
    cfg.solver = rc.param.solver;
    const auto res = staged("disk experiment", [&] { return run_disk_experiment(cfg); });
    out << "points " << res.points << " (boundary " << res.boundary << ")\n";
    out << std::left << std::setw(16) << "weight" << std::setw(14) << "mean error" << "max error\n";
    for (const auto& row : res.rows)
        out << std::setw(16) << to_string(row.weight) << std::setw(14) << row.mean_error << row.max_error << '\n';
    if (!rc.output.empty())
        staged("write", [&] {
            report::write_json(report::disk_json(res, cfg), rc.output);
            return 0;
        });
    return 0;
}

inline int cmd_synth(const RunConfig& rc, std::ostream& out)
{
    std::vector<Vec3> pts;
    if (rc.shape == "sphere") pts = synth::sphere(rc.count, rc.seed);
    else if (rc.shape == "ellipsoid") pts = synth::ellipsoid(rc.count, rc.axes[0], rc.axes[1], rc.axes[2], rc.seed);
    else pts = synth::blob(rc.count, rc.seed, rc.max_disp);
    if (rc.holes > 0) pts = synth::punch_holes(pts, rc.holes, rc.hole_radius, substream(rc.seed, 1));
    if (rc.noise > 0) pts = synth::add_noise(std::move(pts), rc.noise, substream(rc.seed, 2));
    staged("write", [&] {
        io::write_xyz(pts, rc.output);
        return 0;
    });
    out << "wrote " << pts.size() << " points\n";
    return 0;
}

inline void add_common(CLI::App* sub, RunConfig& rc)
{
    sub->add_option("--seed", rc.seed, "RNG seed")->capture_default_str();
    sub->add_option("--threads", rc.threads, "cap on worker threads (0 = all cores)")->capture_default_str();
}

inline void add_param_options(CLI::App* sub, RunConfig& rc)
{
    sub->add_option("--k", rc.param.k, "nearest neighbors per stencil")->capture_default_str();
    sub->add_option("--r-percent", rc.param.r_percent, "share of points pinned per half-step, in percent")
        ->capture_default_str();
    sub->add_option("--epsilon", rc.param.epsilon, "stop when mean squared movement falls below this")
        ->capture_default_str();
    sub->add_option("--max-iters", rc.param.max_ns_iters, "cap on North-South reiterations")->capture_default_str();
    sub->add_option("--weight", rc.weight, "MLS weight")
        ->check(CLI::IsMember({"proposed", "wendland", "gaussian", "exponential", "special", "inverse_square",
                               "constant"}))
        ->capture_default_str();
    sub->add_option("--solver", rc.solver, "sparse solver")
        ->check(CLI::IsMember({"direct", "iterative"}))
        ->capture_default_str();
    sub->add_flag("--no-balance{false}", rc.param.balance, "skip the final balancing");
}

inline void add_map_input(CLI::App* sub, RunConfig& rc)
{
    sub->add_option("input", rc.input, "point cloud (.xyz, .ply, .obj)")->required()->check(CLI::ExistingFile);
    sub->add_option("--map", rc.map, "reuse a map sidecar instead of parameterizing")->check(CLI::ExistingFile);
}
}  // namespace detail

/**
 * Entry point of the sphcloud tool. Returns 0 on success, 1 when a
 * computation fails (the message names the stage) and 2 on bad usage.
 */
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    RunConfig rc;
    CLI::App app{"Spherical conformal parameterization of genus-0 point clouds", "sphcloud"};
    app.require_subcommand(1);
    using namespace detail;

    auto* param = app.add_subcommand("param", "cloud -> spherical map (index x y z sidecar + JSON metadata)");
    add_common(param, rc);
    add_param_options(param, rc);
    param->add_option("input", rc.input, "point cloud")->required()->check(CLI::ExistingFile);
    param->add_option("-o,--output", rc.output, "map sidecar")->required();
    param->add_option("--meta", rc.meta, "JSON metadata (default: output with .json)");

    auto* mesh = app.add_subcommand("mesh", "cloud -> triangulation (OBJ/PLY) + quality report");
    add_common(mesh, rc);
    add_param_options(mesh, rc);
    add_map_input(mesh, rc);
    mesh->add_option("-o,--output", rc.output, "mesh file")->required();
    mesh->add_option("--report", rc.report, "quality report JSON");
    mesh->add_option("--sphere", rc.sphere_out, "also write the spherical mesh");
    mesh->add_flag("--curvature", rc.curvature, "include mean curvature in the report");

    auto* quad = app.add_subcommand("quad", "cloud -> cube-sphere quad mesh");
    add_common(quad, rc);
    add_param_options(quad, rc);
    add_map_input(quad, rc);
    quad->add_option("-o,--output", rc.output, "mesh file")->required();
    quad->add_option("--resolution", rc.resolution, "cells per cube edge")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    auto* ml = app.add_subcommand("multilevel", "cloud -> nested icosphere meshes");
    add_common(ml, rc);
    add_param_options(ml, rc);
    add_map_input(ml, rc);
    ml->add_option("-o,--output", rc.output, "output stem; writes <stem>_level<i>.<ext>")->required();
    ml->add_option("--levels", rc.levels, "subdivision levels above the base")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    ml->add_option("--base", rc.base_subdivisions, "subdivisions of the base icosphere")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();

    auto* metrics = app.add_subcommand("metrics", "cloud + map -> quality report");
    add_common(metrics, rc);
    add_param_options(metrics, rc);
    add_map_input(metrics, rc);
    metrics->add_option("--report", rc.report, "write the report here instead of stdout");
    metrics->add_flag("--curvature", rc.curvature, "include mean curvature");

    auto* bench = app.add_subcommand("bench-weights", "disk recovery error for each MLS weight");
    add_common(bench, rc);
    add_param_options(bench, rc);
    bench->add_option("-n,--points", rc.disk_points, "approximate disk cloud size")->capture_default_str();
    bench->add_option("--mobius-a", rc.mobius_re, "real part of the disk automorphism parameter")
        ->capture_default_str();
    bench->add_option("--mobius-a-im", rc.mobius_im, "imaginary part")->capture_default_str();
    bench->add_option("-o,--output", rc.output, "error table JSON");

    auto* syn = app.add_subcommand("synth", "seeded synthetic clouds");
    add_common(syn, rc);
    syn->add_option("shape", rc.shape, "sphere, ellipsoid or blob")
        ->required()
        ->check(CLI::IsMember({"sphere", "ellipsoid", "blob"}));
    syn->add_option("-n,--points", rc.count, "number of samples")->capture_default_str();
    syn->add_option("-o,--output", rc.output, "XYZ file")->required();
    syn->add_option("--noise", rc.noise, "uniform noise amplitude relative to the bounding radius (0.03 = 3%)")
        ->check(CLI::NonNegativeNumber);
    syn->add_option("--holes", rc.holes, "number of disk holes to punch");
    syn->add_option("--hole-radius", rc.hole_radius, "angular hole radius in radians")->capture_default_str();
    syn->add_option("--max-disp", rc.max_disp, "largest radial displacement of a blob")->capture_default_str();
    syn->add_option("--axes", rc.axes, "ellipsoid semi-axes")->expected(3)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return 2;
    }
    CLI::App* chosen = app.get_subcommands().front();
    rc.command = chosen->get_name();
    try {
        finalize(rc);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n\n" << chosen->help();
        return 2;
    }
    set_max_threads(rc.threads);

    try {
        if (rc.command == "param") return cmd_param(rc, out);
        if (rc.command == "mesh") return cmd_mesh(rc, out);
        if (rc.command == "quad") return cmd_quad(rc, out);
        if (rc.command == "multilevel") return cmd_multilevel(rc, out);
        if (rc.command == "metrics") return cmd_metrics(rc, out);
        if (rc.command == "bench-weights") return cmd_bench(rc, out);
        return cmd_synth(rc, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace sphcloud::cli
