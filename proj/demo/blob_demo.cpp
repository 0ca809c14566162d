// Parameterize a synthetic blob, then write the triangle, quad and sphere meshes.
//
//   blob_demo [out_dir] [points]

#include "sphcloud/sphcloud.hpp"

#include <cstdio>
#include <filesystem>
#include <string>

using namespace sphcloud;

int main(int argc, char** argv)
{
    const std::filesystem::path out = argc > 1 ? argv[1] : "blob_demo_out";
    const std::size_t n = argc > 2 ? std::stoul(argv[2]) : 3000;
    std::filesystem::create_directories(out);

    try {
        const PointCloud cloud(synth::blob(n, 1));
        io::write_xyz(cloud.points(), out / "blob.xyz");

        const SphericalMap map = parameterize(cloud);
        std::printf("%zu points, %d N-S iterations, converged %s, lambda %.4f\n", cloud.size(), map.iterations,
                    map.converged ? "yes" : "no", map.balance.lambda);
        for (const auto& [stage, secs] : map.stage_seconds) std::printf("  %-8s %.3fs\n", stage.c_str(), secs);

        const InducedMesh mesh = induce_mesh(cloud, map);
        const QualityReport q = angle_distortion(mesh.source, mesh.sphere);
        std::printf("mean |delta| %.3f deg, max %.2f deg, delaunay ratio %.4f\n", q.mean_abs_delta, q.max_abs_delta,
                    delaunay_ratio(mesh.source));
        io::write_mesh(mesh.source, out / "blob_tri.obj");
        io::write_mesh(mesh.sphere, out / "blob_sphere.ply");

        const SphereInterpolator interp(cloud.points(), mesh.sphere);
        io::write_mesh(quad_mesh(interp, 12), out / "blob_quad.obj");
        const auto levels = multilevel(interp, 1, 2);
        for (std::size_t l = 0; l < levels.size(); ++l)
            io::write_mesh(levels[l], out / ("blob_level" + std::to_string(l) + ".ply"));
        std::printf("wrote %s\n", out.string().c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "blob_demo: %s\n", e.what());
        return 1;
    }
    return 0;
}
