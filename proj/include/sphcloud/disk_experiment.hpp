#pragma once

#include "sphcloud/common.hpp"
#include "sphcloud/mls.hpp"
#include "sphcloud/pointcloud.hpp"
#include "sphcloud/solve.hpp"
#include "sphcloud/synth.hpp"

#include <chrono>
#include <complex>
#include <vector>

namespace sphcloud
{

/** Disk automorphism z -> (z - a) / (1 - conj(a) z), |a| < 1. */
struct DiskMobius {
    Complex a{0, 0};

    [[nodiscard]] Complex operator()(Complex z) const { return (z - a) / (1.0 - std::conj(a) * z); }
    [[nodiscard]] Complex inverse(Complex w) const { return (w + a) / (1.0 + std::conj(a) * w); }
};

struct DiskExperimentConfig {
    std::size_t n = 2000;
    std::uint64_t seed = 0;
    Complex a{0.3, 0};
    std::size_t k = 25;
    std::vector<WeightVariant> weights{WeightVariant::proposed, WeightVariant::wendland, WeightVariant::exponential,
                                       WeightVariant::special};
    SolveOptions solver;
};

struct DiskErrorRow {
    WeightVariant weight;
    double max_error = 0;
    double mean_error = 0;
    double seconds = 0;
};

struct DiskExperimentResult {
    std::size_t points = 0;
    std::size_t boundary = 0;
    std::vector<DiskErrorRow> rows;
};

/**
 * Conformal recovery on the unit disk. A seeded disk cloud z is moved by a
 * disk automorphism g; the operator is assembled on the image cloud g(z)
 * and the Laplace equation is solved with the boundary circle pinned to its
 * preimage. The solution should reproduce z, since g^-1 is holomorphic.
 */
inline DiskExperimentResult run_disk_experiment(const DiskExperimentConfig& cfg = {})
{
    if (!(std::abs(cfg.a) < 1)) throw Error(ErrorCode::InvalidInput, "Mobius parameter must satisfy |a| < 1");
    const synth::DiskCloud disk = synth::disk(cfg.n, cfg.seed);
    const DiskMobius g{cfg.a};
    std::vector<Vec3> image(disk.points.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        const Complex w = g(disk.points[i]);
        image[i] = Vec3(w.real(), w.imag(), 0.0);
    }
    const PointCloud cloud(std::move(image));

    DiskExperimentResult res;
    res.points = disk.points.size();
    res.boundary = disk.boundary.size();
    for (WeightVariant w : cfg.weights) {
        const auto t0 = std::chrono::steady_clock::now();
        const SparseOperator op = assemble_lb(cloud, cfg.k, w);
        ConstrainedSystem sys;
        sys.op = &op;
        sys.pinned = disk.boundary;
        for (Index id : disk.boundary) sys.values.push_back(disk.points[static_cast<std::size_t>(id)]);
        const auto phi = solve(sys, cfg.solver);
        DiskErrorRow row{w};
        for (std::size_t i = 0; i < phi.size(); ++i) {
            const double e = std::abs(phi[i] - disk.points[i]);
            row.max_error = std::max(row.max_error, e);
            row.mean_error += e;
        }
        row.mean_error /= static_cast<double>(phi.size());
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.rows.push_back(row);
    }
    return res;
}

}  // namespace sphcloud
