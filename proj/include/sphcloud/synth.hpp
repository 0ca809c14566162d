#pragma once

#include "sphcloud/common.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

/**
 * Seeded synthetic clouds. Every generator draws from mt19937_64 and
 * converts raw 64-bit outputs to doubles itself, so sequences are identical
 * across standard libraries.
 */
namespace sphcloud::synth
{

class Rng
{
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /** Uniform in [0, 1) from the top 53 bits. */
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /** Uniform direction on the unit sphere. */
    Vec3 direction()
    {
        const double z = 2.0 * uniform() - 1.0;
        const double phi = 2.0 * kPi * uniform();
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

private:
    std::mt19937_64 engine_;
};

inline std::vector<Vec3> sphere(std::size_t n, std::uint64_t seed = 0)
{
    Rng rng(seed);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = rng.direction();
    return pts;
}

/** Area-uniform samples of the ellipsoid with semi-axes (a, b, c), by rejection. */
inline std::vector<Vec3> ellipsoid(std::size_t n, double a = 2, double b = 1, double c = 1, std::uint64_t seed = 0)
{
    Rng rng(seed);
    const double smallest = std::min({a, b, c});
    std::vector<Vec3> pts;
    pts.reserve(n);
    while (pts.size() < n) {
        const Vec3 d = rng.direction();
        // area element of the stretched sphere relative to its maximum
        const double g = smallest * std::sqrt(d.x() * d.x() / (a * a) + d.y() * d.y() / (b * b) +
                                              d.z() * d.z() / (c * c));
        if (rng.uniform() < g) pts.emplace_back(a * d.x(), b * d.y(), c * d.z());
    }
    return pts;
}

/** Real spherical harmonics of degrees 1 to 3 (unnormalized), as polynomials on the sphere. */
inline std::array<double, 15> harmonics_1to3(const Vec3& p)
{
    const double x = p.x(), y = p.y(), z = p.z();
    return {x,
            y,
            z,
            x * y,
            y * z,
            x * z,
            x * x - y * y,
            3 * z * z - 1,
            y * (3 * x * x - y * y),
            x * y * z,
            y * (5 * z * z - 1),
            z * (5 * z * z - 3),
            x * (5 * z * z - 1),
            z * (x * x - y * y),
            x * (x * x - 3 * y * y)};
}

/**
 * Star-shaped blob r(u) = 1 + sum c_lm Y_lm(u) over degrees 1 to 3, with
 * coefficients uniform in [-1, 1] and rescaled so that the largest
 * displacement over a fixed 20000-point Fibonacci lattice is `max_disp`.
 * Points are area-uniform on the surface (rejection on the area element
 * r sqrt(r^2 + |grad r|^2) of the radial graph).
 */
inline std::vector<Vec3> blob(std::size_t n, std::uint64_t seed = 0, double max_disp = 0.3)
{
    Rng rng(seed);
    std::array<double, 15> coef{};
    for (double& c : coef) c = rng.uniform(-1, 1);
    auto displacement = [&](const Vec3& u) {
        auto y = harmonics_1to3(u);
        double s = 0;
        for (std::size_t i = 0; i < coef.size(); ++i) s += coef[i] * y[i];
        return s;
    };
    constexpr int lattice = 20000;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    std::vector<Vec3> probe(lattice);
    double peak = 0;
    for (int i = 0; i < lattice; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / lattice;
        const double r = std::sqrt(1.0 - z * z);
        probe[i] = {r * std::cos(golden * i), r * std::sin(golden * i), z};
        peak = std::max(peak, std::abs(displacement(probe[i])));
    }
    const double scale = peak > 0 ? max_disp / peak : 0.0;
    auto radius = [&](const Vec3& u) { return 1.0 + scale * displacement(u); };
    auto area_factor = [&](const Vec3& u) {
        // tangential gradient of the polynomial extension, by central differences
        constexpr double step = 1e-6;
        Vec3 g;
        for (int a = 0; a < 3; ++a) {
            Vec3 e = Vec3::Zero();
            e[a] = step;
            g[a] = (radius(u + e) - radius(u - e)) / (2 * step);
        }
        const Vec3 gt = g - g.dot(u) * u;
        const double r = radius(u);
        return r * std::sqrt(r * r + gt.squaredNorm());
    };
    double bound = 0;
    for (const auto& u : probe) bound = std::max(bound, area_factor(u));
    bound *= 1.05;
    std::vector<Vec3> pts;
    pts.reserve(n);
    while (pts.size() < n) {
        const Vec3 u = rng.direction();
        if (rng.uniform() * bound < area_factor(u)) pts.push_back(radius(u) * u);
    }
    return pts;
}

/** Removes every point within angular radius `radius` of `count` random centers. */
inline std::vector<Vec3> punch_holes(const std::vector<Vec3>& pts, std::size_t count, double radius,
                                     std::uint64_t seed = 0)
{
    Rng rng(seed);
    std::vector<Vec3> centers(count);
    for (auto& c : centers) c = rng.direction();
    const double cos_r = std::cos(radius);
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const auto& p : pts) {
        const Vec3 u = p.normalized();
        bool keep = true;
        for (const auto& c : centers)
            if (u.dot(c) > cos_r) {
                keep = false;
                break;
            }
        if (keep) out.push_back(p);
    }
    return out;
}

/**
 * Adds independent uniform noise in [-a R, a R] to every coordinate, with
 * R the bounding radius about the centroid.
 */
inline std::vector<Vec3> add_noise(std::vector<Vec3> pts, double amplitude, std::uint64_t seed = 0)
{
    if (pts.empty()) return pts;
    Rng rng(seed);
    Vec3 c = Vec3::Zero();
    for (const auto& p : pts) c += p;
    c /= static_cast<double>(pts.size());
    double R = 0;
    for (const auto& p : pts) R = std::max(R, (p - c).norm());
    for (auto& p : pts)
        for (int i = 0; i < 3; ++i) p[i] += amplitude * R * rng.uniform(-1, 1);
    return pts;
}

struct DiskCloud {
    std::vector<std::complex<double>> points;
    std::vector<Index> boundary;  // ids of the points on the unit circle
};

/**
 * About n points in the closed unit disk: a jittered square grid of spacing
 * h = sqrt(pi / n) kept within radius 1 - h/2, plus round(2 pi / h) equally
 * spaced points on the unit circle (listed last).
 */
inline DiskCloud disk(std::size_t n, std::uint64_t seed = 0)
{
    Rng rng(seed);
    DiskCloud d;
    const double h = std::sqrt(kPi / static_cast<double>(n));
    const int half = static_cast<int>(std::ceil(1.0 / h)) + 1;
    for (int i = -half; i <= half; ++i) {
        for (int j = -half; j <= half; ++j) {
            const double jx = rng.uniform(-0.25, 0.25), jy = rng.uniform(-0.25, 0.25);
            const std::complex<double> z((i + jx) * h, (j + jy) * h);
            if (std::abs(z) <= 1.0 - 0.5 * h) d.points.push_back(z);
        }
    }
    const auto m = static_cast<std::size_t>(std::llround(2.0 * kPi / h));
    const double offset = rng.uniform(0, 2.0 * kPi / static_cast<double>(m));
    for (std::size_t j = 0; j < m; ++j) {
        d.boundary.push_back(static_cast<Index>(d.points.size()));
        d.points.push_back(std::polar(1.0, offset + 2.0 * kPi * static_cast<double>(j) / static_cast<double>(m)));
    }
    return d;
}

}  // namespace sphcloud::synth
