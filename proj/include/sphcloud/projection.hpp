#pragma once

#include "sphcloud/common.hpp"

#include <cmath>
#include <complex>
#include <limits>

namespace sphcloud
{

/** Point of the extended complex plane. */
struct PlanePoint {
    std::complex<double> value{0, 0};
    bool infinite = false;

    static PlanePoint infinity() { return {{0, 0}, true}; }

    [[nodiscard]] bool is_finite() const noexcept { return !infinite; }
    friend bool operator==(const PlanePoint&, const PlanePoint&) = default;
};

/** Points within this distance of the projection pole map to infinity. */
constexpr double kPoleTolerance = 1e-14;

/** North-pole stereographic projection (x + iy) / (1 - z). */
inline PlanePoint proj_north(const Vec3& p)
{
    const double rho2 = p.x() * p.x() + p.y() * p.y();
    // 1 - z = (x^2 + y^2) / (1 + z) on the sphere; avoids cancellation near the pole
    const double den = p.z() > 0 ? rho2 / (1.0 + p.z()) : 1.0 - p.z();
    if (std::sqrt(rho2 + den * den) <= kPoleTolerance) return PlanePoint::infinity();
    return {{p.x() / den, p.y() / den}, false};
}

inline Vec3 inv_north(const PlanePoint& w)
{
    if (w.infinite) return {0, 0, 1};
    const double x = w.value.real(), y = w.value.imag();
    const double r2 = x * x + y * y;
    const double den = 1.0 + r2;
    return {2 * x / den, 2 * y / den, (r2 - 1.0) / den};
}

/**
 * South-pole stereographic projection (-x + iy) / (1 + z).
 *
 * The real part is mirrored so that the chart transition with the north
 * projection is the holomorphic map z -> -1/z, i.e.
 *   proj_south(inv_north(z)) = -Re(z)/|z|^2 + i Im(z)/|z|^2.
 */
inline PlanePoint proj_south(const Vec3& p)
{
    const double rho2 = p.x() * p.x() + p.y() * p.y();
    const double den = p.z() < 0 ? rho2 / (1.0 - p.z()) : 1.0 + p.z();
    if (std::sqrt(rho2 + den * den) <= kPoleTolerance) return PlanePoint::infinity();
    return {{-p.x() / den, p.y() / den}, false};
}

inline Vec3 inv_south(const PlanePoint& w)
{
    if (w.infinite) return {0, 0, -1};
    const double x = w.value.real(), y = w.value.imag();
    const double r2 = x * x + y * y;
    const double den = 1.0 + r2;
    return {-2 * x / den, 2 * y / den, (1.0 - r2) / den};
}

inline PlanePoint finite(std::complex<double> z) { return {z, false}; }

}  // namespace sphcloud
