#pragma once

#include "sphcloud/common.hpp"

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace sphcloud
{

/** Result of balancing: pole spreads before and after, and the plane scale. */
struct BalanceInfo {
    Index north = -1;  // point whose image is northernmost
    Index south = -1;
    double d_p = 0;
    double d_s = 0;
    double lambda = 1;
    double d_p_after = 0;
    double d_s_after = 0;
};

/**
 * @brief Per-point images on the unit sphere
 *
 * `images[i]` is the image of cloud point i. `history` holds the mean
 * squared movement of every N-S reiteration that ran.
 */
struct SphericalMap {
    std::vector<Vec3> images;
    std::vector<double> history;
    int iterations = 0;
    bool converged = false;
    bool mirrored = false;  // orientation was fixed by negating x
    std::array<Index, 3> triple{-1, -1, -1};
    BalanceInfo balance;
    std::vector<std::pair<std::string, double>> stage_seconds;

    [[nodiscard]] std::size_t size() const noexcept { return images.size(); }
};

}  // namespace sphcloud
