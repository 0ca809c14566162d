#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sphcloud
{

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Index = std::int64_t;

constexpr double kPi = std::numbers::pi;

/** Machine-readable category attached to every library error. */
enum class ErrorCode {
    InvalidInput,
    InsufficientPoints,
    DuplicatePoint,
    DegenerateNeighborhood,
    IllConditionedStencil,
    Underdetermined,
    NotConverged,
    DegeneratePoleNeighborhood,
    DegenerateGeometry,
    MismatchedConnectivity,
    Io,
};

inline const char* to_string(ErrorCode c)
{
    switch (c) {
        case ErrorCode::InvalidInput: return "invalid input";
        case ErrorCode::InsufficientPoints: return "insufficient points";
        case ErrorCode::DuplicatePoint: return "duplicate point";
        case ErrorCode::DegenerateNeighborhood: return "degenerate neighborhood";
        case ErrorCode::IllConditionedStencil: return "ill-conditioned stencil";
        case ErrorCode::Underdetermined: return "underdetermined";
        case ErrorCode::NotConverged: return "not converged";
        case ErrorCode::DegeneratePoleNeighborhood: return "degenerate pole neighborhood";
        case ErrorCode::DegenerateGeometry: return "degenerate geometry";
        case ErrorCode::MismatchedConnectivity: return "mismatched connectivity";
        case ErrorCode::Io: return "i/o error";
    }
    return "unknown";
}

/**
 * @brief Library exception
 *
 * The message always starts with the category string, so callers matching on
 * text (e.g. "degenerate neighborhood") keep working when details are added.
 */
class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(compose(code, detail)), code_{code}, detail_{detail}
    {
    }

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    /** Message without the category prefix. */
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    static std::string compose(ErrorCode code, const std::string& detail)
    {
        std::string m = to_string(code);
        if (!detail.empty()) {
            m += ": ";
            m += detail;
        }
        return m;
    }

    ErrorCode code_;
    std::string detail_;
};

namespace detail
{
inline std::atomic<unsigned>& thread_cap()
{
    static std::atomic<unsigned> cap{0};
    return cap;
}
}  // namespace detail

/** Cap internal parallelism; 0 means hardware concurrency. */
inline void set_max_threads(unsigned n) { detail::thread_cap() = n; }

inline unsigned max_threads()
{
    unsigned cap = detail::thread_cap();
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    return cap == 0 ? hw : std::min(cap, hw);
}

/**
 * Runs body(i) for i in [0, n). Each index is visited exactly once, so bodies
 * that only write slot i produce identical results for any thread count.
 * The first exception thrown by any worker is rethrown on the caller.
 */
template <class Body>
void parallel_for(std::size_t n, Body&& body)
{
    unsigned threads = std::min<std::size_t>(max_threads(), std::max<std::size_t>(n / 256, 1));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            constexpr std::size_t chunk = 64;
            for (;;) {
                std::size_t begin = next.fetch_add(chunk);
                if (begin >= n || failed) return;
                std::size_t end = std::min(n, begin + chunk);
                try {
                    for (std::size_t i = begin; i < end; ++i) body(i);
                } catch (...) {
                    bool expected = false;
                    if (failed.compare_exchange_strong(expected, true)) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace sphcloud
