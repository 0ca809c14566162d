#pragma once

#include "sphcloud/common.hpp"
#include "sphcloud/pointcloud.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sphcloud
{

enum class WeightVariant { constant, exponential, inverse_square, wendland, special, proposed };

inline std::string_view to_string(WeightVariant v)
{
    switch (v) {
        case WeightVariant::constant: return "constant";
        case WeightVariant::exponential: return "exponential";
        case WeightVariant::inverse_square: return "inverse_square";
        case WeightVariant::wendland: return "wendland";
        case WeightVariant::special: return "special";
        case WeightVariant::proposed: return "proposed";
    }
    return "unknown";
}

/** Accepts the canonical names plus "gaussian" (Belkin-style exp(-d^2/4t) with 4t = h^2). */
inline std::optional<WeightVariant> parse_weight(std::string_view name)
{
    if (name == "constant") return WeightVariant::constant;
    if (name == "exponential" || name == "gaussian") return WeightVariant::exponential;
    if (name == "inverse_square") return WeightVariant::inverse_square;
    if (name == "wendland") return WeightVariant::wendland;
    if (name == "special") return WeightVariant::special;
    if (name == "proposed") return WeightVariant::proposed;
    return std::nullopt;
}

/**
 * @brief MLS weight function together with its stencil parameters
 *
 * h is the distance from the center to its farthest stencil neighbor,
 * support is the Wendland radius D and guard the inverse-square epsilon.
 */
struct WeightKind {
    WeightVariant variant = WeightVariant::proposed;
    double h = 1.0;
    double support = 1.05;
    double guard = 0.1;
    std::size_t k = 25;

    /** Parameters for a stencil of k points whose farthest neighbor is at distance h. */
    static WeightKind for_stencil(WeightVariant v, double h, std::size_t k)
    {
        return WeightKind{v, h, 1.05 * h, 0.1 * h, k};
    }
};

/** Weight of a sample at ambient distance d from the stencil center. */
inline double weight(const WeightKind& w, double d)
{
    switch (w.variant) {
        case WeightVariant::constant: return 1.0;
        case WeightVariant::exponential: return std::exp(-(d * d) / (w.h * w.h));
        case WeightVariant::inverse_square: return 1.0 / (d * d + w.guard * w.guard);
        case WeightVariant::wendland: {
            if (d >= w.support) return 0.0;
            double t = 1.0 - d / w.support;
            return t * t * t * t * (4.0 * d / w.support + 1.0);
        }
        case WeightVariant::special: return d == 0.0 ? 1.0 : 1.0 / static_cast<double>(w.k);
        case WeightVariant::proposed: {
            if (d == 0.0) return 1.0;
            double kk = static_cast<double>(w.k);
            return std::exp(-std::sqrt(kk) / (w.h * w.h) * d * d) / kk;
        }
    }
    return 0.0;
}

/** Index into MlsFit::derivative_rows. */
enum Derivative : int { dx = 0, dy = 1, dxx = 2, dxy = 3, dyy = 4 };

/**
 * @brief Weighted quadratic least-squares fit over one local frame
 *
 * coefficients fit the frame heights in the basis {1, x, y, x^2, xy, y^2}.
 * derivative_rows(d, i) is the weight of neighbor sample i in the estimate
 * of derivative d at the frame origin, so for any samples u over the stencil
 * derivative_rows * u gives (u_x, u_y, u_xx, u_xy, u_yy).
 */
struct MlsFit {
    Index center = -1;
    std::array<double, 6> coefficients{};
    std::vector<Index> stencil;
    Eigen::Matrix<double, 5, Eigen::Dynamic> derivative_rows;
    double condition = 1.0;

    [[nodiscard]] double fx() const { return coefficients[1]; }
    [[nodiscard]] double fy() const { return coefficients[2]; }
    [[nodiscard]] double fxx() const { return 2.0 * coefficients[3]; }
    [[nodiscard]] double fxy() const { return coefficients[4]; }
    [[nodiscard]] double fyy() const { return 2.0 * coefficients[5]; }

    /** Derivative estimates (u_x, u_y, u_xx, u_xy, u_yy) from stencil samples. */
    [[nodiscard]] Eigen::Matrix<double, 5, 1> derivatives(std::span<const double> samples) const
    {
        Eigen::Map<const Eigen::VectorXd> u(samples.data(), static_cast<Eigen::Index>(samples.size()));
        return derivative_rows * u;
    }
};

constexpr double kMaxStencilCondition = 1e12;

/**
 * Fits the frame heights with weights from `kind`. The weight parameters h
 * and k are taken from the frame itself, so only kind.variant matters here.
 *
 * Local coordinates are rescaled by h before the normal equations are formed;
 * a ridge of 1e-12 * trace / 6 guards near-singular stencils and two steps
 * of iterative refinement against the unregularized system remove its bias.
 */
inline MlsFit mls_fit(const LocalFrame& frame, WeightVariant variant)
{
    const std::size_t k = frame.size();
    if (k < 7)
        throw Error(ErrorCode::InsufficientPoints,
                    "stencil of point " + std::to_string(frame.center) + " has " + std::to_string(k) +
                        " points; at least 7 are needed");
    const double h = frame.distances.back();
    if (!(h > 0)) throw Error(ErrorCode::DegenerateNeighborhood, "zero stencil radius");
    const WeightKind kind = WeightKind::for_stencil(variant, h, k);

    const auto n = static_cast<Eigen::Index>(k);
    Eigen::Matrix<double, Eigen::Dynamic, 6> A(n, 6);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double X = frame.local_coords[i].x() / h;
        double Y = frame.local_coords[i].y() / h;
        A.row(i) << 1.0, X, Y, X * X, X * Y, Y * Y;
        w[i] = weight(kind, frame.distances[i]);
    }
    Eigen::Matrix<double, 6, Eigen::Dynamic> B = A.transpose() * w.asDiagonal();
    Eigen::Matrix<double, 6, 6> N = B * A;

    const double ridge = 1e-12 * N.trace() / 6.0;
    Eigen::Matrix<double, 6, 6> Nr = N;
    Nr.diagonal().array() += ridge;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(Nr);
    const auto& lambda = eig.eigenvalues();
    const double cond = lambda[0] > 0 ? lambda[5] / lambda[0] : std::numeric_limits<double>::infinity();
    if (!(cond <= kMaxStencilCondition))
        throw Error(ErrorCode::IllConditionedStencil,
                    "point " + std::to_string(frame.center) + " (condition " + std::to_string(cond) + ")");
    Eigen::Matrix<double, 6, 6> Ninv =
        eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();

    Eigen::Matrix<double, 6, Eigen::Dynamic> P = Ninv * B;
    for (int step = 0; step < 2; ++step) P += Ninv * (B - N * P);

    MlsFit fit;
    fit.center = frame.center;
    fit.stencil = frame.neighbors;
    fit.condition = cond;
    Eigen::Map<const Eigen::VectorXd> heights(frame.heights.data(), n);
    Eigen::Matrix<double, 6, 1> c = P * heights;
    const double scale[6] = {1.0, h, h, h * h, h * h, h * h};
    for (int j = 0; j < 6; ++j) fit.coefficients[j] = c[j] / scale[j];

    fit.derivative_rows.resize(5, n);
    fit.derivative_rows.row(dx) = P.row(1) / h;
    fit.derivative_rows.row(dy) = P.row(2) / h;
    fit.derivative_rows.row(dxx) = 2.0 * P.row(3) / (h * h);
    fit.derivative_rows.row(dxy) = P.row(4) / (h * h);
    fit.derivative_rows.row(dyy) = 2.0 * P.row(5) / (h * h);
    return fit;
}

/**
 * Coefficients (a1..a5) of the Laplace-Beltrami operator of a graph
 * surface z = f(x, y) at a point with derivatives p = f_x, q = f_y,
 * r = f_xx, s = f_xy, t = f_yy:
 *
 *   Lu = a1 u_x + a2 u_y + a3 u_xx + a4 u_xy + a5 u_yy.
 *
 * Expansion of (1/W) d_i (W g^ij d_j u) with g = I + grad f grad f^T,
 * W^2 = 1 + p^2 + q^2; see docs/lb_coefficients.md.
 */
inline std::array<double, 5> lb_coefficients(double p, double q, double r, double s, double t)
{
    const double W2 = 1.0 + p * p + q * q;
    const double W4 = W2 * W2;
    const double wx = p * r + q * s;  // W * dW/dx
    const double wy = p * s + q * t;  // W * dW/dy
    return {
        (q * s - p * t) / W2 - ((1.0 + q * q) * wx - p * q * wy) / W4,
        (p * s - q * r) / W2 - ((1.0 + p * p) * wy - p * q * wx) / W4,
        (1.0 + q * q) / W2,
        -2.0 * p * q / W2,
        (1.0 + p * p) / W2,
    };
}

inline std::array<double, 5> lb_coefficients(const MlsFit& fit)
{
    return lb_coefficients(fit.fx(), fit.fy(), fit.fxx(), fit.fxy(), fit.fyy());
}

/** One operator row: column ids (the stencil) and their values. */
struct SparseRow {
    std::vector<Index> columns;
    std::vector<double> values;

    [[nodiscard]] double dot(std::span<const double> u) const
    {
        double acc = 0;
        for (std::size_t i = 0; i < columns.size(); ++i) acc += values[i] * u[static_cast<std::size_t>(columns[i])];
        return acc;
    }
};

/** Laplace-Beltrami row at the center of `fit`, acting on samples over its stencil. */
inline SparseRow lb_row(const MlsFit& fit)
{
    const auto a = lb_coefficients(fit);
    Eigen::RowVectorXd row = a[0] * fit.derivative_rows.row(dx) + a[1] * fit.derivative_rows.row(dy) +
                             a[2] * fit.derivative_rows.row(dxx) + a[3] * fit.derivative_rows.row(dxy) +
                             a[4] * fit.derivative_rows.row(dyy);
    SparseRow out;
    out.columns = fit.stencil;
    out.values.assign(row.data(), row.data() + row.size());
    return out;
}

/**
 * @brief Row-compressed n x n operator
 *
 * Holds the discrete Laplace-Beltrami operator of a cloud. Not symmetric.
 */
class SparseOperator
{
public:
    using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor, Eigen::Index>;

    SparseOperator() = default;

    explicit SparseOperator(std::span<const SparseRow> rows)
    {
        const auto n = static_cast<Eigen::Index>(rows.size());
        std::vector<Eigen::Triplet<double, Eigen::Index>> trips;
        std::size_t nnz = 0;
        for (const auto& r : rows) nnz += r.columns.size();
        trips.reserve(nnz);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& r = rows[static_cast<std::size_t>(i)];
            for (std::size_t j = 0; j < r.columns.size(); ++j) trips.emplace_back(i, r.columns[j], r.values[j]);
        }
        matrix_.resize(n, n);
        matrix_.setFromTriplets(trips.begin(), trips.end());
        matrix_.makeCompressed();
    }

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
    [[nodiscard]] const Matrix& matrix() const noexcept { return matrix_; }

    [[nodiscard]] SparseRow row(Index i) const
    {
        SparseRow r;
        for (Matrix::InnerIterator it(matrix_, i); it; ++it) {
            r.columns.push_back(it.col());
            r.values.push_back(it.value());
        }
        return r;
    }

    [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& u) const { return matrix_ * u; }

private:
    Matrix matrix_;
};

/** Frames, fits and the assembled operator of one cloud. */
struct LbAssembly {
    std::vector<LocalFrame> frames;
    std::vector<MlsFit> fits;
    SparseOperator op;
};

/**
 * Builds frames, per-point MLS fits and the Laplace-Beltrami operator.
 * Failures carry the offending point id.
 */
inline LbAssembly assemble_lb_full(const PointCloud& cloud, std::size_t k, WeightVariant variant)
{
    if (k < 7) throw Error(ErrorCode::InvalidInput, "k must be at least 7, got " + std::to_string(k));
    KdTree index(cloud);
    LbAssembly out;
    out.frames = build_frames(cloud, index, k);
    out.fits.resize(cloud.size());
    std::vector<SparseRow> rows(cloud.size());
    parallel_for(cloud.size(), [&](std::size_t i) {
        out.fits[i] = mls_fit(out.frames[i], variant);
        rows[i] = lb_row(out.fits[i]);
    });
    out.op = SparseOperator(rows);
    return out;
}

inline SparseOperator assemble_lb(const PointCloud& cloud, std::size_t k, WeightVariant variant)
{
    return assemble_lb_full(cloud, k, variant).op;
}

/**
 * Mean curvature of the fitted height function at each frame origin,
 * signed with respect to the frame normal e3 (H > 0 when the surface bends
 * towards +e3).
 */
inline double mean_curvature(const MlsFit& fit)
{
    const double p = fit.fx(), q = fit.fy(), r = fit.fxx(), s = fit.fxy(), t = fit.fyy();
    const double W2 = 1.0 + p * p + q * q;
    return ((1.0 + q * q) * r - 2.0 * p * q * s + (1.0 + p * p) * t) / (2.0 * W2 * std::sqrt(W2));
}

inline std::vector<double> mean_curvature(std::span<const MlsFit> fits)
{
    std::vector<double> h(fits.size());
    for (std::size_t i = 0; i < fits.size(); ++i) h[i] = mean_curvature(fits[i]);
    return h;
}

}  // namespace sphcloud
