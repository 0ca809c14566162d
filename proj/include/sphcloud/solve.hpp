#pragma once

#include "sphcloud/common.hpp"
#include "sphcloud/mls.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

namespace sphcloud
{

using Complex = std::complex<double>;

enum class SolverKind { direct, iterative };

struct SolveOptions {
    SolverKind kind = SolverKind::direct;
    double tol = 1e-10;
    int max_iter = 2000;
};

/**
 * Laplace problem L u = 0 on the free ids with u fixed on the pinned ids.
 *
 * A pinned value that is not finite (a point projected to infinity) keeps
 * its value in the output, and its column is left out of the free rows.
 * `initial`, when non-empty, seeds the iterative solver.
 */
struct ConstrainedSystem {
    const SparseOperator* op = nullptr;
    std::vector<Index> pinned;
    std::vector<Complex> values;
    std::vector<Complex> initial;
};

struct SolveReport {
    double residual = 0;  // max-norm of the reduced residual over the RHS scale
    int iterations = 0;
};

namespace detail
{
inline bool finite(const Complex& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }
}  // namespace detail

/**
 * Solves a constrained system. Real and imaginary parts share one
 * factorization of the reduced (free x free) matrix.
 */
inline std::vector<Complex> solve(const ConstrainedSystem& sys, const SolveOptions& opts = {},
                                  SolveReport* report = nullptr)
{
    if (sys.op == nullptr) throw Error(ErrorCode::InvalidInput, "no operator");
    const auto& L = sys.op->matrix();
    const auto n = static_cast<Eigen::Index>(sys.op->size());
    if (sys.pinned.size() != sys.values.size())
        throw Error(ErrorCode::InvalidInput, "pinned ids and values differ in length");
    if (sys.pinned.empty()) throw Error(ErrorCode::Underdetermined, "no pinned points");

    std::vector<Complex> out(static_cast<std::size_t>(n), Complex(0, 0));
    std::vector<char> is_pinned(static_cast<std::size_t>(n), 0);
    for (std::size_t i = 0; i < sys.pinned.size(); ++i) {
        Index id = sys.pinned[i];
        if (id < 0 || id >= n) throw Error(ErrorCode::InvalidInput, "pinned id out of range");
        if (is_pinned[id]) throw Error(ErrorCode::InvalidInput, "point " + std::to_string(id) + " pinned twice");
        is_pinned[id] = 1;
        out[id] = sys.values[i];
    }

    std::vector<Eigen::Index> reduced(static_cast<std::size_t>(n), -1);
    std::vector<Eigen::Index> free_ids;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!is_pinned[i]) {
            reduced[i] = static_cast<Eigen::Index>(free_ids.size());
            free_ids.push_back(i);
        }
    }
    const auto m = static_cast<Eigen::Index>(free_ids.size());
    if (m == 0) {
        if (report) *report = {};
        return out;
    }

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(L.nonZeros()));
    Eigen::MatrixX2d rhs = Eigen::MatrixX2d::Zero(m, 2);
    for (Eigen::Index r = 0; r < m; ++r) {
        for (SparseOperator::Matrix::InnerIterator it(L, free_ids[r]); it; ++it) {
            Eigen::Index c = it.col();
            if (reduced[c] >= 0) {
                trips.emplace_back(r, reduced[c], it.value());
            } else if (detail::finite(out[c])) {
                rhs(r, 0) -= it.value() * out[c].real();
                rhs(r, 1) -= it.value() * out[c].imag();
            }
        }
    }
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();

    Eigen::MatrixX2d x(m, 2);
    int iterations = 0;
    if (opts.kind == SolverKind::direct) {
        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
        lu.analyzePattern(A);
        lu.factorize(A);
        if (lu.info() != Eigen::Success)
            throw Error(ErrorCode::Underdetermined, "reduced system is singular (" + lu.lastErrorMessage() + ")");
        x = lu.solve(rhs);
    } else {
        Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> it;
        it.setTolerance(opts.tol);
        it.setMaxIterations(opts.max_iter);
        it.compute(A);
        if (it.info() != Eigen::Success)
            throw Error(ErrorCode::Underdetermined, "incomplete factorization failed");
        for (int col = 0; col < 2; ++col) {
            Eigen::VectorXd guess = Eigen::VectorXd::Zero(m);
            if (static_cast<Eigen::Index>(sys.initial.size()) == n) {
                for (Eigen::Index r = 0; r < m; ++r) {
                    const Complex& g = sys.initial[free_ids[r]];
                    guess[r] = col == 0 ? g.real() : g.imag();
                }
            }
            x.col(col) = it.solveWithGuess(rhs.col(col), guess);
            iterations = std::max(iterations, static_cast<int>(it.iterations()));
            if (it.info() != Eigen::Success)
                throw Error(ErrorCode::NotConverged, "iterative solve stopped after " +
                                                         std::to_string(it.iterations()) + " iterations, residual " +
                                                         std::to_string(it.error()));
        }
    }
    if (!x.allFinite()) throw Error(ErrorCode::Underdetermined, "reduced system produced non-finite values");

    const double scale = std::max(rhs.lpNorm<Eigen::Infinity>(), 1e-300);
    const double residual = (A * x - rhs).lpNorm<Eigen::Infinity>() / scale;
    if (report) *report = {residual, iterations};
    for (Eigen::Index r = 0; r < m; ++r) out[free_ids[r]] = Complex(x(r, 0), x(r, 1));
    return out;
}

}  // namespace sphcloud
