#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "vflrecon/errors.hpp"

namespace vflrecon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

namespace linalg {

/// Relative singular-value cutoff used wherever a rank decision is needed.
struct RankTolerance {
    double relative_threshold = 1e-8;
};

enum class Axis { Rows, Cols };

/// Number of singular values above relative_threshold * sigma_max.
/// All-zero matrices have rank 0.
Eigen::Index numerical_rank(const Matrix& a, RankTolerance tol = {});

/// Picks `target` row or column indices whose submatrix has numerical rank
/// `target`, via column-pivoted QR. Indices are returned in ascending order
/// and are deterministic for a given matrix. Throws RankDeficient when the
/// matrix cannot supply that many independent rows/columns.
std::vector<Eigen::Index> select_independent(const Matrix& a, Axis axis,
                                             Eigen::Index target,
                                             RankTolerance tol = {});

struct LeastSquaresResult {
    Vector w;
    double residual_sq = 0.0;
};

/// Minimum-norm least squares: w = argmin ||a w - b||^2.
LeastSquaresResult least_squares(const Matrix& a, const Vector& b);

/// Precomputed factorization of a fixed design matrix, for repeated solves
/// against many right-hand sides at O(rows * cols) per call.
class LeastSquaresSolver {
  public:
    explicit LeastSquaresSolver(const Matrix& a, RankTolerance tol = {});

    Vector solve(const Vector& b) const;                 // minimizer w
    double residual_sq(const Vector& b) const;           // ||a w - b||^2
    LeastSquaresResult solve_with_residual(const Vector& b) const;

    /// Explicit cols x rows pseudo-inverse, formed on first use (costs
    /// O(rows^2 * cols), so keep it off the per-solve path).
    const Matrix& pseudo_inverse() const;
    Eigen::Index rank() const { return rank_; }

  private:
    Matrix a_;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod_;
    mutable Matrix pinv_;  // cols x rows, empty until requested
    Eigen::Index rank_;
};

/// Normalized leverage scores p_i = ||U_(i)||^2 / d from the thin left
/// singular vectors. Requires full column rank; throws RankDeficient.
Vector leverage_scores(const Matrix& a, RankTolerance tol = {});

/// Deterministic random orthogonal matrix: QR of a seeded Gaussian matrix
/// with the R diagonal sign-fixed positive.
Matrix random_orthogonal(Eigen::Index dim, std::uint64_t seed);

/// Max-norm orthogonality defect ||U^T U - I||_max.
double orthogonality_defect(const Matrix& u);

}  // namespace linalg
}  // namespace vflrecon
