#include "vflrecon/linalg.hpp"

#include <algorithm>
#include <random>

namespace vflrecon::linalg {

namespace {

void check_valid(const Matrix& a) {
    if (a.rows() < 1 || a.cols() < 1) {
        throw DimensionMismatch("matrix must have at least one row and column");
    }
    if (!a.allFinite()) {
        throw DimensionMismatch("matrix contains non-finite entries");
    }
}

}  // namespace

Eigen::Index numerical_rank(const Matrix& a, RankTolerance tol) {
    check_valid(a);
    Eigen::BDCSVD<Matrix> svd(a);
    const Vector& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    const double cutoff = tol.relative_threshold * sv(0);
    Eigen::Index r = 0;
    while (r < sv.size() && sv(r) > cutoff) ++r;
    return r;
}

std::vector<Eigen::Index> select_independent(const Matrix& a, Axis axis,
                                             Eigen::Index target,
                                             RankTolerance tol) {
    check_valid(a);
    const Matrix m = (axis == Axis::Cols) ? a : a.transpose();
    if (target < 1 || target > m.cols()) {
        throw RankDeficient("requested " + std::to_string(target) +
                            " independent indices from " +
                            std::to_string(m.cols()) + " candidates");
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(m);
    qr.setThreshold(tol.relative_threshold);
    if (qr.rank() < target) {
        throw RankDeficient("matrix rank " + std::to_string(qr.rank()) +
                            " below target " + std::to_string(target));
    }
    const auto& perm = qr.colsPermutation().indices();
    std::vector<Eigen::Index> idx(perm.data(), perm.data() + target);
    std::sort(idx.begin(), idx.end());
    return idx;
}

LeastSquaresResult least_squares(const Matrix& a, const Vector& b) {
    check_valid(a);
    if (a.rows() != b.size()) {
        throw DimensionMismatch("least_squares: rows mismatch");
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
    Vector w = cod.solve(b);
    double res = (a * w - b).squaredNorm();
    return {std::move(w), res};
}

LeastSquaresSolver::LeastSquaresSolver(const Matrix& a, RankTolerance tol)
    : a_(a) {
    check_valid(a);
    cod_.setThreshold(tol.relative_threshold);
    cod_.compute(a_);
    rank_ = cod_.rank();
}

const Matrix& LeastSquaresSolver::pseudo_inverse() const {
    if (pinv_.size() == 0) pinv_ = cod_.pseudoInverse();
    return pinv_;
}

Vector LeastSquaresSolver::solve(const Vector& b) const {
    if (b.size() != a_.rows()) {
        throw DimensionMismatch("LeastSquaresSolver: rhs size mismatch");
    }
    return cod_.solve(b);
}

double LeastSquaresSolver::residual_sq(const Vector& b) const {
    return (a_ * solve(b) - b).squaredNorm();
}

LeastSquaresResult LeastSquaresSolver::solve_with_residual(
    const Vector& b) const {
    Vector w = solve(b);
    double res = (a_ * w - b).squaredNorm();
    return {std::move(w), res};
}

Vector leverage_scores(const Matrix& a, RankTolerance tol) {
    check_valid(a);
    const Eigen::Index d = a.cols();
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU);
    const Vector& sv = svd.singularValues();
    if (sv(0) == 0.0 ||
        sv(sv.size() - 1) <= tol.relative_threshold * sv(0)) {
        throw RankDeficient("leverage_scores requires full column rank");
    }
    Vector p(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        p(i) = svd.matrixU().row(i).squaredNorm() / static_cast<double>(d);
    }
    return p;
}

Matrix random_orthogonal(Eigen::Index dim, std::uint64_t seed) {
    if (dim < 1) throw DimensionMismatch("random_orthogonal: dim must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix g(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = gauss(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Fix signs so the factorization (hence Q) is unique per seed.
    for (Eigen::Index j = 0; j < dim; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

double orthogonality_defect(const Matrix& u) {
    Matrix d = u.transpose() * u - Matrix::Identity(u.cols(), u.cols());
    return d.cwiseAbs().maxCoeff();
}

}  // namespace vflrecon::linalg
