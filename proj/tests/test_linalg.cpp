#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "vflrecon/linalg.hpp"

using namespace vflrecon;
using namespace vflrecon::linalg;

namespace {

Matrix random_gaussian(Eigen::Index rows, Eigen::Index cols,
                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
    return m;
}

// Independent rank oracle: Gram-Schmidt style pivoted elimination, counting
// pivots whose residual norm stays above a relative cutoff.
Eigen::Index elimination_rank(Matrix a, double rel_tol = 1e-8) {
    double max_norm = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        max_norm = std::max(max_norm, a.col(j).norm());
    }
    if (max_norm == 0.0) return 0;
    Eigen::Index rank = 0;
    std::vector<bool> used(static_cast<std::size_t>(a.cols()), false);
    for (;;) {
        Eigen::Index pivot = -1;
        double best = rel_tol * max_norm;
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (!used[static_cast<std::size_t>(j)] && a.col(j).norm() > best) {
                best = a.col(j).norm();
                pivot = j;
            }
        }
        if (pivot < 0) break;
        used[static_cast<std::size_t>(pivot)] = true;
        ++rank;
        Vector q = a.col(pivot) / a.col(pivot).norm();
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (!used[static_cast<std::size_t>(j)]) {
                a.col(j) -= q * (q.dot(a.col(j)));
            }
        }
    }
    return rank;
}

}  // namespace

TEST_CASE("numerical_rank on identity") {
    CHECK(numerical_rank(Matrix::Identity(3, 3)) == 3);
}

TEST_CASE("numerical_rank with duplicated column") {
    Matrix a = random_gaussian(4, 1, 11);
    Matrix m(4, 2);
    m.col(0) = a.col(0);
    m.col(1) = 2.0 * a.col(0);
    CHECK(numerical_rank(m) == 1);
}

TEST_CASE("numerical_rank matches pivoted elimination oracle") {
    Matrix a = random_gaussian(100, 8, 42);
    CHECK(numerical_rank(a) == 8);
    CHECK(numerical_rank(a) == elimination_rank(a));

    // Deliberately rank-deficient case for the oracle comparison.
    Matrix b = random_gaussian(30, 4, 7);
    Matrix c(30, 6);
    c.leftCols(4) = b;
    c.col(4) = b.col(0) + b.col(1);
    c.col(5) = 0.5 * b.col(2);
    CHECK(numerical_rank(c) == elimination_rank(c));
    CHECK(numerical_rank(c) == 4);
}

TEST_CASE("numerical_rank of zero matrix is 0") {
    CHECK(numerical_rank(Matrix::Zero(5, 3)) == 0);
}

TEST_CASE("select_independent identity columns") {
    auto idx = select_independent(Matrix::Identity(4, 4), Axis::Cols, 4);
    CHECK(idx == std::vector<Eigen::Index>{0, 1, 2, 3});
}

TEST_CASE("select_independent rows avoids a duplicated row") {
    Matrix m = random_gaussian(5, 3, 3);
    m.row(2) = m.row(0);
    auto idx = select_independent(m, Axis::Rows, 3);
    Matrix sub(3, 3);
    for (int i = 0; i < 3; ++i) sub.row(i) = m.row(idx[i]);
    CHECK(numerical_rank(sub) == 3);
    // Can keep at most one of the duplicated pair.
    int dupes = 0;
    for (auto i : idx) {
        if (i == 0 || i == 2) ++dupes;
    }
    CHECK(dupes <= 1);
}

TEST_CASE("select_independent throws on rank-deficient target") {
    Matrix m = random_gaussian(4, 2, 5);
    Matrix a(4, 4);
    a.leftCols(2) = m;
    a.col(2) = m.col(0) + m.col(1);
    a.col(3) = m.col(0) - m.col(1);
    CHECK(numerical_rank(a) == 2);
    CHECK_THROWS_AS(select_independent(a, Axis::Cols, 3), RankDeficient);
}

TEST_CASE("select_independent submatrix rank equals target (property)") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Matrix a = random_gaussian(12, 6, 100 + seed);
        if (seed % 2) a.col(5) = a.col(0) + a.col(1);  // force deficiency
        const Eigen::Index rank = numerical_rank(a);
        auto idx = select_independent(a, Axis::Cols, rank);
        Matrix sub(a.rows(), rank);
        for (Eigen::Index j = 0; j < rank; ++j) sub.col(j) = a.col(idx[j]);
        CHECK(numerical_rank(sub) == rank);
    }
}

TEST_CASE("least_squares identity") {
    Vector b(3);
    b << 1, 2, 3;
    auto [w, res] = least_squares(Matrix::Identity(3, 3), b);
    CHECK((w - b).norm() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("least_squares mean of two points") {
    Matrix a(2, 1);
    a << 1, 1;
    Vector b(2);
    b << 0, 1;
    auto [w, res] = least_squares(a, b);
    CHECK(w(0) == doctest::Approx(0.5));
    CHECK(res == doctest::Approx(0.5));
}

TEST_CASE("least_squares recovers a constructed solution") {
    Matrix a = random_gaussian(50, 5, 9);
    Vector w_true = random_gaussian(5, 1, 10).col(0);
    Vector b = a * w_true;
    auto [w, res] = least_squares(a, b);
    CHECK((w - w_true).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(res <= 1e-16);
}

TEST_CASE("least_squares residual beats random perturbations (property)") {
    Matrix a = random_gaussian(30, 4, 21);
    Vector b = random_gaussian(30, 1, 22).col(0);
    auto [w, res] = least_squares(a, b);
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g(0.0, 0.01);
    for (int trial = 0; trial < 100; ++trial) {
        Vector delta(4);
        for (int j = 0; j < 4; ++j) delta(j) = g(rng);
        CHECK((a * (w + delta) - b).squaredNorm() >= res - 1e-12);
    }
}

TEST_CASE("LeastSquaresSolver matches one-shot least_squares") {
    Matrix a = random_gaussian(40, 6, 31);
    LeastSquaresSolver solver(a);
    for (std::uint64_t s = 0; s < 5; ++s) {
        Vector b = random_gaussian(40, 1, 50 + s).col(0);
        auto [w, res] = least_squares(a, b);
        CHECK((solver.solve(b) - w).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(solver.residual_sq(b) == doctest::Approx(res).epsilon(1e-9));
    }
}

TEST_CASE("leverage_scores uniform for orthonormal rows") {
    Vector p = leverage_scores(Matrix::Identity(6, 6));
    for (int i = 0; i < 6; ++i) CHECK(p(i) == doctest::Approx(1.0 / 6));
}

TEST_CASE("leverage_scores single informative row") {
    Matrix a(3, 1);
    a << 1, 0, 0;
    Vector p = leverage_scores(a);
    CHECK(p(0) == doctest::Approx(1.0));
    CHECK(p(1) == doctest::Approx(0.0));
    CHECK(p(2) == doctest::Approx(0.0));
}

TEST_CASE("leverage_scores match hat-matrix diagonal oracle") {
    Matrix a = random_gaussian(20, 3, 77);
    Vector p = leverage_scores(a);
    CHECK(std::abs(p.sum() - 1.0) <= 1e-10);
    // Independent route: diag(A (A^T A)^-1 A^T) / d via normal equations.
    Matrix gram_inv = (a.transpose() * a).inverse();
    for (Eigen::Index i = 0; i < 20; ++i) {
        const double hat = a.row(i) * gram_inv * a.row(i).transpose();
        CHECK(p(i) == doctest::Approx(hat / 3.0).epsilon(1e-9));
    }
}

TEST_CASE("leverage_scores invariant under right multiplication (property)") {
    Matrix a = random_gaussian(25, 4, 88);
    Matrix t = random_gaussian(4, 4, 89);
    REQUIRE(numerical_rank(t) == 4);
    Vector p1 = leverage_scores(a);
    Vector p2 = leverage_scores(a * t);
    CHECK((p1 - p2).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("leverage_scores rejects rank-deficient input") {
    Matrix a(4, 2);
    a.col(0) = random_gaussian(4, 1, 90).col(0);
    a.col(1) = 3.0 * a.col(0);
    CHECK_THROWS_AS(leverage_scores(a), RankDeficient);
}

TEST_CASE("random_orthogonal dim 1 is a sign") {
    Matrix u = random_orthogonal(1, 4);
    CHECK(std::abs(std::abs(u(0, 0)) - 1.0) < 1e-12);
}

TEST_CASE("random_orthogonal is orthogonal and deterministic") {
    Matrix u1 = random_orthogonal(5, 7);
    Matrix u2 = random_orthogonal(5, 7);
    CHECK(orthogonality_defect(u1) <= 1e-12);
    CHECK((u1 - u2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("random_orthogonal preserves norms (property)") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        Matrix u = random_orthogonal(6, 200 + s);
        Vector v = random_gaussian(6, 1, 300 + s).col(0);
        CHECK(std::abs((u * v).norm() - v.norm()) <= 1e-12 * v.norm() + 1e-12);
    }
}
