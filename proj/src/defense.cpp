#include "vflrecon/defense.hpp"

#include <algorithm>

namespace vflrecon::defense {

Matrix gaussian_masked_forward(const Matrix& w_a, const Matrix& x_a_batch,
                               double sigma, std::mt19937_64& rng) {
    if (x_a_batch.cols() != w_a.cols()) {
        throw DimensionMismatch("gaussian_masked_forward: shape mismatch");
    }
    Matrix z = x_a_batch * w_a.transpose();
    if (sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, sigma);
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            for (Eigen::Index j = 0; j < z.cols(); ++j) {
                z(i, j) += noise(rng);
            }
        }
    }
    return z;
}

MasqueradeParams init_masquerade(Eigen::Index k, Eigen::Index d_a,
                                 std::uint64_t seed) {
    if (d_a < 2) throw InvalidArchitecture("masquerade requires d_A >= 2");
    if (k < d_a) throw InvalidArchitecture("masquerade requires k >= d_A");
    std::mt19937_64 rng(seed);
    auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
        const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
        return m;
    };
    for (int attempt = 0; attempt < 16; ++attempt) {
        MasqueradeParams mp;
        mp.p = draw(k, d_a - 1);
        mp.q = draw(d_a - 1, d_a);
        mp.u = draw(k, 1).col(0);
        if (linalg::numerical_rank(mp.p * mp.q) != d_a - 1) continue;
        Matrix pu(k, d_a);
        pu.leftCols(d_a - 1) = mp.p;
        pu.col(d_a - 1) = mp.u;
        if (linalg::numerical_rank(pu) != d_a) continue;
        return mp;
    }
    throw InvalidArchitecture("masquerade init failed to reach target ranks");
}

Matrix masquerade_forward(const MasqueradeParams& mp, const Matrix& x_a_batch,
                          const Vector& a_bits) {
    if (x_a_batch.cols() != mp.d_a() || a_bits.size() != x_a_batch.rows()) {
        throw DimensionMismatch("masquerade_forward: shape mismatch");
    }
    for (Eigen::Index i = 0; i < a_bits.size(); ++i) {
        if (a_bits(i) != 0.0 && a_bits(i) != 1.0) {
            throw InvalidConfig("fabricated bits must be 0 or 1");
        }
    }
    Matrix z = (x_a_batch * mp.q.transpose()) * mp.p.transpose();
    z += a_bits * mp.u.transpose();
    return z;
}

MasqueradeGrads masquerade_backward(const MasqueradeParams& mp,
                                    const Matrix& x_a_batch,
                                    const Vector& a_bits,
                                    const Matrix& dl_dz) {
    if (dl_dz.rows() != x_a_batch.rows() || dl_dz.cols() != mp.k() ||
        a_bits.size() != x_a_batch.rows() || x_a_batch.cols() != mp.d_a()) {
        throw DimensionMismatch("masquerade_backward: shape mismatch");
    }
    MasqueradeGrads g;
    g.p = dl_dz.transpose() * x_a_batch * mp.q.transpose();
    g.q = mp.p.transpose() * (dl_dz.transpose() * x_a_batch);
    g.u = dl_dz.transpose() * a_bits;
    return g;
}

std::pair<Matrix, std::vector<Eigen::Index>> preprocess_full_rank(
    const Matrix& x_a, linalg::RankTolerance tol) {
    const Eigen::Index rank = linalg::numerical_rank(x_a, tol);
    if (rank == x_a.cols()) return {x_a, {}};
    auto keep = linalg::select_independent(x_a, linalg::Axis::Cols, rank, tol);
    Matrix reduced(x_a.rows(), rank);
    for (Eigen::Index j = 0; j < rank; ++j) {
        reduced.col(j) = x_a.col(keep[static_cast<std::size_t>(j)]);
    }
    std::vector<Eigen::Index> dropped;
    std::size_t pos = 0;
    for (Eigen::Index j = 0; j < x_a.cols(); ++j) {
        if (pos < keep.size() && keep[pos] == j) {
            ++pos;
        } else {
            dropped.push_back(j);
        }
    }
    return {std::move(reduced), std::move(dropped)};
}

}  // namespace vflrecon::defense
