#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "vflrecon/linalg.hpp"

namespace vflrecon::defense {

/// z_A = W_A x_A + noise, noise i.i.d. N(0, sigma^2) drawn fresh per call.
/// At sigma == 0 the rng is not touched and the output is exact.
Matrix gaussian_masked_forward(const Matrix& w_a, const Matrix& x_a_batch,
                               double sigma, std::mt19937_64& rng);

/// Rank-reduced masquerade parameterization: effective passive weight is
/// P*Q (rank d_A - 1) plus a fabricated-bit direction u.
struct MasqueradeParams {
    Matrix p;  // k x (d_A - 1)
    Matrix q;  // (d_A - 1) x d_A
    Vector u;  // k

    Eigen::Index k() const { return p.rows(); }
    Eigen::Index d_a() const { return q.cols(); }
};

/// Scaled-uniform init, redrawn until rank(PQ) = d_A - 1 and u lies outside
/// the column span of P.
MasqueradeParams init_masquerade(Eigen::Index k, Eigen::Index d_a,
                                 std::uint64_t seed);

/// Per row i: z_i = P (Q x_i) + a_i * u, with a_i in {0,1}.
Matrix masquerade_forward(const MasqueradeParams& mp, const Matrix& x_a_batch,
                          const Vector& a_bits);

struct MasqueradeGrads {
    Matrix p;
    Matrix q;
    Vector u;
};

/// dL/dP = dL/dz^T X Q^T, dL/du = sum_i a_i dL/dz_i, dL/dQ = P^T dL/dz^T X,
/// summed over the batch.
MasqueradeGrads masquerade_backward(const MasqueradeParams& mp,
                                    const Matrix& x_a_batch,
                                    const Vector& a_bits,
                                    const Matrix& dl_dz);

/// Drops a minimal set of columns so the remainder has full column rank.
/// Returns the reduced matrix and the dropped column indices.
std::pair<Matrix, std::vector<Eigen::Index>> preprocess_full_rank(
    const Matrix& x_a, linalg::RankTolerance tol = {});

}  // namespace vflrecon::defense
