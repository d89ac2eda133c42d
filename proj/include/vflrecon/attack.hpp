#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vflrecon/data.hpp"
#include "vflrecon/exactcover.hpp"
#include "vflrecon/linalg.hpp"
#include "vflrecon/vfl.hpp"

namespace vflrecon::attack {

using BinaryVector = std::vector<std::uint8_t>;

/// Full-column-rank selection of transcript columns sharing Z_A's column
/// space.
struct AttackMatrix {
    Matrix a;                               // n x d, rank d
    std::vector<Eigen::Index> provenance;   // Z_A columns the attack kept
};

struct AttackReport {
    std::vector<BinaryVector> solutions;  // nonzero, deduplicated, sorted
    std::vector<double> residuals;        // min_w ||A w - x||^2 per solution
    double elapsed_seconds = 0.0;
    std::string algorithm;                // "equations" | "regression"
    std::optional<int> r_used;
};

AttackMatrix build_attack_matrix(const vfl::Transcript& t,
                                 linalg::RankTolerance tol = {});
AttackMatrix make_attack_matrix(const Matrix& z_a,
                                linalg::RankTolerance tol = {});

/// Subtracts the pivot row from every other row and drops it; undoes an
/// additive bias term in the transmitted z_A.
Matrix eliminate_bias(const Matrix& a, Eigen::Index pivot_row);

struct EquationsOptions {
    double binary_tol = 1e-4;
    int dimension_cap = 30;
    int threads = 0;  // 0 = VFL_RECON_THREADS env or hardware concurrency
};

/// Algorithm that enumerates x' in {0,1}^d over a full-rank d x d
/// row-submatrix, maps each back through A, and keeps every image that is
/// binary within tolerance. Returns all distinct nonzero solutions.
AttackReport attack_linear_equations(const AttackMatrix& am,
                                     const EquationsOptions& opts = {});

struct RegressionOptions {
    int r = 0;  // 0 = d + 1
    int trials = 20;
    std::uint64_t seed = 0;
    int dimension_cap = 30;
};

/// Leverage-score-sampled regression search: per trial, samples r rows from
/// the leverage distribution, enumerates {0,1}^r on the rescaled submatrix,
/// extends each candidate by thresholding, and keeps the global
/// minimum-residual binary vector across trials.
AttackReport attack_linear_regression(const AttackMatrix& am,
                                      const RegressionOptions& opts = {});

/// Best coordinate-match fraction of x_star against any passive binary
/// feature or nonzero one-hot combination. Throws NoBinaryFeatures when the
/// passive side has no binary column.
double attack_accuracy(const BinaryVector& x_star, const data::Dataset& ds,
                       const std::vector<Eigen::Index>& passive_cols);

/// The (n + m + 2) x (m + 1) stacked matrix [A1; A2; A3] that embeds an
/// Exact Cover instance into the binary-vector-in-span decision problem.
Matrix reduce_exact_cover(const exactcover::ExactCoverInstance& inst);

struct ExactCoverDecision {
    bool covered = false;
    std::optional<std::vector<int>> cover;
};

ExactCoverDecision solve_exact_cover_via_attack(
    const exactcover::ExactCoverInstance& inst, int dimension_cap = 30);

std::string report_to_json(const AttackReport& report);
void save_report(const AttackReport& report, const std::string& path);

}  // namespace vflrecon::attack
