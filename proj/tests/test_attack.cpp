#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "vflrecon/attack.hpp"

using namespace vflrecon;
using namespace vflrecon::attack;

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

BinaryVector random_bits(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    BinaryVector b(static_cast<std::size_t>(n));
    for (auto& v : b) v = coin(rng) ? 1 : 0;
    return b;
}

Vector bits_to_vector(const BinaryVector& b) {
    Vector v(static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < b.size(); ++i) v(static_cast<Eigen::Index>(i)) = b[i];
    return v;
}

bool contains(const std::vector<BinaryVector>& sols, const BinaryVector& x) {
    return std::find(sols.begin(), sols.end(), x) != sols.end();
}

/// X_A with one planted binary column, observed through a random full-rank
/// first layer. Column span of the result equals the span of X_A.
struct Planted {
    Matrix x_a;
    Matrix z_a;
    BinaryVector truth;
};

Planted make_planted(Eigen::Index n, Eigen::Index d, Eigen::Index k,
                     Eigen::Index bin_col, std::uint64_t seed) {
    Planted p;
    p.x_a = random_gaussian(n, d, seed);
    p.truth = random_bits(n, seed + 1);
    p.x_a.col(bin_col) = bits_to_vector(p.truth);
    Matrix w = random_gaussian(k, d, seed + 2);
    p.z_a = p.x_a * w.transpose();
    return p;
}

/// Exhaustive completeness oracle: every binary vector in the column span,
/// found by checking all 2^n of them. Feasible only for tiny n.
std::set<BinaryVector> all_binary_in_span(const Matrix& a, double tol) {
    linalg::LeastSquaresSolver solver(a);
    std::set<BinaryVector> out;
    const Eigen::Index n = a.rows();
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
        BinaryVector b(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            b[static_cast<std::size_t>(i)] =
                (mask >> i) & 1 ? 1 : 0;
        }
        if (solver.residual_sq(bits_to_vector(b)) <= tol) out.insert(b);
    }
    return out;
}

}  // namespace

TEST_CASE("make_attack_matrix drops dependent columns") {
    Matrix z(10, 4);
    z.leftCols(2) = random_gaussian(10, 2, 1);
    z.col(2) = z.col(0) + z.col(1);
    z.col(3) = random_gaussian(10, 1, 2).col(0);
    auto am = make_attack_matrix(z);
    CHECK(am.a.cols() == 3);
    CHECK(linalg::numerical_rank(am.a) == 3);
    CHECK(am.provenance.size() == 3);
    CHECK_THROWS_AS(make_attack_matrix(Matrix::Zero(5, 3)), RankDeficient);
}

TEST_CASE("identity attack matrix yields all 7 nonzero bit patterns") {
    AttackMatrix am;
    am.a = Matrix::Identity(3, 3);
    auto report = attack_linear_equations(am);
    CHECK(report.algorithm == "equations");
    REQUIRE(report.solutions.size() == 7);
    CHECK(std::is_sorted(report.solutions.begin(), report.solutions.end()));
    for (double r : report.residuals) CHECK(r <= 1e-12);
    CHECK(contains(report.solutions, {1, 1, 1}));
    CHECK(contains(report.solutions, {0, 0, 1}));
}

TEST_CASE("equations attack recovers a planted binary column") {
    auto p = make_planted(200, 8, 12, 3, 11);
    auto am = make_attack_matrix(p.z_a);
    REQUIRE(am.a.cols() == 8);
    auto report = attack_linear_equations(am);
    CHECK(contains(report.solutions, p.truth));
    for (std::size_t i = 0; i < report.solutions.size(); ++i) {
        CHECK(report.residuals[i] <= 1e-12);
    }
}

TEST_CASE("equations attack matches the exhaustive span oracle") {
    // Tiny n so all 2^n binary vectors can be tested directly.
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto p = make_planted(12, 4, 6, 1, 100 + seed);
        auto am = make_attack_matrix(p.z_a);
        auto report = attack_linear_equations(am);
        std::set<BinaryVector> got(report.solutions.begin(),
                                   report.solutions.end());
        CHECK(got == all_binary_in_span(am.a, 1e-12));
    }
}

TEST_CASE("equations attack is scale invariant") {
    auto p = make_planted(60, 5, 8, 0, 21);
    auto am1 = make_attack_matrix(p.z_a);
    auto am2 = make_attack_matrix(1000.0 * p.z_a);
    auto r1 = attack_linear_equations(am1);
    auto r2 = attack_linear_equations(am2);
    CHECK(r1.solutions == r2.solutions);
}

TEST_CASE("one-hot group produces exactly the 15 subset sums") {
    const Eigen::Index n = 150;
    Matrix x = random_gaussian(n, 8, 31);
    std::mt19937_64 rng(32);
    std::uniform_int_distribution<int> cat(0, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < 4; ++j) x(i, 2 + j) = 0.0;
        x(i, 2 + cat(rng)) = 1.0;
    }
    Matrix w = random_gaussian(10, 8, 33);
    auto am = make_attack_matrix(x * w.transpose());
    auto report = attack_linear_equations(am);
    REQUIRE(report.solutions.size() == 15);
    for (const auto& sol : report.solutions) {
        // Each solution is the indicator of some nonempty category subset.
        Vector v = bits_to_vector(sol);
        bool matched = false;
        for (std::uint32_t mask = 1; mask < 16; ++mask) {
            Vector sum = Vector::Zero(n);
            for (int j = 0; j < 4; ++j) {
                if (mask & (1u << j)) sum += x.col(2 + j);
            }
            if ((sum - v).cwiseAbs().maxCoeff() == 0.0) matched = true;
        }
        CHECK(matched);
    }
}

TEST_CASE("equations attack respects the dimension cap") {
    auto p = make_planted(40, 6, 8, 0, 41);
    auto am = make_attack_matrix(p.z_a);
    EquationsOptions opts;
    opts.dimension_cap = 5;
    CHECK_THROWS_AS(attack_linear_equations(am, opts), DimensionCap);
}

TEST_CASE("equations attack is thread-count independent") {
    auto p = make_planted(300, 10, 14, 5, 51);
    auto am = make_attack_matrix(p.z_a);
    EquationsOptions one;
    one.threads = 1;
    EquationsOptions many;
    many.threads = 4;
    auto r1 = attack_linear_equations(am, one);
    auto r4 = attack_linear_equations(am, many);
    CHECK(r1.solutions == r4.solutions);
    CHECK(contains(r1.solutions, p.truth));
}

TEST_CASE("eliminate_bias subtracts the pivot row") {
    Matrix a(3, 2);
    a << 1, 2, 3, 4, 5, 6;
    Matrix out = eliminate_bias(a, 1);
    REQUIRE(out.rows() == 2);
    CHECK(out(0, 0) == -2);
    CHECK(out(0, 1) == -2);
    CHECK(out(1, 0) == 2);
    CHECK(out(1, 1) == 2);
    CHECK_THROWS_AS(eliminate_bias(a, 3), IndexOutOfRange);
}

TEST_CASE("eliminate_bias removes an additive offset end to end") {
    // With a bias b added to every transmitted row, differences against a
    // pivot restore a linear image of the (differenced) features.
    auto p = make_planted(80, 5, 8, 2, 61);
    Vector bias = random_gaussian(8, 1, 62).col(0);
    Matrix z = p.z_a + Vector::Ones(80) * bias.transpose();
    // Pick a pivot where the planted bit is 0, so differences stay binary.
    Eigen::Index pivot = -1;
    for (Eigen::Index i = 0; i < 80; ++i) {
        if (!p.truth[static_cast<std::size_t>(i)]) {
            pivot = i;
            break;
        }
    }
    REQUIRE(pivot >= 0);
    auto am = make_attack_matrix(eliminate_bias(z, pivot));
    auto report = attack_linear_equations(am);
    BinaryVector expect;
    for (Eigen::Index i = 0; i < 80; ++i) {
        if (i != pivot) expect.push_back(p.truth[static_cast<std::size_t>(i)]);
    }
    CHECK(contains(report.solutions, expect));
}

TEST_CASE("regression attack recovers the planted column exactly") {
    auto p = make_planted(120, 6, 9, 4, 71);
    auto am = make_attack_matrix(p.z_a);
    RegressionOptions opts;
    opts.seed = 72;
    auto report = attack_linear_regression(am, opts);
    CHECK(report.algorithm == "regression");
    REQUIRE(report.r_used.has_value());
    CHECK(*report.r_used == 7);
    REQUIRE(report.solutions.size() == 1);
    CHECK(report.solutions[0] == p.truth);
    CHECK(report.residuals[0] <= 1e-10);
}

TEST_CASE("regression attack is deterministic per seed") {
    auto p = make_planted(90, 5, 8, 1, 81);
    auto am = make_attack_matrix(p.z_a);
    RegressionOptions opts;
    opts.seed = 82;
    opts.trials = 8;
    auto r1 = attack_linear_regression(am, opts);
    auto r2 = attack_linear_regression(am, opts);
    CHECK(r1.solutions == r2.solutions);
    CHECK(r1.residuals == r2.residuals);
}

TEST_CASE("regression attack tolerates mild noise") {
    auto p = make_planted(150, 5, 8, 3, 91);
    Matrix noisy = p.z_a + 1e-4 * random_gaussian(150, 8, 92);
    AttackMatrix am;
    am.a = noisy.leftCols(5);  // generic noisy block already has full rank
    REQUIRE(linalg::numerical_rank(am.a) == 5);
    RegressionOptions opts;
    opts.seed = 93;
    opts.trials = 30;
    auto report = attack_linear_regression(am, opts);
    // Tiny noise: the planted column is still the best binary fit.
    CHECK(report.solutions[0] == p.truth);
    // At any noise level the result can never fit worse than the truth.
    Matrix rough = p.z_a + 0.05 * random_gaussian(150, 8, 94);
    am.a = rough.leftCols(5);
    auto rr = attack_linear_regression(am, opts);
    linalg::LeastSquaresSolver solver(am.a);
    CHECK(rr.residuals[0] <=
          solver.residual_sq(bits_to_vector(p.truth)) + 1e-12);
}

TEST_CASE("regression attack option validation") {
    auto p = make_planted(40, 6, 8, 0, 95);
    auto am = make_attack_matrix(p.z_a);
    RegressionOptions small;
    small.r = 4;
    CHECK_THROWS_AS(attack_linear_regression(am, small), InvalidConfig);
    RegressionOptions huge;
    huge.r = 31;
    CHECK_THROWS_AS(attack_linear_regression(am, huge), DimensionCap);
    RegressionOptions zero;
    zero.trials = 0;
    CHECK_THROWS_AS(attack_linear_regression(am, zero), InvalidConfig);
}

TEST_CASE("attack_accuracy scores against binary and one-hot truth") {
    data::Dataset ds;
    ds.features = Matrix::Zero(4, 4);
    ds.features.col(0) << 1, 0, 1, 0;   // binary feature
    ds.features.col(1) << 0.3, -1.0, 2.0, 0.1;
    ds.features.col(2) << 1, 0, 0, 1;   // one-hot group {2,3}
    ds.features.col(3) << 0, 1, 1, 0;
    ds.labels = {0, 1, 0, 1};
    ds.class_count = 2;
    ds.schema.columns = {
        {"b", data::ColumnKind::Binary, -1, ""},
        {"x", data::ColumnKind::Numeric, -1, ""},
        {"g_a", data::ColumnKind::OneHot, 0, "a"},
        {"g_b", data::ColumnKind::OneHot, 0, "b"},
    };

    CHECK(attack_accuracy({1, 0, 1, 0}, ds, {0, 1, 2, 3}) == 1.0);
    CHECK(attack_accuracy({1, 0, 0, 0}, ds, {0, 1, 2, 3}) == 0.75);
    // {0,1,1,0} matches one-hot column 3 exactly.
    CHECK(attack_accuracy({0, 1, 1, 0}, ds, {0, 1, 2, 3}) == 1.0);
    // Subset sum of both categories is all-ones.
    CHECK(attack_accuracy({1, 1, 1, 1}, ds, {2, 3}) == 1.0);
    CHECK_THROWS_AS(attack_accuracy({1, 0, 1, 0}, ds, {1}),
                    NoBinaryFeatures);
    CHECK_THROWS_AS(attack_accuracy({1, 0, 1}, ds, {0}), DimensionMismatch);
}

TEST_CASE("reduction matrix entries for a one-subset instance") {
    exactcover::ExactCoverInstance inst;
    inst.n = 2;
    inst.subsets = {{0, 1}};
    Matrix a = reduce_exact_cover(inst);
    REQUIRE(a.rows() == 5);
    REQUIRE(a.cols() == 2);
    Matrix expect(5, 2);
    expect << 1, 0,   // identity block
              0, 1,
              1, -1,  // element 0: in S_1, minus the decision column
              1, -1,  // element 1
              4, -4;  // 2|S_1| and -2n
    CHECK((a - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("attack decides hand-built exact cover instances") {
    exactcover::ExactCoverInstance yes;
    yes.n = 4;
    yes.subsets = {{0, 1}, {2, 3}, {1, 2}};
    auto dy = solve_exact_cover_via_attack(yes);
    REQUIRE(dy.covered);
    CHECK(exactcover::verify_cover(yes, *dy.cover));

    exactcover::ExactCoverInstance no;
    no.n = 3;
    no.subsets = {{0, 1}, {1, 2}};
    auto dn = solve_exact_cover_via_attack(no);
    CHECK_FALSE(dn.covered);
}

TEST_CASE("attack agrees with brute force on random instances (property)") {
    int yes = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto inst = exactcover::random_instance(6, 6, 0.35, 1000 + seed);
        auto oracle = exactcover::brute_force_cover(inst);
        auto via = solve_exact_cover_via_attack(inst);
        CHECK(via.covered == oracle.covered);
        if (via.covered) {
            ++yes;
            CHECK(exactcover::verify_cover(inst, *via.cover));
        }
    }
    CHECK(yes > 0);
}

TEST_CASE("exact cover reduction respects the dimension cap") {
    exactcover::ExactCoverInstance inst;
    inst.n = 2;
    inst.subsets.assign(31, {0, 1});
    CHECK_THROWS_AS(solve_exact_cover_via_attack(inst, 30), DimensionCap);
}

TEST_CASE("report JSON lists bits and residuals") {
    AttackReport report;
    report.algorithm = "equations";
    report.solutions = {{1, 0, 1}};
    report.residuals = {0.0};
    report.elapsed_seconds = 0.5;
    auto j = report_to_json(report);
    CHECK(j.find("\"bits\": \"101\"") != std::string::npos);
    CHECK(j.find("\"algorithm\": \"equations\"") != std::string::npos);
}
