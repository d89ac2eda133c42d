#include "vflrecon/attack.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <limits>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include <json.hpp>

namespace vflrecon::attack {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("VFL_RECON_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Entry-wise closeness to {0,1} with early exit.
bool is_binary_within(const Vector& x, double tol) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = x(i);
        const double err = v > 0.5 ? std::abs(v - 1.0) : std::abs(v);
        if (err > tol) return false;
    }
    return true;
}

BinaryVector round_to_bits(const Vector& x) {
    BinaryVector b(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        b[static_cast<std::size_t>(i)] = x(i) > 0.5 ? 1 : 0;
    }
    return b;
}

bool is_nonzero(const BinaryVector& b) {
    return std::any_of(b.begin(), b.end(), [](std::uint8_t v) { return v; });
}

Vector bits_to_vector(const BinaryVector& b) {
    Vector v(static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < b.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = b[i] ? 1.0 : 0.0;
    }
    return v;
}

}  // namespace

AttackMatrix make_attack_matrix(const Matrix& z_a, linalg::RankTolerance tol) {
    const Eigen::Index d = linalg::numerical_rank(z_a, tol);
    if (d == 0) throw RankDeficient("transcript has rank 0");
    auto cols = linalg::select_independent(z_a, linalg::Axis::Cols, d, tol);
    AttackMatrix am;
    am.a.resize(z_a.rows(), d);
    for (Eigen::Index j = 0; j < d; ++j) {
        am.a.col(j) = z_a.col(cols[static_cast<std::size_t>(j)]);
    }
    am.provenance = std::move(cols);
    return am;
}

AttackMatrix build_attack_matrix(const vfl::Transcript& t,
                                 linalg::RankTolerance tol) {
    if (t.frames.empty()) throw RankDeficient("empty transcript");
    return make_attack_matrix(t.stacked(), tol);
}

Matrix eliminate_bias(const Matrix& a, Eigen::Index pivot_row) {
    if (pivot_row < 0 || pivot_row >= a.rows()) {
        throw IndexOutOfRange("eliminate_bias: pivot row out of range");
    }
    Matrix out(a.rows() - 1, a.cols());
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (i == pivot_row) continue;
        out.row(at++) = a.row(i) - a.row(pivot_row);
    }
    return out;
}

AttackReport attack_linear_equations(const AttackMatrix& am,
                                     const EquationsOptions& opts) {
    const auto start = Clock::now();
    const Matrix& a = am.a;
    const Eigen::Index n = a.rows();
    const int d = static_cast<int>(a.cols());
    if (d > opts.dimension_cap) {
        throw DimensionCap("attack dimension " + std::to_string(d) +
                           " exceeds cap " +
                           std::to_string(opts.dimension_cap) +
                           "; the search enumerates 2^d candidates");
    }

    auto row_idx = linalg::select_independent(a, linalg::Axis::Rows, d);
    Matrix a_prime(d, d);
    for (int i = 0; i < d; ++i) {
        a_prime.row(i) = a.row(row_idx[static_cast<std::size_t>(i)]);
    }
    // B = A * A'^-1, so each candidate image is a subset-sum of B's columns.
    Eigen::PartialPivLU<Matrix> lu(a_prime.transpose());
    Matrix b = lu.solve(a.transpose()).transpose();

    const std::uint64_t total = (std::uint64_t{1} << d) - 1;
    const int n_threads =
        static_cast<int>(std::min<std::uint64_t>(
            static_cast<std::uint64_t>(resolve_threads(opts.threads)),
            std::max<std::uint64_t>(total / 1024, 1)));

    std::vector<std::vector<BinaryVector>> found(
        static_cast<std::size_t>(n_threads));
    auto worker = [&](int tid, std::uint64_t lo, std::uint64_t hi) {
        // Gray-code walk: candidate t has bit mask t ^ (t >> 1); each step
        // flips one bit, so the image updates by a single column of B.
        std::uint64_t mask = (lo - 1) ^ ((lo - 1) >> 1);
        Vector x = Vector::Zero(n);
        for (int j = 0; j < d; ++j) {
            if (mask & (std::uint64_t{1} << j)) x += b.col(j);
        }
        auto& out = found[static_cast<std::size_t>(tid)];
        for (std::uint64_t t = lo; t < hi; ++t) {
            const int j = std::countr_zero(t);
            const std::uint64_t bit = std::uint64_t{1} << j;
            mask ^= bit;
            if (mask & bit) {
                x += b.col(j);
            } else {
                x -= b.col(j);
            }
            if (is_binary_within(x, opts.binary_tol)) {
                BinaryVector bits = round_to_bits(x);
                if (is_nonzero(bits)) out.push_back(std::move(bits));
            }
        }
    };

    if (n_threads == 1) {
        worker(0, 1, total + 1);
    } else {
        std::vector<std::thread> pool;
        const std::uint64_t chunk = total / n_threads;
        for (int tid = 0; tid < n_threads; ++tid) {
            const std::uint64_t lo = 1 + chunk * tid;
            const std::uint64_t hi =
                (tid == n_threads - 1) ? total + 1 : lo + chunk;
            pool.emplace_back(worker, tid, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    std::set<BinaryVector> unique;
    for (auto& vec : found) {
        for (auto& sol : vec) unique.insert(std::move(sol));
    }

    AttackReport report;
    report.algorithm = "equations";
    linalg::LeastSquaresSolver residual_solver(a);
    for (const auto& sol : unique) {
        report.solutions.push_back(sol);
        report.residuals.push_back(
            residual_solver.residual_sq(bits_to_vector(sol)));
    }
    report.elapsed_seconds = seconds_since(start);
    return report;
}

AttackReport attack_linear_regression(const AttackMatrix& am,
                                      const RegressionOptions& opts) {
    const auto start = Clock::now();
    const Matrix& a = am.a;
    const Eigen::Index n = a.rows();
    const int d = static_cast<int>(a.cols());
    const int r = opts.r > 0 ? opts.r : d + 1;
    if (r < d) throw InvalidConfig("sample size r must be >= d");
    if (r > opts.dimension_cap) {
        throw DimensionCap("sample size " + std::to_string(r) +
                           " exceeds cap " +
                           std::to_string(opts.dimension_cap) +
                           "; the search enumerates 2^r candidates");
    }
    if (opts.trials < 1) throw InvalidConfig("trials must be >= 1");

    const Vector p = linalg::leverage_scores(a);
    linalg::LeastSquaresSolver residual_solver(a);

    struct Best {
        double residual = std::numeric_limits<double>::infinity();
        BinaryVector x;
    };
    auto better = [](const Best& lhs, const Best& rhs) {
        if (lhs.residual != rhs.residual) return lhs.residual < rhs.residual;
        return lhs.x < rhs.x;
    };

    auto run_trial = [&](int trial) {
        std::mt19937_64 rng(opts.seed ^
                            (0x9e3779b97f4a7c15ULL *
                             static_cast<std::uint64_t>(trial + 1)));
        std::discrete_distribution<Eigen::Index> sample(p.data(),
                                                        p.data() + p.size());
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(r));
        Matrix a_prime(r, d);
        Vector rescale(r);
        for (int j = 0; j < r; ++j) {
            const Eigen::Index i = sample(rng);
            rows[static_cast<std::size_t>(j)] = i;
            rescale(j) = 1.0 / std::sqrt(static_cast<double>(r) * p(i));
            a_prime.row(j) = rescale(j) * a.row(i);
        }
        linalg::LeastSquaresSolver sub_solver(a_prime);
        // w' is linear in the bits: w' = pinv(A') * D * x'.
        Matrix w_of_bits = sub_solver.pseudo_inverse() * rescale.asDiagonal();

        Best best;
        const std::uint64_t total = (std::uint64_t{1} << r) - 1;
        Vector xprime = Vector::Zero(r);
        for (std::uint64_t mask = 1; mask <= total; ++mask) {
            for (int j = 0; j < r; ++j) {
                xprime(j) = (mask & (std::uint64_t{1} << j)) ? 1.0 : 0.0;
            }
            Vector w = w_of_bits * xprime;
            Vector image = a * w;
            BinaryVector cand(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                cand[static_cast<std::size_t>(i)] = image(i) < 0.5 ? 0 : 1;
            }
            for (int j = 0; j < r; ++j) {
                cand[static_cast<std::size_t>(rows[static_cast<std::size_t>(j)])] =
                    xprime(j) == 1.0 ? 1 : 0;
            }
            if (!is_nonzero(cand)) continue;
            const double res = residual_solver.residual_sq(bits_to_vector(cand));
            Best contender{res, std::move(cand)};
            if (better(contender, best)) best = std::move(contender);
        }
        return best;
    };

    // The initial candidate set contains e1 (first standard basis vector).
    Best global;
    {
        BinaryVector e1(static_cast<std::size_t>(n), 0);
        e1[0] = 1;
        global.residual = residual_solver.residual_sq(bits_to_vector(e1));
        global.x = std::move(e1);
    }

    const int n_threads =
        std::min(resolve_threads(0), opts.trials);
    std::vector<Best> trial_best(static_cast<std::size_t>(opts.trials));
    if (n_threads == 1) {
        for (int t = 0; t < opts.trials; ++t) trial_best[t] = run_trial(t);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int w = 0; w < n_threads; ++w) {
            pool.emplace_back([&] {
                for (int t = next.fetch_add(1); t < opts.trials;
                     t = next.fetch_add(1)) {
                    trial_best[static_cast<std::size_t>(t)] = run_trial(t);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    for (auto& b : trial_best) {
        if (better(b, global)) global = std::move(b);
    }

    AttackReport report;
    report.algorithm = "regression";
    report.r_used = r;
    report.solutions.push_back(global.x);
    report.residuals.push_back(global.residual);
    report.elapsed_seconds = seconds_since(start);
    return report;
}

double attack_accuracy(const BinaryVector& x_star, const data::Dataset& ds,
                       const std::vector<Eigen::Index>& passive_cols) {
    if (static_cast<Eigen::Index>(x_star.size()) != ds.rows()) {
        throw DimensionMismatch("attack_accuracy: length mismatch");
    }
    std::vector<Vector> truths;
    std::set<Eigen::Index> passive(passive_cols.begin(), passive_cols.end());
    for (auto j : passive_cols) {
        if (ds.schema.columns[static_cast<std::size_t>(j)].kind ==
            data::ColumnKind::Binary) {
            truths.push_back(ds.features.col(j));
        }
    }
    for (int g : ds.schema.onehot_groups()) {
        std::vector<Eigen::Index> group;
        for (auto j : ds.schema.group_columns(g)) {
            if (passive.count(j)) group.push_back(j);
        }
        if (group.empty()) continue;
        if (group.size() > 20) {
            throw DimensionCap("one-hot group too large to enumerate");
        }
        for (std::uint32_t mask = 1; mask < (1u << group.size()); ++mask) {
            Vector sum = Vector::Zero(ds.rows());
            for (std::size_t j = 0; j < group.size(); ++j) {
                if (mask & (1u << j)) sum += ds.features.col(group[j]);
            }
            truths.push_back(std::move(sum));
        }
    }
    if (truths.empty()) {
        throw NoBinaryFeatures("no binary feature on the passive side");
    }
    double best = 0.0;
    for (const auto& truth : truths) {
        Eigen::Index match = 0;
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            const double xi = x_star[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
            if (xi == truth(i)) ++match;
        }
        best = std::max(best,
                        static_cast<double>(match) /
                            static_cast<double>(ds.rows()));
    }
    return best;
}

Matrix reduce_exact_cover(const exactcover::ExactCoverInstance& inst) {
    inst.validate();
    const int n = inst.n;
    const int m = static_cast<int>(inst.subsets.size());
    Matrix a = Matrix::Zero(n + m + 2, m + 1);
    a.topRows(m + 1) = Matrix::Identity(m + 1, m + 1);
    for (int j = 0; j < m; ++j) {
        for (int e : inst.subsets[static_cast<std::size_t>(j)]) {
            a(m + 1 + e, j) = 1.0;
        }
        a(n + m + 1, j) =
            2.0 * static_cast<double>(inst.subsets[static_cast<std::size_t>(j)].size());
    }
    for (int e = 0; e < n; ++e) a(m + 1 + e, m) = -1.0;
    a(n + m + 1, m) = -2.0 * static_cast<double>(n);
    return a;
}

ExactCoverDecision solve_exact_cover_via_attack(
    const exactcover::ExactCoverInstance& inst, int dimension_cap) {
    const int m = static_cast<int>(inst.subsets.size());
    if (m + 1 > dimension_cap) {
        throw DimensionCap("reduction dimension exceeds cap");
    }
    AttackMatrix am;
    am.a = reduce_exact_cover(inst);
    EquationsOptions opts;
    opts.binary_tol = 1e-6;  // integer instance; any slack is roundoff
    opts.dimension_cap = dimension_cap;
    AttackReport report = attack_linear_equations(am, opts);
    if (report.solutions.empty()) return {false, std::nullopt};
    for (const auto& sol : report.solutions) {
        // A1 w = w: the leading m+1 coordinates are the selector itself.
        if (!sol[static_cast<std::size_t>(m)]) continue;
        std::vector<int> cover;
        for (int j = 0; j < m; ++j) {
            if (sol[static_cast<std::size_t>(j)]) cover.push_back(j);
        }
        if (exactcover::verify_cover(inst, cover)) {
            return {true, std::move(cover)};
        }
    }
    throw Error("reduction produced solutions but no verifying cover");
}

std::string report_to_json(const AttackReport& report) {
    json j;
    j["algorithm"] = report.algorithm;
    j["elapsed_seconds"] = report.elapsed_seconds;
    if (report.r_used) j["r"] = *report.r_used;
    json sols = json::array();
    for (std::size_t i = 0; i < report.solutions.size(); ++i) {
        std::string bits(report.solutions[i].size(), '0');
        for (std::size_t k = 0; k < bits.size(); ++k) {
            if (report.solutions[i][k]) bits[k] = '1';
        }
        sols.push_back({{"bits", bits}, {"residual", report.residuals[i]}});
    }
    j["solutions"] = sols;
    return j.dump(2);
}

void save_report(const AttackReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << report_to_json(report) << "\n";
}

}  // namespace vflrecon::attack
