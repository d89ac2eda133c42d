#include "vflrecon/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <set>
#include <sstream>

#include "vflrecon/exactcover.hpp"

namespace vflrecon::experiments {

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

attack::BinaryVector column_bits(const Matrix& m, Eigen::Index col) {
    attack::BinaryVector b(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        b[static_cast<std::size_t>(i)] = m(i, col) > 0.5 ? 1 : 0;
    }
    return b;
}

attack::BinaryVector vector_bits(const Vector& v) {
    attack::BinaryVector b(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        b[static_cast<std::size_t>(i)] = v(i) > 0.5 ? 1 : 0;
    }
    return b;
}

std::vector<Eigen::Index> all_cols(Eigen::Index d) {
    std::vector<Eigen::Index> cols(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) cols[static_cast<std::size_t>(j)] = j;
    return cols;
}

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(4);
    out << v;
    return out.str();
}

constexpr std::uint64_t kMix = 0x9e3779b97f4a7c15ULL;

}  // namespace

std::vector<std::uint64_t> default_seeds() {
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t i = 1; i <= 20; ++i) seeds.push_back(i);
    return seeds;
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    PipelineResult out;
    data::SynthSpec synth = cfg.synth;
    synth.seed = cfg.seed * 1000 + synth.seed;
    out.ds = data::synth_planted(synth);
    out.x_b = random_gaussian(synth.n, cfg.d_b, cfg.seed * 1000 + 777);

    model::Hyperparams hp;
    auto full = model::init_model(synth.d_a, cfg.d_b, cfg.hidden, 2, cfg.seed);
    vfl::ActiveParty active = vfl::make_active_party(full, hp);

    std::unique_ptr<vfl::PassiveParty> passive;
    vfl::MasqueradePassiveParty* masq = nullptr;
    if (cfg.defense == "none") {
        passive = std::make_unique<vfl::PlainPassiveParty>(out.ds.features,
                                                           full.w_a, hp);
    } else if (cfg.defense == "gaussian") {
        passive = std::make_unique<vfl::GaussianPassiveParty>(
            out.ds.features, full.w_a, hp, cfg.sigma, cfg.seed ^ kMix);
    } else if (cfg.defense == "masquerade") {
        auto mp = defense::init_masquerade(full.k(), synth.d_a,
                                           cfg.seed ^ (3 * kMix));
        auto owned = std::make_unique<vfl::MasqueradePassiveParty>(
            out.ds.features, std::move(mp), hp, cfg.seed ^ (5 * kMix));
        masq = owned.get();
        passive = std::move(owned);
    } else {
        throw InvalidConfig("unknown defense " + cfg.defense);
    }

    vfl::TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.hp = hp;
    tc.seed = cfg.seed;
    out.metrics =
        vfl::run_training(active, *passive, out.x_b, out.ds.labels, tc).metrics;
    out.inference = vfl::collect_inference_transcript(*passive);
    if (masq != nullptr) out.fabricated = masq->fabricated_bits();
    return out;
}

std::vector<SweepCell> gaussian_regression_sweep(
    const std::vector<double>& sigmas,
    const std::vector<std::uint64_t>& seeds) {
    std::vector<SweepCell> cells;
    for (double sigma : sigmas) {
        for (std::uint64_t seed : seeds) {
            // Small transcript on purpose: the true bits win the residual
            // race only while n * sigma^2 * ||w||^2 stays below the
            // ~(1 - d/n) floor of the sparse junk candidates, so this is the
            // regime where the sigma trend is visible at all.
            PipelineConfig cfg;
            cfg.synth.n = 60;
            cfg.synth.d_a = 8;
            cfg.synth.binary_cols = {2};
            cfg.d_b = 2;
            cfg.hidden = {10, 8};
            cfg.epochs = 30;
            cfg.batch_size = 32;
            cfg.defense = "gaussian";
            cfg.sigma = sigma;
            cfg.seed = seed;
            auto run = run_pipeline(cfg);
            auto am = attack::build_attack_matrix(run.inference);
            attack::RegressionOptions opts;
            opts.trials = 20;
            opts.seed = seed;
            auto report = attack::attack_linear_regression(am, opts);
            SweepCell cell;
            cell.sigma = sigma;
            cell.seed = seed;
            cell.solutions = report.solutions.size();
            cell.accuracy = attack::attack_accuracy(
                report.solutions.front(), run.ds, all_cols(cfg.synth.d_a));
            cells.push_back(cell);
        }
    }
    return cells;
}

std::vector<BenchCell> bench_equations(const std::vector<Eigen::Index>& ns,
                                       int d_min, int d_max,
                                       std::uint64_t seed) {
    if (d_min < 1 || d_max < d_min) throw InvalidConfig("bad d_A range");
    std::vector<BenchCell> cells;
    bool warm = false;
    for (Eigen::Index n : ns) {
        for (int d = d_min; d <= d_max; ++d) {
            attack::AttackMatrix am;
            am.a = random_gaussian(n, d, seed + static_cast<std::uint64_t>(d));
            attack::EquationsOptions opts;  // enforces the dimension cap
            if (!warm) {
                attack::attack_linear_equations(am, opts);
                warm = true;
            }
            auto report = attack::attack_linear_equations(am, opts);
            cells.push_back({n, d, report.elapsed_seconds});
        }
    }
    return cells;
}

double log2_slope(const std::vector<BenchCell>& cells, Eigen::Index n) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (const auto& c : cells) {
        if (c.n != n) continue;
        const double x = static_cast<double>(c.d);
        const double y = std::log2(c.seconds);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
    }
    if (count < 2) throw InvalidConfig("need at least two cells for a slope");
    const double k = static_cast<double>(count);
    return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

CriterionResult criterion_undefended_completeness() {
    CriterionResult res{1, "undefended attack recovers planted bits exactly",
                        false, ""};
    int runs = 0, exact = 0;
    for (Eigen::Index d_a : {8, 10, 15}) {
        int idx = 0;
        for (std::uint64_t seed : default_seeds()) {
            PipelineConfig cfg;
            cfg.synth.n = 5000;
            cfg.synth.d_a = d_a;
            const int planted = 1 + idx % 5;
            for (int j = 0; j < planted; ++j) cfg.synth.binary_cols.push_back(j);
            cfg.hidden = {static_cast<Eigen::Index>(d_a + cfg.d_b + 8), 16};
            cfg.epochs = 2;
            cfg.seed = seed;
            ++idx;

            auto run = run_pipeline(cfg);
            auto am = attack::build_attack_matrix(run.inference);
            auto report = attack::attack_linear_equations(am);

            bool ok = true;
            for (int j = 0; j < planted; ++j) {
                auto truth = column_bits(run.ds.features, j);
                if (std::find(report.solutions.begin(), report.solutions.end(),
                              truth) == report.solutions.end()) {
                    ok = false;
                }
            }
            for (const auto& sol : report.solutions) {
                if (attack::attack_accuracy(sol, run.ds, all_cols(d_a)) !=
                    1.0) {
                    ok = false;
                }
            }
            ++runs;
            if (ok) ++exact;
        }
    }
    res.pass = exact == runs;
    res.detail = std::to_string(exact) + "/" + std::to_string(runs) +
                 " runs with accuracy 1.0";
    return res;
}

CriterionResult criterion_onehot_solution_set() {
    CriterionResult res{2, "one-hot group yields exactly the 15 subset sums",
                        false, ""};
    int runs = 0, exact = 0;
    for (std::uint64_t seed : default_seeds()) {
        PipelineConfig cfg;
        cfg.synth.n = 2000;
        cfg.synth.d_a = 8;
        cfg.synth.onehot_group = {2, 3, 4, 5};
        cfg.epochs = 2;
        cfg.seed = seed;
        auto run = run_pipeline(cfg);
        auto am = attack::build_attack_matrix(run.inference);
        auto report = attack::attack_linear_equations(am);

        std::set<attack::BinaryVector> expected;
        for (std::uint32_t mask = 1; mask < 16; ++mask) {
            Vector sum = Vector::Zero(cfg.synth.n);
            for (int j = 0; j < 4; ++j) {
                if (mask & (1u << j)) sum += run.ds.features.col(2 + j);
            }
            expected.insert(vector_bits(sum));
        }
        std::set<attack::BinaryVector> got(report.solutions.begin(),
                                           report.solutions.end());
        ++runs;
        if (got == expected) ++exact;
    }
    res.pass = exact == runs;
    res.detail = std::to_string(exact) + "/" + std::to_string(runs) +
                 " seeds with exact 15-element solution sets";
    return res;
}

CriterionResult criterion_exact_cover_oracle() {
    CriterionResult res{3, "exact cover decisions match the brute-force oracle",
                        false, ""};
    int agree = 0, yes = 0;
    for (int i = 0; i < 100; ++i) {
        const int n = 3 + i % 6;
        const int m = 3 + i % 4;
        auto inst = exactcover::random_instance(
            n, m, 0.35, 9000 + static_cast<std::uint64_t>(i));
        auto oracle = exactcover::brute_force_cover(inst);
        auto via = attack::solve_exact_cover_via_attack(inst);
        bool ok = via.covered == oracle.covered;
        if (via.covered) {
            ++yes;
            ok = ok && exactcover::verify_cover(inst, *via.cover);
        }
        if (ok) ++agree;
    }
    res.pass = agree == 100;
    res.detail = std::to_string(agree) + "/100 agreements, " +
                 std::to_string(yes) + " YES instances all verified";
    return res;
}

CriterionResult criterion_invariance() {
    CriterionResult res{4, "orthogonal reparameterization leaves transcripts "
                           "unchanged",
                        false, ""};
    vfl::InvarianceConfig cfg;
    auto id_res =
        vfl::invariance_harness(42, Matrix::Identity(cfg.d_a, cfg.d_a), cfg);
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 10; ++i) {
        Matrix u = linalg::random_orthogonal(cfg.d_a, 4000 + i);
        auto r = vfl::invariance_harness(100 + i, u, cfg);
        worst = std::max(worst, r.max_divergence);
    }
    res.pass = id_res.max_divergence == 0.0 && worst <= 1e-6;
    res.detail = "identity divergence " + fmt(id_res.max_divergence) +
                 ", max over 10 random U " + fmt(worst);
    return res;
}

CriterionResult criterion_gaussian_blocks_equations() {
    CriterionResult res{5, "sigma 0.5 noise empties the equation search",
                        false, ""};
    int runs = 0, empty = 0;
    for (std::uint64_t seed : default_seeds()) {
        PipelineConfig cfg;
        cfg.synth.n = 2000;
        cfg.synth.d_a = 8;
        cfg.synth.binary_cols = {0, 1};
        cfg.hidden = {16, 12};
        cfg.epochs = 2;
        cfg.defense = "gaussian";
        cfg.sigma = 0.5;
        cfg.seed = seed;
        auto run = run_pipeline(cfg);
        auto am = attack::build_attack_matrix(run.inference);
        auto report = attack::attack_linear_equations(am);
        ++runs;
        if (report.solutions.empty()) ++empty;
    }
    res.pass = empty == runs;
    res.detail = std::to_string(empty) + "/" + std::to_string(runs) +
                 " seeds with empty solution sets";
    return res;
}

CriterionResult criterion_gaussian_degrades_regression() {
    CriterionResult res{6, "regression attack accuracy drops as sigma grows",
                        false, ""};
    const std::vector<double> sigmas{0.1, 0.2, 0.3, 0.4, 0.5};
    auto cells = gaussian_regression_sweep(sigmas, default_seeds());
    std::string trend;
    double low = 0.0, high = 0.0;
    for (double sigma : sigmas) {
        double sum = 0.0;
        int count = 0;
        for (const auto& c : cells) {
            if (c.sigma == sigma) {
                sum += c.accuracy;
                ++count;
            }
        }
        const double mean = sum / count;
        if (sigma == 0.1) low = mean;
        if (sigma == 0.5) high = mean;
        trend += (trend.empty() ? "" : " ") + fmt(sigma) + ":" + fmt(mean);
    }
    res.pass = high < low - 0.05;
    res.detail = "mean accuracy by sigma " + trend;
    return res;
}

CriterionResult criterion_masquerade_single_solution() {
    CriterionResult res{7, "masquerade plants a single fabricated solution",
                        false, ""};
    int runs = 0, ok_runs = 0;
    for (Eigen::Index d_a : {8, 10, 15}) {
        for (std::uint64_t seed : default_seeds()) {
            PipelineConfig cfg;
            cfg.synth.n = 2000;
            cfg.synth.d_a = d_a;
            cfg.synth.binary_cols = {0, 1};
            cfg.hidden = {static_cast<Eigen::Index>(d_a + cfg.d_b + 8), 16};
            cfg.epochs = 2;
            cfg.defense = "masquerade";
            cfg.seed = seed;
            auto run = run_pipeline(cfg);
            auto am = attack::build_attack_matrix(run.inference);
            auto report = attack::attack_linear_equations(am);
            bool ok = report.solutions.size() == 1 &&
                      report.solutions.front() == vector_bits(run.fabricated);
            if (ok) {
                const double acc = attack::attack_accuracy(
                    report.solutions.front(), run.ds, all_cols(d_a));
                ok = acc <= 0.65;
            }
            ++runs;
            if (ok) ++ok_runs;
        }
    }
    res.pass = ok_runs == runs;
    res.detail = std::to_string(ok_runs) + "/" + std::to_string(runs) +
                 " runs: one solution, equals fabricated bits, accuracy <= "
                 "0.65";
    return res;
}

CriterionResult criterion_masquerade_utility() {
    CriterionResult res{8, "masquerade keeps training loss within 10%",
                        false, ""};
    double worst_rel = 0.0;
    double plain_mean = 0.0, masq_mean = 0.0;
    const auto seeds = default_seeds();
    auto final_loss = [](const std::vector<vfl::EpochMetrics>& m) {
        // mean over the last three epochs to smooth batch noise
        double s = 0.0;
        for (std::size_t i = m.size() - 3; i < m.size(); ++i) {
            s += m[i].train_loss;
        }
        return s / 3.0;
    };
    for (std::uint64_t seed : seeds) {
        PipelineConfig cfg;
        cfg.synth.n = 2000;
        cfg.synth.d_a = 8;
        cfg.synth.binary_cols = {0, 1};
        // Flipped labels give the task an irreducible loss floor; without it
        // both runs converge to ~0 and a relative comparison is vacuous.
        cfg.synth.label_flip = 0.15;
        cfg.hidden = {16, 12};
        cfg.epochs = 30;
        cfg.seed = seed;
        auto plain = run_pipeline(cfg);
        cfg.defense = "masquerade";
        auto masq = run_pipeline(cfg);
        const double lp = final_loss(plain.metrics);
        const double lm = final_loss(masq.metrics);
        plain_mean += lp / seeds.size();
        masq_mean += lm / seeds.size();
        worst_rel = std::max(worst_rel, std::abs(lm - lp) / lp);
    }
    const double rel = std::abs(masq_mean - plain_mean) / plain_mean;
    res.pass = rel <= 0.10;
    res.detail = "mean final loss plain " + fmt(plain_mean) + " vs masquerade " +
                 fmt(masq_mean) + " (relative gap " + fmt(rel) +
                 ", worst per-seed " + fmt(worst_rel) + ")";
    return res;
}

CriterionResult criterion_runtime_scaling() {
    CriterionResult res{9, "runtime scales 2^d_A and ~linearly in n", false,
                        ""};
    auto cells = bench_equations({5000}, 14, 20, 77);
    const double slope = log2_slope(cells, 5000);

    auto ratio_of = [](const std::vector<BenchCell>& v, Eigen::Index n) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : v) {
            if (c.n == n) best = std::min(best, c.seconds);
        }
        return best;
    };
    // min of 3 timings per n at fixed d_A = 16
    std::vector<BenchCell> ratio_cells;
    for (int rep = 0; rep < 3; ++rep) {
        auto more = bench_equations({5000, 10000}, 16, 16,
                                    177 + static_cast<std::uint64_t>(rep));
        ratio_cells.insert(ratio_cells.end(), more.begin(), more.end());
    }
    const double ratio = ratio_of(ratio_cells, 10000) / ratio_of(ratio_cells, 5000);

    res.pass = std::abs(slope - 1.0) <= 0.2 && ratio >= 1.5 && ratio <= 3.0;
    res.detail = "log2-time slope over d_A in [14,20]: " + fmt(slope) +
                 "; time ratio n 10000/5000: " + fmt(ratio);
    return res;
}

CriterionResult criterion_numerics() {
    CriterionResult res{10, "forward, gradient and leverage-score numerics",
                        false, ""};
    std::mt19937_64 rng(424242);

    // Split vs centralized forward over 1000 random cases.
    double worst_forward = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        const Eigen::Index d_a = 2 + static_cast<Eigen::Index>(rng() % 5);
        const Eigen::Index d_b = 2 + static_cast<Eigen::Index>(rng() % 5);
        const Eigen::Index k = d_a + d_b + static_cast<Eigen::Index>(rng() % 8);
        const Eigen::Index b = 1 + static_cast<Eigen::Index>(rng() % 8);
        auto m = model::init_model(d_a, d_b, {k, 6}, 2, rng());
        Matrix xa = random_gaussian(b, d_a, rng());
        Matrix xb = random_gaussian(b, d_b, rng());
        Matrix z = xa * m.w_a.transpose() + xb * m.w_b.transpose();
        worst_forward = std::max(
            worst_forward, (model::forward_from_z(m, z) -
                            model::forward_centralized(m, xa, xb))
                               .cwiseAbs()
                               .maxCoeff());
    }

    // Analytic model gradients against central finite differences.
    double worst_grad = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
        auto m = model::init_model(3, 4, {10, 6}, 2, 9000 + rep);
        Matrix xa = random_gaussian(8, 3, rng());
        Matrix xb = random_gaussian(8, 4, rng());
        std::vector<int> y(8);
        for (auto& v : y) v = static_cast<int>(rng() % 2);
        auto g = model::loss_and_grads(m, xa, xb, y, 1e-4);
        const double eps = 1e-5;
        auto fd_rel = [&](double& p, double analytic) {
            const double saved = p;
            p = saved + eps;
            const double lp = model::loss_and_grads(m, xa, xb, y, 1e-4).loss;
            p = saved - eps;
            const double lm = model::loss_and_grads(m, xa, xb, y, 1e-4).loss;
            p = saved;
            const double fd = (lp - lm) / (2 * eps);
            return std::abs(analytic - fd) / std::max(std::abs(fd), 1e-6);
        };
        worst_grad = std::max(worst_grad, fd_rel(m.w_a(0, 0), g.w_a(0, 0)));
        worst_grad = std::max(worst_grad, fd_rel(m.w_b(1, 1), g.w_b(1, 1)));
        worst_grad = std::max(
            worst_grad, fd_rel(m.hidden[0].weight(0, 0),
                               g.hidden[0].weight(0, 0)));
        worst_grad = std::max(
            worst_grad, fd_rel(m.hidden[1].bias(0), g.hidden[1].bias(0)));
    }

    // Masquerade gradients against the same probe.
    for (int rep = 0; rep < 10; ++rep) {
        auto mp = defense::init_masquerade(6, 4, 9100 + rep);
        Matrix x = random_gaussian(7, 4, rng());
        Vector bits(7);
        for (Eigen::Index i = 0; i < 7; ++i) bits(i) = rng() % 2;
        Matrix target = random_gaussian(7, 6, rng());
        Matrix dl_dz = defense::masquerade_forward(mp, x, bits) - target;
        auto g = defense::masquerade_backward(mp, x, bits, dl_dz);
        const double eps = 1e-6;
        auto probe = [&]() {
            return 0.5 * (defense::masquerade_forward(mp, x, bits) - target)
                             .squaredNorm();
        };
        auto fd_rel = [&](double& p, double analytic) {
            const double saved = p;
            p = saved + eps;
            const double lp = probe();
            p = saved - eps;
            const double lm = probe();
            p = saved;
            const double fd = (lp - lm) / (2 * eps);
            return std::abs(analytic - fd) / std::max(std::abs(fd), 1e-6);
        };
        worst_grad = std::max(worst_grad, fd_rel(mp.p(0, 0), g.p(0, 0)));
        worst_grad = std::max(worst_grad, fd_rel(mp.q(1, 1), g.q(1, 1)));
        worst_grad = std::max(worst_grad, fd_rel(mp.u(2), g.u(2)));
    }

    // Leverage scores: normalization and the hat-matrix diagonal oracle.
    double worst_sum = 0.0, worst_hat = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::Index n = 10 + static_cast<Eigen::Index>(rng() % 30);
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng() % 5);
        Matrix a = random_gaussian(n, d, rng());
        Vector p = linalg::leverage_scores(a);
        worst_sum = std::max(worst_sum, std::abs(p.sum() - 1.0));
        Matrix gram_inv = (a.transpose() * a).inverse();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double hat =
                (a.row(i) * gram_inv * a.row(i).transpose())(0) /
                static_cast<double>(d);
            worst_hat = std::max(worst_hat, std::abs(p(i) - hat));
        }
    }

    res.pass = worst_forward <= 1e-9 && worst_grad <= 1e-4 &&
               worst_sum <= 1e-10 && worst_hat <= 1e-9;
    res.detail = "forward " + fmt(worst_forward) + ", grad rel " +
                 fmt(worst_grad) + ", leverage sum " + fmt(worst_sum) +
                 ", hat diag " + fmt(worst_hat);
    return res;
}

std::vector<CriterionResult> run_all_criteria() {
    return {
        criterion_undefended_completeness(),
        criterion_onehot_solution_set(),
        criterion_exact_cover_oracle(),
        criterion_invariance(),
        criterion_gaussian_blocks_equations(),
        criterion_gaussian_degrades_regression(),
        criterion_masquerade_single_solution(),
        criterion_masquerade_utility(),
        criterion_runtime_scaling(),
        criterion_numerics(),
    };
}

std::vector<std::string> suite_names() {
    return {"no-defense", "gaussian-sweep", "masquerade", "exact-cover",
            "invariance"};
}

std::vector<CriterionResult> run_suite(const std::string& name) {
    if (name == "no-defense") {
        return {criterion_undefended_completeness(),
                criterion_onehot_solution_set()};
    }
    if (name == "gaussian-sweep") {
        return {criterion_gaussian_blocks_equations(),
                criterion_gaussian_degrades_regression()};
    }
    if (name == "masquerade") {
        return {criterion_masquerade_single_solution(),
                criterion_masquerade_utility()};
    }
    if (name == "exact-cover") {
        return {criterion_exact_cover_oracle()};
    }
    if (name == "invariance") {
        return {criterion_invariance()};
    }
    throw InvalidConfig("unknown suite " + name);
}

}  // namespace vflrecon::experiments
