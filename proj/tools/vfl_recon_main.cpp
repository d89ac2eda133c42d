// vfl-recon: train | attack | bench | repro | inspect
//
// One JSON config drives every command; defaults are applied, echoed back to
// <out>/config.json, and a hash of the resolved config is embedded in every
// text output so results can be traced to the exact settings that produced
// them. Exit codes: 0 success, 1 runtime/criterion failure, 2 config error,
// 3 dimension cap exceeded.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vflrecon/attack.hpp"
#include "vflrecon/data.hpp"
#include "vflrecon/defense.hpp"
#include "vflrecon/experiments.hpp"
#include "vflrecon/model.hpp"
#include "vflrecon/vfl.hpp"

namespace {

using nlohmann::json;
using namespace vflrecon;

constexpr std::uint64_t kMix = 0x9e3779b97f4a7c15ULL;

json default_config() {
    json cfg;
    cfg["dataset"] = {{"kind", "synth"},
                      {"n", 2000},
                      {"d_a", 8},
                      {"binary_cols", json::array({2})},
                      {"onehot_group", json::array()},
                      {"label_flip", 0.0},
                      {"seed", 0},
                      {"path", ""},
                      {"label_column", "label"},
                      {"passive_cols", json::array()},
                      {"active_cols", json::array()}};
    cfg["d_b"] = 8;
    cfg["model"] = {{"hidden", json::array({32, 16})}};
    cfg["hyperparams"] = {{"epochs", 100},
                          {"base_lr", 0.1},
                          {"momentum", 0.9},
                          {"weight_decay", 1e-4},
                          {"decay_epochs", json::array({30, 60, 90})},
                          {"batch", 256}};
    cfg["defense"] = {{"kind", "none"}, {"sigma", 0.0}};
    cfg["attack"] = {{"algorithm", "equations"},
                     {"r", 0},
                     {"trials", 20},
                     {"binary_tol", 1e-4},
                     {"dimension_cap", 30},
                     {"transcript", ""}};
    cfg["bench"] = {{"ns", json::array({5000, 10000})},
                    {"d_min", 10},
                    {"d_max", 20},
                    {"seed", 77}};
    cfg["repro"] = {{"suite", "all"}};
    cfg["test_fraction"] = 0.1;
    json seeds = json::array();
    for (auto s : experiments::default_seeds()) seeds.push_back(s);
    cfg["seeds"] = seeds;
    cfg["out"] = "out";
    return cfg;
}

/// Recursive merge of `user` into `base`; unknown keys are config errors so
/// typos never silently fall back to defaults.
void merge_config(json& base, const json& user, const std::string& prefix) {
    if (!user.is_object()) {
        throw InvalidConfig("config section '" + prefix +
                            "' must be a JSON object");
    }
    for (const auto& [key, value] : user.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!base.contains(key)) {
            throw InvalidConfig("unknown config key '" + path + "'");
        }
        if (base[key].is_object()) {
            merge_config(base[key], value, path);
        } else {
            base[key] = value;
        }
    }
}

std::string config_hash(const json& cfg) {
    // FNV-1a 64 over the canonical dump.
    const std::string s = cfg.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

Matrix random_gaussian(Eigen::Index rows, Eigen::Index cols,
                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
    return m;
}

std::vector<Eigen::Index> to_index_vec(const json& arr) {
    std::vector<Eigen::Index> v;
    for (const auto& e : arr) v.push_back(e.get<Eigen::Index>());
    return v;
}

struct Problem {
    data::Dataset ds;                     // passive features + labels
    Matrix x_b;                           // active features
    std::vector<Eigen::Index> passive_cols;  // into ds for accuracy scoring
};

/// Materializes the dataset referenced by the config for run seed `seed`.
Problem build_problem(const json& cfg, std::uint64_t seed) {
    const json& d = cfg.at("dataset");
    const std::string kind = d.at("kind").get<std::string>();
    Problem out;
    if (kind == "synth") {
        data::SynthSpec spec;
        spec.n = d.at("n").get<Eigen::Index>();
        spec.d_a = d.at("d_a").get<Eigen::Index>();
        spec.binary_cols = to_index_vec(d.at("binary_cols"));
        spec.onehot_group = to_index_vec(d.at("onehot_group"));
        spec.label_flip = d.at("label_flip").get<double>();
        spec.seed = seed * 1000 + d.at("seed").get<std::uint64_t>();
        out.ds = data::synth_planted(spec);
        out.x_b = random_gaussian(spec.n, cfg.at("d_b").get<Eigen::Index>(),
                                  seed * 1000 + 777);
        for (Eigen::Index j = 0; j < spec.d_a; ++j) out.passive_cols.push_back(j);
        return out;
    }
    if (kind == "csv") {
        auto full = data::load_csv(d.at("path").get<std::string>(),
                                   d.at("label_column").get<std::string>());
        data::VerticalSplit split;
        split.passive_cols = to_index_vec(d.at("passive_cols"));
        split.active_cols = to_index_vec(d.at("active_cols"));
        if (split.passive_cols.empty() && split.active_cols.empty()) {
            const Eigen::Index cut = (full.cols() + 1) / 2;
            for (Eigen::Index j = 0; j < full.cols(); ++j) {
                (j < cut ? split.passive_cols : split.active_cols).push_back(j);
            }
        }
        auto [xa, xb] = data::vertical_split(full, split);
        // Re-index the dataset to the passive columns only; the attack and
        // its accuracy metric never see the active side.
        out.ds.features = std::move(xa);
        out.ds.labels = full.labels;
        out.ds.class_count = full.class_count;
        for (auto j : split.passive_cols) {
            out.ds.schema.columns.push_back(
                full.schema.columns[static_cast<std::size_t>(j)]);
        }
        out.x_b = std::move(xb);
        for (std::size_t j = 0; j < split.passive_cols.size(); ++j) {
            out.passive_cols.push_back(static_cast<Eigen::Index>(j));
        }
        return out;
    }
    throw InvalidConfig("dataset.kind must be 'synth' or 'csv'");
}

model::Hyperparams read_hp(const json& cfg) {
    const json& h = cfg.at("hyperparams");
    model::Hyperparams hp;
    hp.base_lr = h.at("base_lr").get<double>();
    hp.momentum = h.at("momentum").get<double>();
    hp.weight_decay = h.at("weight_decay").get<double>();
    hp.decay_epochs = h.at("decay_epochs").get<std::vector<int>>();
    return hp;
}

std::unique_ptr<vfl::PassiveParty> make_passive(
    const json& cfg, const Matrix& x_a, const Matrix& w_a,
    const model::Hyperparams& hp, std::uint64_t seed,
    vfl::MasqueradePassiveParty** masq_out) {
    const std::string kind = cfg.at("defense").at("kind").get<std::string>();
    const double sigma = cfg.at("defense").at("sigma").get<double>();
    if (masq_out != nullptr) *masq_out = nullptr;
    if (kind == "none") {
        return std::make_unique<vfl::PlainPassiveParty>(x_a, w_a, hp);
    }
    if (kind == "gaussian") {
        return std::make_unique<vfl::GaussianPassiveParty>(x_a, w_a, hp, sigma,
                                                           seed ^ kMix);
    }
    if (kind == "masquerade") {
        auto mp = defense::init_masquerade(w_a.rows(), x_a.cols(),
                                           seed ^ (3 * kMix));
        auto owned = std::make_unique<vfl::MasqueradePassiveParty>(
            x_a, std::move(mp), hp, seed ^ (5 * kMix));
        if (masq_out != nullptr) *masq_out = owned.get();
        return owned;
    }
    throw InvalidConfig("defense.kind must be 'none', 'gaussian' or "
                        "'masquerade'");
}

/// Shuffled row order shared by train/attack so ground truth lines up with
/// the transcript rows; returns the order and the train-row count.
std::pair<std::vector<Eigen::Index>, Eigen::Index> split_order(
    const json& cfg, std::uint64_t seed, Eigen::Index n) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 rng(seed ^ (7 * kMix));
    std::shuffle(order.begin(), order.end(), rng);
    const double frac = cfg.at("test_fraction").get<double>();
    Eigen::Index n_test = 0;
    if (frac > 0.0) {
        if (frac >= 1.0) throw InvalidConfig("test_fraction must be < 1");
        n_test = static_cast<Eigen::Index>(std::llround(frac * n));
        if (n_test >= n) throw InvalidConfig("test fraction leaves no rows");
    }
    return {std::move(order), n - n_test};
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
}

int cmd_train(const json& cfg, const std::string& hash) {
    const std::uint64_t seed = cfg.at("seeds").at(0).get<std::uint64_t>();
    Problem prob = build_problem(cfg, seed);
    const Eigen::Index n = prob.ds.rows();

    // Row-level train/test split shared by both parties.
    auto [order, n_train] = split_order(cfg, seed, n);
    const Eigen::Index n_test = n - n_train;
    Matrix xa_train(n_train, prob.ds.cols()), xb_train(n_train, prob.x_b.cols());
    std::vector<int> y_train(static_cast<std::size_t>(n_train));
    vfl::TestSet test;
    test.x_a.resize(n_test, prob.ds.cols());
    test.x_b.resize(n_test, prob.x_b.cols());
    test.labels.resize(static_cast<std::size_t>(n_test));
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index src = order[static_cast<std::size_t>(i)];
        if (i < n_train) {
            xa_train.row(i) = prob.ds.features.row(src);
            xb_train.row(i) = prob.x_b.row(src);
            y_train[static_cast<std::size_t>(i)] =
                prob.ds.labels[static_cast<std::size_t>(src)];
        } else {
            test.x_a.row(i - n_train) = prob.ds.features.row(src);
            test.x_b.row(i - n_train) = prob.x_b.row(src);
            test.labels[static_cast<std::size_t>(i - n_train)] =
                prob.ds.labels[static_cast<std::size_t>(src)];
        }
    }

    const model::Hyperparams hp = read_hp(cfg);
    const auto hidden =
        to_index_vec(cfg.at("model").at("hidden"));
    auto full = model::init_model(prob.ds.cols(), prob.x_b.cols(), hidden,
                                  prob.ds.class_count, seed);
    vfl::ActiveParty active = vfl::make_active_party(full, hp);
    auto passive = make_passive(cfg, xa_train, full.w_a, hp, seed, nullptr);

    vfl::TrainConfig tc;
    tc.epochs = cfg.at("hyperparams").at("epochs").get<int>();
    tc.batch_size = cfg.at("hyperparams").at("batch").get<Eigen::Index>();
    tc.hp = hp;
    tc.seed = seed;
    auto result = vfl::run_training(active, *passive, xb_train, y_train, tc,
                                    n_test > 0 ? &test : nullptr);
    auto inference = vfl::collect_inference_transcript(*passive);

    const std::filesystem::path out_dir(cfg.at("out").get<std::string>());
    auto metrics = open_out(out_dir / "metrics.csv");
    metrics << "# config_hash=" << hash << "\n";
    metrics << "epoch,loss,test_acc\n";
    for (const auto& m : result.metrics) {
        metrics << m.epoch << "," << m.train_loss << "," << m.test_accuracy
                << "\n";
    }
    model::save_checkpoint(active.net, (out_dir / "checkpoint").string(),
                           tc.epochs);
    vfl::save_transcript(inference, (out_dir / "transcript.bin").string());

    std::cout << "trained " << tc.epochs << " epochs on " << n_train
              << " rows (defense "
              << cfg.at("defense").at("kind").get<std::string>()
              << "); final loss " << result.metrics.back().train_loss;
    if (n_test > 0) {
        std::cout << ", test accuracy " << result.metrics.back().test_accuracy;
    }
    std::cout << "\noutputs: metrics.csv, checkpoint.{bin,json}, "
                 "transcript.bin in "
              << out_dir.string() << "\n";
    return 0;
}

int cmd_attack(const json& cfg, const std::string& hash) {
    const json& a = cfg.at("attack");
    const std::string path = a.at("transcript").get<std::string>();
    if (path.empty()) {
        throw InvalidConfig("attack.transcript must name a transcript file");
    }
    auto transcript = vfl::load_transcript(path);
    auto am = attack::build_attack_matrix(transcript);

    const std::string algorithm = a.at("algorithm").get<std::string>();
    attack::AttackReport report;
    if (algorithm == "equations") {
        attack::EquationsOptions opts;
        opts.binary_tol = a.at("binary_tol").get<double>();
        opts.dimension_cap = a.at("dimension_cap").get<int>();
        report = attack::attack_linear_equations(am, opts);
    } else if (algorithm == "regression") {
        attack::RegressionOptions opts;
        opts.r = a.at("r").get<int>();
        opts.trials = a.at("trials").get<int>();
        opts.dimension_cap = a.at("dimension_cap").get<int>();
        opts.seed = cfg.at("seeds").at(0).get<std::uint64_t>();
        report = attack::attack_linear_regression(am, opts);
    } else {
        throw InvalidConfig("attack.algorithm must be 'equations' or "
                            "'regression'");
    }

    const std::filesystem::path out_dir(cfg.at("out").get<std::string>());
    json rj = json::parse(attack::report_to_json(report));
    rj["config_hash"] = hash;
    rj["transcript"] = path;
    open_out(out_dir / "attack.json") << rj.dump(2) << "\n";

    auto acc_csv = open_out(out_dir / "accuracy.csv");
    acc_csv << "# config_hash=" << hash << "\n";
    acc_csv << "solution,residual,accuracy\n";
    bool scored = false;
    if (!report.solutions.empty()) {
        const std::uint64_t seed = cfg.at("seeds").at(0).get<std::uint64_t>();
        Problem prob = build_problem(cfg, seed);
        const Eigen::Index sol_rows =
            static_cast<Eigen::Index>(report.solutions[0].size());
        auto [order, n_train] = split_order(cfg, seed, prob.ds.rows());
        if (sol_rows == n_train && n_train < prob.ds.rows()) {
            // The transcript came from a train run that held rows out for
            // testing; reorder the ground truth the same way.
            data::Dataset sub;
            sub.features.resize(n_train, prob.ds.cols());
            sub.labels.resize(static_cast<std::size_t>(n_train));
            for (Eigen::Index i = 0; i < n_train; ++i) {
                const Eigen::Index src = order[static_cast<std::size_t>(i)];
                sub.features.row(i) = prob.ds.features.row(src);
                sub.labels[static_cast<std::size_t>(i)] =
                    prob.ds.labels[static_cast<std::size_t>(src)];
            }
            sub.schema = prob.ds.schema;
            sub.class_count = prob.ds.class_count;
            prob.ds = std::move(sub);
        }
        if (sol_rows != prob.ds.rows()) {
            acc_csv << "# transcript rows (" << sol_rows
                    << ") do not match the configured dataset; accuracy "
                       "not applicable\n";
        } else {
            try {
                for (std::size_t i = 0; i < report.solutions.size(); ++i) {
                    const double acc = attack::attack_accuracy(
                        report.solutions[i], prob.ds, prob.passive_cols);
                    acc_csv << i << "," << report.residuals[i] << "," << acc
                            << "\n";
                }
                scored = true;
            } catch (const NoBinaryFeatures&) {
                acc_csv << "# no binary feature on the passive side; "
                           "accuracy not applicable\n";
            }
        }
    }

    std::cout << "attack '" << algorithm << "' on " << path << ": "
              << report.solutions.size() << " solution(s) in "
              << report.elapsed_seconds << "s ("
              << (scored ? "accuracy in accuracy.csv"
                         : "no ground-truth accuracy") << ")\n";
    return 0;
}

int cmd_bench(const json& cfg, const std::string& hash) {
    const json& b = cfg.at("bench");
    std::vector<Eigen::Index> ns;
    for (const auto& e : b.at("ns")) ns.push_back(e.get<Eigen::Index>());
    if (ns.empty()) throw InvalidConfig("bench.ns must be nonempty");
    auto cells = experiments::bench_equations(
        ns, b.at("d_min").get<int>(), b.at("d_max").get<int>(),
        b.at("seed").get<std::uint64_t>());

    const std::filesystem::path out_dir(cfg.at("out").get<std::string>());
    auto csv = open_out(out_dir / "timing.csv");
    csv << "# config_hash=" << hash << "\n";
    csv << "n,d_a,seconds\n";
    for (const auto& c : cells) {
        csv << c.n << "," << c.d << "," << c.seconds << "\n";
    }
    const double slope = experiments::log2_slope(cells, ns[0]);
    std::cout << cells.size() << " cells timed; log2-time slope vs d_A at n="
              << ns[0] << ": " << slope << "\n";
    return 0;
}

int cmd_repro(const json& cfg, const std::string& hash) {
    const std::string suite = cfg.at("repro").at("suite").get<std::string>();
    std::vector<experiments::CriterionResult> results;
    if (suite == "all") {
        results = experiments::run_all_criteria();
    } else {
        results = experiments::run_suite(suite);
    }
    int failures = 0;
    json jr = json::array();
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id
                  << " (" << r.name << "): " << r.detail << "\n";
        jr.push_back({{"id", r.id},
                      {"name", r.name},
                      {"pass", r.pass},
                      {"detail", r.detail}});
        if (!r.pass) ++failures;
    }
    const std::filesystem::path out_dir(cfg.at("out").get<std::string>());
    json doc;
    doc["config_hash"] = hash;
    doc["suite"] = suite;
    doc["results"] = jr;
    open_out(out_dir / "repro.json") << doc.dump(2) << "\n";
    std::cout << (failures == 0 ? "suite passed" : "suite FAILED") << " ("
              << results.size() - failures << "/" << results.size() << ")\n";
    return failures == 0 ? 0 : 1;
}

int cmd_inspect(const std::string& path) {
    auto t = vfl::load_transcript(path);
    const Matrix stacked = t.stacked();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (Eigen::Index i = 0; i < stacked.rows(); ++i) {
        for (Eigen::Index j = 0; j < stacked.cols(); ++j) {
            std::uint64_t bits = 0;
            const double v = stacked(i, j);
            std::memcpy(&bits, &v, sizeof(bits));
            for (int byte = 0; byte < 8; ++byte) {
                h ^= (bits >> (8 * byte)) & 0xff;
                h *= 0x100000001b3ULL;
            }
        }
    }
    std::cout << "phase: "
              << (t.phase == vfl::Phase::Train ? "train" : "inference")
              << "\ndefense: " << t.defense << " (sigma " << t.sigma << ")"
              << "\nk: " << t.k << "\nframes: " << t.frames.size()
              << "\ntotal rows: " << t.total_rows() << "\nchecksum: "
              << std::hex << h << std::dec << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-party split-training simulator with binary-feature "
                 "reconstruction attacks and defenses"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::int64_t seed_override = -1;
    std::string inspect_path;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", seed_override,
                        "override the seed list with this single seed");
        sub->add_option("--out", out_override, "output directory");
    };
    auto* train = app.add_subcommand("train", "split training run");
    auto* atk = app.add_subcommand("attack", "attack a recorded transcript");
    auto* bench = app.add_subcommand("bench", "time the equation search");
    auto* repro = app.add_subcommand("repro", "run a named criterion suite");
    auto* inspect =
        app.add_subcommand("inspect", "print transcript shape and checksum");
    for (auto* sub : {train, atk, bench, repro}) add_common(sub);
    inspect->add_option("transcript", inspect_path, "transcript file")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (inspect->parsed()) return cmd_inspect(inspect_path);

        json cfg = default_config();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw InvalidConfig("cannot open config " + config_path);
            json user;
            try {
                user = json::parse(in);
            } catch (const json::exception& e) {
                throw InvalidConfig(std::string("config parse error: ") +
                                    e.what());
            }
            merge_config(cfg, user, "");
        }
        if (seed_override >= 0) {
            cfg["seeds"] = json::array({seed_override});
        }
        if (!out_override.empty()) cfg["out"] = out_override;
        if (cfg.at("seeds").empty()) {
            throw InvalidConfig("seed list must be nonempty");
        }

        const std::string hash = config_hash(cfg);
        const std::filesystem::path out_dir(cfg.at("out").get<std::string>());
        std::filesystem::create_directories(out_dir);
        {
            json echo = cfg;
            echo["config_hash"] = hash;
            open_out(out_dir / "config.json") << echo.dump(2) << "\n";
        }

        if (train->parsed()) return cmd_train(cfg, hash);
        if (atk->parsed()) return cmd_attack(cfg, hash);
        if (bench->parsed()) return cmd_bench(cfg, hash);
        if (repro->parsed()) return cmd_repro(cfg, hash);
        throw InvalidConfig("no subcommand");
    } catch (const DimensionCap& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const InvalidConfig& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
