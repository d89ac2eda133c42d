#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "vflrecon/vfl.hpp"

using namespace vflrecon;
using namespace vflrecon::vfl;

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

struct Task {
    Matrix x_a, x_b;
    std::vector<int> y;
};

Task make_task(Eigen::Index n, Eigen::Index d_a, Eigen::Index d_b,
               std::uint64_t seed) {
    Task t;
    t.x_a = random_gaussian(n, d_a, seed);
    t.x_b = random_gaussian(n, d_b, seed + 1);
    Vector v_a = random_gaussian(d_a, 1, seed + 2).col(0);
    Vector v_b = random_gaussian(d_b, 1, seed + 3).col(0);
    Vector s = t.x_a * v_a + t.x_b * v_b;
    t.y.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        t.y[static_cast<std::size_t>(i)] = s(i) > 0.0 ? 1 : 0;
    }
    return t;
}

double frame_diff(const Transcript& a, const Transcript& b) {
    REQUIRE(a.frames.size() == b.frames.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
        d = std::max(d, (a.frames[i].z_a - b.frames[i].z_a)
                            .cwiseAbs()
                            .maxCoeff());
    }
    return d;
}

}  // namespace

TEST_CASE("epoch_batches partitions the index set") {
    auto batches = epoch_batches(103, 32, 5, 2);
    REQUIRE(batches.size() == 4);
    CHECK(batches[0].size() == 32);
    CHECK(batches[3].size() == 7);
    std::set<Eigen::Index> seen;
    for (const auto& b : batches) seen.insert(b.begin(), b.end());
    CHECK(seen.size() == 103);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 102);
}

TEST_CASE("epoch_batches deterministic, distinct across epochs") {
    auto a = epoch_batches(50, 16, 9, 0);
    auto b = epoch_batches(50, 16, 9, 0);
    auto c = epoch_batches(50, 16, 9, 1);
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("run_training with zero epochs is a no-op") {
    Task t = make_task(20, 3, 3, 1);
    auto full = model::init_model(3, 3, {8}, 2, 1);
    model::Hyperparams hp;
    ActiveParty active = make_active_party(full, hp);
    PlainPassiveParty passive(t.x_a, full.w_a, hp);
    TrainConfig cfg;
    cfg.epochs = 0;
    auto res = run_training(active, passive, t.x_b, t.y, cfg);
    CHECK(res.transcript.frames.empty());
    CHECK(res.metrics.empty());
    CHECK((passive.weight() - full.w_a).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("split training matches a centralized oracle") {
    // The protocol only moves z_A and dL/dz across the boundary; the final
    // parameters must coincide with plain centralized SGD on the same
    // batches.
    Task t = make_task(60, 4, 5, 2);
    auto central = model::init_model(4, 5, {16, 8}, 2, 7);
    model::Hyperparams hp;
    hp.decay_epochs = {2};

    ActiveParty active = make_active_party(central, hp);
    PlainPassiveParty passive(t.x_a, central.w_a, hp);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 16;
    cfg.hp = hp;
    cfg.seed = 3;
    auto res = run_training(active, passive, t.x_b, t.y, cfg);

    auto opt = model::init_optimizer(central, hp);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& rows :
             epoch_batches(60, cfg.batch_size, cfg.seed, epoch)) {
            Matrix xa(static_cast<Eigen::Index>(rows.size()), 4);
            Matrix xb(static_cast<Eigen::Index>(rows.size()), 5);
            std::vector<int> yb(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                xa.row(static_cast<Eigen::Index>(i)) = t.x_a.row(rows[i]);
                xb.row(static_cast<Eigen::Index>(i)) = t.x_b.row(rows[i]);
                yb[i] = t.y[static_cast<std::size_t>(rows[i])];
            }
            auto g = model::loss_and_grads(central, xa, xb, yb,
                                           hp.weight_decay);
            model::sgd_momentum_step(central, opt, g, epoch);
        }
    }

    CHECK((passive.weight() - central.w_a).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((active.net.w_b - central.w_b).cwiseAbs().maxCoeff() <= 1e-9);
    for (std::size_t l = 0; l < central.hidden.size(); ++l) {
        CHECK((active.net.hidden[l].weight - central.hidden[l].weight)
                  .cwiseAbs()
                  .maxCoeff() <= 1e-9);
        CHECK((active.net.hidden[l].bias - central.hidden[l].bias)
                  .cwiseAbs()
                  .maxCoeff() <= 1e-9);
    }
    CHECK(res.transcript.frames.size() == 4 * 4);
    CHECK(res.metrics.size() == 4);
    CHECK(std::isnan(res.metrics[0].test_accuracy));
}

TEST_CASE("training reduces loss on a separable task") {
    Task t = make_task(400, 4, 4, 11);
    auto full = model::init_model(4, 4, {16, 8}, 2, 11);
    model::Hyperparams hp;
    ActiveParty active = make_active_party(full, hp);
    PlainPassiveParty passive(t.x_a, full.w_a, hp);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.batch_size = 64;
    cfg.hp = hp;
    cfg.seed = 11;
    TestSet test{t.x_a.topRows(50), t.x_b.topRows(50),
                 {t.y.begin(), t.y.begin() + 50}};
    auto res = run_training(active, passive, t.x_b, t.y, cfg, &test);
    CHECK(res.metrics.back().train_loss <
          res.metrics.front().train_loss - 0.05);
    CHECK(res.metrics.back().test_accuracy > 0.85);
}

TEST_CASE("training runs are deterministic") {
    Task t = make_task(80, 3, 3, 21);
    auto full = model::init_model(3, 3, {12}, 2, 21);
    model::Hyperparams hp;
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 32;
    cfg.hp = hp;
    cfg.seed = 5;
    auto run = [&]() {
        ActiveParty active = make_active_party(full, hp);
        PlainPassiveParty passive(t.x_a, full.w_a, hp);
        return run_training(active, passive, t.x_b, t.y, cfg).transcript;
    };
    CHECK(frame_diff(run(), run()) == 0.0);
}

TEST_CASE("inference transcript covers every row once in order") {
    Task t = make_task(15, 3, 3, 31);
    auto full = model::init_model(3, 3, {8}, 2, 31);
    model::Hyperparams hp;
    PlainPassiveParty passive(t.x_a, full.w_a, hp);
    Transcript tr = collect_inference_transcript(passive);
    CHECK(tr.phase == Phase::Inference);
    REQUIRE(tr.frames.size() == 1);
    REQUIRE(tr.frames[0].rows.size() == 15);
    for (Eigen::Index i = 0; i < 15; ++i) {
        CHECK(tr.frames[0].rows[static_cast<std::size_t>(i)] == i);
    }
    Matrix expect = t.x_a * full.w_a.transpose();
    CHECK((tr.frames[0].z_a - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("evaluate_accuracy with zero logits predicts class 0") {
    auto full = model::init_model(2, 2, {4}, 2, 41);
    model::Hyperparams hp;
    ActiveParty active = make_active_party(full, hp);
    active.net.w_b.setZero();
    for (auto& l : active.net.hidden) {
        l.weight.setZero();
        l.bias.setZero();
    }
    Matrix z_a = Matrix::Zero(4, 4);
    Matrix x_b = random_gaussian(4, 2, 42);
    CHECK(evaluate_accuracy(active, z_a, x_b, {0, 0, 1, 1}) ==
          doctest::Approx(0.5));
}

TEST_CASE("transcript save/load round-trip") {
    Task t = make_task(30, 3, 3, 51);
    auto full = model::init_model(3, 3, {8}, 2, 51);
    model::Hyperparams hp;
    ActiveParty active = make_active_party(full, hp);
    PlainPassiveParty passive(t.x_a, full.w_a, hp);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.hp = hp;
    cfg.record_gradients = true;
    auto tr = run_training(active, passive, t.x_b, t.y, cfg).transcript;

    const std::string path = std::string(std::tmpnam(nullptr)) + ".bin";
    save_transcript(tr, path);
    Transcript back = load_transcript(path);
    std::remove(path.c_str());

    CHECK(back.k == tr.k);
    CHECK(back.defense == "none");
    CHECK(back.phase == Phase::Train);
    REQUIRE(back.frames.size() == tr.frames.size());
    for (std::size_t i = 0; i < tr.frames.size(); ++i) {
        CHECK(back.frames[i].iteration == tr.frames[i].iteration);
        CHECK(back.frames[i].rows == tr.frames[i].rows);
        CHECK((back.frames[i].z_a - tr.frames[i].z_a).cwiseAbs().maxCoeff() ==
              0.0);
        REQUIRE(back.frames[i].g.has_value());
        CHECK((*back.frames[i].g - *tr.frames[i].g).cwiseAbs().maxCoeff() ==
              0.0);
    }
    CHECK((back.stacked() - tr.stacked()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("invariance under U = I is exact") {
    InvarianceConfig cfg;
    cfg.n = 200;
    cfg.iterations = 20;
    auto res = invariance_harness(61, Matrix::Identity(6, 6), cfg);
    CHECK(res.max_divergence == 0.0);
}

TEST_CASE("invariance under a random orthogonal transform") {
    InvarianceConfig cfg;
    cfg.n = 200;
    cfg.iterations = 30;
    Matrix u = linalg::random_orthogonal(6, 62);
    auto res = invariance_harness(62, u, cfg);
    CHECK(res.baseline.frames.size() == res.transformed.frames.size());
    CHECK(res.max_divergence <= 1e-6);
}

TEST_CASE("invariance under a coordinate permutation") {
    InvarianceConfig cfg;
    cfg.n = 150;
    cfg.iterations = 20;
    Matrix u = Matrix::Zero(6, 6);
    u(0, 3) = 1;
    u(1, 5) = 1;
    u(2, 0) = 1;
    u(3, 1) = 1;
    u(4, 4) = 1;
    u(5, 2) = 1;
    auto res = invariance_harness(63, u, cfg);
    CHECK(res.max_divergence <= 1e-8);
}

TEST_CASE("invariance harness rejects non-orthogonal transforms") {
    InvarianceConfig cfg;
    Matrix bad = Matrix::Identity(6, 6);
    bad(0, 0) = 2.0;
    CHECK_THROWS_AS(invariance_harness(1, bad, cfg), NotOrthogonal);
    CHECK_THROWS_AS(invariance_harness(1, Matrix::Identity(4, 4), cfg),
                    NotOrthogonal);
}
