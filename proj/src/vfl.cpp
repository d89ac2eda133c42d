#include "vflrecon/vfl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace vflrecon::vfl {

namespace {

using nlohmann::json;

void write_block(std::ofstream& out, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    }
}

Matrix read_block(std::ifstream& in, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            double v = 0.0;
            in.read(reinterpret_cast<char*>(&v), sizeof(v));
            m(i, j) = v;
        }
    }
    return m;
}

}  // namespace

Eigen::Index Transcript::total_rows() const {
    Eigen::Index n = 0;
    for (const auto& f : frames) n += f.z_a.rows();
    return n;
}

Matrix Transcript::stacked() const {
    Matrix out(total_rows(), k);
    Eigen::Index at = 0;
    for (const auto& f : frames) {
        out.middleRows(at, f.z_a.rows()) = f.z_a;
        at += f.z_a.rows();
    }
    return out;
}

void save_transcript(const Transcript& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    json header;
    header["k"] = t.k;
    header["phase"] = t.phase == Phase::Train ? "train" : "inference";
    header["defense"] = t.defense;
    header["sigma"] = t.sigma;
    header["frames"] = t.frames.size();
    const std::string line = header.dump();
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.put('\n');
    for (const auto& f : t.frames) {
        const std::uint64_t iter = f.iteration;
        const std::uint64_t batch = static_cast<std::uint64_t>(f.z_a.rows());
        const std::uint8_t has_g = f.g.has_value() ? 1 : 0;
        out.write(reinterpret_cast<const char*>(&iter), sizeof(iter));
        out.write(reinterpret_cast<const char*>(&batch), sizeof(batch));
        out.write(reinterpret_cast<const char*>(&has_g), sizeof(has_g));
        for (auto r : f.rows) {
            const std::uint64_t rr = static_cast<std::uint64_t>(r);
            out.write(reinterpret_cast<const char*>(&rr), sizeof(rr));
        }
        write_block(out, f.z_a);
        if (f.g) write_block(out, *f.g);
    }
}

Transcript load_transcript(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing transcript header");
    json header = json::parse(line);
    Transcript t;
    t.k = header.at("k").get<Eigen::Index>();
    t.phase = header.at("phase").get<std::string>() == "train"
                  ? Phase::Train
                  : Phase::Inference;
    t.defense = header.at("defense").get<std::string>();
    t.sigma = header.at("sigma").get<double>();
    const std::size_t n_frames = header.at("frames").get<std::size_t>();
    for (std::size_t i = 0; i < n_frames; ++i) {
        Frame f;
        std::uint64_t iter = 0, batch = 0;
        std::uint8_t has_g = 0;
        in.read(reinterpret_cast<char*>(&iter), sizeof(iter));
        in.read(reinterpret_cast<char*>(&batch), sizeof(batch));
        in.read(reinterpret_cast<char*>(&has_g), sizeof(has_g));
        f.iteration = iter;
        f.rows.resize(batch);
        for (auto& r : f.rows) {
            std::uint64_t rr = 0;
            in.read(reinterpret_cast<char*>(&rr), sizeof(rr));
            r = static_cast<Eigen::Index>(rr);
        }
        f.z_a = read_block(in, static_cast<Eigen::Index>(batch), t.k);
        if (has_g) f.g = read_block(in, static_cast<Eigen::Index>(batch), t.k);
        if (!in) throw ParseError("truncated transcript " + path);
        t.frames.push_back(std::move(f));
    }
    return t;
}

PlainPassiveParty::PlainPassiveParty(Matrix x_a, Matrix w_a,
                                     model::Hyperparams hp)
    : x_a_(std::move(x_a)),
      w_a_(std::move(w_a)),
      velocity_(Matrix::Zero(w_a_.rows(), w_a_.cols())),
      hp_(hp) {
    if (x_a_.cols() != w_a_.cols()) {
        throw DimensionMismatch("passive party: X_A / W_A width mismatch");
    }
}

Matrix PlainPassiveParty::batch_rows(
    const std::vector<Eigen::Index>& rows) const {
    Matrix b(static_cast<Eigen::Index>(rows.size()), x_a_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        b.row(static_cast<Eigen::Index>(i)) = x_a_.row(rows[i]);
    }
    return b;
}

Matrix PlainPassiveParty::forward_train(
    const std::vector<Eigen::Index>& rows) {
    return batch_rows(rows) * w_a_.transpose();
}

Matrix PlainPassiveParty::forward_inference() {
    return x_a_ * w_a_.transpose();
}

Matrix PlainPassiveParty::forward_eval(const Matrix& x_a) {
    return x_a * w_a_.transpose();
}

void PlainPassiveParty::backward(const std::vector<Eigen::Index>& rows,
                                 const Matrix& dl_dz, int epoch) {
    Matrix grad =
        dl_dz.transpose() * batch_rows(rows) + hp_.weight_decay * w_a_;
    velocity_ = hp_.momentum * velocity_ + grad;
    w_a_ -= model::lr_at_epoch(hp_, epoch) * velocity_;
}

GaussianPassiveParty::GaussianPassiveParty(Matrix x_a, Matrix w_a,
                                           model::Hyperparams hp, double sigma,
                                           std::uint64_t noise_seed)
    : PlainPassiveParty(std::move(x_a), std::move(w_a), hp),
      sigma_(sigma),
      rng_(noise_seed) {
    if (sigma < 0.0 || !std::isfinite(sigma)) {
        throw InvalidConfig("sigma must be finite and >= 0");
    }
}

Matrix GaussianPassiveParty::forward_train(
    const std::vector<Eigen::Index>& rows) {
    return defense::gaussian_masked_forward(w_a_, batch_rows(rows), sigma_,
                                            rng_);
}

Matrix GaussianPassiveParty::forward_inference() {
    return defense::gaussian_masked_forward(w_a_, x_a_, sigma_, rng_);
}

Matrix GaussianPassiveParty::forward_eval(const Matrix& x_a) {
    return defense::gaussian_masked_forward(w_a_, x_a, sigma_, rng_);
}

MasqueradePassiveParty::MasqueradePassiveParty(Matrix x_a,
                                               defense::MasqueradeParams mp,
                                               model::Hyperparams hp,
                                               std::uint64_t bits_seed)
    : x_a_(std::move(x_a)),
      params_(std::move(mp)),
      hp_(hp),
      rng_(bits_seed) {
    if (x_a_.cols() != params_.d_a()) {
        throw DimensionMismatch("masquerade party: X_A width != d_A");
    }
    velocity_.p = Matrix::Zero(params_.p.rows(), params_.p.cols());
    velocity_.q = Matrix::Zero(params_.q.rows(), params_.q.cols());
    velocity_.u = Vector::Zero(params_.u.size());
    // The inference-phase fabricated vector is fixed up front so the
    // evaluation target is well defined.
    std::bernoulli_distribution coin(0.5);
    fixed_bits_.resize(x_a_.rows());
    for (Eigen::Index i = 0; i < x_a_.rows(); ++i) {
        fixed_bits_(i) = coin(rng_) ? 1.0 : 0.0;
    }
}

Matrix MasqueradePassiveParty::forward_train(
    const std::vector<Eigen::Index>& rows) {
    Matrix batch(static_cast<Eigen::Index>(rows.size()), x_a_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        batch.row(static_cast<Eigen::Index>(i)) = x_a_.row(rows[i]);
    }
    std::bernoulli_distribution coin(0.5);
    Vector bits(batch.rows());
    for (Eigen::Index i = 0; i < batch.rows(); ++i) {
        bits(i) = coin(rng_) ? 1.0 : 0.0;
    }
    last_bits_ = bits;
    return defense::masquerade_forward(params_, batch, bits);
}

Matrix MasqueradePassiveParty::forward_inference() {
    return defense::masquerade_forward(params_, x_a_, fixed_bits_);
}

Matrix MasqueradePassiveParty::forward_eval(const Matrix& x_a) {
    std::bernoulli_distribution coin(0.5);
    Vector bits(x_a.rows());
    for (Eigen::Index i = 0; i < x_a.rows(); ++i) {
        bits(i) = coin(rng_) ? 1.0 : 0.0;
    }
    return defense::masquerade_forward(params_, x_a, bits);
}

void MasqueradePassiveParty::backward(const std::vector<Eigen::Index>& rows,
                                      const Matrix& dl_dz, int epoch) {
    Matrix batch(static_cast<Eigen::Index>(rows.size()), x_a_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        batch.row(static_cast<Eigen::Index>(i)) = x_a_.row(rows[i]);
    }
    auto g = defense::masquerade_backward(params_, batch, last_bits_, dl_dz);
    g.p += hp_.weight_decay * params_.p;
    g.q += hp_.weight_decay * params_.q;
    g.u += hp_.weight_decay * params_.u;
    const double lr = model::lr_at_epoch(hp_, epoch);
    const double mu = hp_.momentum;
    velocity_.p = mu * velocity_.p + g.p;
    velocity_.q = mu * velocity_.q + g.q;
    velocity_.u = mu * velocity_.u + g.u;
    params_.p -= lr * velocity_.p;
    params_.q -= lr * velocity_.q;
    params_.u -= lr * velocity_.u;
}

ActiveParty make_active_party(const model::VflModel& full,
                              const model::Hyperparams& hp) {
    ActiveParty a;
    a.net.w_a = Matrix::Zero(full.k(), 0);
    a.net.w_b = full.w_b;
    a.net.hidden = full.hidden;
    a.net.class_count = full.class_count;
    a.opt = model::init_optimizer(a.net, hp);
    return a;
}

std::vector<std::vector<Eigen::Index>> epoch_batches(Eigen::Index n,
                                                     Eigen::Index batch_size,
                                                     std::uint64_t seed,
                                                     int epoch) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL *
                                   static_cast<std::uint64_t>(epoch + 1));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<Eigen::Index>> batches;
    for (Eigen::Index at = 0; at < n; at += batch_size) {
        const Eigen::Index len = std::min(batch_size, n - at);
        batches.emplace_back(order.begin() + at, order.begin() + at + len);
    }
    return batches;
}

TrainResult run_training(ActiveParty& active, PassiveParty& passive,
                         const Matrix& x_b, const std::vector<int>& y,
                         const TrainConfig& config, const TestSet* test) {
    const Eigen::Index n = x_b.rows();
    if (passive.n_rows() != n ||
        static_cast<Eigen::Index>(y.size()) != n) {
        throw DimensionMismatch("run_training: row counts disagree");
    }
    TrainResult result;
    result.transcript.k = passive.k_out();
    result.transcript.phase = Phase::Train;
    result.transcript.defense = passive.defense_name();
    result.transcript.sigma = passive.sigma();

    std::uint64_t iteration = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double loss_sum = 0.0;
        Eigen::Index seen = 0;
        for (const auto& rows :
             epoch_batches(n, config.batch_size, config.seed, epoch)) {
            const Eigen::Index b = static_cast<Eigen::Index>(rows.size());
            Matrix z_a = passive.forward_train(rows);

            Matrix x_b_batch(b, x_b.cols());
            std::vector<int> y_batch(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                x_b_batch.row(static_cast<Eigen::Index>(i)) = x_b.row(rows[i]);
                y_batch[i] = y[static_cast<std::size_t>(rows[i])];
            }
            Matrix z = z_a + x_b_batch * active.net.w_b.transpose();
            auto g = model::loss_and_grads_from_z(
                active.net, z, x_b_batch, y_batch, config.hp.weight_decay);

            Frame frame;
            frame.iteration = ++iteration;
            frame.rows = rows;
            frame.z_a = std::move(z_a);
            if (config.record_gradients) frame.g = g.dl_dz;
            result.transcript.frames.push_back(std::move(frame));

            model::sgd_momentum_step(active.net, active.opt, g, epoch);
            passive.backward(rows, g.dl_dz, epoch);

            loss_sum += g.data_loss * static_cast<double>(b);
            seen += b;
        }
        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = loss_sum / static_cast<double>(seen);
        if (test != nullptr) {
            Matrix z_test = passive.forward_eval(test->x_a);
            m.test_accuracy =
                evaluate_accuracy(active, z_test, test->x_b, test->labels);
        } else {
            m.test_accuracy = std::numeric_limits<double>::quiet_NaN();
        }
        result.metrics.push_back(m);
    }
    return result;
}

Transcript collect_inference_transcript(PassiveParty& passive) {
    if (passive.n_rows() < 1) throw DimensionMismatch("no rows to infer");
    Transcript t;
    t.k = passive.k_out();
    t.phase = Phase::Inference;
    t.defense = passive.defense_name();
    t.sigma = passive.sigma();
    Frame f;
    f.iteration = 1;
    f.rows.resize(static_cast<std::size_t>(passive.n_rows()));
    for (Eigen::Index i = 0; i < passive.n_rows(); ++i) {
        f.rows[static_cast<std::size_t>(i)] = i;
    }
    f.z_a = passive.forward_inference();
    t.frames.push_back(std::move(f));
    return t;
}

double evaluate_accuracy(const ActiveParty& active, const Matrix& z_a,
                         const Matrix& x_b, const std::vector<int>& y) {
    Matrix z = z_a + x_b * active.net.w_b.transpose();
    Matrix logits = model::forward_from_z(active.net, z);
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index pred = 0;
        logits.row(i).maxCoeff(&pred);
        if (pred == y[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

InvarianceResult invariance_harness(std::uint64_t seed, const Matrix& u,
                                    const InvarianceConfig& config) {
    if (u.rows() != config.d_a || u.cols() != config.d_a) {
        throw NotOrthogonal("U must be d_A x d_A");
    }
    if (linalg::orthogonality_defect(u) > 1e-12) {
        throw NotOrthogonal("U^T U deviates from identity");
    }

    // Shared synthetic task.
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix x_a(config.n, config.d_a);
    Matrix x_b(config.n, config.d_b);
    for (Eigen::Index i = 0; i < config.n; ++i) {
        for (Eigen::Index j = 0; j < config.d_a; ++j) x_a(i, j) = gauss(rng);
        for (Eigen::Index j = 0; j < config.d_b; ++j) x_b(i, j) = gauss(rng);
    }
    Vector v_a(config.d_a), v_b(config.d_b);
    for (Eigen::Index j = 0; j < config.d_a; ++j) v_a(j) = gauss(rng);
    for (Eigen::Index j = 0; j < config.d_b; ++j) v_b(j) = gauss(rng);
    Vector score = x_a * v_a + x_b * v_b;
    std::vector<int> y(static_cast<std::size_t>(config.n));
    for (Eigen::Index i = 0; i < config.n; ++i) {
        y[static_cast<std::size_t>(i)] = score(i) > 0.0 ? 1 : 0;
    }

    auto full = model::init_model(config.d_a, config.d_b, config.hidden_sizes,
                                  config.class_count, seed);

    const Eigen::Index batches_per_epoch =
        (config.n + config.batch_size - 1) / config.batch_size;
    TrainConfig tc;
    tc.epochs = static_cast<int>(
        (config.iterations + batches_per_epoch - 1) / batches_per_epoch);
    tc.batch_size = config.batch_size;
    tc.hp = config.hp;
    tc.seed = seed;

    InvarianceResult out;
    {
        ActiveParty active = make_active_party(full, config.hp);
        PlainPassiveParty passive(x_a, full.w_a, config.hp);
        out.baseline = run_training(active, passive, x_b, y, tc).transcript;
    }
    {
        ActiveParty active = make_active_party(full, config.hp);
        PlainPassiveParty passive(x_a * u.transpose(),
                                  full.w_a * u.transpose(), config.hp);
        out.transformed = run_training(active, passive, x_b, y, tc).transcript;
    }
    double max_div = 0.0;
    for (std::size_t i = 0; i < out.baseline.frames.size(); ++i) {
        max_div = std::max(max_div, (out.baseline.frames[i].z_a -
                                     out.transformed.frames[i].z_a)
                                        .cwiseAbs()
                                        .maxCoeff());
    }
    out.max_divergence = max_div;
    return out;
}

}  // namespace vflrecon::vfl
