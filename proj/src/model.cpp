#include "vflrecon/model.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace vflrecon::model {

namespace {

using nlohmann::json;

Matrix scaled_uniform(Eigen::Index rows, Eigen::Index cols,
                      std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& x) {
    return (x.array() > 0.0).cast<double>().matrix();
}

/// Row-wise softmax, numerically stabilized.
Matrix softmax(const Matrix& logits) {
    Matrix p = logits;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        Eigen::RowVectorXd row = p.row(i);
        row.array() -= row.maxCoeff();
        row = row.array().exp();
        p.row(i) = row / row.sum();
    }
    return p;
}

void write_matrix(std::ofstream& out, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    }
}

Matrix read_matrix(std::ifstream& in, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            double v = 0.0;
            in.read(reinterpret_cast<char*>(&v), sizeof(v));
            m(i, j) = v;
        }
    }
    if (!in) throw IoError("truncated checkpoint");
    return m;
}

}  // namespace

VflModel init_model(Eigen::Index d_a, Eigen::Index d_b,
                    const std::vector<Eigen::Index>& hidden_sizes,
                    int class_count, std::uint64_t seed) {
    if (hidden_sizes.empty()) throw InvalidArchitecture("no hidden layers");
    const Eigen::Index k = hidden_sizes[0];
    if (k < d_a + d_b) {
        throw InvalidArchitecture("first hidden width " + std::to_string(k) +
                                  " below input dimension " +
                                  std::to_string(d_a + d_b));
    }
    std::mt19937_64 rng(seed);
    VflModel m;
    Matrix w = scaled_uniform(k, d_a + d_b, rng);
    m.w_a = w.leftCols(d_a);
    m.w_b = w.rightCols(d_b);
    Eigen::Index in = k;
    for (std::size_t l = 1; l < hidden_sizes.size(); ++l) {
        m.hidden.push_back(
            {scaled_uniform(hidden_sizes[l], in, rng),
             Vector::Zero(hidden_sizes[l])});
        in = hidden_sizes[l];
    }
    m.hidden.push_back(
        {scaled_uniform(class_count, in, rng), Vector::Zero(class_count)});
    m.class_count = class_count;
    return m;
}

OptimizerState init_optimizer(const VflModel& m, const Hyperparams& hp) {
    OptimizerState s;
    s.v_w_a = Matrix::Zero(m.w_a.rows(), m.w_a.cols());
    s.v_w_b = Matrix::Zero(m.w_b.rows(), m.w_b.cols());
    for (const auto& l : m.hidden) {
        s.v_hidden.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                              Vector::Zero(l.bias.size())});
    }
    s.hp = hp;
    return s;
}

double lr_at_epoch(const Hyperparams& hp, int epoch) {
    int drops = 0;
    for (int e : hp.decay_epochs) {
        if (e <= epoch) ++drops;
    }
    return hp.base_lr * std::pow(10.0, -drops);
}

Matrix forward_from_z(const VflModel& m, const Matrix& z) {
    if (z.cols() != m.k()) throw DimensionMismatch("z width != k");
    Matrix a = relu(z);
    for (std::size_t l = 0; l < m.hidden.size(); ++l) {
        Matrix pre = a * m.hidden[l].weight.transpose();
        pre.rowwise() += m.hidden[l].bias.transpose();
        a = (l + 1 < m.hidden.size()) ? relu(pre) : pre;
    }
    return a;
}

Matrix forward_centralized(const VflModel& m, const Matrix& x_a,
                           const Matrix& x_b) {
    if (x_a.cols() != m.d_a() || x_b.cols() != m.d_b() ||
        x_a.rows() != x_b.rows()) {
        throw DimensionMismatch("forward_centralized: input shape mismatch");
    }
    Matrix z = x_a * m.w_a.transpose() + x_b * m.w_b.transpose();
    return forward_from_z(m, z);
}

double cross_entropy(const Matrix& logits, const std::vector<int>& y) {
    if (logits.rows() != static_cast<Eigen::Index>(y.size())) {
        throw DimensionMismatch("cross_entropy: batch size mismatch");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::RowVectorXd row = logits.row(i);
        const double mx = row.maxCoeff();
        const double lse = mx + std::log((row.array() - mx).exp().sum());
        total += lse - row(y[static_cast<std::size_t>(i)]);
    }
    return total / static_cast<double>(logits.rows());
}

Gradients loss_and_grads_from_z(const VflModel& m, const Matrix& z,
                                const Matrix& x_b, const std::vector<int>& y,
                                double weight_decay) {
    const Eigen::Index batch = z.rows();
    if (batch < 1) throw DimensionMismatch("empty batch");
    if (x_b.rows() != batch || static_cast<Eigen::Index>(y.size()) != batch) {
        throw DimensionMismatch("loss_and_grads: batch size mismatch");
    }

    // Forward, keeping activations.
    std::vector<Matrix> acts;  // post-activation inputs per layer
    acts.push_back(relu(z));
    std::vector<Matrix> pres;  // pre-activations per layer
    for (std::size_t l = 0; l < m.hidden.size(); ++l) {
        Matrix pre = acts.back() * m.hidden[l].weight.transpose();
        pre.rowwise() += m.hidden[l].bias.transpose();
        pres.push_back(pre);
        if (l + 1 < m.hidden.size()) acts.push_back(relu(pre));
    }
    const Matrix& logits = pres.back();

    Gradients g;
    g.data_loss = cross_entropy(logits, y);
    g.loss = g.data_loss;

    // Softmax cross-entropy gradient, mean over the batch.
    Matrix delta = softmax(logits);
    for (Eigen::Index i = 0; i < batch; ++i) {
        delta(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    }
    delta /= static_cast<double>(batch);

    g.hidden.resize(m.hidden.size());
    for (std::size_t l = m.hidden.size(); l-- > 0;) {
        g.hidden[l].weight =
            delta.transpose() * acts[l] + weight_decay * m.hidden[l].weight;
        g.hidden[l].bias = delta.colwise().sum().transpose();
        if (l > 0) {
            delta = (delta * m.hidden[l].weight)
                        .cwiseProduct(relu_mask(pres[l - 1]));
        } else {
            delta = (delta * m.hidden[l].weight).cwiseProduct(relu_mask(z));
        }
    }
    g.dl_dz = delta;  // batch x k
    g.w_b = delta.transpose() * x_b + weight_decay * m.w_b;
    g.w_a = Matrix();  // filled by the caller when x_a is available

    for (const auto& l : m.hidden) {
        g.loss += 0.5 * weight_decay * l.weight.squaredNorm();
    }
    g.loss += 0.5 * weight_decay * (m.w_a.squaredNorm() + m.w_b.squaredNorm());
    if (!std::isfinite(g.loss)) throw NonFiniteLoss("loss is not finite");
    return g;
}

Gradients loss_and_grads(const VflModel& m, const Matrix& x_a,
                         const Matrix& x_b, const std::vector<int>& y,
                         double weight_decay) {
    Matrix z = x_a * m.w_a.transpose() + x_b * m.w_b.transpose();
    Gradients g = loss_and_grads_from_z(m, z, x_b, y, weight_decay);
    g.w_a = g.dl_dz.transpose() * x_a + weight_decay * m.w_a;
    return g;
}

void sgd_momentum_step(VflModel& m, OptimizerState& state,
                       const Gradients& g, int epoch) {
    const double lr = lr_at_epoch(state.hp, epoch);
    const double mu = state.hp.momentum;
    auto step = [&](Matrix& p, Matrix& v, const Matrix& grad) {
        v = mu * v + grad;
        p -= lr * v;
    };
    if (g.w_a.size() > 0) step(m.w_a, state.v_w_a, g.w_a);
    step(m.w_b, state.v_w_b, g.w_b);
    for (std::size_t l = 0; l < m.hidden.size(); ++l) {
        step(m.hidden[l].weight, state.v_hidden[l].weight, g.hidden[l].weight);
        Vector& vb = state.v_hidden[l].bias;
        vb = mu * vb + g.hidden[l].bias;
        m.hidden[l].bias -= lr * vb;
    }
}

void save_checkpoint(const VflModel& m, const std::string& path_base,
                     int epoch) {
    std::ofstream bin(path_base + ".bin", std::ios::binary);
    if (!bin) throw IoError("cannot write " + path_base + ".bin");
    write_matrix(bin, m.w_a);
    write_matrix(bin, m.w_b);
    for (const auto& l : m.hidden) {
        write_matrix(bin, l.weight);
        write_matrix(bin, l.bias);
    }
    json meta;
    meta["k"] = m.k();
    meta["d_a"] = m.d_a();
    meta["d_b"] = m.d_b();
    meta["class_count"] = m.class_count;
    meta["epoch"] = epoch;
    json layers = json::array();
    for (const auto& l : m.hidden) {
        layers.push_back({{"out", l.weight.rows()}, {"in", l.weight.cols()}});
    }
    meta["hidden"] = layers;
    std::ofstream js(path_base + ".json");
    js << meta.dump(2) << "\n";
}

VflModel load_checkpoint(const std::string& path_base) {
    std::ifstream js(path_base + ".json");
    if (!js) throw IoError("cannot open " + path_base + ".json");
    json meta = json::parse(js);
    std::ifstream bin(path_base + ".bin", std::ios::binary);
    if (!bin) throw IoError("cannot open " + path_base + ".bin");
    VflModel m;
    const Eigen::Index k = meta.at("k").get<Eigen::Index>();
    m.w_a = read_matrix(bin, k, meta.at("d_a").get<Eigen::Index>());
    m.w_b = read_matrix(bin, k, meta.at("d_b").get<Eigen::Index>());
    for (const auto& l : meta.at("hidden")) {
        const Eigen::Index out = l.at("out").get<Eigen::Index>();
        const Eigen::Index in = l.at("in").get<Eigen::Index>();
        Matrix w = read_matrix(bin, out, in);
        Matrix b = read_matrix(bin, out, 1);
        m.hidden.push_back({std::move(w), Vector(b.col(0))});
    }
    m.class_count = meta.at("class_count").get<int>();
    return m;
}

}  // namespace vflrecon::model
