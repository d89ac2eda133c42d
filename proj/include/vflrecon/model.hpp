#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vflrecon/linalg.hpp"

namespace vflrecon::model {

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
};

/// MLP whose input layer is split column-wise into W_A (passive) and W_B
/// (active). The input layer carries no bias; hidden and output layers do.
struct VflModel {
    Matrix w_a;                      // k x d_A
    Matrix w_b;                      // k x d_B
    std::vector<DenseLayer> hidden;  // layers after the cut, last is output
    int class_count = 0;

    Eigen::Index k() const { return w_a.rows(); }
    Eigen::Index d_a() const { return w_a.cols(); }
    Eigen::Index d_b() const { return w_b.cols(); }
};

struct Gradients {
    Matrix w_a;
    Matrix w_b;
    std::vector<DenseLayer> hidden;  // same shapes as the model layers
    Matrix dl_dz;                    // batch x k, the cross-party message
    double loss = 0.0;               // cross-entropy + weight-decay term
    double data_loss = 0.0;          // cross-entropy alone
};

struct Hyperparams {
    double base_lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::vector<int> decay_epochs = {30, 60, 90};
};

struct OptimizerState {
    Matrix v_w_a;
    Matrix v_w_b;
    std::vector<DenseLayer> v_hidden;
    Hyperparams hp;
};

VflModel init_model(Eigen::Index d_a, Eigen::Index d_b,
                    const std::vector<Eigen::Index>& hidden_sizes,
                    int class_count, std::uint64_t seed);

OptimizerState init_optimizer(const VflModel& m, const Hyperparams& hp);

/// Step learning rate: base_lr scaled by 10^-(#decay epochs <= epoch).
double lr_at_epoch(const Hyperparams& hp, int epoch);

/// Runs z = W_A x_A + W_B x_B then the hidden ReLU stack; rows are samples.
Matrix forward_from_z(const VflModel& m, const Matrix& z);
Matrix forward_centralized(const VflModel& m, const Matrix& x_a,
                           const Matrix& x_b);

double cross_entropy(const Matrix& logits, const std::vector<int>& y);

/// Mean cross-entropy + (weight_decay/2) * sum of squared weights (biases
/// excluded), with analytic gradients for every parameter and the dL/dz
/// message that crosses the party boundary.
Gradients loss_and_grads(const VflModel& m, const Matrix& x_a,
                         const Matrix& x_b, const std::vector<int>& y,
                         double weight_decay);

/// Backprop from aggregated first-layer output z; fills everything except
/// the W_A gradient (the passive side computes that from dl_dz itself).
Gradients loss_and_grads_from_z(const VflModel& m, const Matrix& z,
                                const Matrix& x_b, const std::vector<int>& y,
                                double weight_decay);

void sgd_momentum_step(VflModel& m, OptimizerState& state,
                       const Gradients& g, int epoch);

/// Checkpoint: binary parameter dump plus JSON manifest.
void save_checkpoint(const VflModel& m, const std::string& path_base,
                     int epoch);
VflModel load_checkpoint(const std::string& path_base);

}  // namespace vflrecon::model
