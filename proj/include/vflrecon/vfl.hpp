#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vflrecon/defense.hpp"
#include "vflrecon/model.hpp"

namespace vflrecon::vfl {

enum class Phase { Train, Inference };

struct Frame {
    std::uint64_t iteration = 0;
    std::vector<Eigen::Index> rows;
    Matrix z_a;                // batch x k
    std::optional<Matrix> g;   // batch x k, dL/dz, off by default
};

/// Everything the active party receives from the passive side, in order.
struct Transcript {
    Eigen::Index k = 0;
    Phase phase = Phase::Train;
    std::string defense = "none";
    double sigma = 0.0;
    std::vector<Frame> frames;

    Eigen::Index total_rows() const;
    Matrix stacked() const;  // all z_a rows in frame order
};

void save_transcript(const Transcript& t, const std::string& path);
Transcript load_transcript(const std::string& path);

/// Passive side of the protocol. Owns X_A and the bottom-model parameters;
/// the active-party code path only ever sees what these methods return.
class PassiveParty {
  public:
    virtual ~PassiveParty() = default;
    virtual Eigen::Index n_rows() const = 0;
    virtual Eigen::Index k_out() const = 0;
    /// Training forward for a batch of row ids (defense applied).
    virtual Matrix forward_train(const std::vector<Eigen::Index>& rows) = 0;
    /// Full inference pass over all rows, in row order.
    virtual Matrix forward_inference() = 0;
    /// Forward on features outside the training set (test evaluation).
    virtual Matrix forward_eval(const Matrix& x_a) = 0;
    virtual void backward(const std::vector<Eigen::Index>& rows,
                          const Matrix& dl_dz, int epoch) = 0;
    virtual std::string defense_name() const { return "none"; }
    virtual double sigma() const { return 0.0; }
};

/// Undefended passive party: holds W_A, trained with SGD + momentum.
class PlainPassiveParty : public PassiveParty {
  public:
    PlainPassiveParty(Matrix x_a, Matrix w_a, model::Hyperparams hp);

    Eigen::Index n_rows() const override { return x_a_.rows(); }
    Eigen::Index k_out() const override { return w_a_.rows(); }
    Matrix forward_train(const std::vector<Eigen::Index>& rows) override;
    Matrix forward_inference() override;
    Matrix forward_eval(const Matrix& x_a) override;
    void backward(const std::vector<Eigen::Index>& rows, const Matrix& dl_dz,
                  int epoch) override;

    const Matrix& weight() const { return w_a_; }
    Matrix batch_rows(const std::vector<Eigen::Index>& rows) const;

  protected:
    Matrix x_a_;
    Matrix w_a_;
    Matrix velocity_;
    model::Hyperparams hp_;
};

/// Adds fresh N(0, sigma^2) noise to every transmitted z_A; the weight
/// update path is unchanged.
class GaussianPassiveParty : public PlainPassiveParty {
  public:
    GaussianPassiveParty(Matrix x_a, Matrix w_a, model::Hyperparams hp,
                         double sigma, std::uint64_t noise_seed);

    Matrix forward_train(const std::vector<Eigen::Index>& rows) override;
    Matrix forward_inference() override;
    Matrix forward_eval(const Matrix& x_a) override;
    std::string defense_name() const override { return "gaussian"; }
    double sigma() const override { return sigma_; }

  private:
    double sigma_;
    std::mt19937_64 rng_;
};

/// Masquerade defense: rank-(d_A - 1) weight P*Q plus the
/// fabricated direction u. Fabricated bits are redrawn per batch during
/// training and fixed per sample for inference.
class MasqueradePassiveParty : public PassiveParty {
  public:
    MasqueradePassiveParty(Matrix x_a, defense::MasqueradeParams mp,
                           model::Hyperparams hp, std::uint64_t bits_seed);

    Eigen::Index n_rows() const override { return x_a_.rows(); }
    Eigen::Index k_out() const override { return params_.k(); }
    Matrix forward_train(const std::vector<Eigen::Index>& rows) override;
    Matrix forward_inference() override;
    Matrix forward_eval(const Matrix& x_a) override;
    void backward(const std::vector<Eigen::Index>& rows, const Matrix& dl_dz,
                  int epoch) override;
    std::string defense_name() const override { return "masquerade"; }

    /// Fixed per-row fabricated bits used by the inference pass. Evaluation
    /// only; never part of any transcript.
    const Vector& fabricated_bits() const { return fixed_bits_; }
    const defense::MasqueradeParams& params() const { return params_; }

  private:
    Matrix x_a_;
    defense::MasqueradeParams params_;
    defense::MasqueradeGrads velocity_;
    model::Hyperparams hp_;
    std::mt19937_64 rng_;
    Vector fixed_bits_;
    Vector last_bits_;  // bits of the most recent training forward
};

struct TrainConfig {
    int epochs = 100;
    Eigen::Index batch_size = 256;
    model::Hyperparams hp;
    bool record_gradients = false;
    std::uint64_t seed = 0;  // drives batch order
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;     // mean cross-entropy, no decay term
    double test_accuracy = 0.0;  // NaN when no test set supplied
};

/// Active-party parameters: W_B plus the hidden stack. W_A never appears.
struct ActiveParty {
    model::VflModel net;  // net.w_a is k x 0
    model::OptimizerState opt;
};

ActiveParty make_active_party(const model::VflModel& full,
                              const model::Hyperparams& hp);

struct TestSet {
    Matrix x_a;  // held by the passive side in a real deployment
    Matrix x_b;
    std::vector<int> labels;
};

struct TrainResult {
    Transcript transcript;
    std::vector<EpochMetrics> metrics;
};

/// Seeded batch order for one epoch; shared with the centralized oracle so
/// split and centralized runs see identical batches.
std::vector<std::vector<Eigen::Index>> epoch_batches(Eigen::Index n,
                                                     Eigen::Index batch_size,
                                                     std::uint64_t seed,
                                                     int epoch);

/// Full two-party training loop of the split protocol. The transcript
/// records exactly what the active party received.
TrainResult run_training(ActiveParty& active, PassiveParty& passive,
                         const Matrix& x_b, const std::vector<int>& y,
                         const TrainConfig& config,
                         const TestSet* test = nullptr);

/// One inference pass, no updates; transcript rows align 1:1 with X_A rows.
Transcript collect_inference_transcript(PassiveParty& passive);

/// Accuracy of the split model on explicit (z_a, x_b, y) data.
double evaluate_accuracy(const ActiveParty& active, const Matrix& z_a,
                         const Matrix& x_b, const std::vector<int>& y);

struct InvarianceResult {
    Transcript baseline;
    Transcript transformed;
    double max_divergence = 0.0;
};

struct InvarianceConfig {
    Eigen::Index n = 1000;
    Eigen::Index d_a = 6;
    Eigen::Index d_b = 6;
    std::vector<Eigen::Index> hidden_sizes = {32, 16};
    int class_count = 2;
    int iterations = 50;
    Eigen::Index batch_size = 64;
    model::Hyperparams hp;
};

/// Trains twice from (W_A0, X_A) and (W_A0 U^T, X_A U^T) with identical
/// batch order and active-party state; reports the max |Z_A| divergence.
InvarianceResult invariance_harness(std::uint64_t seed, const Matrix& u,
                                    const InvarianceConfig& config);

}  // namespace vflrecon::vfl
