#pragma once

#include <berlu/activations.hpp>
#include <berlu/data.hpp>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace berlu {

struct DenseLayer {
    Matrix weights;  // out x in
    Vector biases;   // out
};

/// Fully connected classifier: every layer but the last is followed by the
/// activation; the last produces logits. Parametric activations (BerLU,
/// PReLU) carry one trainable slope per hidden layer in `alphas`.
struct DenseNet {
    std::vector<DenseLayer> layers;
    ActivationSpec activation;
    std::vector<double> alphas;

    std::size_t hidden_layers() const noexcept { return layers.empty() ? 0 : layers.size() - 1; }
    /// Activation of hidden layer `l` with its current slope substituted.
    ActivationSpec layer_activation(std::size_t l) const;
    std::size_t parameter_count() const;
};

/// Weights from a normal(0, 0.02) truncated at two standard deviations, zero
/// biases, alphas at 0.01. Throws std::invalid_argument for fewer than two
/// dims or a zero dimension.
DenseNet init_net(const std::vector<int>& dims, const ActivationSpec& activation, std::uint64_t seed);

/// Parameter-shaped container used for gradients and optimizer moments.
struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    std::vector<double> alphas;

    static Gradients zeros_like(const DenseNet& net);
    double norm() const;
    void scale(double factor);
};

struct LossGrad {
    double loss = 0.0;
    Gradients grads;
};

class NonFiniteActivation : public std::runtime_error {
public:
    explicit NonFiniteActivation(std::size_t layer);
    std::size_t layer() const noexcept { return layer_; }

private:
    std::size_t layer_;
};

/// Logits for every row of `x`.
Matrix predict(const DenseNet& net, const Matrix& x);

/// Mean softmax cross-entropy over the batch and its exact gradients with
/// respect to weights, biases and per-layer slopes. Throws
/// NonFiniteActivation naming the layer whose pre-activations blew up.
LossGrad forward_backward(const DenseNet& net, const Matrix& batch_x, std::span<const int> batch_y);

struct TrainConfig {
    int epochs = 200;
    int batch_size = 64;
    double base_lr = 1e-2;
    double weight_decay = 0.05;
    int warmup_epochs = 10;
    double grad_clip = 1.0;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    /// Throws std::invalid_argument when the invariants do not hold.
    void validate() const;
};

struct AdamState {
    Gradients m;
    Gradients v;
    long step = 0;

    static AdamState for_net(const DenseNet& net);
};

/// One AdamW update. Decoupled decay multiplies weights by (1 - lr * wd)
/// before the Adam step; biases and slopes receive the plain Adam step only.
void adamw_step(DenseNet& net, const Gradients& grads, AdamState& state, double lr, const TrainConfig& cfg);

/// Linear warmup from 0 to base_lr over `warmup_steps`, then cosine decay
/// reaching 0 at total_steps - 1.
double lr_at(long step, long total_steps, long warmup_steps, double base_lr);

/// Global L2-norm clipping.
Gradients clip_gradients(Gradients grads, double threshold);

struct EpochMetrics {
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double lr = 0.0;
};

struct RunReport {
    std::vector<EpochMetrics> per_epoch;
    std::vector<double> final_alphas;
    double wall_time_s = 0.0;
};

class TrainingDiverged : public std::runtime_error {
public:
    explicit TrainingDiverged(int epoch);
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

/// Fraction of `idx` rows classified correctly.
double accuracy(const DenseNet& net, const Dataset& ds, const std::vector<std::size_t>& idx);

/// Mini-batch AdamW training with per-epoch reshuffling seeded by (seed, epoch).
/// The last partial batch is kept. Throws TrainingDiverged on a non-finite loss.
RunReport train(DenseNet& net, const Dataset& ds, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Smoothing-radius sweep

struct SweepSettings {
    std::vector<double> epsilons = {1e-4, 1e-3, 1e-2, 1e-1, 0.2, 0.5, 1.0, 5.0, 10.0};
    int seeds = 3;
    double alpha = 0.01;
    std::vector<int> hidden = {32, 32};
    std::size_t samples = 1000;
    double turns = 1.5;
    double noise = 0.05;
    std::uint64_t data_seed = 7;
    /// Worker threads for independent runs; 0 picks hardware concurrency.
    unsigned threads = 0;
};

struct SweepPoint {
    double epsilon = 0.0;
    double mean_acc = 0.0;
    double std_acc = 0.0;
    std::vector<double> accs;
};

/// Trains a BerLU net on spirals for every epsilon and seed; accuracy is the
/// final validation accuracy, std is the sample standard deviation.
std::vector<SweepPoint> run_sweep(const SweepSettings& settings, const TrainConfig& cfg);

}  // namespace berlu
