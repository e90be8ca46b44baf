#ifndef FUNDREG_MODEL_HPP
#define FUNDREG_MODEL_HPP

#include "fundreg/core.hpp"
#include "fundreg/imageops.hpp"
#include "fundreg/observation.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fundreg {

/// Fully connected ReLU trunk feeding a translation head (2 outputs) and a
/// displacement head (2K outputs, x/y interleaved per landmark).
struct ModelParams {
    std::vector<Eigen::MatrixXd> trunk_weights;
    std::vector<Eigen::VectorXd> trunk_biases;
    Eigen::MatrixXd translation_weights;
    Eigen::VectorXd translation_bias;
    Eigen::MatrixXd displacement_weights;
    Eigen::VectorXd displacement_bias;
    // Pixels per network output unit.
    Scalar output_scale = 1;

    [[nodiscard]] Eigen::Index input_size() const;
    [[nodiscard]] Eigen::Index landmark_count() const { return displacement_bias.size() / 2; }
    /// {input, hidden..., 2, 2K}
    [[nodiscard]] std::vector<Eigen::Index> layer_sizes() const;
    [[nodiscard]] Eigen::Index parameter_count() const;

    /// All weights and biases in declaration order; each matrix column-major.
    [[nodiscard]] Eigen::VectorXd flatten() const;
    void assign(const Eigen::VectorXd& flat);

    /// Same shapes, all zeros.
    [[nodiscard]] ModelParams zeros_like() const;
};

using Gradients = ModelParams;

struct Prediction {
    Vec2 translation = Vec2::Zero();
    Displacements displacements;
};

struct TrainConfig {
    Scalar lr = 1e-3;
    Scalar adam_beta1 = 0.9;
    Scalar adam_beta2 = 0.999;
    Scalar adam_eps = 1e-8;
    int epochs = 200;              // upper bound; early stopping may end sooner
    int patience = 10;             // epochs without validation improvement
    int batch_size = 32;
    Scalar w_translation = 0.5;
    Scalar w_displacement = 0.5;
    Scalar val_fraction = 0.1;
    std::vector<int> hidden{256, 128};
    std::uint64_t seed = 0;

    void validate() const;
};

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;
};

struct Sample {
    Eigen::VectorXd input;         // Observation::flatten()
    Displacements demo;            // pixels
    std::string pair_id;
};

struct EpochLoss {
    int epoch = 0;
    Scalar train = 0;
    Scalar val = 0;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochLoss> history;  // entry 0 is measured before the first update
    int best_epoch = 0;
};

ModelParams init_model(Eigen::Index input_size, Eigen::Index landmarks, const std::vector<int>& hidden,
                       std::uint64_t seed, Scalar output_scale = 1);

Prediction forward(const ModelParams& p, const Eigen::VectorXd& input);
Prediction forward(const ModelParams& p, const Observation& obs);

/// w_t |t - mean(demo)|^2 + w_d / K * sum_i |d_i - demo_i|^2
Scalar loss(const Prediction& pred, const Displacements& demo, const TrainConfig& cfg);

/// Exact gradient of loss(forward(p, input), demo) with respect to every parameter.
Gradients backward(const ModelParams& p, const Eigen::VectorXd& input, const Displacements& demo,
                   const TrainConfig& cfg);

/// Mean loss over the batch columns in output units (pixels / output_scale); fills
/// `grad` when non-null. `targets` holds demos divided by output_scale, one column per sample.
Scalar batch_loss(const ModelParams& p, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                  const TrainConfig& cfg, Gradients* grad);

void adam_step(ModelParams& p, const Gradients& grads, AdamState& state, const TrainConfig& cfg);

Sample make_sample(const Observation& obs, const Displacements& demo, std::string pair_id);

/// Splits `samples` into train/validation by cfg.val_fraction, then trains.
TrainResult train(const std::vector<Sample>& samples, const TrainConfig& cfg, Scalar output_scale = 1);

/// Trains on `train_set` with early stopping on `val_set` (training loss when empty).
TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, Scalar output_scale = 1);

struct Checkpoint {
    ModelParams params;
    ObsConfig obs;
    Branch branch = Branch::GuidedFrangi;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws ConfigMismatch unless `obs` matches the checkpoint's C and S.
void check_compatible(const Checkpoint& ckpt, const ObsConfig& obs);

} // namespace fundreg

#endif // FUNDREG_MODEL_HPP
