#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hiloc/random.hpp"
#include "hiloc/types.hpp"

namespace hiloc::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { linear = 0, relu = 1, sigmoid = 2 };

const char* to_string(Activation a);

struct LayerSpec {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    Activation activation = Activation::linear;
    double dropout_rate = 0.0;  // applied to this layer's output while training

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct DenseLayer {
    LayerSpec spec;
    Matrix weights;  // output_dim x input_dim
    Vector biases;   // output_dim
};

struct Network {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.front().spec.input_dim; }
    std::size_t output_dim() const { return layers.back().spec.output_dim; }
    std::vector<LayerSpec> specs() const;
    std::size_t parameter_count() const;

    /// Throws ValueError if dimensions do not chain or a parameter is non-finite.
    void validate() const;
};

/// Raised when training produces a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& msg, std::size_t epoch, std::size_t batch)
        : std::runtime_error(msg), epoch_(epoch), batch_(batch) {}

    std::size_t epoch() const { return epoch_; }
    std::size_t batch() const { return batch_; }

private:
    std::size_t epoch_;
    std::size_t batch_;
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
Network init_weights(std::span<const LayerSpec> specs, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Forward / backward

/// Per-layer values kept for backpropagation. `outputs[k]` is the input to
/// layer k (outputs[0] is the network input); masks are empty when no dropout ran.
struct ForwardCache {
    std::vector<Matrix> outputs;
    std::vector<Matrix> masks;
};

/// Batch forward pass; each column of `inputs` is one sample. When `rng` is
/// non-null, inverted dropout is applied to layers with a positive rate.
Matrix forward(const Network& net, const Matrix& inputs, Rng* rng = nullptr, ForwardCache* cache = nullptr);

/// Single-sample forward pass. `training` enables dropout drawn from `seed`.
std::vector<double> forward(const Network& net, std::span<const double> input, bool training = false,
                            std::uint64_t seed = 0);

enum class LossKind : std::uint8_t { mse = 0, bce = 1 };

const char* to_string(LossKind k);

inline constexpr double kBceClamp = 1e-7;

/// Batch-mean loss (each sample contributes the mean over its outputs).
double loss_value(const Matrix& predictions, const Matrix& targets, LossKind kind);

struct LayerGradient {
    Matrix weights;
    Vector biases;
};

using Gradients = std::vector<LayerGradient>;

struct LossAndGradients {
    double loss = 0.0;
    Gradients gradients;
};

/// Loss and exact parameter gradients over one batch. `batch_index` only
/// labels the error raised for a non-finite loss.
LossAndGradients loss_and_gradients(const Network& net, const Matrix& inputs, const Matrix& targets, LossKind kind,
                                    Rng* dropout_rng = nullptr, std::size_t batch_index = 0);

// ---------------------------------------------------------------------------
// ADAM

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    Gradients first_moment;
    Gradients second_moment;

    static AdamState for_network(const Network& net, const AdamConfig& config = {});
};

/// One bias-corrected ADAM update. Layers below `first_trainable` keep their
/// parameters (and moments) unchanged; the step counter always advances.
void adam_step(AdamState& state, Network& net, const Gradients& grads, std::size_t first_trainable = 0);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 10;
    LossKind loss = LossKind::mse;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
    bool shuffle_each_epoch = true;
    std::size_t frozen_layers = 0;  // leading layers excluded from updates
    AdamConfig adam;

    void validate() const;
};

struct EpochReport {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;  // NaN when nothing is held out
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::size_t fit_samples = 0;
    std::size_t held_out_samples = 0;
    std::uint64_t optimizer_steps = 0;
};

using EpochCallback = std::function<void(const EpochReport&)>;

/// Minibatch ADAM training. Samples are the columns of `inputs`; a seeded
/// `validation_fraction` of them is held out for per-epoch reporting only.
TrainHistory train(Network& net, const Matrix& inputs, const Matrix& targets, const TrainConfig& config,
                   const EpochCallback& on_epoch = {});

// ---------------------------------------------------------------------------
// Model container

/// A network plus a role tag ("autoencoder", "encoder", "classifier") and
/// named text blocks such as the label codec.
struct ModelContainer {
    std::string role;
    Network network;
    std::map<std::string, std::string> blocks;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string serialize(const ModelContainer& model);
ModelContainer deserialize(std::string_view bytes);

void save_model(const std::string& path, const ModelContainer& model);
ModelContainer load_model(const std::string& path);

// ---------------------------------------------------------------------------
// Helpers

/// Columns from row-vectors; every row must have `dim` entries.
Matrix to_columns(std::span<const std::vector<double>> rows, std::size_t dim);

/// Inference over many columns split across threads. Columns are processed in
/// fixed-size blocks so the result does not depend on `threads`.
Matrix predict_columns(const Network& net, const Matrix& inputs, unsigned threads = 1);

}  // namespace hiloc::nn
