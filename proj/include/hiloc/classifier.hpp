#pragma once

#include <span>
#include <vector>

#include "hiloc/neuralnet.hpp"
#include "hiloc/types.hpp"

namespace hiloc::classifier {

/// Feed-forward multi-label head placed on top of a pretrained encoder.
struct HeadSpec {
    std::vector<std::size_t> hidden{64, 128};
    nn::Activation activation = nn::Activation::relu;
    double dropout_rate = 0.20;
};

/// encoder layers + head hidden layers + sigmoid output of `output_width` nodes.
/// Encoder weights are copied; the head is freshly initialized from `seed`.
nn::Network assemble(const nn::Network& encoder, std::size_t output_width, const HeadSpec& head,
                     std::uint64_t seed);

/// Trains under binary cross-entropy. `freeze_encoder_layers` leading layers
/// keep their weights (0 fine-tunes the whole network).
nn::TrainHistory fit(nn::Network& model, const nn::Matrix& features, const nn::Matrix& targets,
                     nn::TrainConfig config, std::size_t freeze_encoder_layers = 0,
                     const nn::EpochCallback& on_epoch = {});

/// Sigmoid scores in the open interval (0, 1).
std::vector<double> predict(const nn::Network& model, std::span<const double> features);

/// Column-wise predict; identical for any thread count.
nn::Matrix predict_batch(const nn::Network& model, const nn::Matrix& features, unsigned threads = 1);

}  // namespace hiloc::classifier
