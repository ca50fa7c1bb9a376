#pragma once

#include <vector>

#include "hiloc/neuralnet.hpp"
#include "hiloc/types.hpp"

namespace hiloc::sae {

/// Hourglass autoencoder: input -> hidden chain -> input. The hidden chain must
/// be symmetric around its middle (bottleneck) layer.
struct AutoencoderSpec {
    std::size_t input_dim = kNumAccessPoints;
    std::vector<std::size_t> hidden{256, 128, 256};
    nn::Activation hidden_activation = nn::Activation::relu;
    nn::Activation output_activation = nn::Activation::sigmoid;

    std::size_t bottleneck_dim() const { return hidden.at(hidden.size() / 2); }
    std::vector<nn::LayerSpec> layer_specs() const;

    /// Throws ValueError for an empty, even-length or asymmetric hidden chain.
    void validate() const;
};

struct PretrainResult {
    nn::Network autoencoder;
    nn::TrainHistory history;
};

/// Trains the autoencoder with inputs as targets under MSE. Samples are the
/// columns of `features`; labels never enter this function.
PretrainResult pretrain(const nn::Matrix& features, const AutoencoderSpec& spec, nn::TrainConfig config,
                        const nn::EpochCallback& on_epoch = {});

/// Copies the layers up to and including the bottleneck.
nn::Network extract_encoder(const nn::Network& autoencoder);

/// Activation of the bottleneck layer for each input column.
nn::Matrix bottleneck_activation(const nn::Network& autoencoder, const nn::Matrix& inputs);

}  // namespace hiloc::sae
