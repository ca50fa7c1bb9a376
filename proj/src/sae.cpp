#include "hiloc/sae.hpp"

namespace hiloc::sae {

std::vector<nn::LayerSpec> AutoencoderSpec::layer_specs() const {
    validate();
    std::vector<nn::LayerSpec> specs;
    std::size_t prev = input_dim;
    for (auto h : hidden) {
        specs.push_back({prev, h, hidden_activation, 0.0});
        prev = h;
    }
    specs.push_back({prev, input_dim, output_activation, 0.0});
    return specs;
}

void AutoencoderSpec::validate() const {
    if (input_dim == 0) throw ValueError("autoencoder input dimension must be >= 1");
    if (hidden.empty() || hidden.size() % 2 == 0) {
        throw ValueError("autoencoder hidden chain must have an odd number of layers");
    }
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        if (hidden[i] == 0) throw ValueError("autoencoder hidden widths must be >= 1");
        if (hidden[i] != hidden[hidden.size() - 1 - i]) {
            throw ValueError("autoencoder hidden chain must be symmetric around the bottleneck");
        }
    }
}

PretrainResult pretrain(const nn::Matrix& features, const AutoencoderSpec& spec, nn::TrainConfig config,
                        const nn::EpochCallback& on_epoch) {
    if (static_cast<std::size_t>(features.rows()) != spec.input_dim) {
        throw ValueError("autoencoder expects " + std::to_string(spec.input_dim) + " features per sample");
    }
    const auto specs = spec.layer_specs();
    PretrainResult result{nn::init_weights(specs, config.seed), {}};
    config.loss = nn::LossKind::mse;
    config.frozen_layers = 0;
    result.history = nn::train(result.autoencoder, features, features, config, on_epoch);
    return result;
}

nn::Network extract_encoder(const nn::Network& autoencoder) {
    autoencoder.validate();
    const auto& layers = autoencoder.layers;
    const std::size_t n = layers.size();
    if (n < 2 || n % 2 != 0) throw ValueError("autoencoder must have an even number of layers");
    if (layers.front().spec.input_dim != layers.back().spec.output_dim) {
        throw ValueError("autoencoder output width differs from its input width");
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (layers[k].spec.input_dim != layers[n - 1 - k].spec.output_dim) {
            throw ValueError("autoencoder layers are not symmetric");
        }
    }
    nn::Network encoder;
    encoder.layers.assign(layers.begin(), layers.begin() + static_cast<std::ptrdiff_t>(n / 2));
    return encoder;
}

nn::Matrix bottleneck_activation(const nn::Network& autoencoder, const nn::Matrix& inputs) {
    nn::ForwardCache cache;
    nn::forward(autoencoder, inputs, nullptr, &cache);
    return cache.outputs.at(autoencoder.layers.size() / 2);
}

}  // namespace hiloc::sae
