#include "hiloc/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hiloc::classifier {

namespace {

// exp() saturates the sigmoid to exactly 0 or 1 far from the origin.
double open_unit(double p) {
    constexpr double lo = std::numeric_limits<double>::min();
    const double hi = std::nextafter(1.0, 0.0);
    return std::clamp(p, lo, hi);
}

}  // namespace

nn::Network assemble(const nn::Network& encoder, std::size_t output_width, const HeadSpec& head,
                     std::uint64_t seed) {
    encoder.validate();
    if (output_width == 0) throw ValueError("classifier output width must be >= 1");
    if (encoder.input_dim() != kNumAccessPoints) {
        throw ValueError("encoder takes " + std::to_string(encoder.input_dim()) + " inputs, expected " +
                         std::to_string(kNumAccessPoints));
    }
    std::vector<nn::LayerSpec> head_specs;
    std::size_t prev = encoder.output_dim();
    for (auto h : head.hidden) {
        head_specs.push_back({prev, h, head.activation, head.dropout_rate});
        prev = h;
    }
    head_specs.push_back({prev, output_width, nn::Activation::sigmoid, 0.0});

    nn::Network model = encoder;
    for (auto& layer : model.layers) layer.spec.dropout_rate = 0.0;
    auto fresh = nn::init_weights(head_specs, seed);
    for (auto& layer : fresh.layers) model.layers.push_back(std::move(layer));
    model.validate();
    return model;
}

nn::TrainHistory fit(nn::Network& model, const nn::Matrix& features, const nn::Matrix& targets,
                     nn::TrainConfig config, std::size_t freeze_encoder_layers, const nn::EpochCallback& on_epoch) {
    if (model.layers.back().spec.activation != nn::Activation::sigmoid) {
        throw ValueError("binary cross-entropy needs a sigmoid output layer");
    }
    config.loss = nn::LossKind::bce;
    config.frozen_layers = freeze_encoder_layers;
    return nn::train(model, features, targets, config, on_epoch);
}

std::vector<double> predict(const nn::Network& model, std::span<const double> features) {
    auto out = nn::forward(model, features, false);
    for (auto& p : out) p = open_unit(p);
    return out;
}

nn::Matrix predict_batch(const nn::Network& model, const nn::Matrix& features, unsigned threads) {
    nn::Matrix out = nn::predict_columns(model, features, threads);
    return out.unaryExpr([](double p) { return open_unit(p); });
}

}  // namespace hiloc::classifier
