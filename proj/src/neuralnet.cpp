#include "hiloc/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "binary_io.hpp"
#include "hiloc/types.hpp"

namespace hiloc::nn {

const char* to_string(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
    }
    return "?";
}

const char* to_string(LossKind k) { return k == LossKind::mse ? "mse" : "bce"; }

std::vector<LayerSpec> Network::specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers) out.push_back(l.spec);
    return out;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
    return n;
}

void Network::validate() const {
    if (layers.empty()) throw ValueError("network has no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& l = layers[k];
        if (l.spec.input_dim == 0 || l.spec.output_dim == 0) throw ValueError("layer dimensions must be >= 1");
        if (!(l.spec.dropout_rate >= 0.0 && l.spec.dropout_rate < 1.0)) {
            throw ValueError("dropout rate must lie in [0, 1)");
        }
        if (static_cast<std::size_t>(l.weights.rows()) != l.spec.output_dim ||
            static_cast<std::size_t>(l.weights.cols()) != l.spec.input_dim ||
            static_cast<std::size_t>(l.biases.size()) != l.spec.output_dim) {
            throw ValueError("layer " + std::to_string(k) + " parameters do not match its spec");
        }
        if (k > 0 && layers[k - 1].spec.output_dim != l.spec.input_dim) {
            throw ValueError("layer " + std::to_string(k) + " input dimension does not match the previous layer");
        }
        if (!l.weights.allFinite() || !l.biases.allFinite()) {
            throw ValueError("layer " + std::to_string(k) + " has non-finite parameters");
        }
    }
}

Network init_weights(std::span<const LayerSpec> specs, std::uint64_t seed) {
    if (specs.empty()) throw ValueError("network needs at least one layer");
    for (std::size_t k = 1; k < specs.size(); ++k) {
        if (specs[k - 1].output_dim != specs[k].input_dim) {
            throw ValueError("layer spec dimension mismatch between layers " + std::to_string(k - 1) + " and " +
                             std::to_string(k));
        }
    }
    Rng rng(seed);
    Network net;
    for (const auto& spec : specs) {
        if (spec.input_dim == 0 || spec.output_dim == 0) throw ValueError("layer dimensions must be >= 1");
        DenseLayer layer{spec, Matrix(spec.output_dim, spec.input_dim), Vector::Zero(spec.output_dim)};
        const double limit = std::sqrt(6.0 / static_cast<double>(spec.input_dim + spec.output_dim));
        // Row-major draw order.
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = rng.uniform(-limit, limit);
        }
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

// ---------------------------------------------------------------------------

namespace {

void apply_activation(Matrix& z, Activation a) {
    switch (a) {
        case Activation::linear: break;
        case Activation::relu: z = z.cwiseMax(0.0); break;
        case Activation::sigmoid:
            z = z.unaryExpr([](double v) {
                if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
                const double e = std::exp(v);
                return e / (1.0 + e);
            });
            break;
    }
}

// Derivative expressed through the activation's output.
Matrix activation_derivative(const Matrix& activated, Activation a) {
    switch (a) {
        case Activation::linear: return Matrix::Ones(activated.rows(), activated.cols());
        case Activation::relu: return (activated.array() > 0.0).cast<double>().matrix();
        case Activation::sigmoid: return (activated.array() * (1.0 - activated.array())).matrix();
    }
    return {};
}

struct FullCache {
    std::vector<Matrix> outputs;    // input to each layer, then the network output
    std::vector<Matrix> activated;  // per layer, before dropout
    std::vector<Matrix> masks;      // per layer, scaled keep-mask or empty
};

Matrix run_forward(const Network& net, const Matrix& inputs, Rng* rng, FullCache* cache) {
    if (static_cast<std::size_t>(inputs.rows()) != net.input_dim()) {
        throw ValueError("input has " + std::to_string(inputs.rows()) + " features, network expects " +
                         std::to_string(net.input_dim()));
    }
    if (!inputs.allFinite()) throw ValueError("input contains NaN or Inf");
    if (cache) {
        cache->outputs.assign(1, inputs);
        cache->activated.clear();
        cache->masks.clear();
    }
    Matrix a = inputs;
    for (const auto& layer : net.layers) {
        Matrix z = layer.weights * a;
        z.colwise() += layer.biases;
        apply_activation(z, layer.spec.activation);
        Matrix mask;
        if (rng && layer.spec.dropout_rate > 0.0) {
            const double keep = 1.0 - layer.spec.dropout_rate;
            const double scale = 1.0 / keep;
            mask.resize(z.rows(), z.cols());
            for (Eigen::Index c = 0; c < mask.cols(); ++c) {
                for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = rng->uniform() < keep ? scale : 0.0;
            }
        }
        if (cache) cache->activated.push_back(z);
        if (mask.size() > 0) z.array() *= mask.array();
        if (cache) {
            cache->masks.push_back(std::move(mask));
            cache->outputs.push_back(z);
        }
        a = std::move(z);
    }
    return a;
}

}  // namespace

Matrix forward(const Network& net, const Matrix& inputs, Rng* rng, ForwardCache* cache) {
    if (!cache) return run_forward(net, inputs, rng, nullptr);
    FullCache full;
    Matrix out = run_forward(net, inputs, rng, &full);
    cache->outputs = std::move(full.outputs);
    cache->masks = std::move(full.masks);
    return out;
}

std::vector<double> forward(const Network& net, std::span<const double> input, bool training, std::uint64_t seed) {
    Matrix x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
    Rng rng(seed);
    Matrix y = run_forward(net, x, training ? &rng : nullptr, nullptr);
    return {y.data(), y.data() + y.size()};
}

double loss_value(const Matrix& predictions, const Matrix& targets, LossKind kind) {
    if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols()) {
        throw ValueError("prediction and target shapes differ");
    }
    const double n = static_cast<double>(predictions.size());
    if (kind == LossKind::mse) return (predictions - targets).squaredNorm() / n;
    double total = 0.0;
    for (Eigen::Index c = 0; c < predictions.cols(); ++c) {
        for (Eigen::Index r = 0; r < predictions.rows(); ++r) {
            const double p = std::clamp(predictions(r, c), kBceClamp, 1.0 - kBceClamp);
            const double y = targets(r, c);
            total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        }
    }
    return total / n;
}

LossAndGradients loss_and_gradients(const Network& net, const Matrix& inputs, const Matrix& targets, LossKind kind,
                                    Rng* dropout_rng, std::size_t batch_index) {
    FullCache cache;
    const Matrix pred = run_forward(net, inputs, dropout_rng, &cache);
    if (pred.rows() != targets.rows() || pred.cols() != targets.cols()) {
        throw ValueError("targets do not match the network output shape");
    }
    LossAndGradients result;
    result.loss = loss_value(pred, targets, kind);
    if (!std::isfinite(result.loss)) {
        throw DivergenceError("non-finite loss in batch " + std::to_string(batch_index), 0, batch_index);
    }

    const double n = static_cast<double>(pred.size());
    Matrix grad(pred.rows(), pred.cols());  // dLoss / d(network output)
    if (kind == LossKind::mse) {
        grad = (2.0 / n) * (pred - targets);
    } else {
        for (Eigen::Index c = 0; c < pred.cols(); ++c) {
            for (Eigen::Index r = 0; r < pred.rows(); ++r) {
                const double p = pred(r, c);
                if (p <= kBceClamp || p >= 1.0 - kBceClamp) {
                    grad(r, c) = 0.0;  // flat region of the clamped objective
                } else {
                    const double y = targets(r, c);
                    grad(r, c) = (-y / p + (1.0 - y) / (1.0 - p)) / n;
                }
            }
        }
    }

    result.gradients.resize(net.layers.size());
    for (std::size_t k = net.layers.size(); k-- > 0;) {
        const auto& layer = net.layers[k];
        if (cache.masks[k].size() > 0) grad.array() *= cache.masks[k].array();
        grad.array() *= activation_derivative(cache.activated[k], layer.spec.activation).array();
        result.gradients[k].weights = grad * cache.outputs[k].transpose();
        result.gradients[k].biases = grad.rowwise().sum();
        if (k > 0) grad = layer.weights.transpose() * grad;
    }
    return result;
}

// ---------------------------------------------------------------------------

AdamState AdamState::for_network(const Network& net, const AdamConfig& config) {
    AdamState s;
    s.config = config;
    for (const auto& l : net.layers) {
        s.first_moment.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.biases.size())});
        s.second_moment.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.biases.size())});
    }
    return s;
}

void adam_step(AdamState& state, Network& net, const Gradients& grads, std::size_t first_trainable) {
    if (grads.size() != net.layers.size() || state.first_moment.size() != net.layers.size() ||
        state.second_moment.size() != net.layers.size()) {
        throw ValueError("optimizer state and gradients must have one entry per layer");
    }
    ++state.step;
    const auto& cfg = state.config;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);

    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        if (param.rows() != g.rows() || param.cols() != g.cols() || m.rows() != g.rows() || m.cols() != g.cols()) {
            throw ValueError("gradient shape does not match its parameter");
        }
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
    };
    for (std::size_t k = first_trainable; k < net.layers.size(); ++k) {
        update(net.layers[k].weights, state.first_moment[k].weights, state.second_moment[k].weights,
               grads[k].weights);
        update(net.layers[k].biases, state.first_moment[k].biases, state.second_moment[k].biases, grads[k].biases);
    }
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (epochs < 1) throw ValueError("epochs must be >= 1");
    if (batch_size < 1) throw ValueError("batch size must be >= 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ValueError("validation fraction must lie in [0, 1)");
    }
}

namespace {

Matrix gather(const Matrix& m, std::span<const std::size_t> cols) {
    Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(static_cast<Eigen::Index>(cols[i]));
    return out;
}

}  // namespace

TrainHistory train(Network& net, const Matrix& inputs, const Matrix& targets, const TrainConfig& config,
                   const EpochCallback& on_epoch) {
    config.validate();
    net.validate();
    if (inputs.cols() == 0) throw ValueError("training needs at least one sample");
    if (inputs.cols() != targets.cols()) throw ValueError("input and target sample counts differ");
    if (static_cast<std::size_t>(inputs.rows()) != net.input_dim() ||
        static_cast<std::size_t>(targets.rows()) != net.output_dim()) {
        throw ValueError("training data does not match the network dimensions");
    }
    if (config.frozen_layers > net.layers.size()) throw ValueError("cannot freeze more layers than the network has");

    Rng rng(config.seed);
    const auto n = static_cast<std::size_t>(inputs.cols());
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::size_t n_fit = n;
    if (config.validation_fraction > 0.0) {
        rng.shuffle(std::span(perm));
        n_fit = n - static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(n)));
        if (n_fit == 0) throw ValueError("validation fraction leaves no samples to train on");
    }
    std::vector<std::size_t> fit_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_fit));
    std::vector<std::size_t> held_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_fit), perm.end());
    std::sort(fit_idx.begin(), fit_idx.end());
    std::sort(held_idx.begin(), held_idx.end());
    const Matrix x_fit = gather(inputs, fit_idx);
    const Matrix y_fit = gather(targets, fit_idx);
    const Matrix x_held = gather(inputs, held_idx);
    const Matrix y_held = gather(targets, held_idx);

    TrainHistory history;
    history.fit_samples = n_fit;
    history.held_out_samples = held_idx.size();
    auto state = AdamState::for_network(net, config.adam);

    std::vector<std::size_t> order(n_fit);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        if (config.shuffle_each_epoch) rng.shuffle(std::span(order));
        double weighted = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n_fit; start += config.batch_size, ++batch_index) {
            const auto len = std::min(config.batch_size, n_fit - start);
            std::span<const std::size_t> cols(order.data() + start, len);
            const Matrix xb = gather(x_fit, cols);
            const Matrix yb = gather(y_fit, cols);
            LossAndGradients lg;
            try {
                lg = loss_and_gradients(net, xb, yb, config.loss, &rng, batch_index);
            } catch (const DivergenceError&) {
                throw DivergenceError("training diverged (non-finite loss) at epoch " + std::to_string(epoch) +
                                          ", batch " + std::to_string(batch_index),
                                      epoch, batch_index);
            }
            adam_step(state, net, lg.gradients, config.frozen_layers);
            weighted += lg.loss * static_cast<double>(len);
        }
        EpochReport report;
        report.epoch = epoch;
        report.train_loss = weighted / static_cast<double>(n_fit);
        report.val_loss = held_idx.empty() ? std::nan("") : loss_value(forward(net, x_held), y_held, config.loss);
        history.train_loss.push_back(report.train_loss);
        history.val_loss.push_back(report.val_loss);
        if (on_epoch) on_epoch(report);
    }
    history.optimizer_steps = state.step;
    return history;
}

// ---------------------------------------------------------------------------

namespace {
constexpr char kModelMagic[9] = "HILOCNN\0";
}

std::string serialize(const ModelContainer& model) {
    using detail::put_le;
    model.network.validate();
    std::ostringstream out(std::ios::binary);
    out.write(kModelMagic, 8);
    put_le<std::uint32_t>(out, kModelFormatVersion);
    detail::put_string(out, model.role);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.network.layers.size()));
    for (const auto& l : model.network.layers) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.spec.input_dim));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.spec.output_dim));
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(l.spec.activation));
        put_le<double>(out, l.spec.dropout_rate);
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) put_le<double>(out, l.weights(r, c));
        }
        for (Eigen::Index r = 0; r < l.biases.size(); ++r) put_le<double>(out, l.biases(r));
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.blocks.size()));
    for (const auto& [name, body] : model.blocks) {
        detail::put_string(out, name);
        detail::put_string(out, body);
    }
    return std::move(out).str();
}

ModelContainer deserialize(std::string_view bytes) {
    using detail::get_le;
    std::istringstream in(std::string(bytes), std::ios::binary);
    detail::expect_magic(in, kModelMagic, "model file");
    const auto version = get_le<std::uint32_t>(in, "format version");
    if (version > kModelFormatVersion) {
        throw FormatError("model file version " + std::to_string(version) + " is newer than the supported version " +
                          std::to_string(kModelFormatVersion));
    }
    if (version == 0) throw FormatError("model file version 0 is invalid");
    ModelContainer model;
    model.role = detail::get_string(in, "role tag");
    const auto n_layers = get_le<std::uint32_t>(in, "layer count");
    if (n_layers == 0 || n_layers > 4096) throw FormatError("model file has an implausible layer count");
    for (std::uint32_t k = 0; k < n_layers; ++k) {
        LayerSpec spec;
        spec.input_dim = get_le<std::uint32_t>(in, "layer input dimension");
        spec.output_dim = get_le<std::uint32_t>(in, "layer output dimension");
        const auto act = get_le<std::uint8_t>(in, "activation");
        if (act > static_cast<std::uint8_t>(Activation::sigmoid)) throw FormatError("unknown activation code");
        spec.activation = static_cast<Activation>(act);
        spec.dropout_rate = get_le<double>(in, "dropout rate");
        if (spec.input_dim == 0 || spec.output_dim == 0 || spec.input_dim * spec.output_dim > (std::size_t{1} << 28)) {
            throw FormatError("model file has implausible layer dimensions");
        }
        DenseLayer layer{spec, Matrix(spec.output_dim, spec.input_dim), Vector(spec.output_dim)};
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = get_le<double>(in, "weights");
        }
        for (Eigen::Index r = 0; r < layer.biases.size(); ++r) layer.biases(r) = get_le<double>(in, "biases");
        model.network.layers.push_back(std::move(layer));
    }
    const auto n_blocks = get_le<std::uint32_t>(in, "block count");
    for (std::uint32_t i = 0; i < n_blocks; ++i) {
        auto name = detail::get_string(in, "block name");
        model.blocks[std::move(name)] = detail::get_string(in, "block body");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after model data");
    try {
        model.network.validate();
    } catch (const ValueError& e) {
        throw FormatError(std::string("model file is inconsistent: ") + e.what());
    }
    return model;
}

void save_model(const std::string& path, const ModelContainer& model) {
    const auto bytes = serialize(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write model file: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed while writing model file: " + path);
}

ModelContainer load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize(buf.str());
}

// ---------------------------------------------------------------------------

Matrix to_columns(std::span<const std::vector<double>> rows, std::size_t dim) {
    Matrix out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != dim) {
            throw ValueError("row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                             " values, expected " + std::to_string(dim));
        }
        out.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Vector>(rows[i].data(), static_cast<Eigen::Index>(dim));
    }
    return out;
}

Matrix predict_columns(const Network& net, const Matrix& inputs, unsigned threads) {
    constexpr Eigen::Index kBlock = 256;
    const Eigen::Index n = inputs.cols();
    Matrix out(static_cast<Eigen::Index>(net.output_dim()), n);
    if (static_cast<std::size_t>(inputs.rows()) != net.input_dim()) {
        throw ValueError("input has " + std::to_string(inputs.rows()) + " features, network expects " +
                         std::to_string(net.input_dim()));
    }
    if (n == 0) return out;
    if (!inputs.allFinite()) throw ValueError("input contains NaN or Inf");
    const Eigen::Index n_blocks = (n + kBlock - 1) / kBlock;
    auto work = [&](Eigen::Index first_block, Eigen::Index stride) {
        for (Eigen::Index b = first_block; b < n_blocks; b += stride) {
            const Eigen::Index start = b * kBlock;
            const Eigen::Index len = std::min(kBlock, n - start);
            out.middleCols(start, len) = run_forward(net, inputs.middleCols(start, len), nullptr, nullptr);
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_blocks)));
    if (threads == 1) {
        work(0, 1);
        return out;
    }
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(threads));
    pool.clear();
    return out;
}

}  // namespace hiloc::nn
