#include "hiloc/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <thread>

#include <json.hpp>
#include <openssl/evp.h>

namespace hiloc {

using json = nlohmann::json;

namespace {

// splitmix64 finalizer; gives each training stage its own stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stage + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

nn::Matrix feature_columns(std::span<const NormalizedSample> samples) {
    nn::Matrix x(static_cast<Eigen::Index>(kNumAccessPoints), static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& f = samples[i].features;
        if (f.size() != kNumAccessPoints) throw ValueError("sample has the wrong feature count");
        x.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const nn::Vector>(f.data(), static_cast<Eigen::Index>(f.size()));
    }
    return x;
}

double constant_predictor_mse(const nn::Matrix& x) {
    const nn::Vector mean = x.rowwise().mean();
    return (x.colwise() - mean).squaredNorm() / static_cast<double>(x.size());
}

}  // namespace

unsigned RunConfig::effective_threads() const {
    if (threads > 0) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

void RunConfig::validate() const {
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ValueError("split ratio must lie in (0, 1)");
    if (!(fit_ratio > 0.0 && fit_ratio <= 1.0)) throw ValueError("fit ratio must lie in (0, 1]");
    if (!(bounds.floor_dbm < bounds.ceil_dbm)) throw ValueError("normalization floor must be below ceiling");
    if (epochs < 1) throw ValueError("epochs must be >= 1");
    if (batch_size < 1) throw ValueError("batch size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValueError("dropout must lie in [0, 1)");
    if (!(learning_rate > 0.0)) throw ValueError("learning rate must be positive");
    sae::AutoencoderSpec{kNumAccessPoints, sae_hidden}.validate();
    for (auto h : head_hidden) {
        if (h == 0) throw ValueError("classifier hidden widths must be >= 1");
    }
    estimator.validate();
}

std::string RunConfig::to_json() const {
    json j;
    j["data"] = data_path;
    j["cache"] = cache_path;
    j["model"] = model_path;
    j["report"] = report_path;
    j["seed"] = seed;
    j["split_ratio"] = split_ratio;
    j["rss_floor_dbm"] = bounds.floor_dbm;
    j["rss_ceil_dbm"] = bounds.ceil_dbm;
    j["sae_hidden"] = sae_hidden;
    j["classifier_hidden"] = head_hidden;
    j["dropout"] = dropout;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["fit_ratio"] = fit_ratio;
    j["learning_rate"] = learning_rate;
    j["freeze_encoder"] = freeze_encoder;
    j["kappa"] = estimator.kappa;
    j["sigma"] = estimator.sigma;
    j["sweep_kappas"] = sweep_kappas;
    j["sweep_sigmas"] = sweep_sigmas;
    j["threads"] = threads;
    return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("config must be a JSON object");
    RunConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "data") c.data_path = value.get<std::string>();
            else if (key == "cache") c.cache_path = value.get<std::string>();
            else if (key == "model") c.model_path = value.get<std::string>();
            else if (key == "report") c.report_path = value.get<std::string>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "split_ratio") c.split_ratio = value.get<double>();
            else if (key == "rss_floor_dbm") c.bounds.floor_dbm = value.get<double>();
            else if (key == "rss_ceil_dbm") c.bounds.ceil_dbm = value.get<double>();
            else if (key == "sae_hidden") c.sae_hidden = value.get<std::vector<std::size_t>>();
            else if (key == "classifier_hidden") c.head_hidden = value.get<std::vector<std::size_t>>();
            else if (key == "dropout") c.dropout = value.get<double>();
            else if (key == "epochs") c.epochs = value.get<std::size_t>();
            else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
            else if (key == "fit_ratio") c.fit_ratio = value.get<double>();
            else if (key == "learning_rate") c.learning_rate = value.get<double>();
            else if (key == "freeze_encoder") c.freeze_encoder = value.get<bool>();
            else if (key == "kappa") c.estimator.kappa = value.get<std::size_t>();
            else if (key == "sigma") c.estimator.sigma = value.get<double>();
            else if (key == "sweep_kappas") c.sweep_kappas = value.get<std::vector<std::size_t>>();
            else if (key == "sweep_sigmas") c.sweep_sigmas = value.get<std::vector<double>>();
            else if (key == "threads") c.threads = value.get<unsigned>();
            else throw FormatError("unknown config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("config has a value of the wrong type: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

// ---------------------------------------------------------------------------

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file for hashing: " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 initialisation failed");
    }
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    std::string hex;
    char byte[3];
    for (unsigned i = 0; i < len; ++i) {
        std::snprintf(byte, sizeof byte, "%02x", digest[i]);
        hex += byte;
    }
    return hex;
}

PrepareSummary summarize(const PreparedDataset& data) {
    PrepareSummary s;
    s.rows = data.rows.size();
    const auto locs = data.locations();
    s.stats = compute_stats(std::span<const RawLocation>(locs));
    s.multilabel_width = output_width(s.stats);
    s.multiclass_width = multiclass_width(s.stats);
    return s;
}

PreparedDataset load_prepared(const RunConfig& config, PrepareSummary* summary,
                              const std::optional<std::string>& expected_sha256) {
    if (config.data_path.empty()) throw ValueError("no dataset path given");
    std::string digest;
    if (expected_sha256 || summary) digest = sha256_file(config.data_path);
    if (expected_sha256 && digest != *expected_sha256) {
        throw FormatError("checksum mismatch for " + config.data_path + ": expected " + *expected_sha256 + ", got " +
                          digest);
    }
    const auto records = parse_csv(std::filesystem::path(config.data_path));
    if (records.empty()) throw FormatError(config.data_path + ": no data rows");
    auto data = prepare_dataset(records, config.bounds);
    if (summary) {
        *summary = summarize(data);
        summary->sha256 = digest;
    }
    return data;
}

// ---------------------------------------------------------------------------

TrainOutcome train_pipeline(const RunConfig& config, const PreparedDataset& data, const StageCallback& log) {
    config.validate();
    if (data.rows.empty()) throw ValueError("cannot train on an empty dataset");
    const auto locs = data.locations();
    const auto codec = build_codec(std::span<const RawLocation>(locs));
    const auto samples = to_samples(data.rows, codec);
    const auto [train_idx, val_idx] = split_indices(samples.size(), config.split_ratio, config.seed);
    std::vector<NormalizedSample> train, val;
    for (auto i : train_idx) train.push_back(samples[i]);
    for (auto i : val_idx) val.push_back(samples[i]);
    const auto index = build_reference_index(train);

    const nn::Matrix x_train = feature_columns(train);
    nn::TrainConfig tc;
    tc.epochs = config.epochs;
    tc.batch_size = config.batch_size;
    tc.validation_fraction = 1.0 - config.fit_ratio;
    tc.adam.learning_rate = config.learning_rate;

    TrainOutcome out;
    sae::AutoencoderSpec ae_spec{kNumAccessPoints, config.sae_hidden};
    tc.seed = derive_seed(config.seed, 1);
    auto pre = sae::pretrain(x_train, ae_spec, tc, [&](const nn::EpochReport& r) {
        if (log) log({"sae", r});
    });
    out.sae_history = pre.history;
    if (!val.empty()) {
        const nn::Matrix x_val = feature_columns(val);
        out.sae_val_mse = nn::loss_value(nn::forward(pre.autoencoder, x_val), x_val, nn::LossKind::mse);
        out.sae_baseline_mse = constant_predictor_mse(x_val);
    }

    const auto encoder = sae::extract_encoder(pre.autoencoder);
    out.encoder.role = "encoder";
    out.encoder.network = encoder;
    const auto width = output_width(codec.stats());
    classifier::HeadSpec head{config.head_hidden, nn::Activation::relu, config.dropout};
    auto model = classifier::assemble(encoder, width, head, derive_seed(config.seed, 2));

    nn::Matrix targets(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto t = encode(train[i].label, codec);
        targets.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const nn::Vector>(t.data(), static_cast<Eigen::Index>(t.size()));
    }
    tc.seed = derive_seed(config.seed, 3);
    out.classifier_history = classifier::fit(model, x_train, targets, tc,
                                             config.freeze_encoder ? encoder.layers.size() : 0,
                                             [&](const nn::EpochReport& r) {
                                                 if (log) log({"classifier", r});
                                             });

    json run;
    run["seed"] = config.seed;
    run["split_ratio"] = config.split_ratio;
    run["rss_floor_dbm"] = config.bounds.floor_dbm;
    run["rss_ceil_dbm"] = config.bounds.ceil_dbm;
    run["fit_ratio"] = config.fit_ratio;
    run["epochs"] = config.epochs;
    run["batch_size"] = config.batch_size;
    run["learning_rate"] = config.learning_rate;
    run["dropout"] = config.dropout;
    run["sae_hidden"] = config.sae_hidden;
    run["classifier_hidden"] = config.head_hidden;
    run["freeze_encoder"] = config.freeze_encoder;
    run["encoder_layers"] = encoder.layers.size();
    run["train_rows"] = train.size();
    run["validation_rows"] = val.size();

    auto nan_safe = [](const std::vector<double>& v) {
        json a = json::array();
        for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
        return a;
    };
    json hist;
    hist["sae_train_loss"] = nan_safe(out.sae_history.train_loss);
    hist["sae_monitor_loss"] = nan_safe(out.sae_history.val_loss);
    hist["classifier_train_loss"] = nan_safe(out.classifier_history.train_loss);
    hist["classifier_monitor_loss"] = nan_safe(out.classifier_history.val_loss);
    hist["sae_validation_mse"] = out.sae_val_mse;
    hist["sae_constant_predictor_mse"] = out.sae_baseline_mse;

    out.model.role = "classifier";
    out.model.network = std::move(model);
    out.model.blocks["codec"] = codec.to_text();
    out.model.blocks["reference_index"] = index.to_text();
    out.model.blocks["run"] = run.dump(2);
    out.model.blocks["history"] = hist.dump(2);
    return out;
}

// ---------------------------------------------------------------------------

TrainedModel TrainedModel::from_container(nn::ModelContainer container) {
    if (container.role != "classifier") {
        throw FormatError("model role is '" + container.role + "', expected 'classifier'");
    }
    for (const char* block : {"codec", "reference_index", "run"}) {
        if (!container.blocks.contains(block)) throw FormatError(std::string("model file lacks the ") + block + " block");
    }
    TrainedModel m;
    m.codec = LabelCodec::from_text(container.blocks.at("codec"));
    m.index = ReferencePointIndex::from_text(container.blocks.at("reference_index"));
    try {
        const auto run = json::parse(container.blocks.at("run"));
        m.seed = run.at("seed").get<std::uint64_t>();
        m.split_ratio = run.at("split_ratio").get<double>();
        m.bounds.floor_dbm = run.at("rss_floor_dbm").get<double>();
        m.bounds.ceil_dbm = run.at("rss_ceil_dbm").get<double>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("model run block is malformed: ") + e.what());
    }
    if (container.network.output_dim() != m.codec.layout().width()) {
        throw FormatError("model output width does not match its label codec");
    }
    m.container = std::move(container);
    return m;
}

TrainedModel TrainedModel::load(const std::string& path) { return from_container(nn::load_model(path)); }

namespace {

std::vector<NormalizedSample> split_part(const TrainedModel& model, const PreparedDataset& data, bool want_train) {
    const auto samples = to_samples(data.rows, model.codec);
    const auto [train_idx, val_idx] = split_indices(samples.size(), model.split_ratio, model.seed);
    std::vector<NormalizedSample> out;
    for (auto i : want_train ? train_idx : val_idx) out.push_back(samples[i]);
    return out;
}

}  // namespace

std::vector<NormalizedSample> validation_split(const TrainedModel& model, const PreparedDataset& data) {
    return split_part(model, data, false);
}

std::vector<NormalizedSample> training_split(const TrainedModel& model, const PreparedDataset& data) {
    return split_part(model, data, true);
}

Prediction predict_rss(const TrainedModel& model, std::span<const int> rss, const EstimatorParams& params) {
    if (rss.size() != kNumAccessPoints) {
        throw ValueError("expected " + std::to_string(kNumAccessPoints) + " RSS values, got " +
                         std::to_string(rss.size()));
    }
    FingerprintRecord record;
    for (std::size_t i = 0; i < kNumAccessPoints; ++i) {
        if (rss[i] != kNotDetected && (rss[i] < kMinRssDbm || rss[i] > kMaxRssDbm)) {
            throw ValueError("RSS value " + std::to_string(rss[i]) + " at position " + std::to_string(i + 1) +
                             " is neither 100 nor in [-104, 0]");
        }
        record.rss[i] = rss[i];
    }
    // Same float rounding as the prepared cache.
    auto features = normalize_rss(record, model.bounds);
    for (auto& f : features) f = static_cast<double>(static_cast<float>(f));
    Prediction p;
    p.scores = classifier::predict(model.container.network, features);
    p.estimate = localize(p.scores, model.layout(), params, model.index, true);
    p.building_id = model.codec.building_id(p.estimate.building);
    if (p.estimate.floor < model.codec.stats().floors_per_building[p.estimate.building]) {
        p.floor_id = model.codec.floor_id(p.estimate.building, p.estimate.floor);
    }
    return p;
}

}  // namespace hiloc
