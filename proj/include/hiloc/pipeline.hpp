#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hiloc/classifier.hpp"
#include "hiloc/dataset.hpp"
#include "hiloc/evaluation.hpp"
#include "hiloc/labels.hpp"
#include "hiloc/localizer.hpp"
#include "hiloc/neuralnet.hpp"
#include "hiloc/sae.hpp"

namespace hiloc {

/// Every knob of a run. Defaults reproduce the reference setup: 70:30 split,
/// 20 epochs, batch 10, SAE 256-128-256, head 64-128 with dropout 0.2, 0.90 of
/// the training split fitted and the rest monitored, kappa 8, sigma 0.2.
struct RunConfig {
    std::string data_path;
    std::string cache_path;
    std::string model_path = "model.hlm";
    std::string report_path;

    std::uint64_t seed = 7;
    double split_ratio = 0.7;
    NormalizationBounds bounds;

    std::vector<std::size_t> sae_hidden{256, 128, 256};
    std::vector<std::size_t> head_hidden{64, 128};
    double dropout = 0.20;
    std::size_t epochs = 20;
    std::size_t batch_size = 10;
    double fit_ratio = 0.90;
    double learning_rate = 1e-3;
    bool freeze_encoder = false;

    EstimatorParams estimator;
    std::vector<std::size_t> sweep_kappas = eval::default_kappas();
    std::vector<double> sweep_sigmas = eval::default_sigmas();
    unsigned threads = 0;  // 0 = hardware concurrency

    unsigned effective_threads() const;
    void validate() const;

    std::string to_json() const;
    /// Unknown keys are rejected.
    static RunConfig from_json(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------

struct PrepareSummary {
    std::size_t rows = 0;
    DatasetStats stats;
    std::size_t multilabel_width = 0;
    std::size_t multiclass_width = 0;
    std::string sha256;
};

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Reads the CSV (optionally checking its SHA-256) and normalizes it.
PreparedDataset load_prepared(const RunConfig& config, PrepareSummary* summary = nullptr,
                              const std::optional<std::string>& expected_sha256 = {});

/// Summary of an in-memory dataset (no checksum).
PrepareSummary summarize(const PreparedDataset& data);

// ---------------------------------------------------------------------------

struct StageLog {
    std::string stage;  // "sae" or "classifier"
    nn::EpochReport report;
};

using StageCallback = std::function<void(const StageLog&)>;

struct TrainOutcome {
    nn::ModelContainer model;
    nn::ModelContainer encoder;  // role "encoder"
    nn::TrainHistory sae_history;
    nn::TrainHistory classifier_history;
    double sae_val_mse = 0.0;       // reconstruction MSE on the validation split
    double sae_baseline_mse = 0.0;  // best constant predictor (per-feature mean) on the same split
};

/// SAE pretraining, encoder extraction, assembly and joint fit on the training
/// split, packaged with the codec, reference index and run metadata.
TrainOutcome train_pipeline(const RunConfig& config, const PreparedDataset& data, const StageCallback& log = {});

/// A trained classifier with everything needed to localize.
struct TrainedModel {
    nn::ModelContainer container;
    LabelCodec codec;
    ReferencePointIndex index;
    NormalizationBounds bounds;
    std::uint64_t seed = 0;
    double split_ratio = 0.7;

    SegmentLayout layout() const { return codec.layout(); }

    static TrainedModel from_container(nn::ModelContainer container);
    static TrainedModel load(const std::string& path);
};

/// The validation split the model was evaluated against (same seed and ratio).
std::vector<NormalizedSample> validation_split(const TrainedModel& model, const PreparedDataset& data);
std::vector<NormalizedSample> training_split(const TrainedModel& model, const PreparedDataset& data);

struct Prediction {
    LocalizationEstimate estimate;
    int building_id = 0;
    std::optional<int> floor_id;  // empty when the predicted floor does not exist in that building
    std::vector<double> scores;
};

/// Full inference path for one raw RSS vector (520 dBm values or sentinels).
Prediction predict_rss(const TrainedModel& model, std::span<const int> rss, const EstimatorParams& params);

}  // namespace hiloc
