#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hiloc/dataset.hpp"
#include "hiloc/labels.hpp"
#include "hiloc/localizer.hpp"
#include "hiloc/neuralnet.hpp"

namespace hiloc::eval {

struct MetricsReport {
    double building_hit_rate = 0.0;  // percent
    double floor_hit_rate = 0.0;     // percent, counted independently of the building
    double success_rate = 0.0;       // percent with both building and floor right
    double error_centroid = 0.0;     // mean planar distance, meters
    double error_weighted = 0.0;
    std::size_t n_samples = 0;
    std::size_t fallback_count = 0;
    std::size_t unknown_floor_count = 0;  // predicted floor absent from the reference index

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Ground truth of an evaluation set, aligned with the score columns.
struct Truth {
    std::vector<HierarchicalLabel> labels;
    std::vector<Point2> positions;

    static Truth of(std::span<const NormalizedSample> samples);
};

/// Metrics from precomputed classifier scores (one column per sample).
MetricsReport evaluate_scores(const nn::Matrix& scores, const Truth& truth, const SegmentLayout& layout,
                              const EstimatorParams& params, const ReferencePointIndex& index);

/// Runs the classifier on `samples` and scores the localizer output.
MetricsReport evaluate(const nn::Network& model, const SegmentLayout& layout, const EstimatorParams& params,
                       std::span<const NormalizedSample> samples, const ReferencePointIndex& index,
                       unsigned threads = 1);

struct SweepCell {
    std::size_t kappa = 0;
    std::optional<double> sigma;  // empty for kappa = 1, where sigma has no effect
    MetricsReport metrics;

    friend bool operator==(const SweepCell&, const SweepCell&) = default;
};

struct SweepResult {
    std::vector<SweepCell> cells;

    friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

/// Grid cells in the order kappa-major, sigma-minor; kappa = 1 appears once.
std::vector<SweepCell> sweep_grid(std::span<const std::size_t> kappas, std::span<const double> sigmas);

SweepResult sweep(const nn::Matrix& scores, const Truth& truth, const SegmentLayout& layout,
                  std::span<const std::size_t> kappas, std::span<const double> sigmas,
                  const ReferencePointIndex& index, unsigned threads = 1);

SweepResult sweep(const nn::Network& model, const SegmentLayout& layout, std::span<const std::size_t> kappas,
                  std::span<const double> sigmas, std::span<const NormalizedSample> samples,
                  const ReferencePointIndex& index, unsigned threads = 1);

/// kappa 1..10 and sigma 0.0..0.5 in steps of 0.1.
std::vector<std::size_t> default_kappas();
std::vector<double> default_sigmas();

/// Cells with success rate >= `min_success` and both errors below `max_error`
/// compete on the lowest weighted-centroid error. If no cell qualifies, the
/// highest success rate wins, ties going to the lower weighted error.
struct BestCellRule {
    double min_success = 90.0;
    double max_error = 10.0;
};

std::size_t best_cell(const SweepResult& result, const BestCellRule& rule = {});

struct KnnResult {
    MetricsReport metrics;
    std::size_t k_used = 0;  // k clamped to the training-set size
};

/// Euclidean kNN in normalized RSS space. Building and floor are majority votes
/// (ties go to the value seen first in distance order); the position is the
/// centroid of the neighbours' positions.
KnnResult knn_baseline(std::span<const NormalizedSample> train, std::span<const NormalizedSample> val,
                       std::size_t k, unsigned threads = 1);

/// Indices of the k nearest training samples, nearest first (ties: lower index).
std::vector<std::size_t> nearest_neighbors(std::span<const NormalizedSample> train, std::span<const double> query,
                                           std::size_t k);

enum class ReportFormat { csv, markdown };

/// Columns: kappa, sigma, building, floor, success, error_centroid, error_weighted.
std::string emit_report(const SweepResult& result, ReportFormat format, std::optional<std::size_t> best = {});

}  // namespace hiloc::eval
