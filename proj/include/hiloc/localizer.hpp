#pragma once

#include <span>
#include <utility>
#include <vector>

#include "hiloc/dataset.hpp"
#include "hiloc/labels.hpp"
#include "hiloc/types.hpp"

namespace hiloc {

/// kappa: how many of the largest location scores are considered.
/// sigma: candidates scoring below sigma * max(location scores) are dropped;
/// 0 disables filtering, 1 keeps only the maxima.
struct EstimatorParams {
    std::size_t kappa = 8;
    double sigma = 0.2;

    void validate() const;
};

struct Candidate {
    std::size_t location = 0;
    double score = 0.0;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct CoordinateEstimate {
    Point2 centroid;
    Point2 weighted_centroid;
    std::size_t candidates_used = 0;
    bool fallback_used = false;
};

struct LocalizationEstimate {
    std::size_t building = 0;
    std::size_t floor = 0;
    Point2 centroid;
    Point2 weighted_centroid;
    std::size_t candidates_used = 0;
    bool fallback_used = false;
    bool floor_unknown = false;  // predicted floor has no reference points
};

/// Raised when the predicted (building, floor) has no reference points.
class UnknownFloorError : public ValueError {
public:
    using ValueError::ValueError;
};

/// Independent argmax over the building and floor segments (lowest index wins ties).
std::pair<std::size_t, std::size_t> decide_building_floor(std::span<const double> scores,
                                                          const SegmentLayout& layout);

/// The kappa largest scores (lower index first on ties), minus those below
/// sigma * max over the whole vector, in descending score order.
std::vector<Candidate> select_candidates(std::span<const double> location_scores, const EstimatorParams& params);

/// Centroid and score-weighted centroid of the candidates that exist as
/// reference points on (building, floor). Without any, both fall back to the
/// centroid of all reference points on that floor. Throws ValueError when the
/// floor has no reference points at all (UnknownFloorError).
CoordinateEstimate estimate_coordinates(std::span<const Candidate> candidates, std::size_t building,
                                        std::size_t floor, const ReferencePointIndex& index);

/// Decision plus coordinates. With `building_fallback`, a floor without
/// reference points yields the centroid of the building's reference points and
/// sets `floor_unknown`; otherwise UnknownFloorError propagates.
LocalizationEstimate localize(std::span<const double> scores, const SegmentLayout& layout,
                              const EstimatorParams& params, const ReferencePointIndex& index,
                              bool building_fallback = false);

}  // namespace hiloc
