#include "hiloc/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hiloc {

void EstimatorParams::validate() const {
    if (kappa < 1) throw ValueError("kappa must be >= 1");
    if (!(sigma >= 0.0 && sigma <= 1.0)) throw ValueError("sigma must lie in [0, 1]");
}

std::pair<std::size_t, std::size_t> decide_building_floor(std::span<const double> scores,
                                                          const SegmentLayout& layout) {
    const auto seg = split_output(scores, layout);
    return {argmax(seg.building), argmax(seg.floor)};
}

std::vector<Candidate> select_candidates(std::span<const double> location_scores, const EstimatorParams& params) {
    params.validate();
    if (location_scores.empty()) throw ValueError("location score vector is empty");
    for (double s : location_scores) {
        if (!std::isfinite(s)) throw ValueError("location scores must be finite");
    }
    std::vector<std::size_t> order(location_scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto k = std::min(params.kappa, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (location_scores[a] != location_scores[b]) return location_scores[a] > location_scores[b];
                          return a < b;
                      });
    const double threshold =
        params.sigma * *std::max_element(location_scores.begin(), location_scores.end());
    std::vector<Candidate> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double s = location_scores[order[i]];
        if (s >= threshold) out.push_back({order[i], s});
    }
    return out;
}

CoordinateEstimate estimate_coordinates(std::span<const Candidate> candidates, std::size_t building,
                                        std::size_t floor, const ReferencePointIndex& index) {
    if (!index.has_floor(building, floor)) {
        throw UnknownFloorError("no reference points for building " + std::to_string(building) + ", floor " +
                                std::to_string(floor));
    }
    double sum_x = 0.0, sum_y = 0.0, wsum_x = 0.0, wsum_y = 0.0, sum_w = 0.0;
    std::size_t n = 0;
    for (const auto& c : candidates) {
        const auto* rp = index.find({building, floor, c.location});
        if (!rp) continue;
        sum_x += rp->position.x;
        sum_y += rp->position.y;
        wsum_x += c.score * rp->position.x;
        wsum_y += c.score * rp->position.y;
        sum_w += c.score;
        ++n;
    }
    CoordinateEstimate est;
    est.candidates_used = n;
    if (n == 0) {
        est.fallback_used = true;
        est.centroid = *index.floor_centroid(building, floor);
        est.weighted_centroid = est.centroid;
        return est;
    }
    const double dn = static_cast<double>(n);
    est.centroid = {sum_x / dn, sum_y / dn};
    // All-zero weights leave the weighted mean undefined; use the plain one.
    est.weighted_centroid = sum_w > 0.0 ? Point2{wsum_x / sum_w, wsum_y / sum_w} : est.centroid;
    return est;
}

LocalizationEstimate localize(std::span<const double> scores, const SegmentLayout& layout,
                              const EstimatorParams& params, const ReferencePointIndex& index,
                              bool building_fallback) {
    const auto seg = split_output(scores, layout);
    LocalizationEstimate out;
    out.building = argmax(seg.building);
    out.floor = argmax(seg.floor);
    const auto candidates = select_candidates(seg.location, params);
    if (building_fallback && !index.has_floor(out.building, out.floor)) {
        auto c = index.building_centroid(out.building);
        if (!c) c = index.centroid();
        if (!c) throw UnknownFloorError("reference index is empty");
        out.centroid = *c;
        out.weighted_centroid = *c;
        out.fallback_used = true;
        out.floor_unknown = true;
        return out;
    }
    const auto est = estimate_coordinates(candidates, out.building, out.floor, index);
    out.centroid = est.centroid;
    out.weighted_centroid = est.weighted_centroid;
    out.candidates_used = est.candidates_used;
    out.fallback_used = est.fallback_used;
    return out;
}

}  // namespace hiloc
