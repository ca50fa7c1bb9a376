#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hiloc/dataset.hpp"
#include "hiloc/types.hpp"

namespace hiloc {

/// Width of the concatenated one-hot target: N_B + max N_F + max N_L.
std::size_t output_width(const DatasetStats& stats);

/// Output count of a flattened (one class per location) classifier: sum of N_L.
std::size_t multiclass_width(const DatasetStats& stats);

/// Half-open index ranges of the three segments inside a multi-label vector.
struct SegmentLayout {
    std::size_t n_buildings = 0;
    std::size_t n_floors = 0;     // max floors over buildings
    std::size_t n_locations = 0;  // max locations over floors

    static SegmentLayout of(const DatasetStats& stats);

    std::size_t width() const { return n_buildings + n_floors + n_locations; }
    std::size_t floor_offset() const { return n_buildings; }
    std::size_t location_offset() const { return n_buildings + n_floors; }

    friend bool operator==(const SegmentLayout&, const SegmentLayout&) = default;
};

template <typename T>
struct SegmentScores {
    std::span<T> building;
    std::span<T> floor;
    std::span<T> location;
};

/// Splits a multi-label vector by index into its building, floor and location parts.
SegmentScores<const double> split_output(std::span<const double> values, const SegmentLayout& layout);

/// Index of the largest element; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Bidirectional raw-identifier <-> sequential-number mapping at each level.
/// Sequential numbers follow the ascending order of the raw identifiers.
class LabelCodec {
public:
    using LocationKey = std::pair<int, int>;  // (SPACEID, RELATIVEPOSITION)

    LabelCodec() = default;

    static LabelCodec from_hierarchy(const RawHierarchy& hierarchy);

    const DatasetStats& stats() const { return stats_; }
    SegmentLayout layout() const { return SegmentLayout::of(stats_); }

    /// Throws ValueError for identifiers the codec has never seen.
    HierarchicalLabel label_of(const RawLocation& where) const;
    RawLocation raw_of(const HierarchicalLabel& label) const;

    int building_id(std::size_t building) const;
    int floor_id(std::size_t building, std::size_t floor) const;

    bool is_valid(const HierarchicalLabel& label) const;

    /// Human-readable form: one "level raw-identifier(s) sequential-index" line per entry.
    std::string to_text() const;
    static LabelCodec from_text(const std::string& text);

    friend bool operator==(const LabelCodec& a, const LabelCodec& b) {
        return a.buildings_ == b.buildings_ && a.floors_ == b.floors_ && a.locations_ == b.locations_;
    }

private:
    void rebuild_stats();

    std::vector<int> buildings_;
    std::vector<std::vector<int>> floors_;
    std::vector<std::vector<std::vector<LocationKey>>> locations_;
    DatasetStats stats_;
};

/// Builds the codec from the records and checks it reproduces `stats`.
LabelCodec build_codec(const DatasetStats& stats, std::span<const RawLocation> locations);
LabelCodec build_codec(std::span<const RawLocation> locations);

/// One-hot segments concatenated: 1 at building, N_B + floor and N_B + maxF + location.
std::vector<double> encode(const HierarchicalLabel& label, const LabelCodec& codec);

/// Segment-wise argmax of a multi-label vector.
HierarchicalLabel decode(std::span<const double> values, const SegmentLayout& layout);

/// Attaches sequential labels to prepared rows.
std::vector<NormalizedSample> to_samples(std::span<const PreparedRow> rows, const LabelCodec& codec);

}  // namespace hiloc
