#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hiloc/random.hpp"
#include "hiloc/types.hpp"

namespace hiloc {

/// Raw dataset identifiers of a location. SPACEID and RELATIVEPOSITION together
/// form the location identifier within a floor.
struct RawLocation {
    int building_id = 0;
    int floor_id = 0;
    int space_id = 0;
    int relative_position = 0;

    friend auto operator<=>(const RawLocation&, const RawLocation&) = default;
};

inline RawLocation raw_location(const FingerprintRecord& r) {
    return {r.building_id, r.floor_id, r.space_id, r.relative_position};
}

// ---------------------------------------------------------------------------
// CSV input

std::vector<FingerprintRecord> parse_csv(const std::filesystem::path& path);

/// Parses from a stream; `source` names the input in error messages.
std::vector<FingerprintRecord> parse_csv(std::istream& in, const std::string& source = "<stream>");

/// Writes records in UJIIndoorLoc column order (WAP001..WAP520, LONGITUDE, ...).
void write_csv(std::ostream& out, std::span<const FingerprintRecord> records);

// ---------------------------------------------------------------------------
// Normalization

struct NormalizationBounds {
    double floor_dbm = -110.0;
    double ceil_dbm = 0.0;
};

/// Min-max scaling to [0, 1]; the not-detected sentinel maps to exactly 0.
double normalize_value(int rss, const NormalizationBounds& bounds = {});

std::vector<double> normalize_rss(const FingerprintRecord& record,
                                  const NormalizationBounds& bounds = {});

// ---------------------------------------------------------------------------
// Train/validation split

/// Number of training rows for a split of n items: round(ratio * n).
std::size_t train_count(std::size_t n, double ratio);

/// Uniform seeded shuffle, then the first round(ratio * n) items go to
/// training. Each part keeps the input's relative order.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_train_val(std::span<const T> items, double ratio,
                                                          std::uint64_t seed);

/// Index form of the split: (train indices, validation indices), each ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            double ratio,
                                                                            std::uint64_t seed);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_train_val(std::span<const T> items, double ratio,
                                                          std::uint64_t seed) {
    auto [train_idx, val_idx] = split_indices(items.size(), ratio, seed);
    std::pair<std::vector<T>, std::vector<T>> out;
    out.first.reserve(train_idx.size());
    out.second.reserve(val_idx.size());
    for (auto i : train_idx) out.first.push_back(items[i]);
    for (auto i : val_idx) out.second.push_back(items[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Reference points

struct ReferencePoint {
    Point2 position;
    std::size_t count = 0;  // training rows averaged into `position`
};

/// Mean coordinates per (building, floor, location) key of the training split.
class ReferencePointIndex {
public:
    using Map = std::map<HierarchicalLabel, ReferencePoint>;

    ReferencePointIndex() = default;
    explicit ReferencePointIndex(Map entries) : entries_(std::move(entries)) {}

    const ReferencePoint* find(const HierarchicalLabel& key) const;
    bool contains(const HierarchicalLabel& key) const { return find(key) != nullptr; }

    /// True if any entry lies on (building, floor).
    bool has_floor(std::size_t building, std::size_t floor) const;

    /// Unweighted mean of all entries on (building, floor); nullopt if none.
    std::optional<Point2> floor_centroid(std::size_t building, std::size_t floor) const;

    /// Unweighted mean of all entries in a building; nullopt if none.
    std::optional<Point2> building_centroid(std::size_t building) const;

    /// Unweighted mean of all entries; nullopt when empty.
    std::optional<Point2> centroid() const;

    const Map& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    /// Text form, one "b f l x y count" line per entry.
    std::string to_text() const;
    static ReferencePointIndex from_text(const std::string& text);

    friend bool operator==(const ReferencePointIndex& a, const ReferencePointIndex& b);

private:
    Map entries_;
};

ReferencePointIndex build_reference_index(std::span<const NormalizedSample> train);

// ---------------------------------------------------------------------------
// Statistics

/// Distinct raw identifiers at each level, sorted ascending.
using RawHierarchy = std::map<int, std::map<int, std::map<std::pair<int, int>, std::size_t>>>;

RawHierarchy collect_hierarchy(std::span<const RawLocation> locations);

DatasetStats stats_of(const RawHierarchy& hierarchy);

DatasetStats compute_stats(std::span<const RawLocation> locations);
DatasetStats compute_stats(std::span<const FingerprintRecord> records);

// ---------------------------------------------------------------------------
// Prepared (normalized) dataset and its binary cache

struct PreparedRow {
    std::vector<float> features;
    Point2 position;
    RawLocation where;
};

struct PreparedDataset {
    NormalizationBounds bounds;
    std::vector<PreparedRow> rows;

    std::vector<RawLocation> locations() const;
};

PreparedDataset prepare_dataset(std::span<const FingerprintRecord> records,
                                const NormalizationBounds& bounds = {});

/// Columnar little-endian cache; layout documented in docs/formats.md.
void write_cache(std::ostream& out, const PreparedDataset& data);
PreparedDataset read_cache(std::istream& in);

void write_cache(const std::filesystem::path& path, const PreparedDataset& data);
PreparedDataset read_cache(const std::filesystem::path& path);

}  // namespace hiloc
