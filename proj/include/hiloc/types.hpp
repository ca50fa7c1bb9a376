#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hiloc {

/// Number of access points (feature columns) in a UJIIndoorLoc fingerprint.
inline constexpr std::size_t kNumAccessPoints = 520;

/// RSS value the dataset uses for "access point not detected".
inline constexpr int kNotDetected = 100;
inline constexpr int kMinRssDbm = -104;
inline constexpr int kMaxRssDbm = 0;

/// Raised for malformed input files (bad rows, missing columns, bad containers).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for arguments that violate an operation's preconditions.
class ValueError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

/// One row of a UJIIndoorLoc-format file.
struct FingerprintRecord {
    std::array<int, kNumAccessPoints> rss{};
    double longitude = 0.0;  // planar meters
    double latitude = 0.0;   // planar meters
    int floor_id = 0;
    int building_id = 0;
    int space_id = 0;
    int relative_position = 0;  // 1 = inside, 2 = outside in front of the door
    int user_id = 0;
    int phone_id = 0;
    std::int64_t timestamp = 0;

    Point2 position() const { return {longitude, latitude}; }
};

/// Sequential (building, floor, location) numbers. Floor and location numbers
/// only mean something together with the levels above them.
struct HierarchicalLabel {
    std::size_t building = 0;
    std::size_t floor = 0;
    std::size_t location = 0;

    friend auto operator<=>(const HierarchicalLabel&, const HierarchicalLabel&) = default;
};

/// Building/floor/location counts in sequential order.
struct DatasetStats {
    std::size_t n_buildings = 0;
    std::vector<std::size_t> floors_per_building;               // N_F(i)
    std::vector<std::vector<std::size_t>> locations_per_floor;  // N_L(i, j)

    std::size_t max_floors() const;
    std::size_t max_locations() const;
    std::size_t total_locations() const;

    /// Throws ValueError when counts are zero or the shapes are inconsistent.
    void validate() const;

    friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

/// A fingerprint ready for the network: normalized features plus ground truth.
struct NormalizedSample {
    std::vector<double> features;
    HierarchicalLabel label;
    Point2 position;
};

}  // namespace hiloc
