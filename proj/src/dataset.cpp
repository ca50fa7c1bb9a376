#include "hiloc/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "binary_io.hpp"

namespace hiloc {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

[[noreturn]] void row_error(const std::string& source, std::size_t line, const std::string& msg) {
    throw FormatError(source + ":" + std::to_string(line) + ": " + msg);
}

template <typename T>
T parse_number(std::string_view field, const std::string& source, std::size_t line,
               std::string_view column) {
    T value{};
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || field.empty()) {
        row_error(source, line,
                  "malformed value '" + std::string(field) + "' in column " + std::string(column));
    }
    return value;
}

// UJIIndoorLoc integer columns occasionally carry a trailing ".0" in re-exported files.
int parse_int_field(std::string_view field, const std::string& source, std::size_t line,
                    std::string_view column) {
    const auto d = parse_number<double>(field, source, line, column);
    if (!std::isfinite(d) || d != std::floor(d) || std::fabs(d) > 2e9) {
        row_error(source, line,
                  "expected an integer in column " + std::string(column) + ", got '" +
                      std::string(field) + "'");
    }
    return static_cast<int>(d);
}

constexpr const char* kMetaColumns[] = {"LONGITUDE", "LATITUDE", "FLOOR",   "BUILDINGID", "SPACEID",
                                        "RELATIVEPOSITION", "USERID", "PHONEID", "TIMESTAMP"};

std::string wap_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "WAP%03zu", i + 1);
    return buf;
}

}  // namespace

std::vector<FingerprintRecord> parse_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open dataset file: " + path.string());
    return parse_csv(in, path.string());
}

std::vector<FingerprintRecord> parse_csv(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError(source + ": empty file (missing header row)");

    const auto header = split_fields(line);
    std::map<std::string, std::size_t, std::less<>> column_of;
    for (std::size_t i = 0; i < header.size(); ++i) column_of.emplace(std::string(header[i]), i);

    auto require = [&](const std::string& name) {
        auto it = column_of.find(name);
        if (it == column_of.end()) throw FormatError(source + ": schema error: missing column " + name);
        return it->second;
    };
    std::array<std::size_t, kNumAccessPoints> wap_col{};
    for (std::size_t i = 0; i < kNumAccessPoints; ++i) wap_col[i] = require(wap_name(i));
    std::array<std::size_t, std::size(kMetaColumns)> meta_col{};
    for (std::size_t i = 0; i < meta_col.size(); ++i) meta_col[i] = require(kMetaColumns[i]);

    std::vector<FingerprintRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            row_error(source, line_no,
                      "expected " + std::to_string(header.size()) + " fields, found " +
                          std::to_string(fields.size()));
        }
        FingerprintRecord r;
        for (std::size_t i = 0; i < kNumAccessPoints; ++i) {
            const int v = parse_int_field(fields[wap_col[i]], source, line_no, wap_name(i));
            if (v != kNotDetected && (v < kMinRssDbm || v > kMaxRssDbm)) {
                row_error(source, line_no,
                          "validation error: " + wap_name(i) + " = " + std::to_string(v) +
                              " is neither the not-detected sentinel 100 nor in [-104, 0]");
            }
            r.rss[i] = v;
        }
        r.longitude = parse_number<double>(fields[meta_col[0]], source, line_no, "LONGITUDE");
        r.latitude = parse_number<double>(fields[meta_col[1]], source, line_no, "LATITUDE");
        r.floor_id = parse_int_field(fields[meta_col[2]], source, line_no, "FLOOR");
        r.building_id = parse_int_field(fields[meta_col[3]], source, line_no, "BUILDINGID");
        r.space_id = parse_int_field(fields[meta_col[4]], source, line_no, "SPACEID");
        r.relative_position = parse_int_field(fields[meta_col[5]], source, line_no, "RELATIVEPOSITION");
        r.user_id = parse_int_field(fields[meta_col[6]], source, line_no, "USERID");
        r.phone_id = parse_int_field(fields[meta_col[7]], source, line_no, "PHONEID");
        r.timestamp = parse_number<std::int64_t>(fields[meta_col[8]], source, line_no, "TIMESTAMP");
        if (!std::isfinite(r.longitude) || !std::isfinite(r.latitude)) {
            row_error(source, line_no, "non-finite coordinates");
        }
        if (r.building_id < 0 || r.floor_id < 0) {
            row_error(source, line_no, "negative BUILDINGID or FLOOR");
        }
        records.push_back(r);
    }
    return records;
}

void write_csv(std::ostream& out, std::span<const FingerprintRecord> records) {
    for (std::size_t i = 0; i < kNumAccessPoints; ++i) out << wap_name(i) << ',';
    for (std::size_t i = 0; i < std::size(kMetaColumns); ++i) {
        out << kMetaColumns[i] << (i + 1 < std::size(kMetaColumns) ? ',' : '\n');
    }
    char buf[64];
    for (const auto& r : records) {
        for (int v : r.rss) out << v << ',';
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,", r.longitude, r.latitude);
        out << buf << r.floor_id << ',' << r.building_id << ',' << r.space_id << ','
            << r.relative_position << ',' << r.user_id << ',' << r.phone_id << ',' << r.timestamp
            << '\n';
    }
}

double normalize_value(int rss, const NormalizationBounds& bounds) {
    if (rss == kNotDetected) return 0.0;
    const double t = (static_cast<double>(rss) - bounds.floor_dbm) / (bounds.ceil_dbm - bounds.floor_dbm);
    return std::clamp(t, 0.0, 1.0);
}

std::vector<double> normalize_rss(const FingerprintRecord& record, const NormalizationBounds& bounds) {
    if (!(bounds.floor_dbm < bounds.ceil_dbm)) {
        throw ValueError("normalization floor must be below ceiling");
    }
    std::vector<double> out(kNumAccessPoints);
    for (std::size_t i = 0; i < kNumAccessPoints; ++i) out[i] = normalize_value(record.rss[i], bounds);
    return out;
}

std::size_t train_count(std::size_t n, double ratio) {
    return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double ratio,
                                                                            std::uint64_t seed) {
    if (n == 0) throw ValueError("cannot split an empty dataset");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ValueError("split ratio must lie in (0, 1)");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span(perm));
    const auto n_train = train_count(n, ratio);
    std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> val(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {std::move(train), std::move(val)};
}

// ---------------------------------------------------------------------------

const ReferencePoint* ReferencePointIndex::find(const HierarchicalLabel& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

bool ReferencePointIndex::has_floor(std::size_t building, std::size_t floor) const {
    auto it = entries_.lower_bound(HierarchicalLabel{building, floor, 0});
    return it != entries_.end() && it->first.building == building && it->first.floor == floor;
}

std::optional<Point2> ReferencePointIndex::floor_centroid(std::size_t building, std::size_t floor) const {
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (auto it = entries_.lower_bound(HierarchicalLabel{building, floor, 0});
         it != entries_.end() && it->first.building == building && it->first.floor == floor; ++it) {
        sx += it->second.position.x;
        sy += it->second.position.y;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return Point2{sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

std::optional<Point2> ReferencePointIndex::building_centroid(std::size_t building) const {
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (auto it = entries_.lower_bound(HierarchicalLabel{building, 0, 0});
         it != entries_.end() && it->first.building == building; ++it) {
        sx += it->second.position.x;
        sy += it->second.position.y;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return Point2{sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

std::optional<Point2> ReferencePointIndex::centroid() const {
    if (entries_.empty()) return std::nullopt;
    double sx = 0.0, sy = 0.0;
    for (const auto& [key, rp] : entries_) {
        sx += rp.position.x;
        sy += rp.position.y;
    }
    const double n = static_cast<double>(entries_.size());
    return Point2{sx / n, sy / n};
}

std::string ReferencePointIndex::to_text() const {
    std::string out;
    char buf[160];
    for (const auto& [key, rp] : entries_) {
        std::snprintf(buf, sizeof buf, "%zu %zu %zu %.17g %.17g %zu\n", key.building, key.floor,
                      key.location, rp.position.x, rp.position.y, rp.count);
        out += buf;
    }
    return out;
}

ReferencePointIndex ReferencePointIndex::from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    Map entries;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::istringstream ls(line);
        HierarchicalLabel key;
        ReferencePoint rp;
        if (!(ls >> key.building >> key.floor >> key.location >> rp.position.x >> rp.position.y >> rp.count)) {
            throw FormatError("reference index line " + std::to_string(line_no) + " is malformed");
        }
        if (!entries.emplace(key, rp).second) {
            throw FormatError("reference index has a duplicate key at line " + std::to_string(line_no));
        }
    }
    return ReferencePointIndex(std::move(entries));
}

bool operator==(const ReferencePointIndex& a, const ReferencePointIndex& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    return std::equal(a.entries_.begin(), a.entries_.end(), b.entries_.begin(), [](const auto& l, const auto& r) {
        return l.first == r.first && l.second.position == r.second.position && l.second.count == r.second.count;
    });
}

ReferencePointIndex build_reference_index(std::span<const NormalizedSample> train) {
    if (train.empty()) throw ValueError("reference index needs at least one training sample");
    struct Acc {
        double sx = 0.0, sy = 0.0;
        std::size_t n = 0;
    };
    std::map<HierarchicalLabel, Acc> acc;
    for (const auto& s : train) {
        auto& a = acc[s.label];
        a.sx += s.position.x;
        a.sy += s.position.y;
        ++a.n;
    }
    ReferencePointIndex::Map entries;
    for (const auto& [key, a] : acc) {
        const double n = static_cast<double>(a.n);
        entries.emplace(key, ReferencePoint{{a.sx / n, a.sy / n}, a.n});
    }
    return ReferencePointIndex(std::move(entries));
}

// ---------------------------------------------------------------------------

RawHierarchy collect_hierarchy(std::span<const RawLocation> locations) {
    RawHierarchy h;
    for (const auto& loc : locations) {
        ++h[loc.building_id][loc.floor_id][{loc.space_id, loc.relative_position}];
    }
    return h;
}

DatasetStats stats_of(const RawHierarchy& hierarchy) {
    DatasetStats stats;
    stats.n_buildings = hierarchy.size();
    for (const auto& [building, floors] : hierarchy) {
        stats.floors_per_building.push_back(floors.size());
        auto& per_floor = stats.locations_per_floor.emplace_back();
        for (const auto& [floor, locs] : floors) per_floor.push_back(locs.size());
    }
    return stats;
}

DatasetStats compute_stats(std::span<const RawLocation> locations) {
    if (locations.empty()) throw ValueError("statistics need at least one record");
    return stats_of(collect_hierarchy(locations));
}

DatasetStats compute_stats(std::span<const FingerprintRecord> records) {
    std::vector<RawLocation> locs;
    locs.reserve(records.size());
    for (const auto& r : records) locs.push_back(raw_location(r));
    return compute_stats(std::span<const RawLocation>(locs));
}

std::size_t DatasetStats::max_floors() const {
    return floors_per_building.empty() ? 0 : *std::max_element(floors_per_building.begin(), floors_per_building.end());
}

std::size_t DatasetStats::max_locations() const {
    std::size_t m = 0;
    for (const auto& b : locations_per_floor)
        for (auto n : b) m = std::max(m, n);
    return m;
}

std::size_t DatasetStats::total_locations() const {
    std::size_t total = 0;
    for (const auto& b : locations_per_floor)
        for (auto n : b) total += n;
    return total;
}

void DatasetStats::validate() const {
    if (n_buildings == 0) throw ValueError("stats: no buildings");
    if (floors_per_building.size() != n_buildings || locations_per_floor.size() != n_buildings) {
        throw ValueError("stats: per-building vectors do not match the building count");
    }
    for (std::size_t b = 0; b < n_buildings; ++b) {
        if (floors_per_building[b] == 0) throw ValueError("stats: building without floors");
        if (locations_per_floor[b].size() != floors_per_building[b]) {
            throw ValueError("stats: per-floor location counts do not match the floor count");
        }
        for (auto n : locations_per_floor[b]) {
            if (n == 0) throw ValueError("stats: floor without locations");
        }
    }
}

// ---------------------------------------------------------------------------

std::vector<RawLocation> PreparedDataset::locations() const {
    std::vector<RawLocation> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.where);
    return out;
}

PreparedDataset prepare_dataset(std::span<const FingerprintRecord> records, const NormalizationBounds& bounds) {
    PreparedDataset data;
    data.bounds = bounds;
    data.rows.reserve(records.size());
    for (const auto& r : records) {
        const auto norm = normalize_rss(r, bounds);
        PreparedRow row;
        row.features.assign(norm.begin(), norm.end());
        row.position = r.position();
        row.where = raw_location(r);
        data.rows.push_back(std::move(row));
    }
    return data;
}

namespace {
constexpr char kCacheMagic[9] = "HILOCDS\0";
constexpr std::uint32_t kCacheVersion = 1;
}  // namespace

void write_cache(std::ostream& out, const PreparedDataset& data) {
    using detail::put_le;
    out.write(kCacheMagic, 8);
    put_le<std::uint32_t>(out, kCacheVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.rows.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(kNumAccessPoints));
    put_le<double>(out, data.bounds.floor_dbm);
    put_le<double>(out, data.bounds.ceil_dbm);
    for (std::size_t j = 0; j < kNumAccessPoints; ++j) {
        for (const auto& r : data.rows) put_le<float>(out, r.features.at(j));
    }
    for (const auto& r : data.rows) put_le<double>(out, r.position.x);
    for (const auto& r : data.rows) put_le<double>(out, r.position.y);
    for (const auto& r : data.rows) put_le<std::int32_t>(out, r.where.building_id);
    for (const auto& r : data.rows) put_le<std::int32_t>(out, r.where.floor_id);
    for (const auto& r : data.rows) put_le<std::int32_t>(out, r.where.space_id);
    for (const auto& r : data.rows) put_le<std::int32_t>(out, r.where.relative_position);
}

PreparedDataset read_cache(std::istream& in) {
    using detail::get_le;
    detail::expect_magic(in, kCacheMagic, "dataset cache");
    const auto version = get_le<std::uint32_t>(in, "cache version");
    if (version != kCacheVersion) {
        throw FormatError("dataset cache version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCacheVersion) + ")");
    }
    const auto n = get_le<std::uint32_t>(in, "row count");
    const auto width = get_le<std::uint32_t>(in, "feature count");
    if (width != kNumAccessPoints) throw FormatError("dataset cache has unexpected feature count");
    PreparedDataset data;
    data.bounds.floor_dbm = get_le<double>(in, "normalization floor");
    data.bounds.ceil_dbm = get_le<double>(in, "normalization ceiling");
    data.rows.resize(n);
    for (auto& r : data.rows) r.features.resize(kNumAccessPoints);
    for (std::size_t j = 0; j < kNumAccessPoints; ++j) {
        for (auto& r : data.rows) r.features[j] = get_le<float>(in, "feature column");
    }
    for (auto& r : data.rows) r.position.x = get_le<double>(in, "x column");
    for (auto& r : data.rows) r.position.y = get_le<double>(in, "y column");
    for (auto& r : data.rows) r.where.building_id = get_le<std::int32_t>(in, "building column");
    for (auto& r : data.rows) r.where.floor_id = get_le<std::int32_t>(in, "floor column");
    for (auto& r : data.rows) r.where.space_id = get_le<std::int32_t>(in, "space column");
    for (auto& r : data.rows) r.where.relative_position = get_le<std::int32_t>(in, "position column");
    return data;
}

void write_cache(const std::filesystem::path& path, const PreparedDataset& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write dataset cache: " + path.string());
    write_cache(out, data);
    if (!out) throw FormatError("failed while writing dataset cache: " + path.string());
}

PreparedDataset read_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open dataset cache: " + path.string());
    return read_cache(in);
}

}  // namespace hiloc
