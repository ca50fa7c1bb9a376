#include "hiloc/labels.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace hiloc {

std::size_t output_width(const DatasetStats& stats) {
    stats.validate();
    return stats.n_buildings + stats.max_floors() + stats.max_locations();
}

std::size_t multiclass_width(const DatasetStats& stats) {
    stats.validate();
    return stats.total_locations();
}

SegmentLayout SegmentLayout::of(const DatasetStats& stats) {
    stats.validate();
    return {stats.n_buildings, stats.max_floors(), stats.max_locations()};
}

SegmentScores<const double> split_output(std::span<const double> values, const SegmentLayout& layout) {
    if (values.size() != layout.width()) {
        throw ValueError("multi-label vector has length " + std::to_string(values.size()) + ", expected " +
                         std::to_string(layout.width()));
    }
    return {values.subspan(0, layout.n_buildings), values.subspan(layout.floor_offset(), layout.n_floors),
            values.subspan(layout.location_offset(), layout.n_locations)};
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw ValueError("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

// ---------------------------------------------------------------------------

LabelCodec LabelCodec::from_hierarchy(const RawHierarchy& hierarchy) {
    LabelCodec codec;
    for (const auto& [b, floors] : hierarchy) {
        codec.buildings_.push_back(b);
        auto& fl = codec.floors_.emplace_back();
        auto& locs = codec.locations_.emplace_back();
        for (const auto& [f, spaces] : floors) {
            fl.push_back(f);
            auto& l = locs.emplace_back();
            for (const auto& [key, count] : spaces) l.push_back(key);
        }
    }
    codec.rebuild_stats();
    return codec;
}

void LabelCodec::rebuild_stats() {
    stats_ = {};
    stats_.n_buildings = buildings_.size();
    for (std::size_t b = 0; b < buildings_.size(); ++b) {
        stats_.floors_per_building.push_back(floors_[b].size());
        auto& per_floor = stats_.locations_per_floor.emplace_back();
        for (const auto& l : locations_[b]) per_floor.push_back(l.size());
    }
}

namespace {

template <typename T>
std::size_t index_of(const std::vector<T>& sorted, const T& value, const char* level, const std::string& what) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), value);
    if (it == sorted.end() || *it != value) {
        throw ValueError(std::string("unknown ") + level + " identifier " + what);
    }
    return static_cast<std::size_t>(it - sorted.begin());
}

}  // namespace

HierarchicalLabel LabelCodec::label_of(const RawLocation& where) const {
    HierarchicalLabel label;
    label.building = index_of(buildings_, where.building_id, "building", std::to_string(where.building_id));
    label.floor = index_of(floors_[label.building], where.floor_id, "floor",
                           std::to_string(where.floor_id) + " in building " + std::to_string(where.building_id));
    label.location = index_of(locations_[label.building][label.floor],
                              LocationKey{where.space_id, where.relative_position}, "location",
                              "(" + std::to_string(where.space_id) + ", " +
                                  std::to_string(where.relative_position) + ") on floor " +
                                  std::to_string(where.floor_id) + " of building " +
                                  std::to_string(where.building_id));
    return label;
}

bool LabelCodec::is_valid(const HierarchicalLabel& label) const {
    return label.building < buildings_.size() && label.floor < floors_[label.building].size() &&
           label.location < locations_[label.building][label.floor].size();
}

RawLocation LabelCodec::raw_of(const HierarchicalLabel& label) const {
    if (!is_valid(label)) throw ValueError("label is out of range for this codec");
    const auto& key = locations_[label.building][label.floor][label.location];
    return {buildings_[label.building], floors_[label.building][label.floor], key.first, key.second};
}

int LabelCodec::building_id(std::size_t building) const { return buildings_.at(building); }

int LabelCodec::floor_id(std::size_t building, std::size_t floor) const { return floors_.at(building).at(floor); }

std::string LabelCodec::to_text() const {
    std::ostringstream out;
    out << "# level raw-identifier(s) sequential-index\n";
    for (std::size_t b = 0; b < buildings_.size(); ++b) out << "building " << buildings_[b] << ' ' << b << '\n';
    for (std::size_t b = 0; b < buildings_.size(); ++b) {
        for (std::size_t f = 0; f < floors_[b].size(); ++f) {
            out << "floor " << buildings_[b] << ' ' << floors_[b][f] << ' ' << f << '\n';
        }
    }
    for (std::size_t b = 0; b < buildings_.size(); ++b) {
        for (std::size_t f = 0; f < floors_[b].size(); ++f) {
            const auto& locs = locations_[b][f];
            for (std::size_t l = 0; l < locs.size(); ++l) {
                out << "location " << buildings_[b] << ' ' << floors_[b][f] << ' ' << locs[l].first << ' '
                    << locs[l].second << ' ' << l << '\n';
            }
        }
    }
    return out.str();
}

LabelCodec LabelCodec::from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::map<int, std::size_t> buildings;
    std::map<std::pair<int, int>, std::size_t> floors;
    std::map<std::pair<std::pair<int, int>, LocationKey>, std::size_t> locations;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw FormatError("codec line " + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string level;
        ls >> level;
        std::size_t seq = 0;
        bool inserted = false;
        if (level == "building") {
            int b;
            if (!(ls >> b >> seq)) fail("malformed building entry");
            inserted = buildings.emplace(b, seq).second;
        } else if (level == "floor") {
            int b, f;
            if (!(ls >> b >> f >> seq)) fail("malformed floor entry");
            inserted = floors.emplace(std::pair{b, f}, seq).second;
        } else if (level == "location") {
            int b, f, s, r;
            if (!(ls >> b >> f >> s >> r >> seq)) fail("malformed location entry");
            inserted = locations.emplace(std::pair{std::pair{b, f}, LocationKey{s, r}}, seq).second;
        } else {
            fail("unknown level '" + level + "'");
        }
        if (!inserted) fail("duplicate entry");
    }

    RawHierarchy h;
    for (const auto& [bf, seq] : floors) {
        if (!buildings.contains(bf.first)) throw FormatError("codec: floor refers to an unknown building");
    }
    for (const auto& [key, seq] : locations) {
        if (!floors.contains(key.first)) throw FormatError("codec: location refers to an unknown floor");
        h[key.first.first][key.first.second][key.second] = 1;
    }
    if (h.size() != buildings.size() || floors.size() != [&] {
            std::size_t n = 0;
            for (const auto& [b, fl] : h) n += fl.size();
            return n;
        }()) {
        throw FormatError("codec: every building and floor needs at least one location");
    }
    auto codec = from_hierarchy(h);
    // Sequential numbers must agree with the ascending-identifier rule.
    for (const auto& [b, seq] : buildings) {
        if (seq >= codec.buildings_.size() || codec.buildings_[seq] != b) {
            throw FormatError("codec: building sequence numbers are not in identifier order");
        }
    }
    for (const auto& [bf, seq] : floors) {
        const auto bseq = buildings.at(bf.first);
        if (seq >= codec.floors_[bseq].size() || codec.floors_[bseq][seq] != bf.second) {
            throw FormatError("codec: floor sequence numbers are not in identifier order");
        }
    }
    for (const auto& [key, seq] : locations) {
        const auto bseq = buildings.at(key.first.first);
        const auto fseq = floors.at(key.first);
        const auto& locs = codec.locations_[bseq][fseq];
        if (seq >= locs.size() || locs[seq] != key.second) {
            throw FormatError("codec: location sequence numbers are not in identifier order");
        }
    }
    return codec;
}

// ---------------------------------------------------------------------------

LabelCodec build_codec(std::span<const RawLocation> locations) {
    if (locations.empty()) throw ValueError("codec needs at least one record");
    return LabelCodec::from_hierarchy(collect_hierarchy(locations));
}

LabelCodec build_codec(const DatasetStats& stats, std::span<const RawLocation> locations) {
    auto codec = build_codec(locations);
    if (!(codec.stats() == stats)) throw ValueError("records are inconsistent with the supplied statistics");
    return codec;
}

std::vector<double> encode(const HierarchicalLabel& label, const LabelCodec& codec) {
    if (!codec.is_valid(label)) {
        throw ValueError("label (" + std::to_string(label.building) + ", " + std::to_string(label.floor) + ", " +
                         std::to_string(label.location) + ") is out of range");
    }
    const auto layout = codec.layout();
    std::vector<double> out(layout.width(), 0.0);
    out[label.building] = 1.0;
    out[layout.floor_offset() + label.floor] = 1.0;
    out[layout.location_offset() + label.location] = 1.0;
    return out;
}

HierarchicalLabel decode(std::span<const double> values, const SegmentLayout& layout) {
    const auto seg = split_output(values, layout);
    return {argmax(seg.building), argmax(seg.floor), argmax(seg.location)};
}

std::vector<NormalizedSample> to_samples(std::span<const PreparedRow> rows, const LabelCodec& codec) {
    std::vector<NormalizedSample> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        out.push_back({std::vector<double>(r.features.begin(), r.features.end()), codec.label_of(r.where), r.position});
    }
    return out;
}

}  // namespace hiloc
