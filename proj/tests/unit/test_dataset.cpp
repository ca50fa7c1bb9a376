#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "hiloc/dataset.hpp"
#include "synthetic.hpp"

using namespace hiloc;

namespace {

std::string header() {
    std::string h;
    for (int i = 1; i <= 520; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "WAP%03d", i);
        h += buf;
        h += ',';
    }
    return h + "LONGITUDE,LATITUDE,FLOOR,BUILDINGID,SPACEID,RELATIVEPOSITION,USERID,PHONEID,TIMESTAMP\n";
}

std::string row(int first_rss = -60, const std::string& tail = "-7541.26,4864921.9,2,1,106,2,2,23,1371713733") {
    std::string r = std::to_string(first_rss) + ",";
    for (int i = 1; i < 520; ++i) r += "100,";
    return r + tail + "\n";
}

}  // namespace

TEST_CASE("parse_csv reads a minimal file") {
    std::istringstream in(header() + row());
    const auto recs = parse_csv(in, "mini.csv");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].rss[0] == -60);
    CHECK(recs[0].rss[519] == 100);
    CHECK(recs[0].longitude == doctest::Approx(-7541.26));
    CHECK(recs[0].latitude == doctest::Approx(4864921.9));
    CHECK(recs[0].floor_id == 2);
    CHECK(recs[0].building_id == 1);
    CHECK(recs[0].space_id == 106);
    CHECK(recs[0].relative_position == 2);
    CHECK(recs[0].user_id == 2);
    CHECK(recs[0].phone_id == 23);
    CHECK(recs[0].timestamp == 1371713733);
}

TEST_CASE("parse_csv is header driven") {
    // Move LONGITUDE and LATITUDE to the front.
    std::string h = header();
    const std::string tail_cols = "LONGITUDE,LATITUDE,";
    h.erase(h.find(tail_cols), tail_cols.size());
    h = tail_cols + h;
    std::string r = "1.5,2.5," + row(-70, "3,0,7,1,1,1,5");
    std::istringstream in(h + r);
    const auto recs = parse_csv(in);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].longitude == 1.5);
    CHECK(recs[0].latitude == 2.5);
    CHECK(recs[0].floor_id == 3);
    CHECK(recs[0].rss[0] == -70);
}

TEST_CASE("parse_csv rejects out-of-range RSS with the line number") {
    std::istringstream in(header() + row() + row(42));
    try {
        parse_csv(in, "bad.csv");
        FAIL("expected a validation error");
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("bad.csv:3") != std::string::npos);
        CHECK(msg.find("validation error") != std::string::npos);
        CHECK(msg.find("WAP001") != std::string::npos);
    }
}

TEST_CASE("parse_csv reports schema and row errors") {
    std::string h = header();
    h.replace(h.find("SPACEID"), 7, "SPACE");
    std::istringstream missing(h + row());
    CHECK_THROWS_WITH_AS(parse_csv(missing, "s.csv"), doctest::Contains("schema error: missing column SPACEID"),
                         FormatError);

    std::istringstream short_row(header() + "1,2,3\n");
    CHECK_THROWS_WITH_AS(parse_csv(short_row, "r.csv"), doctest::Contains("r.csv:2"), FormatError);

    std::istringstream junk(header() + row(-60, "x,4864921.9,2,1,106,2,2,23,1371713733"));
    CHECK_THROWS_WITH_AS(parse_csv(junk, "j.csv"), doctest::Contains("LONGITUDE"), FormatError);

    std::istringstream empty("");
    CHECK_THROWS_AS(parse_csv(empty), FormatError);

    CHECK_THROWS_WITH_AS(parse_csv(std::filesystem::path("/no/such/file.csv")),
                         doctest::Contains("/no/such/file.csv"), FormatError);
}

TEST_CASE("sentinel and range boundaries parse") {
    std::istringstream in(header() + row(-104) + row(0) + row(100));
    const auto recs = parse_csv(in);
    REQUIRE(recs.size() == 3);
    std::istringstream below(header() + row(-105));
    CHECK_THROWS_AS(parse_csv(below), FormatError);
    std::istringstream above(header() + row(1));
    CHECK_THROWS_AS(parse_csv(above), FormatError);
}

TEST_CASE("write_csv round-trips through parse_csv") {
    testing::SyntheticSpec spec;
    spec.locations_per_floor = {{2, 1}, {1}};
    spec.samples_per_location = 2;
    const auto recs = testing::make_synthetic(spec);
    std::stringstream buf;
    write_csv(buf, recs);
    const auto back = parse_csv(buf);
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(back[i].rss == recs[i].rss);
        CHECK(raw_location(back[i]) == raw_location(recs[i]));
        CHECK(back[i].longitude == doctest::Approx(recs[i].longitude).epsilon(1e-9));
        CHECK(back[i].timestamp == recs[i].timestamp);
    }
}

TEST_CASE("normalization examples") {
    CHECK(normalize_value(100) == 0.0);
    CHECK(normalize_value(0) == 1.0);
    CHECK(normalize_value(-55) == 0.5);
    CHECK(normalize_value(-110) == 0.0);
    CHECK(normalize_value(-104) == doctest::Approx(6.0 / 110.0));
    NormalizationBounds tight{-90.0, -20.0};
    CHECK(normalize_value(-100, tight) == 0.0);
    CHECK(normalize_value(-10, tight) == 1.0);
    FingerprintRecord r;
    r.rss.fill(100);
    CHECK_THROWS_AS(normalize_rss(r, {0.0, 0.0}), ValueError);
}

TEST_CASE("normalization is monotone over detected values") {
    for (int v = -104; v < 0; ++v) {
        CHECK(normalize_value(v) <= normalize_value(v + 1));
        CHECK(normalize_value(v) >= 0.0);
        CHECK(normalize_value(v) <= 1.0);
    }
}

TEST_CASE("split sizes and determinism") {
    auto [tr, va] = split_indices(10, 0.7, 5);
    CHECK(tr.size() == 7);
    CHECK(va.size() == 3);
    auto [tr2, va2] = split_indices(10, 0.7, 5);
    CHECK(tr == tr2);
    CHECK(va == va2);
    CHECK(train_count(19937, 0.7) == 13956);
    CHECK(19937 - train_count(19937, 0.7) == 5981);
    CHECK_THROWS_AS(split_indices(0, 0.7, 1), ValueError);
    CHECK_THROWS_AS(split_indices(5, 1.0, 1), ValueError);
    CHECK_THROWS_AS(split_indices(5, 0.0, 1), ValueError);
}

TEST_CASE("split partitions for random sizes, ratios and seeds") {
    Rng rng(77);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + rng.below(300);
        const double ratio = rng.uniform(0.01, 0.99);
        const auto seed = rng.next();
        std::vector<int> items(n);
        std::iota(items.begin(), items.end(), 0);
        auto [tr, va] = split_train_val(std::span<const int>(items), ratio, seed);
        CHECK(tr.size() == train_count(n, ratio));
        std::vector<int> all = tr;
        all.insert(all.end(), va.begin(), va.end());
        std::sort(all.begin(), all.end());
        CHECK(all == items);
        CHECK(std::is_sorted(tr.begin(), tr.end()));
        CHECK(std::is_sorted(va.begin(), va.end()));
    }
}

TEST_CASE("split is close to uniform over which items go to training") {
    std::vector<int> hits(10, 0);
    for (std::uint64_t seed = 0; seed < 20000; ++seed) {
        auto [tr, va] = split_indices(10, 0.3, seed);
        for (auto i : tr) ++hits[i];
    }
    for (int h : hits) CHECK(h == doctest::Approx(6000).epsilon(0.05));
}

TEST_CASE("reference index means") {
    std::vector<NormalizedSample> s(3);
    s[0].label = {0, 0, 0};
    s[0].position = {0, 0};
    s[1].label = {0, 0, 0};
    s[1].position = {2, 4};
    s[2].label = {1, 2, 3};
    s[2].position = {7, -3};
    const auto idx = build_reference_index(s);
    CHECK(idx.size() == 2);
    REQUIRE(idx.find({0, 0, 0}));
    CHECK(idx.find({0, 0, 0})->position == Point2{1, 2});
    CHECK(idx.find({0, 0, 0})->count == 2);
    CHECK(idx.find({1, 2, 3})->position == Point2{7, -3});
    CHECK(idx.has_floor(1, 2));
    CHECK_FALSE(idx.has_floor(1, 1));
    CHECK_FALSE(idx.contains({0, 0, 1}));
    CHECK(*idx.floor_centroid(0, 0) == Point2{1, 2});
    CHECK_FALSE(idx.floor_centroid(2, 0));
    CHECK_THROWS_AS(build_reference_index({}), ValueError);
}

TEST_CASE("reference index matches a group-by oracle and stays in per-key bounding boxes") {
    Rng rng(123);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<NormalizedSample> s(50);
        for (auto& x : s) {
            x.label = {rng.below(2), rng.below(3), rng.below(4)};
            x.position = {rng.uniform(-100, 100), rng.uniform(-100, 100)};
        }
        std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<Point2>> groups;
        for (const auto& x : s) groups[{x.label.building, x.label.floor, x.label.location}].push_back(x.position);
        const auto idx = build_reference_index(s);
        CHECK(idx.size() == groups.size());
        for (const auto& [key, pts] : groups) {
            const auto* rp = idx.find({std::get<0>(key), std::get<1>(key), std::get<2>(key)});
            REQUIRE(rp);
            double sx = 0, sy = 0, lx = 1e9, hx = -1e9, ly = 1e9, hy = -1e9;
            for (const auto& p : pts) {
                sx += p.x;
                sy += p.y;
                lx = std::min(lx, p.x);
                hx = std::max(hx, p.x);
                ly = std::min(ly, p.y);
                hy = std::max(hy, p.y);
            }
            CHECK(rp->count == pts.size());
            CHECK(rp->position.x == doctest::Approx(sx / pts.size()).epsilon(1e-12));
            CHECK(rp->position.y == doctest::Approx(sy / pts.size()).epsilon(1e-12));
            CHECK(rp->position.x >= lx);
            CHECK(rp->position.x <= hx);
            CHECK(rp->position.y >= ly);
            CHECK(rp->position.y <= hy);
        }
    }
}

TEST_CASE("reference index text round-trip is exact") {
    std::vector<NormalizedSample> s(2);
    s[0].label = {0, 1, 2};
    s[0].position = {-7541.2637, 4864921.9046};
    s[1].label = {2, 4, 109};
    s[1].position = {0.1, 1.0 / 3.0};
    const auto idx = build_reference_index(s);
    const auto back = ReferencePointIndex::from_text(idx.to_text());
    CHECK(back == idx);
    CHECK_THROWS_AS(ReferencePointIndex::from_text("0 0 0 1.0\n"), FormatError);
    CHECK_THROWS_AS(ReferencePointIndex::from_text("0 0 0 1 2 1\n0 0 0 1 2 1\n"), FormatError);
}

TEST_CASE("compute_stats examples") {
    std::vector<RawLocation> one{{0, 0, 101, 1}};
    const auto s1 = compute_stats(std::span<const RawLocation>(one));
    CHECK(s1.n_buildings == 1);
    CHECK(s1.floors_per_building == std::vector<std::size_t>{1});
    CHECK(s1.locations_per_floor == std::vector<std::vector<std::size_t>>{{1}});

    std::vector<RawLocation> two{{0, 0, 101, 1}, {0, 0, 101, 2}};
    const auto s2 = compute_stats(std::span<const RawLocation>(two));
    CHECK(s2.locations_per_floor[0][0] == 2);

    std::vector<RawLocation> mixed{{2, 4, 1, 1}, {0, 0, 5, 1}, {0, 1, 5, 1}, {2, 0, 5, 2}, {0, 0, 5, 1}};
    const auto s3 = compute_stats(std::span<const RawLocation>(mixed));
    CHECK(s3.n_buildings == 2);
    CHECK(s3.floors_per_building == std::vector<std::size_t>{2, 2});
    CHECK(s3.max_floors() == 2);
    CHECK(s3.total_locations() == 4);
    CHECK_THROWS_AS(compute_stats(std::span<const RawLocation>{}), ValueError);
}

TEST_CASE("compute_stats is invariant to record order") {
    const auto recs = testing::make_synthetic();
    auto locs = std::vector<RawLocation>();
    for (const auto& r : recs) locs.push_back(raw_location(r));
    const auto base = compute_stats(std::span<const RawLocation>(locs));
    Rng rng(8);
    for (int t = 0; t < 10; ++t) {
        rng.shuffle(std::span(locs));
        CHECK(compute_stats(std::span<const RawLocation>(locs)) == base);
    }
}

TEST_CASE("cache round-trip and corruption handling") {
    testing::SyntheticSpec spec;
    spec.locations_per_floor = {{2, 2}, {3}};
    spec.samples_per_location = 3;
    const auto data = prepare_dataset(testing::make_synthetic(spec));
    std::stringstream buf;
    write_cache(buf, data);
    const std::string bytes = buf.str();
    CHECK(bytes.substr(0, 8) == std::string("HILOCDS\0", 8));

    std::stringstream again;
    write_cache(again, data);
    CHECK(again.str() == bytes);

    std::istringstream in(bytes);
    const auto back = read_cache(in);
    REQUIRE(back.rows.size() == data.rows.size());
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        CHECK(back.rows[i].features == data.rows[i].features);
        CHECK(back.rows[i].position == data.rows[i].position);
        CHECK(back.rows[i].where == data.rows[i].where);
    }

    std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_WITH_AS(read_cache(truncated), doctest::Contains("truncated"), FormatError);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    std::istringstream bm(bad_magic);
    CHECK_THROWS_AS(read_cache(bm), FormatError);
    std::string bad_version = bytes;
    bad_version[8] = 9;
    std::istringstream bv(bad_version);
    CHECK_THROWS_WITH_AS(read_cache(bv), doctest::Contains("version 9"), FormatError);
}

TEST_CASE("prepared features stay in [0, 1] with sentinels at zero") {
    const auto recs = testing::make_synthetic();
    const auto data = prepare_dataset(recs);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        for (std::size_t j = 0; j < kNumAccessPoints; ++j) {
            const float f = data.rows[i].features[j];
            CHECK(f >= 0.0f);
            CHECK(f <= 1.0f);
            if (recs[i].rss[j] == kNotDetected) CHECK(f == 0.0f);
        }
    }
}
