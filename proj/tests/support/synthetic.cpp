#include "synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "hiloc/random.hpp"

namespace hiloc::testing {

namespace {

constexpr double kOriginX = -7600.0;
constexpr double kOriginY = 4864800.0;
constexpr double kBuildingPitch = 150.0;
constexpr double kFootprint = 60.0;
constexpr double kStoreyHeight = 4.0;

struct AccessPoint {
    std::size_t building;
    double x, y, z;
};

}  // namespace

std::vector<FingerprintRecord> make_synthetic(const SyntheticSpec& spec) {
    Rng rng(spec.seed);
    std::vector<AccessPoint> aps;
    for (std::size_t b = 0; b < spec.locations_per_floor.size(); ++b) {
        for (std::size_t f = 0; f < spec.locations_per_floor[b].size(); ++f) {
            for (std::size_t a = 0; a < spec.aps_per_floor; ++a) {
                aps.push_back({b, kBuildingPitch * static_cast<double>(b) + rng.uniform(0.0, kFootprint),
                               rng.uniform(0.0, kFootprint), kStoreyHeight * static_cast<double>(f) + 2.5});
            }
        }
    }
    if (aps.size() > kNumAccessPoints) throw ValueError("synthetic layout needs more than 520 access points");

    std::vector<FingerprintRecord> out;
    std::int64_t stamp = 1371700000;
    for (std::size_t b = 0; b < spec.locations_per_floor.size(); ++b) {
        const int raw_b = spec.building_ids.empty() ? static_cast<int>(b) : spec.building_ids.at(b);
        for (std::size_t f = 0; f < spec.locations_per_floor[b].size(); ++f) {
            const std::size_t n_loc = spec.locations_per_floor[b][f];
            const std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_loc))));
            for (std::size_t l = 0; l < n_loc; ++l) {
                const double cell = kFootprint / static_cast<double>(cols);
                const double lx = kBuildingPitch * static_cast<double>(b) + cell * (static_cast<double>(l % cols) + 0.5);
                const double ly = cell * (static_cast<double>(l / cols) + 0.5);
                const double lz = kStoreyHeight * static_cast<double>(f) + 1.2;
                for (std::size_t s = 0; s < spec.samples_per_location; ++s) {
                    FingerprintRecord r;
                    r.rss.fill(kNotDetected);
                    const double x = lx + rng.uniform(-0.5, 0.5);
                    const double y = ly + rng.uniform(-0.5, 0.5);
                    for (std::size_t a = 0; a < aps.size(); ++a) {
                        const auto& ap = aps[a];
                        const double d = std::max(1.0, std::hypot(ap.x - x, ap.y - y, ap.z - lz));
                        double rss = -30.0 - 22.0 * std::log10(d) + spec.noise_db * rng.normal();
                        rss -= 14.0 * std::abs(ap.z - lz) / kStoreyHeight;
                        if (ap.building != b) rss -= 25.0;
                        const long v = std::lround(rss);
                        if (v >= -100) r.rss[a] = static_cast<int>(std::clamp<long>(v, kMinRssDbm, kMaxRssDbm));
                    }
                    r.longitude = kOriginX + x;
                    r.latitude = kOriginY + y;
                    r.floor_id = static_cast<int>(f);
                    r.building_id = raw_b;
                    r.space_id = static_cast<int>(100 * (f + 1) + l / 2 + 1);
                    r.relative_position = static_cast<int>(1 + l % 2);
                    r.user_id = static_cast<int>(s % 18 + 1);
                    r.phone_id = static_cast<int>(s % 24 + 1);
                    r.timestamp = stamp++;
                    out.push_back(r);
                }
            }
        }
    }
    return out;
}

}  // namespace hiloc::testing
