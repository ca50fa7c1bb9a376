#pragma once

#include <vector>

#include "fig5_oracle.hpp"
#include "hiloc/dataset.hpp"
#include "hiloc/random.hpp"

namespace hiloc::testing {

/// A random localization problem: location scores, a reference index with
/// holes, and the (building, floor) the scores are decoded against.
struct LocalizerInstance {
    std::vector<double> scores;
    ReferencePointIndex index;
    OracleDatabase database;
    std::size_t building = 0;
    std::size_t floor = 0;
    std::size_t kappa = 1;
    double sigma = 0.0;
};

inline LocalizerInstance random_instance(Rng& rng) {
    LocalizerInstance inst;
    const std::size_t n_loc = 1 + rng.below(30);
    inst.scores.resize(n_loc);
    const bool coarse = rng.below(3) == 0;  // coarse scores produce ties
    for (auto& s : inst.scores) s = coarse ? static_cast<double>(1 + rng.below(5)) / 5.0 : rng.uniform(1e-6, 1.0);
    if (rng.below(4) == 0) {
        const double scale = rng.uniform(0.01, 100.0);
        for (auto& s : inst.scores) s *= scale;
    }
    inst.building = rng.below(3);
    inst.floor = rng.below(4);
    inst.kappa = 1 + rng.below(12);
    inst.sigma = rng.below(5) == 0 ? static_cast<double>(rng.below(11)) / 10.0 : rng.uniform();
    ReferencePointIndex::Map entries;
    const double keep = rng.uniform(0.0, 1.0);
    for (std::size_t b = 0; b < 3; ++b) {
        for (std::size_t f = 0; f < 4; ++f) {
            for (std::size_t l = 0; l < n_loc + 2; ++l) {
                if (rng.uniform() > keep && !(b == inst.building && f == inst.floor && l == 0)) continue;
                const Point2 p{rng.uniform(-7700.0, -7300.0), rng.uniform(4864700.0, 4865000.0)};
                entries.emplace(HierarchicalLabel{b, f, l}, ReferencePoint{p, 1 + rng.below(20)});
                inst.database[{b, f, l}] = {p.x, p.y};
            }
        }
    }
    inst.index = ReferencePointIndex(std::move(entries));
    return inst;
}

}  // namespace hiloc::testing
