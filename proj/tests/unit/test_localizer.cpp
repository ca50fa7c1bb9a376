#include <doctest.h>

#include <algorithm>
#include <set>

#include "fig5_oracle.hpp"
#include "hiloc/localizer.hpp"
#include "random_instances.hpp"

using namespace hiloc;

namespace {

ReferencePointIndex index_of(std::initializer_list<std::pair<HierarchicalLabel, Point2>> pts) {
    ReferencePointIndex::Map m;
    for (const auto& [k, p] : pts) m.emplace(k, ReferencePoint{p, 1});
    return ReferencePointIndex(std::move(m));
}

std::set<std::size_t> ids(const std::vector<Candidate>& c) {
    std::set<std::size_t> out;
    for (const auto& x : c) out.insert(x.location);
    return out;
}

}  // namespace

TEST_CASE("building and floor decisions") {
    SegmentLayout layout{3, 2, 2};
    std::vector<double> v{0.1, 0.9, 0.3, 0.5, 0.5, 0.2, 0.7};
    const auto [b, f] = decide_building_floor(v, layout);
    CHECK(b == 1);
    CHECK(f == 0);
}

TEST_CASE("candidate selection examples") {
    std::vector<double> four{0.9, 0.8, 0.1, 0.05};
    auto c = select_candidates(four, {5, 0.0});
    CHECK(c.size() == 4);
    CHECK(c.front() == Candidate{0, 0.9});
    CHECK(c.back() == Candidate{3, 0.05});

    std::vector<double> three{0.9, 0.8, 0.1};
    c = select_candidates(three, {3, 0.5});
    CHECK(c == std::vector<Candidate>{{0, 0.9}, {1, 0.8}});

    std::vector<double> ties{0.3, 0.7, 0.7, 0.1, 0.7};
    c = select_candidates(ties, {10, 1.0});
    CHECK(c == std::vector<Candidate>{{1, 0.7}, {2, 0.7}, {4, 0.7}});
    c = select_candidates(ties, {2, 0.0});
    CHECK(c == std::vector<Candidate>{{1, 0.7}, {2, 0.7}});

    CHECK_THROWS_AS(select_candidates(three, {0, 0.1}), ValueError);
    CHECK_THROWS_AS(select_candidates(three, {1, 1.5}), ValueError);
    CHECK_THROWS_AS(select_candidates({}, {1, 0.1}), ValueError);
}

TEST_CASE("threshold uses the maximum of the whole location vector") {
    std::vector<double> v{0.2, 0.3, 1.0};
    // kappa = 3 includes the max; kappa alone never drops it.
    CHECK(select_candidates(v, {3, 0.5}).size() == 1);
    std::vector<double> w{1.0, 0.45, 0.4};
    CHECK(select_candidates(w, {3, 0.42}) == std::vector<Candidate>{{0, 1.0}, {1, 0.45}});
}

TEST_CASE("coordinate estimation examples") {
    const auto idx = index_of({{{0, 0, 0}, {0, 0}}, {{0, 0, 1}, {4, 0}}, {{0, 0, 2}, {10, 20}}, {{1, 1, 0}, {-3, 9}}});

    std::vector<Candidate> one{{2, 0.6}};
    auto e = estimate_coordinates(one, 0, 0, idx);
    CHECK(e.centroid == Point2{10, 20});
    CHECK(e.weighted_centroid == Point2{10, 20});
    CHECK(e.candidates_used == 1);
    CHECK_FALSE(e.fallback_used);

    std::vector<Candidate> two{{1, 3.0}, {0, 1.0}};
    e = estimate_coordinates(two, 0, 0, idx);
    CHECK(e.centroid == Point2{2, 0});
    CHECK(e.weighted_centroid == Point2{3, 0});

    std::vector<Candidate> missing{{7, 0.9}, {5, 0.8}};
    e = estimate_coordinates(missing, 0, 0, idx);
    CHECK(e.fallback_used);
    CHECK(e.candidates_used == 0);
    CHECK(e.centroid.x == doctest::Approx(14.0 / 3.0));
    CHECK(e.centroid.y == doctest::Approx(20.0 / 3.0));
    CHECK(e.weighted_centroid == e.centroid);

    e = estimate_coordinates({}, 1, 1, idx);
    CHECK(e.centroid == Point2{-3, 9});

    CHECK_THROWS_AS(estimate_coordinates(two, 1, 0, idx), UnknownFloorError);
    CHECK_THROWS_AS(estimate_coordinates(two, 2, 0, idx), ValueError);

    std::vector<Candidate> zero{{0, 0.0}, {1, 0.0}};
    e = estimate_coordinates(zero, 0, 0, idx);
    CHECK(e.weighted_centroid == e.centroid);
}

TEST_CASE("localize on an encoded ground truth with kappa 1 returns its reference point") {
    const auto idx = index_of({{{0, 0, 0}, {0, 0}}, {{0, 1, 2}, {5, 6}}, {{1, 0, 1}, {7, 8}}});
    SegmentLayout layout{2, 2, 3};
    std::vector<double> truth{1, 0, 0, 1, 0, 0, 1};
    for (double sigma : {0.0, 0.3, 1.0}) {
        const auto est = localize(truth, layout, {1, sigma}, idx);
        CHECK(est.building == 0);
        CHECK(est.floor == 1);
        CHECK(est.centroid == Point2{5, 6});
        CHECK(est.weighted_centroid == Point2{5, 6});
        CHECK(est.candidates_used == 1);
    }
}

TEST_CASE("localize on a floor without reference points") {
    const auto idx = index_of({{{0, 0, 0}, {0, 0}}, {{0, 1, 0}, {4, 8}}, {{1, 0, 0}, {100, 100}}});
    SegmentLayout layout{2, 3, 1};
    std::vector<double> v{0.9, 0.1, 0.1, 0.1, 0.9, 0.5};
    CHECK_THROWS_AS(localize(v, layout, {3, 0.2}, idx), UnknownFloorError);
    const auto est = localize(v, layout, {3, 0.2}, idx, true);
    CHECK(est.floor_unknown);
    CHECK(est.fallback_used);
    CHECK(est.candidates_used == 0);
    CHECK(est.centroid == Point2{2, 4});
}

TEST_CASE("kappa 1 results do not depend on sigma") {
    Rng rng(17);
    for (int t = 0; t < 500; ++t) {
        auto inst = testing::random_instance(rng);
        const auto a = select_candidates(inst.scores, {1, 0.0});
        for (double s : {0.1, 0.5, 0.99, 1.0, inst.sigma}) CHECK(select_candidates(inst.scores, {1, s}) == a);
    }
}

TEST_CASE("production estimate equals the literal procedure") {
    Rng rng(2718);
    int fallbacks = 0;
    for (int t = 0; t < 1000; ++t) {
        const auto inst = testing::random_instance(rng);
        const auto cand = select_candidates(inst.scores, {inst.kappa, inst.sigma});
        const auto prod = estimate_coordinates(cand, inst.building, inst.floor, inst.index);
        const auto ref = testing::oracle_estimate(inst.scores, inst.kappa, inst.sigma, inst.building, inst.floor,
                                                  inst.database);
        CHECK(prod.candidates_used == ref.n_c);
        CHECK(prod.fallback_used == ref.fallback);
        CHECK(prod.centroid == Point2{ref.c_s.x, ref.c_s.y});
        CHECK(prod.weighted_centroid == Point2{ref.c_w.x, ref.c_w.y});
        fallbacks += ref.fallback;
    }
    CHECK(fallbacks > 0);
    CHECK(fallbacks < 1000);
}

TEST_CASE("sigma monotonicity and kappa nestedness") {
    Rng rng(31415);
    for (int t = 0; t < 1000; ++t) {
        const auto inst = testing::random_instance(rng);
        const double s1 = rng.uniform();
        const double s2 = rng.uniform(s1, 1.0);
        const auto lo = ids(select_candidates(inst.scores, {inst.kappa, s1}));
        const auto hi = ids(select_candidates(inst.scores, {inst.kappa, s2}));
        CHECK(std::includes(lo.begin(), lo.end(), hi.begin(), hi.end()));
        const auto k = ids(select_candidates(inst.scores, {inst.kappa, 0.0}));
        const auto k1 = ids(select_candidates(inst.scores, {inst.kappa + 1, 0.0}));
        CHECK(std::includes(k1.begin(), k1.end(), k.begin(), k.end()));
        CHECK(k.size() == std::min(inst.kappa, inst.scores.size()));
    }
}

TEST_CASE("centroids stay inside the bounding box; equal scores give equal centroids") {
    Rng rng(99);
    for (int t = 0; t < 500; ++t) {
        auto inst = testing::random_instance(rng);
        const auto cand = select_candidates(inst.scores, {inst.kappa, inst.sigma});
        const auto est = estimate_coordinates(cand, inst.building, inst.floor, inst.index);
        if (est.fallback_used) continue;
        double lx = 1e18, hx = -1e18, ly = 1e18, hy = -1e18;
        for (const auto& c : cand) {
            if (const auto* rp = inst.index.find({inst.building, inst.floor, c.location})) {
                lx = std::min(lx, rp->position.x);
                hx = std::max(hx, rp->position.x);
                ly = std::min(ly, rp->position.y);
                hy = std::max(hy, rp->position.y);
            }
        }
        const double tol = 1e-9 * std::max(std::abs(lx), std::abs(ly));
        for (const auto& p : {est.centroid, est.weighted_centroid}) {
            CHECK(p.x >= lx - tol);
            CHECK(p.x <= hx + tol);
            CHECK(p.y >= ly - tol);
            CHECK(p.y <= hy + tol);
        }
        std::vector<Candidate> flat = cand;
        for (auto& c : flat) c.score = 0.5;
        const auto eq = estimate_coordinates(flat, inst.building, inst.floor, inst.index);
        CHECK(eq.weighted_centroid == eq.centroid);
    }
}

TEST_CASE("positive rescaling of location scores keeps the estimate") {
    Rng rng(7);
    for (int t = 0; t < 300; ++t) {
        const auto inst = testing::random_instance(rng);
        const double scale = rng.uniform(0.1, 10.0);
        auto scaled = inst.scores;
        for (auto& s : scaled) s *= scale;
        const auto c1 = select_candidates(inst.scores, {inst.kappa, inst.sigma});
        const auto c2 = select_candidates(scaled, {inst.kappa, inst.sigma});
        if (ids(c1) != ids(c2)) continue;  // rounding moved a score across the threshold
        const auto e1 = estimate_coordinates(c1, inst.building, inst.floor, inst.index);
        const auto e2 = estimate_coordinates(c2, inst.building, inst.floor, inst.index);
        CHECK(e1.centroid == e2.centroid);
        CHECK(e2.weighted_centroid.x == doctest::Approx(e1.weighted_centroid.x).epsilon(1e-12));
        CHECK(e2.weighted_centroid.y == doctest::Approx(e1.weighted_centroid.y).epsilon(1e-12));
    }
}
