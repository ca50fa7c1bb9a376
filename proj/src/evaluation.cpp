#include "hiloc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <thread>

#include "hiloc/classifier.hpp"

namespace hiloc::eval {

namespace {

double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Summing in sorted order makes the mean independent of sample order.
double order_free_mean(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    double total = 0.0;
    for (double v : values) total += v;
    return total / static_cast<double>(values.size());
}

double percent(std::size_t hits, std::size_t n) {
    return n == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i = t; i < n; i += threads) fn(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

Truth Truth::of(std::span<const NormalizedSample> samples) {
    Truth t;
    t.labels.reserve(samples.size());
    t.positions.reserve(samples.size());
    for (const auto& s : samples) {
        t.labels.push_back(s.label);
        t.positions.push_back(s.position);
    }
    return t;
}

MetricsReport evaluate_scores(const nn::Matrix& scores, const Truth& truth, const SegmentLayout& layout,
                              const EstimatorParams& params, const ReferencePointIndex& index) {
    const auto n = static_cast<std::size_t>(scores.cols());
    if (truth.labels.size() != n || truth.positions.size() != n) {
        throw ValueError("score columns and ground truth have different lengths");
    }
    if (static_cast<std::size_t>(scores.rows()) != layout.width()) {
        throw ValueError("score rows do not match the multi-label width");
    }
    std::size_t building_hits = 0, floor_hits = 0, successes = 0, fallbacks = 0, unknown_floors = 0;
    std::vector<double> err_c, err_w;
    err_c.reserve(n);
    err_w.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto col = scores.col(static_cast<Eigen::Index>(i));
        const auto est = localize(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), layout,
                                  params, index, true);
        const bool b_hit = est.building == truth.labels[i].building;
        const bool f_hit = est.floor == truth.labels[i].floor;
        building_hits += b_hit;
        floor_hits += f_hit;
        successes += b_hit && f_hit;
        fallbacks += est.fallback_used;
        unknown_floors += est.floor_unknown;
        err_c.push_back(distance(est.centroid, truth.positions[i]));
        err_w.push_back(distance(est.weighted_centroid, truth.positions[i]));
    }
    MetricsReport r;
    r.n_samples = n;
    r.building_hit_rate = percent(building_hits, n);
    r.floor_hit_rate = percent(floor_hits, n);
    r.success_rate = percent(successes, n);
    r.error_centroid = order_free_mean(std::move(err_c));
    r.error_weighted = order_free_mean(std::move(err_w));
    r.fallback_count = fallbacks;
    r.unknown_floor_count = unknown_floors;
    return r;
}

MetricsReport evaluate(const nn::Network& model, const SegmentLayout& layout, const EstimatorParams& params,
                       std::span<const NormalizedSample> samples, const ReferencePointIndex& index,
                       unsigned threads) {
    std::vector<std::vector<double>> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) rows.push_back(s.features);
    const auto scores = classifier::predict_batch(model, nn::to_columns(rows, model.input_dim()), threads);
    return evaluate_scores(scores, Truth::of(samples), layout, params, index);
}

std::vector<SweepCell> sweep_grid(std::span<const std::size_t> kappas, std::span<const double> sigmas) {
    std::vector<SweepCell> cells;
    for (auto k : kappas) {
        if (k < 1) throw ValueError("kappa values must be >= 1");
        if (k == 1) {
            cells.push_back({1, std::nullopt, {}});
            continue;
        }
        if (sigmas.empty()) throw ValueError("sweep needs at least one sigma value");
        for (double s : sigmas) {
            if (!(s >= 0.0 && s <= 1.0)) throw ValueError("sigma values must lie in [0, 1]");
            cells.push_back({k, s, {}});
        }
    }
    return cells;
}

SweepResult sweep(const nn::Matrix& scores, const Truth& truth, const SegmentLayout& layout,
                  std::span<const std::size_t> kappas, std::span<const double> sigmas,
                  const ReferencePointIndex& index, unsigned threads) {
    SweepResult result{sweep_grid(kappas, sigmas)};
    parallel_for(result.cells.size(), threads, [&](std::size_t i) {
        auto& cell = result.cells[i];
        cell.metrics = evaluate_scores(scores, truth, layout, {cell.kappa, cell.sigma.value_or(0.0)}, index);
    });
    return result;
}

SweepResult sweep(const nn::Network& model, const SegmentLayout& layout, std::span<const std::size_t> kappas,
                  std::span<const double> sigmas, std::span<const NormalizedSample> samples,
                  const ReferencePointIndex& index, unsigned threads) {
    std::vector<std::vector<double>> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) rows.push_back(s.features);
    const auto scores = classifier::predict_batch(model, nn::to_columns(rows, model.input_dim()), threads);
    return sweep(scores, Truth::of(samples), layout, kappas, sigmas, index, threads);
}

std::vector<std::size_t> default_kappas() {
    std::vector<std::size_t> k(10);
    std::iota(k.begin(), k.end(), std::size_t{1});
    return k;
}

std::vector<double> default_sigmas() { return {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}; }

std::size_t best_cell(const SweepResult& result, const BestCellRule& rule) {
    if (result.cells.empty()) throw ValueError("empty sweep has no best cell");
    auto qualifies = [&](const MetricsReport& m) {
        return m.success_rate >= rule.min_success && m.error_centroid < rule.max_error &&
               m.error_weighted < rule.max_error;
    };
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        const auto& m = result.cells[i].metrics;
        if (!qualifies(m)) continue;
        if (!best) {
            best = i;
            continue;
        }
        const auto& b = result.cells[*best].metrics;
        if (m.error_weighted < b.error_weighted ||
            (m.error_weighted == b.error_weighted && m.success_rate > b.success_rate)) {
            best = i;
        }
    }
    if (best) return *best;
    std::size_t pick = 0;
    for (std::size_t i = 1; i < result.cells.size(); ++i) {
        const auto& m = result.cells[i].metrics;
        const auto& b = result.cells[pick].metrics;
        if (m.success_rate > b.success_rate ||
            (m.success_rate == b.success_rate && m.error_weighted < b.error_weighted)) {
            pick = i;
        }
    }
    return pick;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> nearest_neighbors(std::span<const NormalizedSample> train, std::span<const double> query,
                                           std::size_t k) {
    std::vector<std::pair<double, std::size_t>> dist(train.size());
    for (std::size_t j = 0; j < train.size(); ++j) {
        const auto& f = train[j].features;
        if (f.size() != query.size()) throw ValueError("feature dimensions differ");
        double d = 0.0;
        for (std::size_t a = 0; a < f.size(); ++a) {
            const double diff = f[a] - query[a];
            d += diff * diff;
        }
        dist[j] = {d, j};
    }
    k = std::min(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
    return out;
}

namespace {

// Majority vote; ties go to the value whose first occurrence is nearest.
std::size_t vote(const std::vector<std::size_t>& values_by_distance) {
    std::map<std::size_t, std::size_t> counts;
    for (auto v : values_by_distance) ++counts[v];
    std::size_t best = values_by_distance.front();
    for (auto v : values_by_distance) {
        if (counts[v] > counts[best]) best = v;
    }
    return best;
}

}  // namespace

KnnResult knn_baseline(std::span<const NormalizedSample> train, std::span<const NormalizedSample> val,
                       std::size_t k, unsigned threads) {
    if (k < 1) throw ValueError("k must be >= 1");
    if (train.empty()) throw ValueError("kNN needs a non-empty training set");
    KnnResult result;
    result.k_used = std::min(k, train.size());
    const auto n = val.size();
    std::vector<HierarchicalLabel> predicted(n);
    std::vector<Point2> position(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const auto nn = nearest_neighbors(train, val[i].features, result.k_used);
        std::vector<std::size_t> buildings, floors;
        double sx = 0.0, sy = 0.0;
        for (auto j : nn) {
            buildings.push_back(train[j].label.building);
            floors.push_back(train[j].label.floor);
            sx += train[j].position.x;
            sy += train[j].position.y;
        }
        predicted[i].building = vote(buildings);
        predicted[i].floor = vote(floors);
        position[i] = {sx / static_cast<double>(nn.size()), sy / static_cast<double>(nn.size())};
    });
    std::size_t b_hits = 0, f_hits = 0, s_hits = 0;
    std::vector<double> err;
    for (std::size_t i = 0; i < n; ++i) {
        const bool b = predicted[i].building == val[i].label.building;
        const bool f = predicted[i].floor == val[i].label.floor;
        b_hits += b;
        f_hits += f;
        s_hits += b && f;
        err.push_back(distance(position[i], val[i].position));
    }
    auto& m = result.metrics;
    m.n_samples = n;
    m.building_hit_rate = percent(b_hits, n);
    m.floor_hit_rate = percent(f_hits, n);
    m.success_rate = percent(s_hits, n);
    m.error_centroid = order_free_mean(std::move(err));
    m.error_weighted = m.error_centroid;
    return result;
}

// ---------------------------------------------------------------------------

std::string emit_report(const SweepResult& result, ReportFormat format, std::optional<std::size_t> best) {
    std::string out;
    char buf[256];
    auto sigma_text = [](const SweepCell& c) {
        if (!c.sigma) return std::string("N/A");
        char s[32];
        std::snprintf(s, sizeof s, "%.1f", *c.sigma);
        return std::string(s);
    };
    if (format == ReportFormat::csv) {
        out += "kappa,sigma,building_hit_rate,floor_hit_rate,success_rate,error_centroid_m,error_weighted_m\n";
        for (const auto& c : result.cells) {
            const auto& m = c.metrics;
            std::snprintf(buf, sizeof buf, "%zu,%s,%.2f,%.2f,%.2f,%.2f,%.2f\n", c.kappa, sigma_text(c).c_str(),
                          m.building_hit_rate, m.floor_hit_rate, m.success_rate, m.error_centroid, m.error_weighted);
            out += buf;
        }
        return out;
    }
    out += "| kappa | sigma | Building Hit Rate [%] | Floor Hit Rate [%] | Success Rate [%] | "
           "Error Centroid [m] | Error Weighted Centroid [m] |\n";
    out += "|---:|---:|---:|---:|---:|---:|---:|\n";
    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        const auto& c = result.cells[i];
        const auto& m = c.metrics;
        const char* mark = best && *best == i ? "**" : "";
        std::snprintf(buf, sizeof buf, "| %s%zu%s | %s | %.2f | %.2f | %.2f | %.2f | %.2f |\n", mark, c.kappa, mark,
                      sigma_text(c).c_str(), m.building_hit_rate, m.floor_hit_rate, m.success_rate, m.error_centroid,
                      m.error_weighted);
        out += buf;
    }
    if (best) {
        const auto& c = result.cells.at(*best);
        out += "\nBest cell: kappa = " + std::to_string(c.kappa) + ", sigma = " + sigma_text(c) + "\n";
    }
    return out;
}

}  // namespace hiloc::eval
