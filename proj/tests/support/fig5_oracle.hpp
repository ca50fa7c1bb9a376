#pragma once

// Line-by-line transcription of the coordinate estimation procedure, kept
// deliberately naive. Only tests use it.

#include <algorithm>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

namespace hiloc::testing {

struct OracleXY {
    double x = 0.0;
    double y = 0.0;
};

using OracleDatabase = std::map<std::tuple<std::size_t, std::size_t, std::size_t>, OracleXY>;

struct OracleOutput {
    OracleXY c_s;
    OracleXY c_w;
    std::size_t n_c = 0;
    bool fallback = false;
};

/// The kappa largest elements of L as (index, value), largest first,
/// equal values in index order.
inline std::vector<std::pair<std::size_t, double>> oracle_kappa_largest(const std::vector<double>& L,
                                                                        std::size_t kappa) {
    std::vector<std::pair<std::size_t, double>> all;
    for (std::size_t i = 0; i < L.size(); ++i) all.emplace_back(i, L[i]);
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (all.size() > kappa) all.resize(kappa);
    return all;
}

inline OracleOutput oracle_estimate(const std::vector<double>& L, std::size_t kappa, double sigma, std::size_t B_i,
                                    std::size_t F_j, const OracleDatabase& D) {
    double max_L = L.at(0);
    for (double v : L) {
        if (v > max_L) max_L = v;
    }
    double sum_x = 0;
    double wsum_x = 0;
    double sum_y = 0;
    double wsum_y = 0;
    double sum_w = 0;
    std::size_t n_c = 0;
    for (const auto& [index, l] : oracle_kappa_largest(L, kappa)) {
        if (l >= sigma * max_L) {
            auto it = D.find({B_i, F_j, index});
            if (it != D.end()) {
                double x = it->second.x;
                double y = it->second.y;
                sum_x = sum_x + x;
                wsum_x = wsum_x + l * x;
                sum_y = sum_y + y;
                wsum_y = wsum_y + l * y;
                sum_w = sum_w + l;
                n_c = n_c + 1;
            }
        }
    }
    OracleOutput out;
    out.n_c = n_c;
    if (n_c > 0) {
        out.c_s = {sum_x / static_cast<double>(n_c), sum_y / static_cast<double>(n_c)};
        out.c_w = {wsum_x / sum_w, wsum_y / sum_w};
    } else {
        double ax = 0;
        double ay = 0;
        std::size_t count = 0;
        for (const auto& [key, xy] : D) {
            if (std::get<0>(key) == B_i && std::get<1>(key) == F_j) {
                ax = ax + xy.x;
                ay = ay + xy.y;
                count = count + 1;
            }
        }
        if (count == 0) throw std::out_of_range("no coordinates for this building and floor");
        out.c_s = {ax / static_cast<double>(count), ay / static_cast<double>(count)};
        out.c_w = out.c_s;
        out.fallback = true;
    }
    return out;
}

}  // namespace hiloc::testing
