// Test-only reference implementations, written independently of the library
// code paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dvconv/geom.hpp"
#include "dvconv/voxelizer.hpp"

namespace oracle {

using dvconv::PointCloud;
using dvconv::Vec3;

inline double dist(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Greedy max-min selection, recomputing every min from scratch each step.
inline std::vector<int32_t> fps(const PointCloud& cloud, int n_centroids, int start) {
    std::vector<int32_t> sel{static_cast<int32_t>(start)};
    while (static_cast<int>(sel.size()) < n_centroids) {
        int best = -1;
        double best_min = -1.0;
        for (int i = 0; i < cloud.size(); ++i) {
            double mn = std::numeric_limits<double>::infinity();
            for (int32_t s : sel) {
                const Vec3 d = cloud.positions[static_cast<size_t>(i)] -
                               cloud.positions[static_cast<size_t>(s)];
                mn = std::min(mn, dvconv::norm2(d));
            }
            if (mn > best_min) {
                best_min = mn;
                best = i;
            }
        }
        sel.push_back(best);
    }
    return sel;
}

// Full sort of all distances.
inline std::vector<int32_t> knn(const PointCloud& cloud, const Vec3& query, int k) {
    std::vector<std::pair<double, int32_t>> all;
    for (int i = 0; i < cloud.size(); ++i)
        all.push_back({dvconv::norm2(cloud.positions[static_cast<size_t>(i)] - query), i});
    std::sort(all.begin(), all.end());
    std::vector<int32_t> out;
    for (int i = 0; i < std::min<int>(k, cloud.size()); ++i) out.push_back(all[static_cast<size_t>(i)].second);
    return out;
}

struct Grid {
    double radius = 0.0;
    std::vector<double> values;        // [S^3 * C]
    std::vector<int32_t> contrib;      // [S^3 * C], max pooling, -1 empty
};

// Direct enumeration of one kernel: bin the selected points nearest-first,
// keep at most `cap` per cell, channel-wise max.
inline Grid voxelize_max(const PointCloud& cloud, const Vec3& centroid,
                         const std::vector<int32_t>& selected, int S, int cap) {
    Grid g;
    struct E {
        double d;
        int32_t i;
    };
    std::vector<E> es;
    for (int32_t i : selected)
        es.push_back({dist(cloud.positions[static_cast<size_t>(i)], centroid), i});
    std::stable_sort(es.begin(), es.end(), [](const E& a, const E& b) {
        if (a.d != b.d) return a.d < b.d;
        return a.i < b.i;
    });
    double R = 0.0;
    for (const E& e : es) {
        R = std::max(R, e.d);
        const Vec3 off = cloud.positions[static_cast<size_t>(e.i)] - centroid;
        for (int a = 0; a < 3; ++a) R = std::max(R, std::abs(off[a]));
    }
    if (R <= 0.0) R = 1e-6;
    g.radius = R;

    const int C = cloud.channels();
    g.values.assign(static_cast<size_t>(S) * S * S * C, 0.0);
    g.contrib.assign(g.values.size(), -1);
    std::vector<int> counts(static_cast<size_t>(S) * S * S, 0);
    for (const E& e : es) {
        const Vec3 off = cloud.positions[static_cast<size_t>(e.i)] - centroid;
        int idx[3];
        for (int a = 0; a < 3; ++a) {
            int c = static_cast<int>(std::floor((off[a] + R) * S / (2.0 * R)));
            idx[a] = std::clamp(c, 0, S - 1);
        }
        const int cell = (idx[0] * S + idx[1]) * S + idx[2];
        if (counts[static_cast<size_t>(cell)] >= cap) continue;
        const bool first = counts[static_cast<size_t>(cell)] == 0;
        ++counts[static_cast<size_t>(cell)];
        for (int ch = 0; ch < C; ++ch) {
            const size_t slot = static_cast<size_t>(cell) * C + ch;
            const double v = cloud.features.at(e.i, ch);
            if (first || v > g.values[slot]) {
                g.values[slot] = v;
                g.contrib[slot] = e.i;
            }
        }
    }
    return g;
}

// Central finite difference of f at x with step h.
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_err(double got, double want) {
    const double denom = std::max({std::abs(got), std::abs(want), 1e-8});
    return std::abs(got - want) / denom;
}

}  // namespace oracle
