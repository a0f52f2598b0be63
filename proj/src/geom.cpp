#include "dvconv/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dvconv {

void PointCloud::validate() const {
    const int n = size();
    if (channels() > 0 || !features.shape.empty()) {
        if (features.shape.size() != 2 || features.shape[0] != n)
            throw std::invalid_argument("features row count must match positions");
    }
    if (label_kind == LabelKind::per_point && static_cast<int>(labels.size()) != n)
        throw std::invalid_argument("per-point labels must match positions");
    if (label_kind == LabelKind::per_cloud && labels.size() != 1)
        throw std::invalid_argument("per-cloud label must be a single id");
    if (!valid_mask.empty() && static_cast<int>(valid_mask.size()) != n)
        throw std::invalid_argument("valid_mask must match positions");
    for (const Vec3& p : positions)
        if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2]))
            throw std::invalid_argument("non-finite coordinate");
}

std::vector<int32_t> farthest_point_sample(const PointCloud& cloud, int n_centroids, int start) {
    const int n = cloud.size();
    if (n == 0) throw std::invalid_argument("empty input");
    if (n_centroids < 1 || n_centroids > n)
        throw std::invalid_argument("n_centroids out of range");
    if (start < 0 || start >= n) throw std::invalid_argument("start index out of range");

    std::vector<int32_t> picked;
    picked.reserve(static_cast<size_t>(n_centroids));
    picked.push_back(start);

    // min squared distance to the selected set
    std::vector<double> mind2(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
    int last = start;
    for (int step = 1; step < n_centroids; ++step) {
        int best = -1;
        double best_d2 = -1.0;
        for (int i = 0; i < n; ++i) {
            const double d2 = norm2(cloud.positions[i] - cloud.positions[last]);
            if (d2 < mind2[static_cast<size_t>(i)]) mind2[static_cast<size_t>(i)] = d2;
            if (mind2[static_cast<size_t>(i)] > best_d2) {
                best_d2 = mind2[static_cast<size_t>(i)];
                best = i;
            }
        }
        picked.push_back(best);
        last = best;
    }
    return picked;
}

namespace {

NeighborSet knn_impl(const PointCloud& cloud, const Vec3& query, int k, int32_t center_index) {
    const int n = cloud.size();
    if (n == 0) throw std::invalid_argument("empty input");
    if (k < 1) throw std::invalid_argument("k must be >= 1");

    NeighborSet out;
    out.center_index = center_index;
    if (k > n) {
        k = n;
        out.short_ = true;
    }

    std::vector<std::pair<double, int32_t>> d2(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        d2[static_cast<size_t>(i)] = {norm2(cloud.positions[i] - query), i};
    std::partial_sort(d2.begin(), d2.begin() + k, d2.end());

    out.indices.resize(static_cast<size_t>(k));
    out.distances.resize(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        out.indices[static_cast<size_t>(i)] = d2[static_cast<size_t>(i)].second;
        out.distances[static_cast<size_t>(i)] = std::sqrt(d2[static_cast<size_t>(i)].first);
    }
    return out;
}

}  // namespace

NeighborSet knn_search(const PointCloud& cloud, int centroid_index, int k) {
    if (centroid_index < 0 || centroid_index >= cloud.size())
        throw std::invalid_argument("centroid index out of range");
    return knn_impl(cloud, cloud.positions[centroid_index], k, centroid_index);
}

NeighborSet knn_search_at(const PointCloud& cloud, const Vec3& query, int k) {
    return knn_impl(cloud, query, k, -1);
}

Selection dilated_select(const NeighborSet& neighbors, int k, Dilation mode, uint64_t seed) {
    const int avail = static_cast<int>(neighbors.indices.size());
    if (k < 1) throw std::invalid_argument("k must be >= 1");

    Selection sel;
    if (avail <= k) {
        sel.indices = neighbors.indices;
        sel.short_ = avail < k || neighbors.short_;
        return sel;
    }
    sel.short_ = neighbors.short_;

    if (mode == Dilation::strided) {
        const int stride = avail / k;
        sel.indices.reserve(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i)
            sel.indices.push_back(neighbors.indices[static_cast<size_t>(i * stride)]);
    } else {
        Rng rng(seed);
        const std::vector<int32_t> pos = rng.sample_without_replacement(avail, k);
        sel.indices.reserve(static_cast<size_t>(k));
        for (int32_t p : pos) sel.indices.push_back(neighbors.indices[static_cast<size_t>(p)]);
    }
    return sel;
}

PointCloud anisotropic_scale(const PointCloud& cloud, double low, double high, uint64_t seed) {
    if (!(low > 0.0) || low > high) throw std::invalid_argument("require 0 < low <= high");
    Rng rng(seed);
    const double sx = rng.uniform(low, high);
    const double sy = rng.uniform(low, high);
    const double sz = rng.uniform(low, high);
    PointCloud out = cloud;
    for (Vec3& p : out.positions) {
        p[0] *= sx;
        p[1] *= sy;
        p[2] *= sz;
    }
    return out;
}

PointCloud rotate_z90(const PointCloud& cloud, int quarter_turns, bool rotate_normals) {
    const int r = ((quarter_turns % 4) + 4) % 4;
    auto rot = [r](double x, double y) -> std::pair<double, double> {
        switch (r) {
            case 1: return {-y, x};
            case 2: return {-x, -y};
            case 3: return {y, -x};
            default: return {x, y};
        }
    };
    PointCloud out = cloud;
    for (Vec3& p : out.positions) {
        const auto [x, y] = rot(p[0], p[1]);
        p[0] = x;
        p[1] = y;
    }
    if (rotate_normals && out.channels() >= 3) {
        for (int i = 0; i < out.size(); ++i) {
            const auto [x, y] = rot(out.features.at(i, 0), out.features.at(i, 1));
            out.features.at(i, 0) = x;
            out.features.at(i, 1) = y;
        }
    }
    return out;
}

}  // namespace dvconv
