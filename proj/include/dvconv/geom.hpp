#pragma once

#include <cstdint>
#include <vector>

#include "dvconv/common.hpp"
#include "dvconv/tensor.hpp"

namespace dvconv {

enum class LabelKind { none, per_cloud, per_point };

struct PointCloud {
    std::vector<Vec3> positions;
    Tensor features;  // [n, C]; C may be zero
    std::vector<int32_t> labels;
    LabelKind label_kind = LabelKind::none;
    std::vector<uint8_t> valid_mask;  // empty, or one flag per point (0 = padding/ambient)

    int size() const { return static_cast<int>(positions.size()); }
    int channels() const { return features.shape.empty() ? 0 : features.shape[1]; }
    void validate() const;
};

// K*D nearest neighbours of a sampling centroid, ascending by distance.
struct NeighborSet {
    int32_t center_index = -1;  // -1 when the query was a free position
    std::vector<int32_t> indices;
    std::vector<double> distances;
    bool short_ = false;  // fewer neighbours than requested
};

struct Selection {
    std::vector<int32_t> indices;
    bool short_ = false;
};

enum class Dilation { strided, random };

// Greedy max-min centroid selection. Ties break toward the lower point index.
std::vector<int32_t> farthest_point_sample(const PointCloud& cloud, int n_centroids, int start);

// Exact k-NN by Euclidean distance; the centroid itself is eligible.
// k larger than the cloud clamps and flags short_.
NeighborSet knn_search(const PointCloud& cloud, int centroid_index, int k);
NeighborSet knn_search_at(const PointCloud& cloud, const Vec3& query, int k);

// Keep k of the neighbour list: every D-th entry (strided) or a uniform
// k-subset (random). Output preserves ascending-distance order.
Selection dilated_select(const NeighborSet& neighbors, int k, Dilation mode, uint64_t seed);

// Component-wise scaling by three independent draws from [low, high].
PointCloud anisotropic_scale(const PointCloud& cloud, double low, double high, uint64_t seed);

// Rotation by quarter turns about the world z axis. Optionally rotates the
// first three feature channels as well (for normal vectors).
PointCloud rotate_z90(const PointCloud& cloud, int quarter_turns, bool rotate_normals = false);

}  // namespace dvconv
