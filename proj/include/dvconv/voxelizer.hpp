#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dvconv/geom.hpp"

namespace dvconv {

enum class Pooling { max, average };

// One cubic sampling kernel: an S^3 feature grid around a centroid whose
// radius is set so the farthest selected neighbour just fits inside. The
// contributor indices recorded here make the operation exactly
// differentiable: gradients of grid features route back to the points that
// produced them.
struct VoxelKernel {
    Vec3 centroid{};
    double radius = 0.0;
    int32_t centroid_index = -1;  // -1 when sampled at a free position
    bool short_ = false;          // neighbourhood smaller than requested

    std::vector<double> grid;        // [S^3 * C], cell-major, channel innermost
    std::vector<uint16_t> occupancy;  // [S^3], points considered per cell (capped)

    // max pooling: winning point per (cell, channel), -1 where empty
    std::vector<int32_t> max_contrib;
    // average pooling: CSR list of considered points per cell
    std::vector<int32_t> avg_offsets;  // [S^3 + 1]
    std::vector<int32_t> avg_points;

    std::vector<int32_t> selected;  // the K selected point indices
};

struct VoxelBatch {
    int S = 3;
    int C = 0;
    Pooling pooling = Pooling::max;
    std::vector<VoxelKernel> kernels;

    int size() const { return static_cast<int>(kernels.size()); }
    int cells() const { return S * S * S; }
};

struct VoxelizeOptions {
    int n_centroids = 0;
    int k = 32;
    int d = 2;
    int s = 3;
    Pooling pooling = Pooling::max;
    int cap = 5;               // points considered per cell, nearest first
    bool deterministic = true; // strided dilation, fps_start as given
    int fps_start = 0;
    uint64_t seed = 0;         // drives fps start + dilation in random mode
    double fixed_radius = 0.0; // > 0 forces R; points outside the cube are dropped
    bool offset_channels = false;  // append (p - centroid)/R as 3 extra channels
};

// Cell coordinates of a point inside the closed cube [centroid-R, centroid+R]^3.
// Points exactly on the far face clamp into the last cell.
std::array<int, 3> cell_index(const Vec3& p, const Vec3& centroid, double R, int S);

// Builds one kernel from the selected neighbour indices. `fixed_radius <= 0`
// derives R from the farthest selected point.
VoxelKernel voxelize_kernel(const PointCloud& cloud, const Vec3& centroid,
                            int32_t centroid_index, const std::vector<int32_t>& selected,
                            int S, Pooling pooling, int cap, double fixed_radius = 0.0,
                            bool offset_channels = false, bool short_flag = false);

// Full layer: FPS centroids, K*D neighbour draw, K-pick, one kernel per
// centroid. Radii adapt to the local density.
VoxelBatch voxelize_layer(const PointCloud& cloud, const VoxelizeOptions& opt);

// Same pipeline with caller-provided sampling centroids (decoder path).
VoxelBatch voxelize_at(const PointCloud& cloud, const std::vector<Vec3>& centroids,
                       const VoxelizeOptions& opt);

// Routes grid-feature gradients back to per-point feature gradients.
// grad_grids is [N, S^3, C]; the result is [cloud_size, C_in] where appended
// offset channels (if any) are dropped.
Tensor voxelize_backward(const Tensor& grad_grids, const VoxelBatch& batch, int cloud_size,
                         int c_in);

// Per-kernel report: centroid, radius, occupancy histogram, nonzero cells.
std::string inspect_csv(const VoxelBatch& batch);

}  // namespace dvconv
