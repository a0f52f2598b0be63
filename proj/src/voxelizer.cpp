#include "dvconv/voxelizer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dvconv {

std::array<int, 3> cell_index(const Vec3& p, const Vec3& centroid, double R, int S) {
    if (!(R > 0.0)) throw std::invalid_argument("cell_index: R must be positive");
    std::array<int, 3> out{};
    for (int a = 0; a < 3; ++a) {
        const double v = p[a] - centroid[a];
        if (std::abs(v) > R) throw std::invalid_argument("cell_index: point outside kernel cube");
        int i = static_cast<int>(std::floor((v + R) * static_cast<double>(S) / (2.0 * R)));
        if (i < 0) i = 0;
        if (i >= S) i = S - 1;  // far-face boundary clamps into the last cell
        out[a] = i;
    }
    return out;
}

VoxelKernel voxelize_kernel(const PointCloud& cloud, const Vec3& centroid,
                            int32_t centroid_index, const std::vector<int32_t>& selected,
                            int S, Pooling pooling, int cap, double fixed_radius,
                            bool offset_channels, bool short_flag) {
    if (selected.empty()) throw std::invalid_argument("voxelize_kernel: no selected points");
    if (S < 1) throw std::invalid_argument("voxelize_kernel: S must be >= 1");
    if (cap < 1) throw std::invalid_argument("voxelize_kernel: cap must be >= 1");
    const int c_in = cloud.channels();
    const int C = c_in + (offset_channels ? 3 : 0);
    if (C == 0) throw std::invalid_argument("voxelize_kernel: cloud has no feature channels");

    // Process in ascending-distance order; ties break toward the lower index.
    struct Entry {
        double d2;
        double cheb;
        int32_t idx;
    };
    std::vector<Entry> order;
    order.reserve(selected.size());
    for (int32_t idx : selected) {
        const Vec3 off = cloud.positions[static_cast<size_t>(idx)] - centroid;
        const double cheb = std::max({std::abs(off[0]), std::abs(off[1]), std::abs(off[2])});
        order.push_back({norm2(off), cheb, idx});
    }
    std::sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) {
        if (a.d2 != b.d2) return a.d2 < b.d2;
        return a.idx < b.idx;
    });

    VoxelKernel k;
    k.centroid = centroid;
    k.centroid_index = centroid_index;
    k.short_ = short_flag;
    k.selected = selected;

    double R = fixed_radius;
    if (!(R > 0.0)) {
        // Max Euclidean distance to a selected point; the per-axis magnitude
        // guard covers the case where sqrt rounds below a coordinate.
        double max_d = 0.0, max_cheb = 0.0;
        for (const Entry& e : order) {
            max_d = std::max(max_d, std::sqrt(e.d2));
            max_cheb = std::max(max_cheb, e.cheb);
        }
        R = std::max(max_d, max_cheb);
        if (R <= 0.0) R = 1e-6;  // all points coincide with the centroid
    }
    k.radius = R;

    const int cells = S * S * S;
    k.grid.assign(static_cast<size_t>(cells) * C, 0.0);
    k.occupancy.assign(static_cast<size_t>(cells), 0);
    if (pooling == Pooling::max) {
        k.max_contrib.assign(static_cast<size_t>(cells) * C, -1);
    }

    std::vector<std::vector<int32_t>> per_cell;
    if (pooling == Pooling::average) per_cell.resize(static_cast<size_t>(cells));

    for (const Entry& e : order) {
        const Vec3& p = cloud.positions[static_cast<size_t>(e.idx)];
        if (fixed_radius > 0.0) {
            // fixed-radius sampling: neighbours outside the cube are dropped
            if (e.cheb > R) continue;
        }
        const auto c3 = cell_index(p, centroid, R, S);
        const int cell = cell_linear(c3[0], c3[1], c3[2], S);
        if (k.occupancy[static_cast<size_t>(cell)] >= cap) continue;
        ++k.occupancy[static_cast<size_t>(cell)];

        auto value = [&](int ch) -> double {
            if (ch < c_in) return cloud.features.at(e.idx, ch);
            return (p[ch - c_in] - centroid[ch - c_in]) / R;
        };

        if (pooling == Pooling::max) {
            const size_t base = static_cast<size_t>(cell) * C;
            if (k.occupancy[static_cast<size_t>(cell)] == 1) {
                for (int ch = 0; ch < C; ++ch) {
                    k.grid[base + ch] = value(ch);
                    k.max_contrib[base + ch] = e.idx;
                }
            } else {
                for (int ch = 0; ch < C; ++ch) {
                    const double val = value(ch);
                    if (val > k.grid[base + ch]) {
                        k.grid[base + ch] = val;
                        k.max_contrib[base + ch] = e.idx;
                    }
                }
            }
        } else {
            per_cell[static_cast<size_t>(cell)].push_back(e.idx);
            const size_t base = static_cast<size_t>(cell) * C;
            for (int ch = 0; ch < C; ++ch) k.grid[base + ch] += value(ch);
        }
    }

    if (pooling == Pooling::average) {
        k.avg_offsets.assign(static_cast<size_t>(cells) + 1, 0);
        for (int cell = 0; cell < cells; ++cell) {
            const auto& pts = per_cell[static_cast<size_t>(cell)];
            if (!pts.empty()) {
                const size_t base = static_cast<size_t>(cell) * C;
                for (int ch = 0; ch < C; ++ch)
                    k.grid[base + ch] /= static_cast<double>(pts.size());
            }
            k.avg_offsets[static_cast<size_t>(cell) + 1] =
                k.avg_offsets[static_cast<size_t>(cell)] + static_cast<int32_t>(pts.size());
            k.avg_points.insert(k.avg_points.end(), pts.begin(), pts.end());
        }
    }
    return k;
}

namespace {

VoxelBatch voxelize_common(const PointCloud& cloud, const std::vector<Vec3>& centroids,
                           const std::vector<int32_t>& centroid_indices,
                           const VoxelizeOptions& opt) {
    if (cloud.size() == 0) throw std::invalid_argument("empty input");
    VoxelBatch batch;
    batch.S = opt.s;
    batch.C = cloud.channels() + (opt.offset_channels ? 3 : 0);
    batch.pooling = opt.pooling;
    batch.kernels.reserve(centroids.size());

    for (size_t ci = 0; ci < centroids.size(); ++ci) {
        NeighborSet nb = knn_search_at(cloud, centroids[ci], opt.k * opt.d);
        const uint64_t dil_seed = substream(opt.seed, "dilation", ci);
        Selection sel = dilated_select(
            nb, opt.k, opt.deterministic ? Dilation::strided : Dilation::random, dil_seed);
        const int32_t cidx = centroid_indices.empty() ? -1 : centroid_indices[ci];
        batch.kernels.push_back(voxelize_kernel(cloud, centroids[ci], cidx, sel.indices, opt.s,
                                                opt.pooling, opt.cap, opt.fixed_radius,
                                                opt.offset_channels, sel.short_));
    }
    return batch;
}

}  // namespace

VoxelBatch voxelize_layer(const PointCloud& cloud, const VoxelizeOptions& opt) {
    if (cloud.size() == 0) throw std::invalid_argument("empty input");
    int start = opt.fps_start;
    if (!opt.deterministic) {
        Rng rng(substream(opt.seed, "fps"));
        start = static_cast<int>(rng.uniform_int(cloud.size()));
    }
    const std::vector<int32_t> fps = farthest_point_sample(cloud, opt.n_centroids, start);
    std::vector<Vec3> centroids;
    centroids.reserve(fps.size());
    for (int32_t i : fps) centroids.push_back(cloud.positions[static_cast<size_t>(i)]);
    return voxelize_common(cloud, centroids, fps, opt);
}

VoxelBatch voxelize_at(const PointCloud& cloud, const std::vector<Vec3>& centroids,
                       const VoxelizeOptions& opt) {
    return voxelize_common(cloud, centroids, {}, opt);
}

Tensor voxelize_backward(const Tensor& grad_grids, const VoxelBatch& batch, int cloud_size,
                         int c_in) {
    const int cells = batch.cells();
    const int C = batch.C;
    check_shape(grad_grids, {batch.size(), cells, C}, "voxelize_backward grad_grids");

    Tensor out = Tensor::zeros({cloud_size, c_in});
    for (int n = 0; n < batch.size(); ++n) {
        const VoxelKernel& k = batch.kernels[static_cast<size_t>(n)];
        const size_t gbase = static_cast<size_t>(n) * cells * C;
        if (batch.pooling == Pooling::max) {
            for (int cell = 0; cell < cells; ++cell) {
                const size_t base = static_cast<size_t>(cell) * C;
                for (int ch = 0; ch < c_in; ++ch) {
                    const int32_t p = k.max_contrib[base + ch];
                    if (p >= 0) out.at(p, ch) += grad_grids.v[gbase + base + ch];
                }
            }
        } else {
            for (int cell = 0; cell < cells; ++cell) {
                const int32_t lo = k.avg_offsets[static_cast<size_t>(cell)];
                const int32_t hi = k.avg_offsets[static_cast<size_t>(cell) + 1];
                if (lo == hi) continue;
                const double w = 1.0 / static_cast<double>(hi - lo);
                const size_t base = static_cast<size_t>(cell) * C;
                for (int32_t e = lo; e < hi; ++e) {
                    const int32_t p = k.avg_points[static_cast<size_t>(e)];
                    for (int ch = 0; ch < c_in; ++ch)
                        out.at(p, ch) += w * grad_grids.v[gbase + base + ch];
                }
            }
        }
    }
    return out;
}

std::string inspect_csv(const VoxelBatch& batch) {
    std::ostringstream os;
    os << "kernel,cx,cy,cz,radius,nonzero_cells";
    int max_occ = 0;
    for (const VoxelKernel& k : batch.kernels)
        for (uint16_t o : k.occupancy) max_occ = std::max(max_occ, static_cast<int>(o));
    for (int o = 0; o <= max_occ; ++o) os << ",occ" << o;
    os << "\n";

    os.precision(9);
    for (size_t n = 0; n < batch.kernels.size(); ++n) {
        const VoxelKernel& k = batch.kernels[n];
        int nonzero = 0;
        std::vector<int> hist(static_cast<size_t>(max_occ) + 1, 0);
        for (uint16_t o : k.occupancy) {
            if (o > 0) ++nonzero;
            ++hist[o];
        }
        os << n << ',' << k.centroid[0] << ',' << k.centroid[1] << ',' << k.centroid[2] << ','
           << k.radius << ',' << nonzero;
        for (int h : hist) os << ',' << h;
        os << "\n";
    }
    return os.str();
}

}  // namespace dvconv
