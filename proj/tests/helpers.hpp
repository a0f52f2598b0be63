#pragma once

#include <vector>

#include "dvconv/geom.hpp"

namespace testutil {

using dvconv::PointCloud;
using dvconv::Rng;
using dvconv::Tensor;
using dvconv::Vec3;

inline PointCloud random_cloud(int n, int channels, uint64_t seed, double extent = 1.0) {
    Rng rng(seed);
    PointCloud pc;
    pc.features = Tensor::zeros({n, channels});
    for (int i = 0; i < n; ++i) {
        pc.positions.push_back({rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                                rng.uniform(-extent, extent)});
        for (int c = 0; c < channels; ++c) pc.features.at(i, c) = rng.uniform(-1.0, 1.0);
    }
    return pc;
}

// Values on a dyadic grid: products and short sums are exact in double, so
// permutation identities can be asserted without a tolerance.
inline double dyadic(Rng& rng) {
    return static_cast<double>(rng.uniform_int(33) - 16) / 16.0;
}

inline void fill_dyadic(Tensor& t, Rng& rng) {
    for (double& x : t.v) x = dyadic(rng);
}

}  // namespace testutil
