#include "doctest.h"

#include <cmath>

#include "dvconv/geom.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dvconv;

TEST_SUITE_BEGIN("geom");

TEST_CASE("fps singleton") {
    PointCloud pc = testutil::random_cloud(1, 0, 1);
    CHECK(farthest_point_sample(pc, 1, 0) == std::vector<int32_t>{0});
}

TEST_CASE("fps square corners picks the diagonal") {
    PointCloud pc;
    pc.positions = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    CHECK(farthest_point_sample(pc, 2, 0) == std::vector<int32_t>({0, 2}));
}

TEST_CASE("fps errors") {
    PointCloud empty;
    CHECK_THROWS_WITH_AS(farthest_point_sample(empty, 1, 0), "empty input",
                         std::invalid_argument);
    PointCloud pc = testutil::random_cloud(4, 0, 2);
    CHECK_THROWS_AS(farthest_point_sample(pc, 5, 0), std::invalid_argument);
    CHECK_THROWS_AS(farthest_point_sample(pc, 2, 9), std::invalid_argument);
}

TEST_CASE("fps matches the greedy oracle") {
    for (uint64_t seed : {3u, 4u, 5u}) {
        PointCloud pc = testutil::random_cloud(64, 0, seed);
        CHECK(farthest_point_sample(pc, 8, 0) == oracle::fps(pc, 8, 0));
    }
}

TEST_CASE("knn tie-break prefers the lower index") {
    PointCloud pc;
    pc.positions = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    NeighborSet nb = knn_search(pc, 1, 2);
    CHECK(nb.indices == std::vector<int32_t>({1, 0}));
    CHECK(nb.distances[0] == 0.0);
    CHECK(nb.distances[1] == 1.0);
    CHECK_FALSE(nb.short_);
}

TEST_CASE("knn with k = cloud size returns everything sorted") {
    PointCloud pc = testutil::random_cloud(16, 0, 7);
    NeighborSet nb = knn_search(pc, 3, 16);
    CHECK(nb.indices.size() == 16);
    for (size_t i = 1; i < nb.distances.size(); ++i)
        CHECK(nb.distances[i] >= nb.distances[i - 1]);
}

TEST_CASE("knn clamps and flags short") {
    PointCloud pc = testutil::random_cloud(5, 0, 8);
    NeighborSet nb = knn_search(pc, 0, 10);
    CHECK(nb.short_);
    CHECK(nb.indices.size() == 5);
}

TEST_CASE("knn matches the full-sort oracle") {
    PointCloud pc = testutil::random_cloud(128, 0, 9);
    for (int q : {0, 17, 99}) {
        NeighborSet nb = knn_search(pc, q, 16);
        CHECK(nb.indices == oracle::knn(pc, pc.positions[static_cast<size_t>(q)], 16));
    }
}

TEST_CASE("knn random trials against the oracle") {
    // invariant: set-and-order agreement over many random instances
    Rng meta(100);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(meta.uniform_int(60));
        const int k = 1 + static_cast<int>(meta.uniform_int(static_cast<int64_t>(n)));
        PointCloud pc = testutil::random_cloud(n, 0, 1000 + static_cast<uint64_t>(trial));
        const int q = static_cast<int>(meta.uniform_int(n));
        NeighborSet nb = knn_search(pc, q, k);
        CHECK(nb.indices == oracle::knn(pc, pc.positions[static_cast<size_t>(q)], k));
    }
}

TEST_CASE("dilated select strided definition") {
    NeighborSet nb;
    nb.indices = {10, 11, 12, 13};
    nb.distances = {0, 1, 2, 3};
    Selection sel = dilated_select(nb, 2, Dilation::strided, 0);
    CHECK(sel.indices == std::vector<int32_t>({10, 12}));
    CHECK_FALSE(sel.short_);
}

TEST_CASE("dilated select with D=1 is the identity in both modes") {
    NeighborSet nb;
    nb.indices = {4, 2, 9};
    nb.distances = {0, 1, 2};
    CHECK(dilated_select(nb, 3, Dilation::strided, 0).indices == nb.indices);
    CHECK(dilated_select(nb, 3, Dilation::random, 77).indices == nb.indices);
}

TEST_CASE("dilated select is reproducible from the seed") {
    NeighborSet nb;
    for (int i = 0; i < 16; ++i) {
        nb.indices.push_back(100 + i);
        nb.distances.push_back(i);
    }
    Selection a = dilated_select(nb, 8, Dilation::random, 7);
    Selection b = dilated_select(nb, 8, Dilation::random, 7);
    CHECK(a.indices == b.indices);
    CHECK(a.indices.size() == 8);
    // ascending-distance order preserved
    for (size_t i = 1; i < a.indices.size(); ++i) CHECK(a.indices[i] > a.indices[i - 1]);
}

TEST_CASE("dilated select short neighborhoods take everything") {
    NeighborSet nb;
    nb.indices = {5, 6};
    nb.distances = {0, 1};
    Selection sel = dilated_select(nb, 4, Dilation::random, 3);
    CHECK(sel.indices == nb.indices);
    CHECK(sel.short_);
}

TEST_CASE("anisotropic scale identity is bit-exact") {
    PointCloud pc = testutil::random_cloud(32, 2, 11);
    PointCloud scaled = anisotropic_scale(pc, 1.0, 1.0, 5);
    for (int i = 0; i < pc.size(); ++i)
        for (int a = 0; a < 3; ++a)
            CHECK(scaled.positions[static_cast<size_t>(i)][static_cast<size_t>(a)] ==
                  pc.positions[static_cast<size_t>(i)][static_cast<size_t>(a)]);
    // features untouched
    CHECK(scaled.features.v == pc.features.v);
}

TEST_CASE("anisotropic scale doubles coordinates") {
    PointCloud pc = testutil::random_cloud(8, 0, 12);
    PointCloud scaled = anisotropic_scale(pc, 2.0, 2.0, 5);
    for (int i = 0; i < pc.size(); ++i)
        for (int a = 0; a < 3; ++a)
            CHECK(scaled.positions[static_cast<size_t>(i)][static_cast<size_t>(a)] ==
                  doctest::Approx(2.0 * pc.positions[static_cast<size_t>(i)][static_cast<size_t>(a)]));
}

TEST_CASE("anisotropic scale draws stay in range and differ per axis") {
    PointCloud pc;
    pc.positions = {{1, 1, 1}};
    PointCloud scaled = anisotropic_scale(pc, 0.95, 1.05, 42);
    const Vec3 f = scaled.positions[0];
    for (int a = 0; a < 3; ++a) {
        CHECK(f[static_cast<size_t>(a)] >= 0.95);
        CHECK(f[static_cast<size_t>(a)] <= 1.05);
    }
    CHECK(f[0] != f[1]);
    CHECK(f[1] != f[2]);
    CHECK_THROWS_AS(anisotropic_scale(pc, 0.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("fps and knn are invariant under 90-degree z rotation") {
    PointCloud pc = testutil::random_cloud(80, 0, 13);
    PointCloud rot = rotate_z90(pc, 1);
    CHECK(farthest_point_sample(pc, 12, 0) == farthest_point_sample(rot, 12, 0));
    for (int q : {0, 5, 41}) {
        CHECK(knn_search(pc, q, 9).indices == knn_search(rot, q, 9).indices);
    }
}

TEST_SUITE_END();
