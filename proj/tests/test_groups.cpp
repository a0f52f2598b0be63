#include "doctest.h"

#include "dvconv/groups.hpp"
#include "helpers.hpp"

using namespace dvconv;

TEST_SUITE_BEGIN("groups");

TEST_CASE("element counts") {
    CHECK(group_of(GroupKind::p4).n() == 4);
    CHECK(group_of(GroupKind::p4m).n() == 8);
    CHECK(group_of(GroupKind::trivial).n() == 1);
}

TEST_CASE("identity first, matrices integer-exact") {
    for (GroupKind k : {GroupKind::p4, GroupKind::p4m}) {
        const Group& g = group_of(k);
        CHECK(g.elements[0].r == 0);
        CHECK(g.elements[0].m == 0);
        for (const GroupElement& e : g.elements)
            for (int x : e.matrix) CHECK((x == -1 || x == 0 || x == 1));
    }
}

TEST_CASE("rotation composition adds quarter turns") {
    const Group& g = group_of(GroupKind::p4);
    // index i holds r = i for p4
    CHECK(g.cayley[1][1] == 2);
    CHECK(g.cayley[1][3] == 0);
}

TEST_CASE("reflection is an involution") {
    const Group& g = group_of(GroupKind::p4m);
    const int mirror = 4;  // (r=0, m=1)
    CHECK(g.elements[4].m == 1);
    CHECK(g.cayley[mirror][mirror] == 0);
}

TEST_CASE("p4m closure over all 64 products") {
    const Group& g = group_of(GroupKind::p4m);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            const int c = g.cayley[static_cast<size_t>(i)][static_cast<size_t>(j)];
            CHECK(c >= 0);
            CHECK(c < 8);
        }
}

TEST_CASE("group axioms hold exactly") {
    for (GroupKind kind : {GroupKind::p4, GroupKind::p4m}) {
        const Group& g = group_of(kind);
        const int n = g.n();
        for (int i = 0; i < n; ++i) {
            CHECK(g.cayley[0][static_cast<size_t>(i)] == i);
            CHECK(g.cayley[static_cast<size_t>(i)][0] == i);
            CHECK(g.inverse[static_cast<size_t>(g.inverse[static_cast<size_t>(i)])] == i);
            CHECK(g.cayley[static_cast<size_t>(i)][static_cast<size_t>(g.inverse[static_cast<size_t>(i)])] == 0);
        }
        // associativity via the table
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c)
                    CHECK(g.cayley[static_cast<size_t>(g.cayley[static_cast<size_t>(a)][static_cast<size_t>(b)])][static_cast<size_t>(c)] ==
                          g.cayley[static_cast<size_t>(a)][static_cast<size_t>(g.cayley[static_cast<size_t>(b)][static_cast<size_t>(c)])]);
    }
}

TEST_CASE("act_on_cell examples") {
    const Group& g = group_of(GroupKind::p4m);
    // center cell is a fixed point of every element
    for (int i = 0; i < g.n(); ++i) {
        const auto c = act_on_cell(g.elements[static_cast<size_t>(i)], {1, 1, 1}, 3);
        CHECK(c == std::array<int, 3>{1, 1, 1});
    }
    // r=1: (x,y) -> (-y,x)
    CHECK(act_on_cell(g.elements[1], {2, 1, 1}, 3) == std::array<int, 3>{1, 2, 1});
    // m=1: x -> -x
    CHECK(act_on_cell(g.elements[4], {2, 1, 1}, 3) == std::array<int, 3>{0, 1, 1});
    CHECK_THROWS_AS(act_on_cell(g.elements[0], {0, 0, 0}, 4), std::invalid_argument);
}

TEST_CASE("cell action preserves the z index") {
    const Group& g = group_of(GroupKind::p4m);
    for (int e = 0; e < g.n(); ++e)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k)
                    CHECK(act_on_cell(g.elements[static_cast<size_t>(e)], {i, j, k}, 3)[2] == k);
}

TEST_CASE("cell permutations are bijections") {
    for (GroupKind kind : {GroupKind::p4, GroupKind::p4m}) {
        const Group& g = group_of(kind);
        for (int e = 0; e < g.n(); ++e) {
            std::vector<bool> seen(27, false);
            for (int cell = 0; cell < 27; ++cell) {
                const int to = g.cell_perm[static_cast<size_t>(e)][static_cast<size_t>(cell)];
                CHECK_FALSE(seen[static_cast<size_t>(to)]);
                seen[static_cast<size_t>(to)] = true;
            }
        }
    }
}

TEST_CASE("act_on_orientation follows the table") {
    const Group& p4 = group_of(GroupKind::p4);
    for (int h = 0; h < 4; ++h) CHECK(act_on_orientation(p4, 0, h) == h);
    CHECK(act_on_orientation(p4, 1, 2) == 3);
    const Group& p4m = group_of(GroupKind::p4m);
    for (int gi = 0; gi < 8; ++gi)
        for (int h = 0; h < 8; ++h)
            CHECK(act_on_orientation(p4m, gi, h) == p4m.cayley[static_cast<size_t>(gi)][static_cast<size_t>(h)]);
}

namespace {

Tensor random_kernel(int cells, int ci, int co, uint64_t seed) {
    Tensor W = Tensor::zeros({cells, ci, co});
    Rng rng(seed);
    for (double& x : W.v) x = rng.uniform(-1.0, 1.0);
    return W;
}

}  // namespace

TEST_CASE("transform by the identity is bit-exact") {
    const Group& g = group_of(GroupKind::p4m);
    Tensor W = random_kernel(27, 8, 4, 21);
    Tensor Wg = transform_kernel(W, g, 0, false);
    CHECK(Wg.v == W.v);
}

TEST_CASE("transform then inverse restores the kernel") {
    for (GroupKind kind : {GroupKind::p4, GroupKind::p4m}) {
        const Group& g = group_of(kind);
        for (bool lifting : {true, false}) {
            const int ci = lifting ? 5 : 2 * g.n();
            Tensor W = random_kernel(27, ci, 3, 22);
            for (int e = 0; e < g.n(); ++e) {
                Tensor Wg = transform_kernel(W, g, e, lifting);
                Tensor back = transform_kernel(Wg, g, g.inverse[static_cast<size_t>(e)], lifting);
                CHECK(back.v == W.v);
            }
        }
    }
}

TEST_CASE("transform permutes the multiset of weights") {
    const Group& g = group_of(GroupKind::p4);
    Tensor W = random_kernel(27, 4, 2, 23);
    for (int e = 0; e < g.n(); ++e) {
        Tensor Wg = transform_kernel(W, g, e, false);
        std::vector<double> a = W.v, b = Wg.v;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }
}

TEST_CASE("kernel transform is a homomorphism") {
    for (GroupKind kind : {GroupKind::p4, GroupKind::p4m}) {
        const Group& g = group_of(kind);
        for (bool lifting : {true, false}) {
            const int ci = lifting ? 3 : g.n();
            Tensor W = random_kernel(27, ci, 2, 24);
            for (int g1 = 0; g1 < g.n(); ++g1)
                for (int g2 = 0; g2 < g.n(); ++g2) {
                    Tensor two_step = transform_kernel(transform_kernel(W, g, g1, lifting), g, g2, lifting);
                    Tensor direct = transform_kernel(
                        W, g, g.cayley[static_cast<size_t>(g2)][static_cast<size_t>(g1)], lifting);
                    CHECK(two_step.v == direct.v);
                }
        }
    }
}

TEST_CASE("transformed copies of an asymmetric kernel are pairwise distinct") {
    const Group& g = group_of(GroupKind::p4m);
    Tensor W = Tensor::zeros({27, 1, 1});
    // a marked corner breaks every symmetry
    W.v[static_cast<size_t>(cell_linear(0, 0, 0, 3))] = 1.0;
    W.v[static_cast<size_t>(cell_linear(2, 1, 0, 3))] = 2.0;
    std::vector<std::vector<double>> copies;
    for (int e = 0; e < 8; ++e) copies.push_back(transform_kernel(W, g, e, true).v);
    for (size_t i = 0; i < copies.size(); ++i)
        for (size_t j = i + 1; j < copies.size(); ++j) CHECK(copies[i] != copies[j]);
}

TEST_CASE("group layer channel factorization is checked") {
    const Group& g = group_of(GroupKind::p4);
    Tensor W = random_kernel(27, 6, 2, 25);  // 6 not divisible by 4
    CHECK_THROWS_AS(transform_kernel(W, g, 1, false), std::invalid_argument);
}

TEST_SUITE_END();
