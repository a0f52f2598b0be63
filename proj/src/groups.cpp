#include "dvconv/groups.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace dvconv {

namespace {

constexpr int kCos[4] = {1, 0, -1, 0};
constexpr int kSin[4] = {0, 1, 0, -1};

GroupElement make_element(int r, int m) {
    GroupElement e;
    e.r = r;
    e.m = m;
    const int sign = (m == 0) ? 1 : -1;
    std::array<int, 16>& a = e.matrix;
    a.fill(0);
    a[0] = sign * kCos[r];
    a[1] = -sign * kSin[r];
    a[4] = kSin[r];
    a[5] = kCos[r];
    a[10] = 1;
    a[15] = 1;
    return e;
}

std::array<int, 16> matmul(const std::array<int, 16>& a, const std::array<int, 16>& b) {
    std::array<int, 16> c{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            int s = 0;
            for (int k = 0; k < 4; ++k) s += a[i * 4 + k] * b[k * 4 + j];
            c[i * 4 + j] = s;
        }
    return c;
}

int find_element(const std::vector<GroupElement>& elems, const std::array<int, 16>& mat) {
    for (size_t i = 0; i < elems.size(); ++i)
        if (elems[i].matrix == mat) return static_cast<int>(i);
    return -1;
}

Group build(GroupKind kind) {
    Group g;
    g.kind = kind;
    switch (kind) {
        case GroupKind::trivial:
            g.elements.push_back(make_element(0, 0));
            break;
        case GroupKind::p4:
            for (int r = 0; r < 4; ++r) g.elements.push_back(make_element(r, 0));
            break;
        case GroupKind::p4m:
            for (int m = 0; m < 2; ++m)
                for (int r = 0; r < 4; ++r) g.elements.push_back(make_element(r, m));
            break;
    }

    const int n = g.n();
    g.cayley.assign(static_cast<size_t>(n), std::vector<int>(static_cast<size_t>(n), -1));
    g.inverse.assign(static_cast<size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const auto prod = matmul(g.elements[static_cast<size_t>(i)].matrix,
                                     g.elements[static_cast<size_t>(j)].matrix);
            const int idx = find_element(g.elements, prod);
            if (idx < 0) throw std::logic_error("group not closed under composition");
            g.cayley[static_cast<size_t>(i)][static_cast<size_t>(j)] = idx;
            if (idx == 0) g.inverse[static_cast<size_t>(i)] = j;
        }
        if (g.inverse[static_cast<size_t>(i)] < 0) throw std::logic_error("missing inverse");
    }

    g.orient_perm = g.cayley;
    g.cell_perm.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) g.cell_perm.push_back(cell_permutation(g, i, 3));
    return g;
}

}  // namespace

const Group& group_of(GroupKind kind) {
    static std::once_flag once[3];
    static Group groups[3];
    const int idx = static_cast<int>(kind);
    std::call_once(once[idx], [&] { groups[idx] = build(kind); });
    return groups[idx];
}

std::array<int, 3> act_on_cell(const GroupElement& g, const std::array<int, 3>& cell, int S) {
    if (S % 2 == 0) throw std::invalid_argument("group action requires odd S");
    const int c = (S - 1) / 2;
    const int x = cell[0] - c;
    const int y = cell[1] - c;
    const int x2 = g.matrix[0] * x + g.matrix[1] * y;
    const int y2 = g.matrix[4] * x + g.matrix[5] * y;
    return {x2 + c, y2 + c, cell[2]};
}

int act_on_orientation(const Group& group, int g, int h) {
    return group.cayley.at(static_cast<size_t>(g)).at(static_cast<size_t>(h));
}

std::vector<int> cell_permutation(const Group& group, int g, int S) {
    const GroupElement& e = group.elements.at(static_cast<size_t>(g));
    std::vector<int> perm(static_cast<size_t>(S) * S * S);
    for (int i = 0; i < S; ++i)
        for (int j = 0; j < S; ++j)
            for (int k = 0; k < S; ++k) {
                const auto to = act_on_cell(e, {i, j, k}, S);
                perm[static_cast<size_t>(cell_linear(i, j, k, S))] =
                    cell_linear(to[0], to[1], to[2], S);
            }
    return perm;
}

Tensor transform_kernel(const Tensor& W, const Group& group, int g, bool lifting) {
    if (W.shape.size() != 3) throw std::invalid_argument("kernel must be [S^3, C_in, C_out]");
    const int cells = W.shape[0];
    const int c_in = W.shape[1];
    const int c_out = W.shape[2];
    const int S = static_cast<int>(std::lround(std::cbrt(static_cast<double>(cells))));
    if (S * S * S != cells) throw std::invalid_argument("cell count is not a cube");
    const int n = group.n();
    if (!lifting && c_in % n != 0)
        throw std::invalid_argument("group layer input channels must factor as C_base * n");

    const int ginv = group.inverse.at(static_cast<size_t>(g));
    const std::vector<int> cell_inv = cell_permutation(group, ginv, S);

    Tensor out = Tensor::zeros(W.shape);
    for (int cell = 0; cell < cells; ++cell) {
        const int src_cell = cell_inv[static_cast<size_t>(cell)];
        for (int ci = 0; ci < c_in; ++ci) {
            int src_ci = ci;
            if (!lifting) {
                const int base = ci / n;
                const int h = ci % n;
                src_ci = base * n + act_on_orientation(group, ginv, h);
            }
            const size_t dst = (static_cast<size_t>(cell) * c_in + ci) * c_out;
            const size_t src = (static_cast<size_t>(src_cell) * c_in + src_ci) * c_out;
            for (int co = 0; co < c_out; ++co) out.v[dst + co] = W.v[src + co];
        }
    }
    return out;
}

}  // namespace dvconv
