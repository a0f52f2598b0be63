#pragma once

#include <array>
#include <vector>

#include "dvconv/common.hpp"
#include "dvconv/tensor.hpp"

namespace dvconv {

// Symmetry groups acting on the cubic kernel lattice: the four rotations by
// multiples of pi/2 about z (p4), optionally combined with the x-mirror
// (p4m). The trivial group turns every group layer into a plain convolution.
enum class GroupKind { trivial, p4, p4m };

struct GroupElement {
    int r = 0;  // quarter turns about z
    int m = 0;  // mirror bit
    std::array<int, 16> matrix{};  // 4x4 homogeneous, row-major, entries in {-1,0,1}
};

struct Group {
    GroupKind kind = GroupKind::trivial;
    std::vector<GroupElement> elements;       // identity first
    std::vector<std::vector<int>> cayley;     // cayley[g][h] = index of g*h
    std::vector<int> inverse;
    std::vector<std::vector<int>> cell_perm;  // S=3 lattice: cell_perm[g][lin] = lin of g*cell
    std::vector<std::vector<int>> orient_perm;  // regular representation, = cayley rows

    int n() const { return static_cast<int>(elements.size()); }
};

// Enumerates (and caches) a group. Element order: (r=0..3, m=0) then
// (r=0..3, m=1); composition tables come from exact integer matrix products.
const Group& group_of(GroupKind kind);

// Applies the element's linear part to a lattice cell, centered at
// ((S-1)/2, ...). The z index never changes. Requires odd S.
std::array<int, 3> act_on_cell(const GroupElement& g, const std::array<int, 3>& cell, int S);

// Index of g∘h.
int act_on_orientation(const Group& group, int g, int h);

// Lattice permutation of element g on an S^3 grid (x-major linearization).
std::vector<int> cell_permutation(const Group& group, int g, int S);

// W_g = g * W for a base kernel W of shape [S^3, C_in_eff, C_out]. Lifting
// layers permute cells only; group layers also permute the orientation
// factor of the input channels (layout: channel = c_base * n + h).
Tensor transform_kernel(const Tensor& W, const Group& group, int g, bool lifting);

}  // namespace dvconv
