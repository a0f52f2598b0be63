#pragma once

#include <cstdint>
#include <vector>

#include "dvconv/groups.hpp"
#include "dvconv/tensor.hpp"
#include "dvconv/voxelizer.hpp"

namespace dvconv {

// Base kernel W plus its n group-transformed copies. The copies are derived
// views of W (pure entry permutations); only W itself is trainable.
struct KernelStack {
    const Group* group = nullptr;
    bool lifting = true;
    int S = 3;
    int c_in_eff = 0;
    int c_out = 0;

    Tensor W;  // [S^3, c_in_eff, c_out]

    // entry_perm[g] maps a (cell, ci) slot of W_g to its source slot in W.
    std::vector<std::vector<int>> entry_perm;
    std::vector<std::vector<double>> Wg;  // materialized copies, refreshed after updates

    static KernelStack make(const Group& group, bool lifting, int S, int c_in_eff, int c_out);
    void refresh();  // rebuild Wg from W
    int n() const { return group->n(); }
};

// out[p, c_out*n + g] = sum_cells sum_ci W_g[cell, ci, c_out] * F[p, cell, ci] + bias[c_out].
// The bias is shared across orientations (the copies are views of one
// kernel, so the layer carries exactly the parameters of a plain layer).
Tensor dvconv_forward(const VoxelBatch& batch, const KernelStack& stack, const Tensor& bias);
Tensor dvconv_forward(const Tensor& grids, const KernelStack& stack, const Tensor& bias);

struct DvConvGrads {
    Tensor grad_W;     // [S^3, c_in_eff, c_out]
    Tensor grad_bias;  // [c_out]
    Tensor grad_grids; // [N, S^3, C]
};

// Chain rule through the shared base kernel: each copy's gradient maps back
// through the inverse permutation and accumulates into grad_W.
DvConvGrads dvconv_backward(const Tensor& upstream, const VoxelBatch& batch,
                            const KernelStack& stack);
DvConvGrads dvconv_backward(const Tensor& upstream, const Tensor& grids,
                            const KernelStack& stack);

enum class Activation { none, relu };

Tensor mlp_forward(const Tensor& x, const Tensor& W, const Tensor& bias, Activation act);

struct MlpGrads {
    Tensor grad_x;
    Tensor grad_W;
    Tensor grad_bias;
};

// `pre` is the pre-activation output saved from the forward pass.
MlpGrads mlp_backward(const Tensor& upstream, const Tensor& x, const Tensor& W,
                      const Tensor& pre, Activation act);

struct DropoutResult {
    Tensor y;
    std::vector<uint8_t> mask;  // 1 = kept; empty when the op was an identity
};

DropoutResult dropout(const Tensor& x, double rate, bool training, uint64_t seed);
Tensor dropout_backward(const Tensor& upstream, const DropoutResult& saved, double rate);

struct LossResult {
    double loss = 0.0;
    Tensor grad;  // same shape as logits
    int n_unmasked = 0;
};

// Mean over unmasked rows of -log softmax(logits)[label]. Masked rows
// contribute neither loss nor gradient; a fully masked batch yields zero
// loss and a warning on stderr.
LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int32_t>& labels,
                                 const std::vector<uint8_t>& mask);

// Uniform init in +/- sqrt(6 / (fan_in + fan_out)).
void glorot_init(Tensor& t, int fan_in, int fan_out, Rng& rng);

}  // namespace dvconv
