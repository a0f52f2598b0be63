#include "dvconv/nn.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace dvconv {

KernelStack KernelStack::make(const Group& group, bool lifting, int S, int c_in_eff,
                              int c_out) {
    if (!lifting && c_in_eff % group.n() != 0)
        throw std::invalid_argument("group layer input channels must factor as C_base * n");
    KernelStack st;
    st.group = &group;
    st.lifting = lifting;
    st.S = S;
    st.c_in_eff = c_in_eff;
    st.c_out = c_out;
    st.W = Tensor::zeros({S * S * S, c_in_eff, c_out});
    st.W.alloc_grad();

    const int n = group.n();
    const int cells = S * S * S;
    st.entry_perm.resize(static_cast<size_t>(n));
    for (int g = 0; g < n; ++g) {
        const int ginv = group.inverse[static_cast<size_t>(g)];
        const std::vector<int> cell_inv = cell_permutation(group, ginv, S);
        std::vector<int>& perm = st.entry_perm[static_cast<size_t>(g)];
        perm.resize(static_cast<size_t>(cells) * c_in_eff);
        for (int cell = 0; cell < cells; ++cell) {
            const int src_cell = cell_inv[static_cast<size_t>(cell)];
            for (int ci = 0; ci < c_in_eff; ++ci) {
                int src_ci = ci;
                if (!lifting) {
                    const int base = ci / n;
                    const int h = ci % n;
                    src_ci = base * n + act_on_orientation(group, ginv, h);
                }
                perm[static_cast<size_t>(cell) * c_in_eff + ci] = src_cell * c_in_eff + src_ci;
            }
        }
    }
    st.Wg.assign(static_cast<size_t>(n),
                 std::vector<double>(static_cast<size_t>(cells) * c_in_eff * c_out, 0.0));
    return st;
}

void KernelStack::refresh() {
    const int n = group->n();
    const size_t pairs = entry_perm[0].size();
    for (int g = 0; g < n; ++g) {
        const std::vector<int>& perm = entry_perm[static_cast<size_t>(g)];
        std::vector<double>& wg = Wg[static_cast<size_t>(g)];
        for (size_t p = 0; p < pairs; ++p) {
            const double* src = &W.v[static_cast<size_t>(perm[p]) * c_out];
            double* dst = &wg[p * c_out];
            for (int co = 0; co < c_out; ++co) dst[co] = src[co];
        }
    }
}

namespace {

// Core convolution over one kernel's grid. `occupancy` may be null (dense).
void conv_one(const double* grid, const uint16_t* occupancy, const KernelStack& st,
              const Tensor& bias, double* out_row) {
    const int n = st.n();
    const int cells = st.S * st.S * st.S;
    const int ci_n = st.c_in_eff;
    const int co_n = st.c_out;
    std::vector<double> acc(static_cast<size_t>(co_n));
    for (int g = 0; g < n; ++g) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const std::vector<double>& wg = st.Wg[static_cast<size_t>(g)];
        for (int cell = 0; cell < cells; ++cell) {
            if (occupancy && occupancy[cell] == 0) continue;
            const double* f = grid + static_cast<size_t>(cell) * ci_n;
            const double* w = wg.data() + static_cast<size_t>(cell) * ci_n * co_n;
            for (int ci = 0; ci < ci_n; ++ci) {
                const double fv = f[ci];
                if (fv == 0.0) continue;
                const double* wrow = w + static_cast<size_t>(ci) * co_n;
                for (int co = 0; co < co_n; ++co) acc[static_cast<size_t>(co)] += wrow[co] * fv;
            }
        }
        for (int co = 0; co < co_n; ++co)
            out_row[static_cast<size_t>(co) * n + g] = acc[static_cast<size_t>(co)] + bias.v[static_cast<size_t>(co)];
    }
}

void check_stack_bias(const KernelStack& st, const Tensor& bias) {
    if (bias.shape != std::vector<int>{st.c_out})
        throw std::invalid_argument("bias must have shape [c_out]");
}

}  // namespace

Tensor dvconv_forward(const VoxelBatch& batch, const KernelStack& stack, const Tensor& bias) {
    check_stack_bias(stack, bias);
    if (batch.C != stack.c_in_eff || batch.S != stack.S)
        throw std::invalid_argument("voxel batch does not match kernel stack");
    const int n = stack.n();
    Tensor out = Tensor::zeros({batch.size(), stack.c_out * n});
    for (int p = 0; p < batch.size(); ++p) {
        const VoxelKernel& k = batch.kernels[static_cast<size_t>(p)];
        conv_one(k.grid.data(), k.occupancy.data(), stack, bias,
                 &out.v[static_cast<size_t>(p) * stack.c_out * n]);
    }
    return out;
}

Tensor dvconv_forward(const Tensor& grids, const KernelStack& stack, const Tensor& bias) {
    check_stack_bias(stack, bias);
    const int cells = stack.S * stack.S * stack.S;
    if (grids.shape.size() != 3 || grids.shape[1] != cells || grids.shape[2] != stack.c_in_eff)
        throw std::invalid_argument("grids must be [N, S^3, C]");
    const int n = stack.n();
    const int N = grids.shape[0];
    Tensor out = Tensor::zeros({N, stack.c_out * n});
    for (int p = 0; p < N; ++p)
        conv_one(&grids.v[static_cast<size_t>(p) * cells * stack.c_in_eff], nullptr, stack, bias,
                 &out.v[static_cast<size_t>(p) * stack.c_out * n]);
    return out;
}

namespace {

DvConvGrads backward_impl(const Tensor& upstream, const KernelStack& st, int N,
                          const double* grids, const std::vector<const uint16_t*>& occ) {
    const int n = st.n();
    const int cells = st.S * st.S * st.S;
    const int ci_n = st.c_in_eff;
    const int co_n = st.c_out;
    check_shape(upstream, {N, co_n * n}, "dvconv upstream");

    DvConvGrads g;
    g.grad_W = Tensor::zeros({cells, ci_n, co_n});
    g.grad_bias = Tensor::zeros({co_n});
    g.grad_grids = Tensor::zeros({N, cells, ci_n});

    std::vector<double> up(static_cast<size_t>(co_n));
    for (int p = 0; p < N; ++p) {
        const double* grid = grids + static_cast<size_t>(p) * cells * ci_n;
        double* ggrid = &g.grad_grids.v[static_cast<size_t>(p) * cells * ci_n];
        const uint16_t* o = occ.empty() ? nullptr : occ[static_cast<size_t>(p)];
        for (int gi = 0; gi < n; ++gi) {
            const std::vector<double>& wg = st.Wg[static_cast<size_t>(gi)];
            const std::vector<int>& perm = st.entry_perm[static_cast<size_t>(gi)];
            for (int co = 0; co < co_n; ++co) {
                up[static_cast<size_t>(co)] =
                    upstream.v[static_cast<size_t>(p) * co_n * n + static_cast<size_t>(co) * n + gi];
                g.grad_bias.v[static_cast<size_t>(co)] += up[static_cast<size_t>(co)];
            }
            for (int cell = 0; cell < cells; ++cell) {
                // Unoccupied cells hold structural zeros: nothing flows to or
                // through them in the voxel pipeline.
                if (o != nullptr && o[cell] == 0) continue;
                const double* f = grid + static_cast<size_t>(cell) * ci_n;
                for (int ci = 0; ci < ci_n; ++ci) {
                    const size_t pair = static_cast<size_t>(cell) * ci_n + ci;
                    const double* wrow = wg.data() + pair * co_n;
                    double acc = 0.0;
                    for (int co = 0; co < co_n; ++co) acc += wrow[co] * up[static_cast<size_t>(co)];
                    ggrid[pair] += acc;
                    if (f[ci] != 0.0) {
                        double* wdst = &g.grad_W.v[static_cast<size_t>(perm[pair]) * co_n];
                        const double fv = f[ci];
                        for (int co = 0; co < co_n; ++co)
                            wdst[co] += fv * up[static_cast<size_t>(co)];
                    }
                }
            }
        }
    }
    return g;
}

}  // namespace

DvConvGrads dvconv_backward(const Tensor& upstream, const VoxelBatch& batch,
                            const KernelStack& stack) {
    const int N = batch.size();
    std::vector<const uint16_t*> occ(static_cast<size_t>(N));
    // Flatten kernel grids into one buffer view.
    const int cells = stack.S * stack.S * stack.S;
    std::vector<double> grids(static_cast<size_t>(N) * cells * stack.c_in_eff);
    for (int p = 0; p < N; ++p) {
        const VoxelKernel& k = batch.kernels[static_cast<size_t>(p)];
        std::copy(k.grid.begin(), k.grid.end(),
                  grids.begin() + static_cast<size_t>(p) * cells * stack.c_in_eff);
        occ[static_cast<size_t>(p)] = k.occupancy.data();
    }
    return backward_impl(upstream, stack, N, grids.data(), occ);
}

DvConvGrads dvconv_backward(const Tensor& upstream, const Tensor& grids,
                            const KernelStack& stack) {
    const int cells = stack.S * stack.S * stack.S;
    if (grids.shape.size() != 3 || grids.shape[1] != cells || grids.shape[2] != stack.c_in_eff)
        throw std::invalid_argument("grids must be [N, S^3, C]");
    return backward_impl(upstream, stack, grids.shape[0], grids.v.data(), {});
}

Tensor mlp_forward(const Tensor& x, const Tensor& W, const Tensor& bias, Activation act) {
    if (x.shape.size() != 2 || W.shape.size() != 2 || x.shape[1] != W.shape[0])
        throw std::invalid_argument("mlp_forward: shape mismatch");
    if (bias.shape != std::vector<int>{W.shape[1]})
        throw std::invalid_argument("mlp_forward: bias shape mismatch");
    const int n = x.shape[0];
    const int ci = W.shape[0];
    const int co = W.shape[1];
    Tensor out = Tensor::zeros({n, co});
    for (int i = 0; i < n; ++i) {
        double* orow = &out.v[static_cast<size_t>(i) * co];
        for (int c = 0; c < co; ++c) orow[c] = bias.v[static_cast<size_t>(c)];
        for (int k = 0; k < ci; ++k) {
            const double xv = x.at(i, k);
            if (xv == 0.0) continue;
            const double* wrow = &W.v[static_cast<size_t>(k) * co];
            for (int c = 0; c < co; ++c) orow[c] += wrow[c] * xv;
        }
        if (act == Activation::relu)
            for (int c = 0; c < co; ++c) orow[c] = orow[c] > 0.0 ? orow[c] : 0.0;
    }
    return out;
}

MlpGrads mlp_backward(const Tensor& upstream, const Tensor& x, const Tensor& W,
                      const Tensor& pre, Activation act) {
    const int n = x.shape[0];
    const int ci = W.shape[0];
    const int co = W.shape[1];
    check_shape(upstream, {n, co}, "mlp upstream");

    MlpGrads g;
    g.grad_x = Tensor::zeros({n, ci});
    g.grad_W = Tensor::zeros({ci, co});
    g.grad_bias = Tensor::zeros({co});
    std::vector<double> up(static_cast<size_t>(co));
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < co; ++c) {
            double u = upstream.at(i, c);
            if (act == Activation::relu && pre.at(i, c) <= 0.0) u = 0.0;
            up[static_cast<size_t>(c)] = u;
            g.grad_bias.v[static_cast<size_t>(c)] += u;
        }
        for (int k = 0; k < ci; ++k) {
            const double xv = x.at(i, k);
            const double* wrow = &W.v[static_cast<size_t>(k) * co];
            double* gw = &g.grad_W.v[static_cast<size_t>(k) * co];
            double acc = 0.0;
            for (int c = 0; c < co; ++c) {
                acc += wrow[c] * up[static_cast<size_t>(c)];
                gw[c] += xv * up[static_cast<size_t>(c)];
            }
            g.grad_x.at(i, k) = acc;
        }
    }
    return g;
}

DropoutResult dropout(const Tensor& x, double rate, bool training, uint64_t seed) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
    DropoutResult r;
    if (!training || rate == 0.0) {
        r.y = x;
        return r;
    }
    Rng rng(seed);
    const double scale = 1.0 / (1.0 - rate);
    r.y = x;
    r.mask.assign(x.v.size(), 1);
    for (size_t i = 0; i < x.v.size(); ++i) {
        if (rng.uniform() < rate) {
            r.mask[i] = 0;
            r.y.v[i] = 0.0;
        } else {
            r.y.v[i] *= scale;
        }
    }
    return r;
}

Tensor dropout_backward(const Tensor& upstream, const DropoutResult& saved, double rate) {
    if (saved.mask.empty()) return upstream;
    Tensor g = upstream;
    const double scale = 1.0 / (1.0 - rate);
    for (size_t i = 0; i < g.v.size(); ++i) g.v[i] = saved.mask[i] ? g.v[i] * scale : 0.0;
    return g;
}

LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int32_t>& labels,
                                 const std::vector<uint8_t>& mask) {
    if (logits.shape.size() != 2) throw std::invalid_argument("logits must be [n, classes]");
    const int n = logits.shape[0];
    const int C = logits.shape[1];
    if (static_cast<int>(labels.size()) != n)
        throw std::invalid_argument("labels must match logits rows");
    if (!mask.empty() && static_cast<int>(mask.size()) != n)
        throw std::invalid_argument("mask must match logits rows");

    LossResult r;
    r.grad = Tensor::zeros(logits.shape);
    for (int i = 0; i < n; ++i)
        if (mask.empty() || mask[static_cast<size_t>(i)]) ++r.n_unmasked;
    if (r.n_unmasked == 0) {
        std::cerr << "warning: fully masked batch, loss is zero\n";
        return r;
    }

    const double w = 1.0 / static_cast<double>(r.n_unmasked);
    for (int i = 0; i < n; ++i) {
        if (!mask.empty() && !mask[static_cast<size_t>(i)]) continue;
        const int32_t label = labels[static_cast<size_t>(i)];
        if (label < 0 || label >= C) throw std::invalid_argument("label out of class range");
        const double* row = &logits.v[static_cast<size_t>(i) * C];
        double mx = row[0];
        for (int c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (int c = 0; c < C; ++c) z += std::exp(row[c] - mx);
        const double logz = std::log(z) + mx;
        r.loss += w * (logz - row[label]);
        double* grow = &r.grad.v[static_cast<size_t>(i) * C];
        for (int c = 0; c < C; ++c) grow[c] = w * (std::exp(row[c] - logz) - (c == label ? 1.0 : 0.0));
    }
    return r;
}

void glorot_init(Tensor& t, int fan_in, int fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& x : t.v) x = rng.uniform(-bound, bound);
}

}  // namespace dvconv
