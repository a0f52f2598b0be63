#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dvconv/nn.hpp"

namespace dvconv {

enum class Task { classify, segment };
enum class OrientPool { concat, max };

struct LayerSpec {
    int n_centroids = 0;  // encoder layers; clamped to the available points
    int partner = -1;     // decoder layers: encoder level whose input points seed sampling
    int k = 32;
    int d = 2;
    int s = 3;
    int channels = 8;  // C_out base; the group duplicates it n-fold
    Pooling pooling = Pooling::max;
    double fixed_radius = 0.0;  // > 0 switches to fixed-radius sampling
    bool relu = true;
    int cap = 5;
    bool offset_channels = false;
};

struct TrainSettings {
    int epochs = 60;
    double base_lr = 1e-3;
    double lr_factor = 0.8;
    int lr_period = 10;
    double weight_decay = 1e-5;
    int batch_size = 16;
    bool augment = true;
    double scale_low = 0.95;
    double scale_high = 1.05;
    bool early_stop = false;
    double early_stop_oa = 1.0;  // stop once test OA reaches this
};

struct NetworkConfig {
    Task task = Task::classify;
    GroupKind group = GroupKind::p4;
    int num_classes = 0;
    int input_channels = 0;
    bool center_clouds = true;
    OrientPool orientation_pool = OrientPool::concat;
    double dropout = 0.5;
    std::vector<LayerSpec> encoder;
    std::vector<LayerSpec> decoder;  // segmentation only; partners strictly decreasing to 0
    std::vector<int> head;           // hidden widths; final layer maps to num_classes
    TrainSettings train;
};

NetworkConfig config_from_json(const std::string& text);
std::string config_to_json(const NetworkConfig& cfg);

struct Param {
    std::string name;
    Tensor* t;  // grad buffer allocated
};

class Network {
public:
    explicit Network(NetworkConfig cfg);

    void init_params(uint64_t seed);
    const NetworkConfig& config() const { return cfg_; }

    // Forward tape: every executed operation in order with the saved context
    // (voxel batches with contributor maps, preactivations, dropout masks)
    // that the reverse pass consumes exactly once.
    struct Tape {
        struct State {
            std::vector<Vec3> pos;
            Tensor feats;  // [n, C]
        };
        struct ConvSave {
            VoxelBatch batch;
            Tensor preact;  // [N, c_out * n]
        };
        std::vector<State> enc_states;  // L+1 entries, [0] = (centered) input
        std::vector<ConvSave> enc_saves;
        std::vector<State> dec_states;  // decoder chain, [0] = enc_states[L]
        std::vector<ConvSave> dec_saves;

        std::vector<int> gmax_arg;   // classify: winning point per channel
        std::vector<int> opool_arg;  // classify + orientation_pool=max: winning orientation
        Tensor head_in;
        std::vector<Tensor> head_x;    // input of each head layer
        std::vector<Tensor> head_pre;  // preactivation of each head layer
        std::vector<DropoutResult> head_drop;
        bool training = false;
    };

    // classify -> [1, num_classes]; segment -> [n_points, num_classes].
    Tensor forward(const PointCloud& cloud, bool training, uint64_t seed, Tape* tape = nullptr);
    Tensor forward_classify(const PointCloud& cloud, bool training, uint64_t seed,
                            Tape* tape = nullptr);
    Tensor forward_segment(const PointCloud& cloud, bool training, uint64_t seed,
                           Tape* tape = nullptr);

    // Accumulates parameter gradients; returns the gradient of the input
    // point features (feeds nothing downstream, useful for checks).
    Tensor backward(const Tape& tape, const Tensor& grad_logits);

    std::vector<Param> parameters();
    void zero_grad();

    struct Stats {
        int64_t params = 0;            // trainable scalars, base kernels counted once
        int64_t conv_base_params = 0;  // conv layers only
        int64_t flops = 0;             // 2 * multiply-adds at the sample's size
        double forward_seconds = 0.0;
    };
    Stats stats(const PointCloud& sample);

    void save(const std::string& path) const;
    static Network load(const std::string& path);

private:
    struct ConvLayer {
        LayerSpec spec;
        bool lifting = true;
        int c_in = 0;
        KernelStack stack;
        Tensor bias;
    };
    struct DenseLayer {
        Tensor W;
        Tensor bias;
        Activation act = Activation::relu;
        bool dropout_after = false;
    };

    void build();
    void refresh_stacks();
    Tensor run_head(const Tensor& x, bool training, uint64_t seed, Tape* tape);
    Tensor head_backward(const Tape& tape, const Tensor& grad_out);

    NetworkConfig cfg_;
    const Group* group_ = nullptr;
    std::vector<ConvLayer> enc_;
    std::vector<ConvLayer> dec_;
    std::vector<DenseLayer> head_;
    int head_in_width_ = 0;
};

}  // namespace dvconv
