#pragma once

#include <cstdint>
#include <vector>

#include "dvconv/data.hpp"
#include "dvconv/model.hpp"

namespace dvconv {

// Learning-rate schedule: base * factor^floor(epoch / period).
double lr_at(int epoch, double base = 1e-3, double factor = 0.8, int period = 10);

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-5;
    int64_t step = 0;
    std::vector<std::vector<double>> m;  // first moments, one buffer per parameter
    std::vector<std::vector<double>> v;  // second moments
};

// One update from the accumulated gradients. L2 enters as grad += wd * param
// before the moment updates; moments are bias-corrected.
void adam_step(std::vector<Param>& params, AdamState& state);

struct Metrics {
    int classes = 0;
    std::vector<int64_t> confusion;  // [truth * classes + predicted]
    double loss = 0.0;
    double oa = 0.0;
    double macc = 0.0;
    double miou = 0.0;
    std::vector<double> iou;

    // part segmentation (datasets with part_groups)
    double part_miou = -1.0;  // per-shape part-averaged IoU, mean over shapes
    double mpiou = -1.0;      // mean over categories of per-category part IoU
    std::vector<double> per_cat_piou;

    int64_t total() const;
    void finalize();  // derive oa / macc / miou from the confusion matrix
};

// Shuffled mini-batches, augmentation in training only, one optimizer step
// per batch. Returns the mean per-cloud loss.
double train_epoch(Network& net, const Dataset& data, int batch_size, bool augment,
                   uint64_t seed, int epoch, AdamState& opt);

// Deterministic evaluation: no dropout, strided dilation, fixed FPS start.
Metrics evaluate(Network& net, const Dataset& data);

}  // namespace dvconv
