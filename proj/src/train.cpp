#include "dvconv/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace dvconv {

double lr_at(int epoch, double base, double factor, int period) {
    if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
    if (period < 1) throw std::invalid_argument("period must be >= 1");
    return base * std::pow(factor, static_cast<double>(epoch / period));
}

void adam_step(std::vector<Param>& params, AdamState& state) {
    if (state.m.size() != params.size()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].t->v.size(), 0.0);
            state.v[i].assign(params[i].t->v.size(), 0.0);
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& t = *params[i].t;
        if (t.grad.size() != t.v.size()) throw std::invalid_argument("parameter without gradient");
        std::vector<double>& m = state.m[i];
        std::vector<double>& v = state.v[i];
        for (size_t j = 0; j < t.v.size(); ++j) {
            const double g = t.grad[j] + state.weight_decay * t.v[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            t.v[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

int64_t Metrics::total() const {
    int64_t t = 0;
    for (int64_t c : confusion) t += c;
    return t;
}

void Metrics::finalize() {
    const int64_t tot = total();
    int64_t diag = 0;
    for (int c = 0; c < classes; ++c) diag += confusion[static_cast<size_t>(c) * classes + c];
    oa = tot > 0 ? static_cast<double>(diag) / static_cast<double>(tot) : 0.0;

    iou.assign(static_cast<size_t>(classes), 0.0);
    double acc_sum = 0.0, iou_sum = 0.0;
    int acc_n = 0, iou_n = 0;
    for (int c = 0; c < classes; ++c) {
        int64_t row = 0, col = 0;
        for (int k = 0; k < classes; ++k) {
            row += confusion[static_cast<size_t>(c) * classes + k];
            col += confusion[static_cast<size_t>(k) * classes + c];
        }
        const int64_t tp = confusion[static_cast<size_t>(c) * classes + c];
        if (row > 0) {
            acc_sum += static_cast<double>(tp) / static_cast<double>(row);
            ++acc_n;
        }
        const int64_t uni = row + col - tp;
        if (uni > 0) {
            iou[static_cast<size_t>(c)] = static_cast<double>(tp) / static_cast<double>(uni);
            iou_sum += iou[static_cast<size_t>(c)];
            ++iou_n;
        }
    }
    macc = acc_n > 0 ? acc_sum / acc_n : 0.0;
    miou = iou_n > 0 ? iou_sum / iou_n : 0.0;
}

namespace {

struct CloudTargets {
    std::vector<int32_t> labels;
    std::vector<uint8_t> mask;
};

CloudTargets targets_for(const PointCloud& pc, Task task) {
    CloudTargets t;
    if (task == Task::classify) {
        if (pc.label_kind != LabelKind::per_cloud)
            throw std::invalid_argument("classification expects per-cloud labels");
        t.labels = {pc.labels[0]};
    } else {
        if (pc.label_kind != LabelKind::per_point)
            throw std::invalid_argument("segmentation expects per-point labels");
        t.labels = pc.labels;
        t.mask = pc.valid_mask;
    }
    return t;
}

}  // namespace

double train_epoch(Network& net, const Dataset& data, int batch_size, bool augment,
                   uint64_t seed, int epoch, AdamState& opt) {
    const int n = data.size();
    if (n == 0) throw std::invalid_argument("empty dataset");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (batch_size > n) {
        std::cerr << "warning: batch size " << batch_size << " exceeds dataset size " << n
                  << ", using a single batch\n";
        batch_size = n;
    }
    const Task task = net.config().task;
    const TrainSettings& ts = net.config().train;

    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng shuffle_rng(substream(seed, "shuffle", static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    std::vector<Param> params = net.parameters();
    double total_loss = 0.0;
    int count = 0;

    for (int start = 0; start < n; start += batch_size) {
        const int m = std::min(batch_size, n - start);
        net.zero_grad();
        for (int b = 0; b < m; ++b) {
            const int ci = order[static_cast<size_t>(start + b)];
            const uint64_t id = static_cast<uint64_t>(epoch) * static_cast<uint64_t>(n) +
                                static_cast<uint64_t>(ci);
            PointCloud pc = data.clouds[static_cast<size_t>(ci)];
            if (augment)
                pc = anisotropic_scale(pc, ts.scale_low, ts.scale_high,
                                       substream(seed, "augment", id));
            Network::Tape tape;
            Tensor logits = net.forward(pc, true, substream(seed, "forward", id), &tape);
            const CloudTargets t = targets_for(pc, task);
            LossResult lr = softmax_cross_entropy(logits, t.labels, t.mask);
            total_loss += lr.loss;
            ++count;
            if (lr.n_unmasked == 0) continue;
            for (double& g : lr.grad.v) g /= static_cast<double>(m);
            net.backward(tape, lr.grad);
        }
        adam_step(params, opt);
    }
    return total_loss / static_cast<double>(count);
}

Metrics evaluate(Network& net, const Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("empty dataset");
    const Task task = net.config().task;

    Metrics mt;
    mt.classes = std::max(infer_num_classes(data), net.config().num_classes);
    mt.confusion.assign(static_cast<size_t>(mt.classes) * mt.classes, 0);

    // per-shape part IoU accumulators
    std::vector<double> cat_sum;
    std::vector<int> cat_n;
    if (data.has_parts()) {
        cat_sum.assign(data.part_groups.size(), 0.0);
        cat_n.assign(data.part_groups.size(), 0);
    }
    double shape_sum = 0.0;
    int shape_n = 0;
    double loss_sum = 0.0;

    for (int ci = 0; ci < data.size(); ++ci) {
        const PointCloud& pc = data.clouds[static_cast<size_t>(ci)];
        Tensor logits = net.forward(pc, false, 0);
        const CloudTargets t = targets_for(pc, task);
        loss_sum += softmax_cross_entropy(logits, t.labels, t.mask).loss;

        const int rows = logits.shape[0];
        const int C = logits.shape[1];
        std::vector<int32_t> pred(static_cast<size_t>(rows));
        for (int r = 0; r < rows; ++r) {
            int best = 0;
            for (int c = 1; c < C; ++c)
                if (logits.at(r, c) > logits.at(r, best)) best = c;
            pred[static_cast<size_t>(r)] = best;
        }
        for (int r = 0; r < rows; ++r) {
            if (!t.mask.empty() && !t.mask[static_cast<size_t>(r)]) continue;
            mt.confusion[static_cast<size_t>(t.labels[static_cast<size_t>(r)]) * mt.classes +
                         pred[static_cast<size_t>(r)]]++;
        }

        if (data.has_parts() && task == Task::segment) {
            const int32_t cat = ci < static_cast<int>(data.categories.size())
                                    ? data.categories[static_cast<size_t>(ci)]
                                    : 0;
            if (cat < 0 || cat >= static_cast<int>(data.part_groups.size())) continue;
            double iou_sum = 0.0;
            int iou_n = 0;
            for (int32_t part : data.part_groups[static_cast<size_t>(cat)]) {
                int64_t inter = 0, uni = 0;
                for (int r = 0; r < rows; ++r) {
                    if (!t.mask.empty() && !t.mask[static_cast<size_t>(r)]) continue;
                    const bool is_t = t.labels[static_cast<size_t>(r)] == part;
                    const bool is_p = pred[static_cast<size_t>(r)] == part;
                    if (is_t && is_p) ++inter;
                    if (is_t || is_p) ++uni;
                }
                // parts absent from both prediction and truth do not count
                if (uni == 0) continue;
                iou_sum += static_cast<double>(inter) / static_cast<double>(uni);
                ++iou_n;
            }
            if (iou_n > 0) {
                const double shape_iou = iou_sum / iou_n;
                shape_sum += shape_iou;
                ++shape_n;
                cat_sum[static_cast<size_t>(cat)] += shape_iou;
                ++cat_n[static_cast<size_t>(cat)];
            }
        }
    }

    mt.loss = loss_sum / data.size();
    mt.finalize();
    if (data.has_parts() && shape_n > 0) {
        mt.part_miou = shape_sum / shape_n;
        mt.per_cat_piou.assign(data.part_groups.size(), 0.0);
        double mp = 0.0;
        int mp_n = 0;
        for (size_t c = 0; c < data.part_groups.size(); ++c) {
            if (cat_n[c] > 0) {
                mt.per_cat_piou[c] = cat_sum[c] / cat_n[c];
                mp += mt.per_cat_piou[c];
                ++mp_n;
            }
        }
        if (mp_n > 0) mt.mpiou = mp / mp_n;
    }
    return mt;
}

}  // namespace dvconv
