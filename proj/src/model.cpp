#include "dvconv/model.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace dvconv {

using nlohmann::json;

namespace {

Pooling pooling_from(const std::string& s) {
    if (s == "max") return Pooling::max;
    if (s == "average") return Pooling::average;
    throw std::invalid_argument("unknown pooling: " + s);
}

GroupKind group_from(const std::string& s) {
    if (s == "trivial") return GroupKind::trivial;
    if (s == "p4") return GroupKind::p4;
    if (s == "p4m") return GroupKind::p4m;
    throw std::invalid_argument("unknown group: " + s);
}

LayerSpec layer_from(const json& j, bool decoder) {
    LayerSpec s;
    if (decoder) {
        s.partner = j.at("partner").get<int>();
    } else {
        s.n_centroids = j.at("n_centroids").get<int>();
    }
    s.k = j.value("k", s.k);
    s.d = j.value("d", s.d);
    s.s = j.value("s", s.s);
    s.channels = j.at("channels").get<int>();
    s.pooling = pooling_from(j.value("pooling", std::string("max")));
    const std::string sampling = j.value("sampling", std::string("knn"));
    if (sampling == "fixed") {
        s.fixed_radius = j.at("fixed_radius").get<double>();
        if (!(s.fixed_radius > 0.0))
            throw std::invalid_argument("fixed sampling requires fixed_radius > 0");
    } else if (sampling != "knn") {
        throw std::invalid_argument("unknown sampling: " + sampling);
    }
    s.relu = j.value("relu", true);
    s.cap = j.value("cap", 5);
    s.offset_channels = j.value("offset_channels", false);
    return s;
}

json layer_to(const LayerSpec& s, bool decoder) {
    json j;
    if (decoder) j["partner"] = s.partner;
    else j["n_centroids"] = s.n_centroids;
    j["k"] = s.k;
    j["d"] = s.d;
    j["s"] = s.s;
    j["channels"] = s.channels;
    j["pooling"] = s.pooling == Pooling::max ? "max" : "average";
    if (s.fixed_radius > 0.0) {
        j["sampling"] = "fixed";
        j["fixed_radius"] = s.fixed_radius;
    } else {
        j["sampling"] = "knn";
    }
    j["relu"] = s.relu;
    j["cap"] = s.cap;
    j["offset_channels"] = s.offset_channels;
    return j;
}

}  // namespace

NetworkConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config parse error: ") + e.what());
    }
    NetworkConfig c;
    const std::string task = j.at("task").get<std::string>();
    if (task == "classify") c.task = Task::classify;
    else if (task == "segment") c.task = Task::segment;
    else throw std::invalid_argument("unknown task: " + task);
    c.group = group_from(j.at("group").get<std::string>());
    c.num_classes = j.at("num_classes").get<int>();
    c.input_channels = j.at("input_channels").get<int>();
    c.center_clouds = j.value("center_clouds", c.task == Task::classify);
    const std::string op = j.value("orientation_pool", std::string("concat"));
    if (op == "concat") c.orientation_pool = OrientPool::concat;
    else if (op == "max") c.orientation_pool = OrientPool::max;
    else throw std::invalid_argument("unknown orientation_pool: " + op);
    c.dropout = j.value("dropout", 0.5);
    for (const json& l : j.at("encoder")) c.encoder.push_back(layer_from(l, false));
    if (j.contains("decoder"))
        for (const json& l : j.at("decoder")) c.decoder.push_back(layer_from(l, true));
    if (j.contains("head")) c.head = j.at("head").get<std::vector<int>>();
    if (j.contains("train")) {
        const json& t = j.at("train");
        c.train.epochs = t.value("epochs", c.train.epochs);
        c.train.base_lr = t.value("base_lr", c.train.base_lr);
        c.train.lr_factor = t.value("lr_factor", c.train.lr_factor);
        c.train.lr_period = t.value("lr_period", c.train.lr_period);
        c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
        c.train.batch_size = t.value("batch_size", c.train.batch_size);
        c.train.augment = t.value("augment", c.train.augment);
        c.train.scale_low = t.value("scale_low", c.train.scale_low);
        c.train.scale_high = t.value("scale_high", c.train.scale_high);
        c.train.early_stop = t.value("early_stop", c.train.early_stop);
        c.train.early_stop_oa = t.value("early_stop_oa", c.train.early_stop_oa);
    }
    return c;
}

std::string config_to_json(const NetworkConfig& c) {
    json j;
    j["version"] = 1;
    j["task"] = c.task == Task::classify ? "classify" : "segment";
    switch (c.group) {
        case GroupKind::trivial: j["group"] = "trivial"; break;
        case GroupKind::p4: j["group"] = "p4"; break;
        case GroupKind::p4m: j["group"] = "p4m"; break;
    }
    j["num_classes"] = c.num_classes;
    j["input_channels"] = c.input_channels;
    j["center_clouds"] = c.center_clouds;
    j["orientation_pool"] = c.orientation_pool == OrientPool::concat ? "concat" : "max";
    j["dropout"] = c.dropout;
    j["encoder"] = json::array();
    for (const LayerSpec& l : c.encoder) j["encoder"].push_back(layer_to(l, false));
    if (!c.decoder.empty()) {
        j["decoder"] = json::array();
        for (const LayerSpec& l : c.decoder) j["decoder"].push_back(layer_to(l, true));
    }
    j["head"] = c.head;
    j["train"] = {{"epochs", c.train.epochs},
                  {"base_lr", c.train.base_lr},
                  {"lr_factor", c.train.lr_factor},
                  {"lr_period", c.train.lr_period},
                  {"weight_decay", c.train.weight_decay},
                  {"batch_size", c.train.batch_size},
                  {"augment", c.train.augment},
                  {"scale_low", c.train.scale_low},
                  {"scale_high", c.train.scale_high},
                  {"early_stop", c.train.early_stop},
                  {"early_stop_oa", c.train.early_stop_oa}};
    return j.dump(2);
}

Network::Network(NetworkConfig cfg) : cfg_(std::move(cfg)) { build(); }

void Network::build() {
    if (cfg_.num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
    if (cfg_.input_channels < 1) throw std::invalid_argument("input_channels must be >= 1");
    if (cfg_.encoder.empty()) throw std::invalid_argument("encoder must not be empty");
    group_ = &group_of(cfg_.group);
    const int n = group_->n();

    int c_in = cfg_.input_channels;
    for (size_t i = 0; i < cfg_.encoder.size(); ++i) {
        const LayerSpec& spec = cfg_.encoder[i];
        if (spec.s % 2 == 0) throw std::invalid_argument("S must be odd");
        if (spec.n_centroids < 1) throw std::invalid_argument("n_centroids must be >= 1");
        ConvLayer layer;
        layer.spec = spec;
        layer.lifting = (i == 0);
        if (!layer.lifting && spec.offset_channels)
            throw std::invalid_argument("offset channels are only valid on the first layer");
        layer.c_in = c_in;
        const int c_in_eff = c_in + (spec.offset_channels ? 3 : 0);
        layer.stack = KernelStack::make(*group_, layer.lifting, spec.s, c_in_eff, spec.channels);
        layer.bias = Tensor::zeros({spec.channels});
        layer.bias.alloc_grad();
        enc_.push_back(std::move(layer));
        c_in = spec.channels * n;
    }

    const int levels = static_cast<int>(cfg_.encoder.size());
    if (cfg_.task == Task::segment) {
        if (cfg_.decoder.empty())
            throw std::invalid_argument("segmentation requires decoder layers");
        int prev_partner = levels;  // decoders walk strictly downward
        for (size_t jd = 0; jd < cfg_.decoder.size(); ++jd) {
            const LayerSpec& spec = cfg_.decoder[jd];
            if (spec.partner < 0 || spec.partner >= levels)
                throw std::invalid_argument("decoder without a valid encoder partner");
            if (spec.partner >= prev_partner)
                throw std::invalid_argument("decoder partners must strictly decrease");
            if (spec.offset_channels)
                throw std::invalid_argument("offset channels are only valid on the first layer");
            prev_partner = spec.partner;
            ConvLayer layer;
            layer.spec = spec;
            layer.lifting = false;
            layer.c_in = c_in;
            layer.stack = KernelStack::make(*group_, false, spec.s, c_in, spec.channels);
            layer.bias = Tensor::zeros({spec.channels});
            layer.bias.alloc_grad();
            dec_.push_back(std::move(layer));
            const int skip_w = spec.partner == 0
                                   ? cfg_.input_channels
                                   : cfg_.encoder[static_cast<size_t>(spec.partner) - 1].channels * n;
            c_in = spec.channels * n + skip_w;
        }
        if (cfg_.decoder.back().partner != 0)
            throw std::invalid_argument("last decoder must restore level 0");
    } else if (!cfg_.decoder.empty()) {
        throw std::invalid_argument("classification config cannot have decoder layers");
    }

    int head_in = c_in;
    if (cfg_.task == Task::classify && cfg_.orientation_pool == OrientPool::max)
        head_in = cfg_.encoder.back().channels;
    head_in_width_ = head_in;

    int w = head_in;
    for (size_t i = 0; i < cfg_.head.size(); ++i) {
        DenseLayer d;
        d.W = Tensor::zeros({w, cfg_.head[i]});
        d.W.alloc_grad();
        d.bias = Tensor::zeros({cfg_.head[i]});
        d.bias.alloc_grad();
        d.act = Activation::relu;
        d.dropout_after = true;
        head_.push_back(std::move(d));
        w = cfg_.head[i];
    }
    DenseLayer out;
    out.W = Tensor::zeros({w, cfg_.num_classes});
    out.W.alloc_grad();
    out.bias = Tensor::zeros({cfg_.num_classes});
    out.bias.alloc_grad();
    out.act = Activation::none;
    out.dropout_after = false;
    head_.push_back(std::move(out));
}

void Network::init_params(uint64_t seed) {
    int idx = 0;
    auto init_conv = [&](ConvLayer& l) {
        Rng rng(substream(seed, "init", static_cast<uint64_t>(idx++)));
        const int cells = l.spec.s * l.spec.s * l.spec.s;
        glorot_init(l.stack.W, l.stack.c_in_eff * cells, l.stack.c_out * cells, rng);
        std::fill(l.bias.v.begin(), l.bias.v.end(), 0.0);
    };
    for (ConvLayer& l : enc_) init_conv(l);
    for (ConvLayer& l : dec_) init_conv(l);
    for (DenseLayer& d : head_) {
        Rng rng(substream(seed, "init", static_cast<uint64_t>(idx++)));
        glorot_init(d.W, d.W.shape[0], d.W.shape[1], rng);
        std::fill(d.bias.v.begin(), d.bias.v.end(), 0.0);
    }
    refresh_stacks();
}

void Network::refresh_stacks() {
    for (ConvLayer& l : enc_) l.stack.refresh();
    for (ConvLayer& l : dec_) l.stack.refresh();
}

namespace {

VoxelizeOptions make_options(const LayerSpec& spec, int available, bool training,
                             uint64_t seed) {
    VoxelizeOptions opt;
    opt.n_centroids = std::min(spec.n_centroids, available);
    opt.k = spec.k;
    opt.d = spec.d;
    opt.s = spec.s;
    opt.pooling = spec.pooling;
    opt.cap = spec.cap;
    opt.deterministic = !training;
    opt.fps_start = 0;
    opt.seed = seed;
    opt.fixed_radius = spec.fixed_radius;
    opt.offset_channels = spec.offset_channels;
    return opt;
}

PointCloud as_cloud(const Network::Tape::State& s) {
    PointCloud pc;
    pc.positions = s.pos;
    pc.features = s.feats;
    return pc;
}

Tensor relu_of(const Tensor& pre) {
    Tensor out = pre;
    for (double& x : out.v) x = x > 0.0 ? x : 0.0;
    return out;
}

Tensor relu_mask(const Tensor& upstream, const Tensor& pre) {
    Tensor out = upstream;
    for (size_t i = 0; i < out.v.size(); ++i)
        if (pre.v[i] <= 0.0) out.v[i] = 0.0;
    return out;
}

}  // namespace

Tensor Network::forward(const PointCloud& cloud, bool training, uint64_t seed, Tape* tape) {
    cloud.validate();
    if (cloud.channels() != cfg_.input_channels)
        throw std::invalid_argument("input feature channels do not match the config");
    if (cloud.size() == 0) throw std::invalid_argument("empty input");

    Tape local;
    Tape& T = tape ? *tape : local;
    T = Tape{};
    T.training = training;
    refresh_stacks();

    Tape::State s0;
    s0.pos = cloud.positions;
    s0.feats = cloud.features;
    if (cfg_.center_clouds) {
        Vec3 mean{0, 0, 0};
        for (const Vec3& p : s0.pos) mean = mean + p;
        const double inv = 1.0 / static_cast<double>(s0.pos.size());
        mean = {mean[0] * inv, mean[1] * inv, mean[2] * inv};
        for (Vec3& p : s0.pos) p = p - mean;
    }
    T.enc_states.push_back(std::move(s0));

    for (size_t i = 0; i < enc_.size(); ++i) {
        ConvLayer& l = enc_[i];
        const Tape::State& st = T.enc_states[i];
        const PointCloud pc = as_cloud(st);
        const VoxelizeOptions opt = make_options(l.spec, pc.size(), training,
                                                 substream(seed, "enc", i));
        VoxelBatch batch = voxelize_layer(pc, opt);
        Tensor pre = dvconv_forward(batch, l.stack, l.bias);
        Tape::State ns;
        ns.pos.reserve(batch.kernels.size());
        for (const VoxelKernel& k : batch.kernels) ns.pos.push_back(k.centroid);
        ns.feats = l.spec.relu ? relu_of(pre) : pre;
        T.enc_saves.push_back({std::move(batch), std::move(pre)});
        T.enc_states.push_back(std::move(ns));
    }

    if (cfg_.task == Task::classify) {
        const Tensor& F = T.enc_states.back().feats;
        const int N = F.shape[0];
        const int C = F.shape[1];
        Tensor pooled = Tensor::zeros({1, C});
        T.gmax_arg.assign(static_cast<size_t>(C), 0);
        for (int c = 0; c < C; ++c) {
            double best = F.at(0, c);
            int arg = 0;
            for (int p = 1; p < N; ++p)
                if (F.at(p, c) > best) {
                    best = F.at(p, c);
                    arg = p;
                }
            pooled.v[static_cast<size_t>(c)] = best;
            T.gmax_arg[static_cast<size_t>(c)] = arg;
        }
        if (cfg_.orientation_pool == OrientPool::max) {
            const int n = group_->n();
            const int cb = C / n;
            Tensor op = Tensor::zeros({1, cb});
            T.opool_arg.assign(static_cast<size_t>(cb), 0);
            for (int c = 0; c < cb; ++c) {
                double best = pooled.v[static_cast<size_t>(c) * n];
                int arg = 0;
                for (int h = 1; h < n; ++h) {
                    const double v = pooled.v[static_cast<size_t>(c) * n + h];
                    if (v > best) {
                        best = v;
                        arg = h;
                    }
                }
                op.v[static_cast<size_t>(c)] = best;
                T.opool_arg[static_cast<size_t>(c)] = arg;
            }
            pooled = std::move(op);
        }
        return run_head(pooled, training, seed, &T);
    }

    // segmentation: re-voxelize coarse features at the encoder partners'
    // input coordinates, concatenating the partner features as skip links
    T.dec_states.push_back(T.enc_states.back());
    for (size_t j = 0; j < dec_.size(); ++j) {
        ConvLayer& l = dec_[j];
        const Tape::State& cur = T.dec_states[j];
        const Tape::State& partner = T.enc_states[static_cast<size_t>(l.spec.partner)];
        const PointCloud pc = as_cloud(cur);
        VoxelizeOptions opt = make_options(l.spec, pc.size(), training,
                                           substream(seed, "dec", j));
        VoxelBatch batch = voxelize_at(pc, partner.pos, opt);
        Tensor pre = dvconv_forward(batch, l.stack, l.bias);
        Tensor out = l.spec.relu ? relu_of(pre) : pre;

        const int rows = out.shape[0];
        const int cw = out.shape[1];
        const int sw = partner.feats.shape[1];
        Tensor cat = Tensor::zeros({rows, cw + sw});
        for (int r = 0; r < rows; ++r) {
            std::copy(&out.v[static_cast<size_t>(r) * cw], &out.v[static_cast<size_t>(r) * cw] + cw,
                      &cat.v[static_cast<size_t>(r) * (cw + sw)]);
            std::copy(&partner.feats.v[static_cast<size_t>(r) * sw],
                      &partner.feats.v[static_cast<size_t>(r) * sw] + sw,
                      &cat.v[static_cast<size_t>(r) * (cw + sw)] + cw);
        }
        Tape::State ns;
        ns.pos = partner.pos;
        ns.feats = std::move(cat);
        T.dec_saves.push_back({std::move(batch), std::move(pre)});
        T.dec_states.push_back(std::move(ns));
    }
    return run_head(T.dec_states.back().feats, training, seed, &T);
}

Tensor Network::forward_classify(const PointCloud& cloud, bool training, uint64_t seed,
                                 Tape* tape) {
    if (cfg_.task != Task::classify) throw std::invalid_argument("not a classification network");
    return forward(cloud, training, seed, tape);
}

Tensor Network::forward_segment(const PointCloud& cloud, bool training, uint64_t seed,
                                Tape* tape) {
    if (cfg_.task != Task::segment) throw std::invalid_argument("not a segmentation network");
    return forward(cloud, training, seed, tape);
}

Tensor Network::run_head(const Tensor& x, bool training, uint64_t seed, Tape* tape) {
    tape->head_in = x;
    Tensor cur = x;
    for (size_t j = 0; j < head_.size(); ++j) {
        DenseLayer& d = head_[j];
        tape->head_x.push_back(cur);
        Tensor pre = mlp_forward(cur, d.W, d.bias, Activation::none);
        tape->head_pre.push_back(pre);
        cur = d.act == Activation::relu ? relu_of(pre) : pre;
        if (d.dropout_after && cfg_.dropout > 0.0) {
            tape->head_drop.push_back(
                dropout(cur, cfg_.dropout, training, substream(seed, "dropout", j)));
            cur = tape->head_drop.back().y;
        } else {
            tape->head_drop.emplace_back();
        }
    }
    return cur;
}

Tensor Network::head_backward(const Tape& tape, const Tensor& grad_out) {
    Tensor cur = grad_out;
    for (size_t jj = head_.size(); jj-- > 0;) {
        DenseLayer& d = head_[jj];
        if (d.dropout_after && cfg_.dropout > 0.0)
            cur = dropout_backward(cur, tape.head_drop[jj], cfg_.dropout);
        MlpGrads mg = mlp_backward(cur, tape.head_x[jj], d.W, tape.head_pre[jj], d.act);
        for (size_t i = 0; i < d.W.grad.size(); ++i) d.W.grad[i] += mg.grad_W.v[i];
        for (size_t i = 0; i < d.bias.grad.size(); ++i) d.bias.grad[i] += mg.grad_bias.v[i];
        cur = std::move(mg.grad_x);
    }
    return cur;
}

Tensor Network::backward(const Tape& T, const Tensor& grad_logits) {
    if (T.enc_states.empty()) throw std::invalid_argument("backward without a forward tape");
    const size_t L = enc_.size();

    // per-level feature gradients, accumulated from every consumer
    std::vector<Tensor> eg(L + 1);
    for (size_t i = 0; i <= L; ++i)
        eg[i] = Tensor::zeros(T.enc_states[i].feats.shape);

    if (cfg_.task == Task::classify) {
        Tensor g_head = head_backward(T, grad_logits);  // [1, head_in]
        const Tensor& F = T.enc_states.back().feats;
        const int C = F.shape[1];
        Tensor gp = Tensor::zeros({1, C});
        if (cfg_.orientation_pool == OrientPool::max) {
            const int n = group_->n();
            const int cb = C / n;
            for (int c = 0; c < cb; ++c)
                gp.v[static_cast<size_t>(c) * n + T.opool_arg[static_cast<size_t>(c)]] =
                    g_head.v[static_cast<size_t>(c)];
        } else {
            gp = std::move(g_head);
        }
        for (int c = 0; c < C; ++c)
            eg[L].at(T.gmax_arg[static_cast<size_t>(c)], c) += gp.v[static_cast<size_t>(c)];
    } else {
        Tensor g = head_backward(T, grad_logits);  // [n0, C_cat]
        for (size_t jj = dec_.size(); jj-- > 0;) {
            ConvLayer& l = dec_[jj];
            const Tape::ConvSave& save = T.dec_saves[jj];
            const Tape::State& in_state = T.dec_states[jj];
            const int rows = g.shape[0];
            const int cw = l.spec.channels * group_->n();
            const int sw = g.shape[1] - cw;

            Tensor g_conv = Tensor::zeros({rows, cw});
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < cw; ++c) g_conv.at(r, c) = g.at(r, c);
                for (int c = 0; c < sw; ++c)
                    eg[static_cast<size_t>(l.spec.partner)].at(r, c) += g.at(r, cw + c);
            }
            if (l.spec.relu) g_conv = relu_mask(g_conv, save.preact);
            DvConvGrads dg = dvconv_backward(g_conv, save.batch, l.stack);
            for (size_t i = 0; i < l.stack.W.grad.size(); ++i)
                l.stack.W.grad[i] += dg.grad_W.v[i];
            for (size_t i = 0; i < l.bias.grad.size(); ++i) l.bias.grad[i] += dg.grad_bias.v[i];
            g = voxelize_backward(dg.grad_grids, save.batch,
                                  static_cast<int>(in_state.pos.size()), l.c_in);
        }
        for (size_t i = 0; i < eg[L].v.size(); ++i) eg[L].v[i] += g.v[i];
    }

    for (size_t ii = L; ii-- > 0;) {
        ConvLayer& l = enc_[ii];
        const Tape::ConvSave& save = T.enc_saves[ii];
        Tensor up = l.spec.relu ? relu_mask(eg[ii + 1], save.preact) : std::move(eg[ii + 1]);
        DvConvGrads dg = dvconv_backward(up, save.batch, l.stack);
        for (size_t i = 0; i < l.stack.W.grad.size(); ++i) l.stack.W.grad[i] += dg.grad_W.v[i];
        for (size_t i = 0; i < l.bias.grad.size(); ++i) l.bias.grad[i] += dg.grad_bias.v[i];
        Tensor gprev = voxelize_backward(dg.grad_grids, save.batch,
                                         static_cast<int>(T.enc_states[ii].pos.size()), l.c_in);
        for (size_t i = 0; i < eg[ii].v.size(); ++i) eg[ii].v[i] += gprev.v[i];
    }
    return std::move(eg[0]);
}

std::vector<Param> Network::parameters() {
    std::vector<Param> ps;
    for (size_t i = 0; i < enc_.size(); ++i) {
        ps.push_back({"enc" + std::to_string(i) + ".W", &enc_[i].stack.W});
        ps.push_back({"enc" + std::to_string(i) + ".b", &enc_[i].bias});
    }
    for (size_t i = 0; i < dec_.size(); ++i) {
        ps.push_back({"dec" + std::to_string(i) + ".W", &dec_[i].stack.W});
        ps.push_back({"dec" + std::to_string(i) + ".b", &dec_[i].bias});
    }
    for (size_t i = 0; i < head_.size(); ++i) {
        ps.push_back({"head" + std::to_string(i) + ".W", &head_[i].W});
        ps.push_back({"head" + std::to_string(i) + ".b", &head_[i].bias});
    }
    return ps;
}

void Network::zero_grad() {
    for (const Param& p : parameters()) p.t->zero_grad();
}

Network::Stats Network::stats(const PointCloud& sample) {
    Stats st;
    for (size_t i = 0; i < enc_.size(); ++i)
        st.conv_base_params += enc_[i].stack.W.size() + enc_[i].bias.size();
    for (size_t i = 0; i < dec_.size(); ++i)
        st.conv_base_params += dec_[i].stack.W.size() + dec_[i].bias.size();
    for (const Param& p : parameters()) st.params += p.t->size();

    Tape tape;
    forward(sample, false, 0, &tape);
    auto conv_flops = [](const ConvLayer& l, const Tape::ConvSave& save) {
        const int cells = l.spec.s * l.spec.s * l.spec.s;
        return 2ll * save.batch.size() * l.stack.n() * cells * l.stack.c_in_eff * l.stack.c_out;
    };
    for (size_t i = 0; i < enc_.size(); ++i) st.flops += conv_flops(enc_[i], tape.enc_saves[i]);
    for (size_t i = 0; i < dec_.size(); ++i) st.flops += conv_flops(dec_[i], tape.dec_saves[i]);
    int rows = tape.head_in.shape[0];
    for (const DenseLayer& d : head_) st.flops += 2ll * rows * d.W.shape[0] * d.W.shape[1];

    const auto t0 = std::chrono::steady_clock::now();
    forward(sample, false, 0);
    const auto t1 = std::chrono::steady_clock::now();
    st.forward_seconds = std::chrono::duration<double>(t1 - t0).count();
    return st;
}

namespace {

void write_u16(std::ostream& os, uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_f32(std::ostream& os, float v) {
    static_assert(sizeof(float) == 4);
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
}

uint16_t read_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    if (!is) throw std::runtime_error("unexpected end of checkpoint");
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("unexpected end of checkpoint");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

float read_f32(std::istream& is) {
    const uint32_t bits = read_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

void Network::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write("DVCK", 4);
    write_u16(os, 1);
    const std::string cfg = config_to_json(cfg_);
    write_u32(os, static_cast<uint32_t>(cfg.size()));
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

    // manifest first, data blobs after, in manifest order
    auto* self = const_cast<Network*>(this);
    std::vector<Param> ps = self->parameters();
    write_u32(os, static_cast<uint32_t>(ps.size()));
    for (const Param& p : ps) {
        write_u16(os, static_cast<uint16_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_u16(os, static_cast<uint16_t>(p.t->shape.size()));
        for (int d : p.t->shape) write_u32(os, static_cast<uint32_t>(d));
    }
    for (const Param& p : ps)
        for (double x : p.t->v) write_f32(os, static_cast<float>(x));
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Network Network::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "DVCK")
        throw std::runtime_error("not a checkpoint file: " + path);
    const uint16_t version = read_u16(is);
    if (version != 1) throw std::runtime_error("unsupported checkpoint version");
    const uint32_t cfg_len = read_u32(is);
    std::string cfg_text(cfg_len, '\0');
    is.read(cfg_text.data(), cfg_len);
    if (!is) throw std::runtime_error("unexpected end of checkpoint");

    Network net(config_from_json(cfg_text));
    std::vector<Param> ps = net.parameters();
    const uint32_t count = read_u32(is);
    if (count != ps.size()) throw std::runtime_error("checkpoint manifest mismatch");
    for (const Param& p : ps) {
        const uint16_t name_len = read_u16(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is || name != p.name) throw std::runtime_error("checkpoint manifest mismatch");
        const uint16_t ndim = read_u16(is);
        std::vector<int> shape(ndim);
        for (uint16_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(read_u32(is));
        if (shape != p.t->shape) throw std::runtime_error("checkpoint shape mismatch");
    }
    for (const Param& p : ps)
        for (double& x : p.t->v) x = static_cast<double>(read_f32(is));
    net.refresh_stacks();
    return net;
}

}  // namespace dvconv
