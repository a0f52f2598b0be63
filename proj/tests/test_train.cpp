#include "doctest.h"

#include <cmath>

#include "dvconv/train.hpp"
#include "helpers.hpp"
#include "netconfigs.hpp"

using namespace dvconv;

TEST_SUITE_BEGIN("train");

TEST_CASE("learning rate schedule") {
    CHECK(lr_at(0) == doctest::Approx(0.001));
    CHECK(lr_at(9) == doctest::Approx(0.001));
    CHECK(lr_at(10) == doctest::Approx(0.0008));
    CHECK(lr_at(25) == doctest::Approx(0.00064));
    // non-increasing, piecewise constant with period 10
    double prev = lr_at(0);
    for (int e = 1; e < 100; ++e) {
        const double cur = lr_at(e);
        CHECK(cur <= prev);
        if (e % 10 != 0) CHECK(cur == lr_at(e - 1));
        prev = cur;
    }
    CHECK_THROWS_AS(lr_at(-1), std::invalid_argument);
}

namespace {

std::vector<Param> single_param(Tensor& t) {
    t.zero_grad();
    return {{"x", &t}};
}

}  // namespace

TEST_CASE("adam leaves parameters alone when gradients and decay vanish") {
    Tensor t = Tensor::zeros({3});
    t.v = {1.0, -2.0, 0.5};
    auto params = single_param(t);
    AdamState st;
    st.weight_decay = 0.0;
    adam_step(params, st);
    CHECK(t.v == std::vector<double>({1.0, -2.0, 0.5}));
}

TEST_CASE("first adam step moves by about the learning rate") {
    Tensor t = Tensor::zeros({1});
    t.v = {0.0};
    auto params = single_param(t);
    t.grad = {1.0};
    AdamState st;
    st.lr = 0.001;
    st.weight_decay = 0.0;
    adam_step(params, st);
    CHECK(t.v[0] == doctest::Approx(-0.001).epsilon(1e-6));
}

TEST_CASE("adam matches an independent run of the recurrence on a bowl") {
    Tensor t = Tensor::zeros({1});
    t.v = {2.0};
    auto params = single_param(t);
    AdamState st;
    st.lr = 0.15;
    st.weight_decay = 0.0;

    // reference recurrence, maintained separately
    double x = 2.0, m = 0.0, v = 0.0;
    for (int step = 1; step <= 100; ++step) {
        const double g = t.v[0] - 3.0;
        t.grad = {g};
        adam_step(params, st);

        const double gr = x - 3.0;
        m = 0.9 * m + 0.1 * gr;
        v = 0.999 * v + 0.001 * gr * gr;
        const double mh = m / (1.0 - std::pow(0.9, step));
        const double vh = v / (1.0 - std::pow(0.999, step));
        x -= 0.15 * mh / (std::sqrt(vh) + 1e-8);
        CHECK(t.v[0] == doctest::Approx(x).epsilon(1e-12));
    }
    CHECK(std::abs(t.v[0] - 3.0) < 1e-3);
}

namespace {

Dataset shapes_ds(int n, int points, uint64_t seed) {
    return synth(SynthKind::shapes3, n, points, 0.02, seed);
}

Network tiny_net() {
    const std::string cfg = R"({"task":"classify","group":"p4","num_classes":3,
      "input_channels":3,"dropout":0.5,"head":[16],
      "encoder":[{"n_centroids":24,"k":8,"d":2,"channels":4},
                 {"n_centroids":6,"k":6,"d":2,"channels":8}],
      "train":{"batch_size":8}})";
    return Network{config_from_json(cfg)};
}

}  // namespace

TEST_CASE("loss decreases over a few epochs on the synthetic classes") {
    Dataset ds = shapes_ds(36, 64, 1000);
    Network net = tiny_net();
    net.init_params(1);
    AdamState opt;
    std::vector<double> losses;
    for (int e = 0; e < 5; ++e) {
        opt.lr = lr_at(e);
        losses.push_back(train_epoch(net, ds, 8, true, 7, e, opt));
    }
    CHECK(losses.back() < losses.front());
}

TEST_CASE("training is reproducible from the seed") {
    Dataset ds = shapes_ds(24, 48, 1001);
    Network a = tiny_net(), b = tiny_net();
    a.init_params(2);
    b.init_params(2);
    AdamState oa, ob;
    for (int e = 0; e < 2; ++e) {
        const double la = train_epoch(a, ds, 8, true, 5, e, oa);
        const double lb = train_epoch(b, ds, 8, true, 5, e, ob);
        CHECK(la == lb);
    }
    auto pa = a.parameters(), pb = b.parameters();
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].t->v == pb[i].t->v);
}

TEST_CASE("oversized batches collapse to one batch with a warning") {
    Dataset ds = shapes_ds(6, 32, 1002);
    Network net = tiny_net();
    net.init_params(3);
    AdamState opt;
    const double loss = train_epoch(net, ds, 100, false, 1, 0, opt);
    CHECK(std::isfinite(loss));
    CHECK(opt.step == 1);  // a single optimizer step ran

    Dataset empty;
    CHECK_THROWS_WITH_AS(train_epoch(net, empty, 8, false, 1, 0, opt), "empty dataset",
                         std::invalid_argument);
}

TEST_CASE("weight decay strictly shrinks the parameter norm") {
    Dataset ds = shapes_ds(24, 48, 1003);
    Network a = tiny_net(), b = tiny_net();
    a.init_params(4);
    b.init_params(4);
    AdamState oa, ob;
    oa.weight_decay = 0.0;
    ob.weight_decay = 1e-5;
    for (int e = 0; e < 3; ++e) {
        train_epoch(a, ds, 8, false, 9, e, oa);
        train_epoch(b, ds, 8, false, 9, e, ob);
    }
    auto norm = [](Network& n) {
        double s = 0;
        for (const Param& p : n.parameters())
            for (double v : p.t->v) s += v * v;
        return std::sqrt(s);
    };
    CHECK(norm(b) < norm(a));
}

TEST_CASE("metric derivations from hand confusion matrices") {
    // perfect predictor
    Metrics m;
    m.classes = 3;
    m.confusion = {5, 0, 0, 0, 4, 0, 0, 0, 7};
    m.finalize();
    CHECK(m.oa == 1.0);
    CHECK(m.macc == 1.0);
    CHECK(m.miou == 1.0);

    // constant predictor on a balanced 2-class set
    Metrics c;
    c.classes = 2;
    c.confusion = {10, 0, 10, 0};
    c.finalize();
    CHECK(c.oa == doctest::Approx(0.5));
    CHECK(c.miou == doctest::Approx(0.25));
    CHECK(c.macc == doctest::Approx(0.5));
    CHECK(c.total() == 20);
}

TEST_CASE("evaluate is pure and counts only unmasked points") {
    Dataset ds = synth(SynthKind::twopart, 8, 48, 0.01, 1004);
    // mask a few points per cloud
    for (PointCloud& pc : ds.clouds) {
        pc.valid_mask.assign(static_cast<size_t>(pc.size()), 1);
        pc.valid_mask[0] = 0;
        pc.valid_mask[1] = 0;
    }
    Network net{config_from_json(testutil::desk_segmenter("p4"))};
    net.init_params(5);
    Metrics a = evaluate(net, ds);
    Metrics b = evaluate(net, ds);
    CHECK(a.confusion == b.confusion);
    CHECK(a.oa == b.oa);
    CHECK(a.loss == b.loss);
    int64_t unmasked = 0;
    for (const PointCloud& pc : ds.clouds) unmasked += pc.size() - 2;
    CHECK(a.total() == unmasked);
    CHECK(a.part_miou >= 0.0);
    CHECK(a.mpiou >= 0.0);
}

TEST_CASE("part-averaged IoU aggregates shapes then categories") {
    // a zero-initialized head predicts class 0 everywhere, which makes the
    // expected part IoUs computable by hand
    const std::string cfg = R"({"task":"segment","group":"trivial","num_classes":2,
      "input_channels":1,"center_clouds":false,"dropout":0.0,"head":[],
      "encoder":[{"n_centroids":4,"k":2,"d":1,"channels":2}],
      "decoder":[{"partner":0,"k":2,"d":1,"channels":2}]})";
    Network net{config_from_json(cfg)};  // params stay zero

    Dataset ds;
    ds.part_groups = {{0, 1}, {0, 1}};
    ds.category_names = {"a", "b"};
    auto mk = [](std::vector<int32_t> labels) {
        PointCloud pc;
        const int n = static_cast<int>(labels.size());
        pc.features = Tensor::zeros({n, 1});
        Rng rng(77);
        for (int i = 0; i < n; ++i) {
            pc.positions.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
            pc.features.at(i, 0) = 1.0;
        }
        pc.labels = std::move(labels);
        pc.label_kind = LabelKind::per_point;
        return pc;
    };
    // category 0: one shape half 0 half 1 -> IoU0 = 0.5, IoU1 = 0 -> 0.25
    ds.clouds.push_back(mk({0, 0, 1, 1}));
    ds.categories.push_back(0);
    // category 1: all part 0 -> part 1 absent from truth and prediction -> 1.0
    ds.clouds.push_back(mk({0, 0, 0, 0}));
    ds.categories.push_back(1);

    Metrics m = evaluate(net, ds);
    CHECK(m.part_miou == doctest::Approx((0.25 + 1.0) / 2));
    CHECK(m.per_cat_piou[0] == doctest::Approx(0.25));
    CHECK(m.per_cat_piou[1] == doctest::Approx(1.0));
    CHECK(m.mpiou == doctest::Approx((0.25 + 1.0) / 2));
}

TEST_SUITE_END();
