// Python bindings for the core operations: spatial sampling, dynamic
// voxelization with gradient routing, the symmetry groups, and whole
// networks driven from JSON configs.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dvconv/data.hpp"
#include "dvconv/model.hpp"
#include "dvconv/train.hpp"

namespace py = pybind11;
using namespace dvconv;

namespace {

std::vector<Vec3> positions_from(const py::array_t<double>& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 2 || buf.shape[1] != 3)
        throw std::invalid_argument("positions must be (N, 3) float64");
    const double* p = static_cast<const double*>(buf.ptr);
    std::vector<Vec3> out(static_cast<size_t>(buf.shape[0]));
    for (ssize_t i = 0; i < buf.shape[0]; ++i)
        out[static_cast<size_t>(i)] = {p[3 * i], p[3 * i + 1], p[3 * i + 2]};
    return out;
}

Tensor features_from(const py::array_t<double>& arr, size_t n_points) {
    const auto buf = arr.request();
    if (buf.ndim != 2 || static_cast<size_t>(buf.shape[0]) != n_points)
        throw std::invalid_argument("features must be (N, C) float64");
    Tensor t = Tensor::zeros({static_cast<int>(buf.shape[0]), static_cast<int>(buf.shape[1])});
    const double* p = static_cast<const double*>(buf.ptr);
    std::copy(p, p + t.size(), t.v.begin());
    return t;
}

PointCloud cloud_from(const py::array_t<double>& positions, const py::array_t<double>& features) {
    PointCloud pc;
    pc.positions = positions_from(positions);
    pc.features = features_from(features, pc.positions.size());
    return pc;
}

py::array_t<double> tensor_to_numpy(const Tensor& t) {
    std::vector<ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<double> out(shape);
    std::copy(t.v.begin(), t.v.end(), static_cast<double*>(out.request().ptr));
    return out;
}

Tensor tensor_from_numpy(const py::array_t<double>& arr) {
    const auto buf = arr.request();
    std::vector<int> shape(buf.shape.begin(), buf.shape.end());
    Tensor t = Tensor::zeros(shape);
    const double* p = static_cast<const double*>(buf.ptr);
    std::copy(p, p + t.size(), t.v.begin());
    return t;
}

struct PyVoxelBatch {
    VoxelBatch batch;
    int cloud_size = 0;
    int c_in = 0;

    py::array_t<double> grids() const {
        const int cells = batch.cells();
        Tensor t = Tensor::zeros({batch.size(), cells, batch.C});
        for (int p = 0; p < batch.size(); ++p)
            std::copy(batch.kernels[static_cast<size_t>(p)].grid.begin(),
                      batch.kernels[static_cast<size_t>(p)].grid.end(),
                      t.v.begin() + static_cast<size_t>(p) * cells * batch.C);
        return tensor_to_numpy(t);
    }
    py::array_t<double> radii() const {
        py::array_t<double> out(batch.size());
        double* p = static_cast<double*>(out.request().ptr);
        for (int i = 0; i < batch.size(); ++i) p[i] = batch.kernels[static_cast<size_t>(i)].radius;
        return out;
    }
    py::array_t<int32_t> centroid_indices() const {
        py::array_t<int32_t> out(batch.size());
        int32_t* p = static_cast<int32_t*>(out.request().ptr);
        for (int i = 0; i < batch.size(); ++i)
            p[i] = batch.kernels[static_cast<size_t>(i)].centroid_index;
        return out;
    }
    py::array_t<int32_t> contributors() const {
        const int cells = batch.cells();
        py::array_t<int32_t> out({batch.size(), cells, batch.C});
        int32_t* p = static_cast<int32_t*>(out.request().ptr);
        for (int i = 0; i < batch.size(); ++i) {
            const VoxelKernel& k = batch.kernels[static_cast<size_t>(i)];
            if (batch.pooling == Pooling::max)
                std::copy(k.max_contrib.begin(), k.max_contrib.end(),
                          p + static_cast<size_t>(i) * cells * batch.C);
            else
                std::fill(p + static_cast<size_t>(i) * cells * batch.C,
                          p + static_cast<size_t>(i + 1) * cells * batch.C, -1);
        }
        return out;
    }
    py::array_t<double> backward(const py::array_t<double>& grad_grids) const {
        return tensor_to_numpy(voxelize_backward(tensor_from_numpy(grad_grids), batch,
                                                 cloud_size, c_in));
    }
};

struct PyNetwork {
    Network net;
    explicit PyNetwork(const std::string& config_json) : net(config_from_json(config_json)) {}
    explicit PyNetwork(Network n) : net(std::move(n)) {}
};

struct PyDataset {
    Dataset ds;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "point-cloud engine: dynamic voxelization + p4/p4m group convolution";

    m.def(
        "farthest_point_sample",
        [](const py::array_t<double>& positions, int n_centroids, int start) {
            PointCloud pc;
            pc.positions = positions_from(positions);
            const std::vector<int32_t> idx = farthest_point_sample(pc, n_centroids, start);
            py::array_t<int32_t> out(static_cast<ssize_t>(idx.size()));
            std::copy(idx.begin(), idx.end(), static_cast<int32_t*>(out.request().ptr));
            return out;
        },
        py::arg("positions"), py::arg("n_centroids"), py::arg("start") = 0);

    m.def(
        "knn_search",
        [](const py::array_t<double>& positions, int centroid_index, int k) {
            PointCloud pc;
            pc.positions = positions_from(positions);
            NeighborSet nb = knn_search(pc, centroid_index, k);
            return py::make_tuple(nb.indices, nb.distances, nb.short_);
        },
        py::arg("positions"), py::arg("centroid_index"), py::arg("k"));

    m.def(
        "voxelize",
        [](const py::array_t<double>& positions, const py::array_t<double>& features,
           int n_centroids, int k, int d, int s, const std::string& pooling, int cap,
           bool deterministic, uint64_t seed, double fixed_radius) {
            PointCloud pc = cloud_from(positions, features);
            VoxelizeOptions opt;
            opt.n_centroids = n_centroids;
            opt.k = k;
            opt.d = d;
            opt.s = s;
            opt.pooling = pooling == "average" ? Pooling::average : Pooling::max;
            opt.cap = cap;
            opt.deterministic = deterministic;
            opt.seed = seed;
            opt.fixed_radius = fixed_radius;
            PyVoxelBatch out;
            out.batch = voxelize_layer(pc, opt);
            out.cloud_size = pc.size();
            out.c_in = pc.channels();
            return out;
        },
        py::arg("positions"), py::arg("features"), py::arg("n_centroids"), py::arg("k") = 32,
        py::arg("d") = 2, py::arg("s") = 3, py::arg("pooling") = "max", py::arg("cap") = 5,
        py::arg("deterministic") = true, py::arg("seed") = 0, py::arg("fixed_radius") = 0.0);

    py::class_<PyVoxelBatch>(m, "VoxelBatch")
        .def_property_readonly("n", [](const PyVoxelBatch& b) { return b.batch.size(); })
        .def("grids", &PyVoxelBatch::grids)
        .def("radii", &PyVoxelBatch::radii)
        .def("centroid_indices", &PyVoxelBatch::centroid_indices)
        .def("contributors", &PyVoxelBatch::contributors)
        .def("backward", &PyVoxelBatch::backward, py::arg("grad_grids"));

    m.def(
        "group_table",
        [](const std::string& kind) {
            GroupKind gk;
            if (kind == "p4") gk = GroupKind::p4;
            else if (kind == "p4m") gk = GroupKind::p4m;
            else if (kind == "trivial") gk = GroupKind::trivial;
            else throw std::invalid_argument("unknown group: " + kind);
            const Group& g = group_of(gk);
            py::dict out;
            out["n"] = g.n();
            out["cayley"] = g.cayley;
            out["inverse"] = g.inverse;
            std::vector<std::pair<int, int>> elems;
            for (const GroupElement& e : g.elements) elems.push_back({e.r, e.m});
            out["elements"] = elems;
            return out;
        },
        py::arg("kind"));

    m.def(
        "transform_kernel",
        [](const py::array_t<double>& W, const std::string& kind, int g, bool lifting) {
            GroupKind gk = kind == "p4m" ? GroupKind::p4m
                                         : (kind == "p4" ? GroupKind::p4 : GroupKind::trivial);
            return tensor_to_numpy(transform_kernel(tensor_from_numpy(W), group_of(gk), g, lifting));
        },
        py::arg("W"), py::arg("kind"), py::arg("g"), py::arg("lifting") = true);

    py::class_<PyDataset>(m, "Dataset")
        .def_static(
            "synth",
            [](const std::string& kind, int n, int points, double noise, uint64_t seed) {
                PyDataset d;
                d.ds = synth(kind == "twopart" ? SynthKind::twopart : SynthKind::shapes3, n,
                             points, noise, seed);
                return d;
            },
            py::arg("kind"), py::arg("n"), py::arg("points"), py::arg("noise") = 0.02,
            py::arg("seed") = 0)
        .def_static(
            "load",
            [](const std::string& root, const std::string& split) {
                PyDataset d;
                d.ds = load_dir(root, split);
                return d;
            },
            py::arg("root"), py::arg("split"))
        .def("save", [](const PyDataset& d, const std::string& root,
                        const std::string& split) { save_dir(d.ds, root, split); })
        .def("__len__", [](const PyDataset& d) { return d.ds.size(); })
        .def("positions",
             [](const PyDataset& d, int i) {
                 const PointCloud& pc = d.ds.clouds.at(static_cast<size_t>(i));
                 py::array_t<double> out({pc.size(), 3});
                 double* p = static_cast<double*>(out.request().ptr);
                 for (int j = 0; j < pc.size(); ++j)
                     for (int a = 0; a < 3; ++a)
                         p[3 * j + a] = pc.positions[static_cast<size_t>(j)][static_cast<size_t>(a)];
                 return out;
             })
        .def("features",
             [](const PyDataset& d, int i) {
                 return tensor_to_numpy(d.ds.clouds.at(static_cast<size_t>(i)).features);
             })
        .def("labels", [](const PyDataset& d, int i) {
            return d.ds.clouds.at(static_cast<size_t>(i)).labels;
        });

    py::class_<PyNetwork>(m, "Network")
        .def(py::init<const std::string&>(), py::arg("config_json"))
        .def("init", [](PyNetwork& n, uint64_t seed) { n.net.init_params(seed); },
             py::arg("seed") = 0)
        .def(
            "forward_classify",
            [](PyNetwork& n, const py::array_t<double>& positions,
               const py::array_t<double>& features, bool training, uint64_t seed) {
                PointCloud pc = cloud_from(positions, features);
                return tensor_to_numpy(n.net.forward_classify(pc, training, seed));
            },
            py::arg("positions"), py::arg("features"), py::arg("training") = false,
            py::arg("seed") = 0)
        .def(
            "forward_segment",
            [](PyNetwork& n, const py::array_t<double>& positions,
               const py::array_t<double>& features, bool training, uint64_t seed) {
                PointCloud pc = cloud_from(positions, features);
                return tensor_to_numpy(n.net.forward_segment(pc, training, seed));
            },
            py::arg("positions"), py::arg("features"), py::arg("training") = false,
            py::arg("seed") = 0)
        .def("save", [](const PyNetwork& n, const std::string& path) { n.net.save(path); })
        .def_static("load",
                    [](const std::string& path) { return PyNetwork(Network::load(path)); })
        .def("stats", [](PyNetwork& n, int points, uint64_t seed) {
            Rng rng(seed);
            PointCloud pc;
            const int C = n.net.config().input_channels;
            pc.features = Tensor::zeros({points, C});
            for (int i = 0; i < points; ++i) {
                pc.positions.push_back(
                    {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
                for (int c = 0; c < C; ++c) pc.features.at(i, c) = rng.uniform(-1, 1);
            }
            if (n.net.config().task == Task::segment) {
                pc.label_kind = LabelKind::per_point;
                pc.labels.assign(static_cast<size_t>(points), 0);
            } else {
                pc.label_kind = LabelKind::per_cloud;
                pc.labels = {0};
            }
            Network::Stats st = n.net.stats(pc);
            py::dict out;
            out["params"] = st.params;
            out["conv_base_params"] = st.conv_base_params;
            out["flops"] = st.flops;
            out["forward_seconds"] = st.forward_seconds;
            return out;
        }, py::arg("points") = 1024, py::arg("seed") = 0);

    m.def(
        "train_epochs",
        [](PyNetwork& n, const PyDataset& d, int epochs, int batch_size, bool augment,
           uint64_t seed) {
            AdamState opt;
            opt.weight_decay = n.net.config().train.weight_decay;
            const TrainSettings& ts = n.net.config().train;
            std::vector<double> losses;
            for (int e = 0; e < epochs; ++e) {
                opt.lr = lr_at(e, ts.base_lr, ts.lr_factor, ts.lr_period);
                losses.push_back(train_epoch(
                    n.net, d.ds, batch_size > 0 ? batch_size : ts.batch_size, augment, seed, e,
                    opt));
            }
            return losses;
        },
        py::arg("net"), py::arg("dataset"), py::arg("epochs"), py::arg("batch_size") = -1,
        py::arg("augment") = true, py::arg("seed") = 0);

    m.def(
        "evaluate",
        [](PyNetwork& n, const PyDataset& d) {
            Metrics mt = evaluate(n.net, d.ds);
            py::dict out;
            out["loss"] = mt.loss;
            out["oa"] = mt.oa;
            out["macc"] = mt.macc;
            out["miou"] = mt.miou;
            out["iou"] = mt.iou;
            if (mt.part_miou >= 0.0) {
                out["part_miou"] = mt.part_miou;
                out["mpiou"] = mt.mpiou;
            }
            return out;
        },
        py::arg("net"), py::arg("dataset"));
}
