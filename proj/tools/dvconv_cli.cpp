// Command-line front end: synthetic data generation, training, evaluation,
// voxelization inspection, and model statistics. Outputs are files; every
// command is reproducible from --seed.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dvconv/data.hpp"
#include "dvconv/model.hpp"
#include "dvconv/train.hpp"

namespace fs = std::filesystem;
using namespace dvconv;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    return std::string((std::istreambuf_iterator<char>(is)), {});
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << v;
    return os.str();
}

PointCloud sample_cloud(int points, int channels, uint64_t seed) {
    Rng rng(seed);
    PointCloud pc;
    pc.features = Tensor::zeros({points, channels});
    for (int i = 0; i < points; ++i) {
        pc.positions.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        for (int c = 0; c < channels; ++c) pc.features.at(i, c) = rng.uniform(-1, 1);
    }
    pc.labels = {0};
    pc.label_kind = LabelKind::per_cloud;
    return pc;
}

int cmd_synth(const std::string& kind, int n, int test_n, int points, double noise,
              uint64_t seed, const std::string& out) {
    SynthKind sk;
    if (kind == "shapes3") sk = SynthKind::shapes3;
    else if (kind == "twopart") sk = SynthKind::twopart;
    else throw std::runtime_error("unknown synth kind: " + kind);
    if (test_n < 0) test_n = n / 4;
    Dataset train = synth(sk, n, points, noise, substream(seed, "train"));
    Dataset test = synth(sk, test_n, points, noise, substream(seed, "test"));
    save_dir(train, out, "train");
    save_dir(test, out, "test");
    std::cout << "wrote " << train.size() << " train / " << test.size() << " test clouds to "
              << out << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, uint64_t seed, int epochs_override,
              int batch_override) {
    NetworkConfig cfg = config_from_json(read_file(config_path));
    if (epochs_override > 0) cfg.train.epochs = epochs_override;
    if (batch_override > 0) cfg.train.batch_size = batch_override;

    Dataset train_ds = load_dir(data_dir, "train");
    Dataset test_ds = load_dir(data_dir, "test");
    fs::create_directories(out_dir);

    Network net(cfg);
    net.init_params(substream(seed, "init"));
    AdamState opt;
    opt.weight_decay = cfg.train.weight_decay;

    std::ofstream metrics(fs::path(out_dir) / "metrics.csv");
    std::ofstream curve(fs::path(out_dir) / "accuracy_curve.csv");
    metrics << "epoch,split,loss,oa,macc,miou\n";
    curve << "epoch,oa\n";

    double best_oa = -1.0;
    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        opt.lr = lr_at(epoch, cfg.train.base_lr, cfg.train.lr_factor, cfg.train.lr_period);
        const double train_loss = train_epoch(net, train_ds, cfg.train.batch_size,
                                              cfg.train.augment, seed, epoch, opt);
        Metrics m = evaluate(net, test_ds);
        metrics << epoch << ",train," << fmt(train_loss) << ",,,\n";
        metrics << epoch << ",test," << fmt(m.loss) << ',' << fmt(m.oa) << ',' << fmt(m.macc)
                << ',' << fmt(m.miou) << "\n";
        curve << epoch << ',' << fmt(m.oa) << "\n";
        std::cout << "epoch " << epoch << " lr " << opt.lr << " train_loss " << fmt(train_loss)
                  << " test_oa " << fmt(m.oa) << " test_miou " << fmt(m.miou) << "\n";
        if (m.oa > best_oa) {
            best_oa = m.oa;
            net.save((fs::path(out_dir) / "best.dvck").string());
        }
        if (cfg.train.early_stop && m.oa >= cfg.train.early_stop_oa) break;
    }
    net.save((fs::path(out_dir) / "checkpoint.dvck").string());
    std::cout << "best test OA " << fmt(best_oa) << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir,
             const std::string& split, const std::string& report) {
    Network net = Network::load(checkpoint);
    Dataset ds = load_dir(data_dir, split);
    Metrics m = evaluate(net, ds);
    std::cout << "split   " << split << "\n"
              << "count   " << m.total() << "\n"
              << "loss    " << fmt(m.loss) << "\n"
              << "OA      " << fmt(m.oa) << "\n"
              << "mAcc    " << fmt(m.macc) << "\n"
              << "mIoU    " << fmt(m.miou) << "\n";
    if (m.part_miou >= 0.0)
        std::cout << "pIoU    " << fmt(m.part_miou) << "\n"
                  << "mpIoU   " << fmt(m.mpiou) << "\n";
    if (!report.empty()) {
        std::ofstream os(report);
        os << "metric,value\n";
        os << "loss," << fmt(m.loss) << "\noa," << fmt(m.oa) << "\nmacc," << fmt(m.macc)
           << "\nmiou," << fmt(m.miou) << "\n";
        if (m.part_miou >= 0.0)
            os << "part_miou," << fmt(m.part_miou) << "\nmpiou," << fmt(m.mpiou) << "\n";
        for (size_t c = 0; c < m.iou.size(); ++c)
            os << "iou_" << c << ',' << fmt(m.iou[c]) << "\n";
    }
    return 0;
}

int cmd_inspect(const std::string& data_dir, const std::string& layer_path,
                const std::string& split, int cloud_index, const std::string& out) {
    Dataset ds = load_dir(data_dir, split);
    if (cloud_index < 0 || cloud_index >= ds.size())
        throw std::runtime_error("cloud index out of range");
    const nlohmann::json j = nlohmann::json::parse(read_file(layer_path));
    VoxelizeOptions opt;
    opt.n_centroids = j.at("n_centroids").get<int>();
    opt.k = j.value("k", 32);
    opt.d = j.value("d", 2);
    opt.s = j.value("s", 3);
    opt.cap = j.value("cap", 5);
    opt.pooling = j.value("pooling", std::string("max")) == "average" ? Pooling::average
                                                                      : Pooling::max;
    opt.fixed_radius = j.value("fixed_radius", 0.0);
    const PointCloud& pc = ds.clouds[static_cast<size_t>(cloud_index)];
    opt.n_centroids = std::min(opt.n_centroids, pc.size());
    VoxelBatch batch = voxelize_layer(pc, opt);
    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot open for writing: " + out);
    os << inspect_csv(batch);
    std::cout << "wrote " << batch.size() << " kernel records to " << out << "\n";
    return 0;
}

int cmd_stats(const std::string& config_path, int points, uint64_t seed) {
    NetworkConfig cfg = config_from_json(read_file(config_path));
    Network net(cfg);
    net.init_params(substream(seed, "init"));
    PointCloud pc = sample_cloud(points, cfg.input_channels, substream(seed, "sample"));
    if (cfg.task == Task::segment) {
        pc.label_kind = LabelKind::per_point;
        pc.labels.assign(static_cast<size_t>(points), 0);
    }
    Network::Stats st = net.stats(pc);
    std::cout << "params            " << st.params << "\n"
              << "conv_base_params  " << st.conv_base_params << "\n"
              << "flops             " << st.flops << "\n"
              << "forward_seconds   " << st.forward_seconds << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic voxelization + group convolution point cloud engine"};
    app.require_subcommand(1);

    int threads = 1;
    app.add_option("--threads", threads, "worker cap (pipelines currently run serially)")
        ->check(CLI::PositiveNumber);

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_kind = "shapes3", synth_out;
    int synth_n = 200, synth_test_n = -1, synth_points = 256;
    double synth_noise = 0.02;
    uint64_t synth_seed = 0;
    synth_cmd->add_option("--kind", synth_kind, "shapes3 | twopart");
    synth_cmd->add_option("--n", synth_n, "training clouds");
    synth_cmd->add_option("--test-n", synth_test_n, "test clouds (default n/4)");
    synth_cmd->add_option("--points", synth_points, "points per cloud");
    synth_cmd->add_option("--noise", synth_noise, "surface noise sigma");
    synth_cmd->add_option("--seed", synth_seed, "random seed");
    synth_cmd->add_option("--out", synth_out, "output dataset directory")->required();

    auto* train_cmd = app.add_subcommand("train", "train a network");
    std::string train_config, train_data, train_out;
    uint64_t train_seed = 0;
    int train_epochs = -1, train_batch = -1;
    train_cmd->add_option("--config", train_config, "network config json")->required();
    train_cmd->add_option("--data", train_data, "dataset directory")->required();
    train_cmd->add_option("--out", train_out, "output directory")->required();
    train_cmd->add_option("--seed", train_seed, "random seed");
    train_cmd->add_option("--epochs", train_epochs, "override config epochs");
    train_cmd->add_option("--batch", train_batch, "override config batch size");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string eval_ckpt, eval_data, eval_split = "test", eval_report;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
    eval_cmd->add_option("--split", eval_split, "dataset split");
    eval_cmd->add_option("--report", eval_report, "write a metrics csv");

    auto* insp_cmd = app.add_subcommand("inspect", "dump per-kernel voxelization statistics");
    std::string insp_data, insp_layer, insp_split = "train", insp_out;
    int insp_cloud = 0;
    insp_cmd->add_option("--data", insp_data, "dataset directory")->required();
    insp_cmd->add_option("--layer", insp_layer, "layer spec json")->required();
    insp_cmd->add_option("--split", insp_split, "dataset split");
    insp_cmd->add_option("--cloud", insp_cloud, "cloud index");
    insp_cmd->add_option("--out", insp_out, "output csv")->required();

    auto* stats_cmd = app.add_subcommand("stats", "parameter and flop counts");
    std::string stats_config;
    int stats_points = 1024;
    uint64_t stats_seed = 0;
    stats_cmd->add_option("--config", stats_config, "network config json")->required();
    stats_cmd->add_option("--points", stats_points, "sample cloud size");
    stats_cmd->add_option("--seed", stats_seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help() << "\n";
        return 2;
    }

    try {
        if (*synth_cmd)
            return cmd_synth(synth_kind, synth_n, synth_test_n, synth_points, synth_noise,
                             synth_seed, synth_out);
        if (*train_cmd)
            return cmd_train(train_config, train_data, train_out, train_seed, train_epochs,
                             train_batch);
        if (*eval_cmd) return cmd_eval(eval_ckpt, eval_data, eval_split, eval_report);
        if (*insp_cmd) return cmd_inspect(insp_data, insp_layer, insp_split, insp_cloud, insp_out);
        if (*stats_cmd) return cmd_stats(stats_config, stats_points, stats_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
