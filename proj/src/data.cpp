#include "dvconv/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dvconv {

namespace fs = std::filesystem;
using nlohmann::json;

int infer_num_classes(const Dataset& data) {
    int32_t mx = -1;
    for (const PointCloud& pc : data.clouds)
        for (int32_t l : pc.labels) mx = std::max(mx, l);
    return static_cast<int>(mx + 1);
}

namespace {

struct ColumnLayout {
    bool normals = false;
    bool rgb = false;
    bool label = false;
    int width() const { return 3 + (normals ? 3 : 0) + (rgb ? 3 : 0) + (label ? 1 : 0); }
    int channels() const { return (normals ? 3 : 0) + (rgb ? 3 : 0); }
};

ColumnLayout parse_cols(const std::string& spec) {
    std::istringstream is(spec);
    std::string tok;
    ColumnLayout lay;
    bool xyz = false;
    while (is >> tok) {
        if (tok == "xyz") xyz = true;
        else if (tok == "normals") lay.normals = true;
        else if (tok == "rgb") lay.rgb = true;
        else if (tok == "label") lay.label = true;
        else throw std::invalid_argument("unknown column token: " + tok);
    }
    if (!xyz) throw std::invalid_argument("column layout must include xyz");
    return lay;
}

}  // namespace

PointCloud load_xyz(const std::string& path, double rgb_scale) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string header;
    if (!std::getline(is, header)) throw std::runtime_error(path + ": empty file");
    const std::string prefix = "# cols:";
    if (header.rfind(prefix, 0) != 0)
        throw std::runtime_error(path + ": missing '# cols:' header line");
    const ColumnLayout lay = parse_cols(header.substr(prefix.size()));

    PointCloud pc;
    std::vector<double> feats;
    std::string line;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::vector<double> vals;
        double x;
        while (ls >> x) vals.push_back(x);
        if (static_cast<int>(vals.size()) != lay.width())
            throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(lay.width()) + " columns, got " +
                                     std::to_string(vals.size()));
        for (double v : vals)
            if (!std::isfinite(v))
                throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                         ": non-finite value");
        size_t at = 0;
        pc.positions.push_back({vals[at], vals[at + 1], vals[at + 2]});
        at += 3;
        if (lay.normals) {
            feats.insert(feats.end(), {vals[at], vals[at + 1], vals[at + 2]});
            at += 3;
        }
        if (lay.rgb) {
            feats.insert(feats.end(),
                         {vals[at] * rgb_scale, vals[at + 1] * rgb_scale, vals[at + 2] * rgb_scale});
            at += 3;
        }
        if (lay.label) {
            const double lv = vals[at];
            if (lv < 0 || lv != std::floor(lv))
                throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                         ": label must be a non-negative integer");
            pc.labels.push_back(static_cast<int32_t>(lv));
        }
    }
    const int n = pc.size();
    const int C = lay.channels();
    pc.features = Tensor::zeros({n, C});
    std::copy(feats.begin(), feats.end(), pc.features.v.begin());
    if (lay.label) pc.label_kind = LabelKind::per_point;
    pc.validate();
    return pc;
}

void save_xyz(const PointCloud& cloud, const std::string& path, const std::string& cols,
              double rgb_scale) {
    const ColumnLayout lay = parse_cols(cols);
    if (lay.channels() != cloud.channels())
        throw std::invalid_argument("column layout does not match cloud channels");
    if (lay.label && cloud.label_kind != LabelKind::per_point)
        throw std::invalid_argument("column layout declares labels the cloud does not have");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "# cols:" << (cols.empty() || cols[0] == ' ' ? "" : " ") << cols << "\n";
    os.precision(17);
    for (int i = 0; i < cloud.size(); ++i) {
        os << cloud.positions[static_cast<size_t>(i)][0] << ' '
           << cloud.positions[static_cast<size_t>(i)][1] << ' '
           << cloud.positions[static_cast<size_t>(i)][2];
        int ch = 0;
        if (lay.normals) {
            for (int c = 0; c < 3; ++c) os << ' ' << cloud.features.at(i, ch + c);
            ch += 3;
        }
        if (lay.rgb) {
            for (int c = 0; c < 3; ++c) os << ' ' << cloud.features.at(i, ch + c) / rgb_scale;
            ch += 3;
        }
        if (lay.label) os << ' ' << cloud.labels[static_cast<size_t>(i)];
        os << "\n";
    }
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
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
}
uint16_t read_u16(std::istream& is, const std::string& path) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    if (!is) throw std::runtime_error(path + ": unexpected end");
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}
uint32_t read_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error(path + ": unexpected end");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}
float read_f32(std::istream& is, const std::string& path) {
    const uint32_t bits = read_u32(is, path);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

constexpr uint8_t kFlagPointLabels = 1;
constexpr uint8_t kFlagCloudLabel = 2;
constexpr uint8_t kFlagMask = 4;
constexpr uint8_t kFlagCategory = 8;

}  // namespace

void save_bin(const Dataset& data, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write("DVPC", 4);
    write_u16(os, 1);
    write_u32(os, static_cast<uint32_t>(data.clouds.size()));
    for (size_t ci = 0; ci < data.clouds.size(); ++ci) {
        const PointCloud& pc = data.clouds[ci];
        pc.validate();
        write_u32(os, static_cast<uint32_t>(pc.size()));
        write_u16(os, static_cast<uint16_t>(pc.channels()));
        uint8_t flags = 0;
        if (pc.label_kind == LabelKind::per_point) flags |= kFlagPointLabels;
        if (pc.label_kind == LabelKind::per_cloud) flags |= kFlagCloudLabel;
        if (!pc.valid_mask.empty()) flags |= kFlagMask;
        const int32_t cat =
            ci < data.categories.size() ? data.categories[ci] : -1;
        if (cat >= 0) flags |= kFlagCategory;
        os.write(reinterpret_cast<const char*>(&flags), 1);
        for (const Vec3& p : pc.positions)
            for (double c : p) write_f32(os, static_cast<float>(c));
        for (double f : pc.features.v) write_f32(os, static_cast<float>(f));
        if (pc.label_kind == LabelKind::per_cloud)
            write_u16(os, static_cast<uint16_t>(pc.labels[0]));
        if (pc.label_kind == LabelKind::per_point)
            for (int32_t l : pc.labels) write_u16(os, static_cast<uint16_t>(l));
        if (!pc.valid_mask.empty())
            os.write(reinterpret_cast<const char*>(pc.valid_mask.data()),
                     static_cast<std::streamsize>(pc.valid_mask.size()));
        if (cat >= 0) write_u16(os, static_cast<uint16_t>(cat));
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

Dataset load_bin(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "DVPC")
        throw std::runtime_error(path + ": not a DVPC file");
    const uint16_t version = read_u16(is, path);
    if (version != 1) throw std::runtime_error(path + ": unsupported version");
    const uint32_t n_clouds = read_u32(is, path);

    Dataset ds;
    ds.clouds.reserve(n_clouds);
    for (uint32_t ci = 0; ci < n_clouds; ++ci) {
        PointCloud pc;
        const uint32_t n = read_u32(is, path);
        const uint16_t C = read_u16(is, path);
        uint8_t flags = 0;
        is.read(reinterpret_cast<char*>(&flags), 1);
        if (!is) throw std::runtime_error(path + ": unexpected end");
        pc.positions.resize(n);
        for (uint32_t i = 0; i < n; ++i)
            for (int a = 0; a < 3; ++a)
                pc.positions[i][static_cast<size_t>(a)] = read_f32(is, path);
        pc.features = Tensor::zeros({static_cast<int>(n), static_cast<int>(C)});
        for (double& f : pc.features.v) f = read_f32(is, path);
        if (flags & kFlagCloudLabel) {
            pc.label_kind = LabelKind::per_cloud;
            pc.labels = {static_cast<int32_t>(read_u16(is, path))};
        }
        if (flags & kFlagPointLabels) {
            pc.label_kind = LabelKind::per_point;
            pc.labels.resize(n);
            for (uint32_t i = 0; i < n; ++i)
                pc.labels[i] = static_cast<int32_t>(read_u16(is, path));
        }
        if (flags & kFlagMask) {
            pc.valid_mask.resize(n);
            is.read(reinterpret_cast<char*>(pc.valid_mask.data()), n);
            if (!is) throw std::runtime_error(path + ": unexpected end");
        }
        int32_t cat = -1;
        if (flags & kFlagCategory) cat = static_cast<int32_t>(read_u16(is, path));
        ds.categories.push_back(cat);
        ds.clouds.push_back(std::move(pc));
    }
    return ds;
}

void save_dir(const Dataset& data, const std::string& root, const std::string& split) {
    fs::create_directories(fs::path(root) / split);
    save_bin(data, (fs::path(root) / split / "data.dvpc").string());
    json meta;
    if (!data.class_names.empty()) meta["classes"] = data.class_names;
    if (!data.category_names.empty()) meta["categories"] = data.category_names;
    if (!data.part_groups.empty()) meta["part_groups"] = data.part_groups;
    if (!meta.empty()) {
        std::ofstream os(fs::path(root) / "meta.json");
        os << meta.dump(2) << "\n";
    }
}

Dataset load_dir(const std::string& root, const std::string& split) {
    const fs::path dir = fs::path(root) / split;
    if (!fs::is_directory(dir)) throw std::runtime_error("no such split directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".dvpc") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no .dvpc files in " + dir.string());

    Dataset ds;
    for (const fs::path& f : files) {
        Dataset part = load_bin(f.string());
        for (auto& pc : part.clouds) ds.clouds.push_back(std::move(pc));
        ds.categories.insert(ds.categories.end(), part.categories.begin(), part.categories.end());
    }
    const fs::path meta_path = fs::path(root) / "meta.json";
    if (fs::exists(meta_path)) {
        std::ifstream is(meta_path);
        json meta = json::parse(is);
        if (meta.contains("classes"))
            ds.class_names = meta["classes"].get<std::vector<std::string>>();
        if (meta.contains("categories"))
            ds.category_names = meta["categories"].get<std::vector<std::string>>();
        if (meta.contains("part_groups"))
            ds.part_groups = meta["part_groups"].get<std::vector<std::vector<int32_t>>>();
    }
    return ds;
}

PointCloud resample(const PointCloud& cloud, int target_n, uint64_t seed) {
    const int n = cloud.size();
    if (n == 0) throw std::invalid_argument("empty input");
    if (target_n < 1) throw std::invalid_argument("target_n must be >= 1");
    if (target_n == n) return cloud;

    std::vector<int32_t> keep;
    Rng rng(seed);
    if (target_n < n) {
        keep = rng.sample_without_replacement(n, target_n);
    } else {
        keep.resize(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) keep[static_cast<size_t>(i)] = i;
        for (int i = n; i < target_n; ++i)
            keep.push_back(static_cast<int32_t>(rng.uniform_int(n)));
    }

    PointCloud out;
    const int C = cloud.channels();
    out.features = Tensor::zeros({target_n, C});
    out.label_kind = cloud.label_kind;
    if (cloud.label_kind == LabelKind::per_cloud) out.labels = cloud.labels;
    for (size_t i = 0; i < keep.size(); ++i) {
        const int32_t src = keep[i];
        out.positions.push_back(cloud.positions[static_cast<size_t>(src)]);
        for (int c = 0; c < C; ++c)
            out.features.at(static_cast<int>(i), c) = cloud.features.at(src, c);
        if (cloud.label_kind == LabelKind::per_point)
            out.labels.push_back(cloud.labels[static_cast<size_t>(src)]);
        if (!cloud.valid_mask.empty())
            out.valid_mask.push_back(cloud.valid_mask[static_cast<size_t>(src)]);
    }
    return out;
}

Dataset tile_scene(const PointCloud& scene, double tile, double offset) {
    if (scene.size() == 0) throw std::invalid_argument("empty input");
    if (!(tile > 0.0) || offset < 0.0) throw std::invalid_argument("bad tile/offset");
    scene.validate();

    double minx = scene.positions[0][0], miny = scene.positions[0][1];
    for (const Vec3& p : scene.positions) {
        minx = std::min(minx, p[0]);
        miny = std::min(miny, p[1]);
    }

    // half-open core intervals: every point is core in exactly one tile
    std::map<std::pair<int64_t, int64_t>, std::vector<int>> core;
    for (int i = 0; i < scene.size(); ++i) {
        const Vec3& p = scene.positions[static_cast<size_t>(i)];
        const int64_t tx = static_cast<int64_t>(std::floor((p[0] - minx) / tile));
        const int64_t ty = static_cast<int64_t>(std::floor((p[1] - miny) / tile));
        core[{tx, ty}].push_back(i);
    }

    Dataset out;
    const int C = scene.channels();
    for (const auto& [key, core_pts] : core) {
        const double ox = minx + static_cast<double>(key.first) * tile;
        const double oy = miny + static_cast<double>(key.second) * tile;
        std::vector<int> members = core_pts;
        std::vector<uint8_t> mask(core_pts.size(), 1);
        if (offset > 0.0) {
            for (int i = 0; i < scene.size(); ++i) {
                const Vec3& p = scene.positions[static_cast<size_t>(i)];
                const bool in_core = p[0] >= ox && p[0] < ox + tile && p[1] >= oy && p[1] < oy + tile;
                if (in_core) continue;
                if (p[0] >= ox - offset && p[0] < ox + tile + offset && p[1] >= oy - offset &&
                    p[1] < oy + tile + offset) {
                    members.push_back(i);
                    mask.push_back(0);
                }
            }
        }

        PointCloud tile_pc;
        tile_pc.features = Tensor::zeros({static_cast<int>(members.size()), C});
        tile_pc.label_kind = scene.label_kind;
        if (scene.label_kind == LabelKind::per_cloud) tile_pc.labels = scene.labels;
        for (size_t mi = 0; mi < members.size(); ++mi) {
            const int src = members[mi];
            tile_pc.positions.push_back(scene.positions[static_cast<size_t>(src)]);
            for (int c = 0; c < C; ++c)
                tile_pc.features.at(static_cast<int>(mi), c) = scene.features.at(src, c);
            if (scene.label_kind == LabelKind::per_point)
                tile_pc.labels.push_back(scene.labels[static_cast<size_t>(src)]);
        }
        tile_pc.valid_mask = std::move(mask);
        out.clouds.push_back(std::move(tile_pc));
        out.categories.push_back(-1);
    }
    return out;
}

namespace {

// Surface displacement along the normal, magnitude clamped to 3 sigma so
// generated points stay within a known band of the surface.
double clamped_noise(Rng& rng, double sigma) {
    if (sigma <= 0.0) return 0.0;
    double t = rng.normal() * sigma;
    if (t > 3.0 * sigma) t = 3.0 * sigma;
    if (t < -3.0 * sigma) t = -3.0 * sigma;
    return t;
}

void rotate_about_z(Vec3& p, double c, double s) {
    const double x = c * p[0] - s * p[1];
    const double y = s * p[0] + c * p[1];
    p[0] = x;
    p[1] = y;
}

PointCloud make_shapes3_cloud(int label, int points, double noise, Rng& rng) {
    PointCloud pc;
    pc.features = Tensor::zeros({points, 3});
    pc.labels = {label};
    pc.label_kind = LabelKind::per_cloud;
    const double theta = rng.uniform(0.0, 6.283185307179586);
    const double cz = std::cos(theta), sz = std::sin(theta);
    const double cube_half = rng.uniform(0.55, 0.8);
    const double plane_half = rng.uniform(0.8, 1.1);

    // scan-like density gradient: points concentrate toward a random focus
    // direction, so the sampling is inhomogeneous across the surface
    Vec3 focus{};
    {
        double x, y, z, r2;
        do {
            x = rng.normal();
            y = rng.normal();
            z = rng.normal();
            r2 = x * x + y * y + z * z;
        } while (r2 < 1e-12);
        const double inv = 1.0 / std::sqrt(r2);
        focus = {x * inv, y * inv, z * inv};
    }

    for (int i = 0; i < points; ++i) {
        Vec3 p{}, nrm{};
        for (;;) {
            if (label == 0) {
                // unit sphere
                double x, y, z, r2;
                do {
                    x = rng.normal();
                    y = rng.normal();
                    z = rng.normal();
                    r2 = x * x + y * y + z * z;
                } while (r2 < 1e-12);
                const double inv = 1.0 / std::sqrt(r2);
                nrm = {x * inv, y * inv, z * inv};
                p = nrm;
            } else if (label == 1) {
                // axis-aligned cube surface, later rotated about z
                const double s = cube_half;
                const int face = static_cast<int>(rng.uniform_int(6));
                const double u = rng.uniform(-s, s), v = rng.uniform(-s, s);
                const int axis = face / 2;
                const double sign = face % 2 == 0 ? 1.0 : -1.0;
                p = {0, 0, 0};
                nrm = {0, 0, 0};
                p[static_cast<size_t>(axis)] = sign * s;
                p[static_cast<size_t>((axis + 1) % 3)] = u;
                p[static_cast<size_t>((axis + 2) % 3)] = v;
                nrm[static_cast<size_t>(axis)] = sign;
            } else {
                // horizontal square plate
                p = {rng.uniform(-plane_half, plane_half), rng.uniform(-plane_half, plane_half),
                     0.0};
                nrm = {0.0, 0.0, 1.0};
            }
            const double r = std::sqrt(std::max(norm2(p), 1e-12));
            const double toward =
                (p[0] * focus[0] + p[1] * focus[1] + p[2] * focus[2]) / r;  // [-1, 1]
            if (rng.uniform() < 0.5 * (1.0 + toward) * 0.9 + 0.1) break;
        }
        rotate_about_z(p, cz, sz);
        rotate_about_z(nrm, cz, sz);
        const double t = clamped_noise(rng, noise);
        p = {p[0] + t * nrm[0], p[1] + t * nrm[1], p[2] + t * nrm[2]};
        pc.positions.push_back(p);
        for (int c = 0; c < 3; ++c) pc.features.at(i, c) = nrm[static_cast<size_t>(c)];
    }
    return pc;
}

PointCloud make_twopart_cloud(int points, double noise, Rng& rng) {
    PointCloud pc;
    pc.features = Tensor::zeros({points, 3});
    pc.label_kind = LabelKind::per_point;
    const double plate_half = rng.uniform(0.5, 0.8);
    const double pole_h = rng.uniform(0.7, 1.1);
    const double pole_r = 0.06;
    const int n_plate = points * 6 / 10;

    for (int i = 0; i < points; ++i) {
        Vec3 p{}, nrm{};
        int32_t part;
        if (i < n_plate) {
            p = {rng.uniform(-plate_half, plate_half), rng.uniform(-plate_half, plate_half), 0.0};
            nrm = {0.0, 0.0, 1.0};
            part = 0;
        } else {
            const double a = rng.uniform(0.0, 6.283185307179586);
            nrm = {std::cos(a), std::sin(a), 0.0};
            p = {pole_r * nrm[0], pole_r * nrm[1], rng.uniform(0.0, pole_h)};
            part = 1;
        }
        const double t = clamped_noise(rng, noise);
        p = {p[0] + t * nrm[0], p[1] + t * nrm[1], p[2] + t * nrm[2]};
        pc.positions.push_back(p);
        for (int c = 0; c < 3; ++c) pc.features.at(i, c) = nrm[static_cast<size_t>(c)];
        pc.labels.push_back(part);
    }
    return pc;
}

}  // namespace

Dataset synth(SynthKind kind, int n_clouds, int points_per_cloud, double noise, uint64_t seed) {
    if (n_clouds < 0 || points_per_cloud < 1)
        throw std::invalid_argument("bad synth dimensions");
    Dataset ds;
    if (kind == SynthKind::shapes3) {
        ds.class_names = {"sphere", "cube", "plane"};
        for (int i = 0; i < n_clouds; ++i) {
            Rng rng(substream(seed, "synth", static_cast<uint64_t>(i)));
            ds.clouds.push_back(make_shapes3_cloud(i % 3, points_per_cloud, noise, rng));
            ds.categories.push_back(-1);
        }
    } else {
        ds.class_names = {"plate", "pole"};
        ds.category_names = {"twopart"};
        ds.part_groups = {{0, 1}};
        for (int i = 0; i < n_clouds; ++i) {
            Rng rng(substream(seed, "synth", static_cast<uint64_t>(i)));
            ds.clouds.push_back(make_twopart_cloud(points_per_cloud, noise, rng));
            ds.categories.push_back(0);
        }
    }
    return ds;
}

}  // namespace dvconv
