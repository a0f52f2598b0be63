#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dvconv/geom.hpp"

namespace dvconv {

struct Dataset {
    std::vector<PointCloud> clouds;
    std::vector<std::string> class_names;            // optional
    std::vector<int32_t> categories;                 // per cloud, -1 when absent
    std::vector<std::string> category_names;         // optional
    std::vector<std::vector<int32_t>> part_groups;   // per category: its part label ids

    int size() const { return static_cast<int>(clouds.size()); }
    bool has_parts() const { return !part_groups.empty(); }
};

// Highest label + 1 across the dataset (per-cloud labels for classification,
// per-point for segmentation).
int infer_num_classes(const Dataset& data);

// Text loader: a sidecar header line `# cols: xyz normals label` declares the
// column layout (tokens: xyz, normals, rgb, label). rgb channels scale by
// rgb_scale on load.
PointCloud load_xyz(const std::string& path, double rgb_scale = 1.0 / 255.0);
void save_xyz(const PointCloud& cloud, const std::string& path, const std::string& cols,
              double rgb_scale = 1.0 / 255.0);

// Binary container, magic "DVPC": little-endian 32-bit floats for positions
// and features, labels as u16. Byte-exact round-trip.
Dataset load_bin(const std::string& path);
void save_bin(const Dataset& data, const std::string& path);

// Directory convention: <root>/<split>/*.dvpc plus optional <root>/meta.json
// (class names, categories, part groups).
Dataset load_dir(const std::string& root, const std::string& split);
void save_dir(const Dataset& data, const std::string& root, const std::string& split);

// Pads with random duplicates or subsamples without replacement.
PointCloud resample(const PointCloud& cloud, int target_n, uint64_t seed);

// Splits a scene into an xy grid of tiles. Core points (mask = 1) partition
// the scene; each tile also carries ambient points from a surrounding offset
// band (mask = 0).
Dataset tile_scene(const PointCloud& scene, double tile = 1.5, double offset = 0.2);

enum class SynthKind { shapes3, twopart };

// Desk-scale synthetic datasets. shapes3: sphere/cube/plane surfaces with
// analytic normals and per-cloud labels. twopart: plane+pole composites with
// per-point part labels.
Dataset synth(SynthKind kind, int n_clouds, int points_per_cloud, double noise, uint64_t seed);

}  // namespace dvconv
