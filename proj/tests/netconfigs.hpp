// Small network configs used across tests, built as JSON text so they run
// through the same parsing path as shipped config files.
#pragma once

#include <string>

namespace testutil {

// Desk-scale classifier. `group` is "p4", "p4m" or "trivial"; channels are
// per-orientation base widths.
inline std::string desk_classifier(const std::string& group, int input_channels = 3,
                                   int num_classes = 3, int c1 = 8, int c2 = 16, int c3 = 32,
                                   const std::string& orientation_pool = "concat",
                                   const std::string& pooling = "max",
                                   const std::string& sampling = "knn",
                                   double fixed_radius = 0.0) {
    const std::string fixed =
        sampling == "fixed" ? ",\"fixed_radius\":" + std::to_string(fixed_radius) : "";
    return std::string("{") + "\"task\":\"classify\",\"group\":\"" + group + "\"," +
           "\"num_classes\":" + std::to_string(num_classes) + "," +
           "\"input_channels\":" + std::to_string(input_channels) + "," +
           "\"orientation_pool\":\"" + orientation_pool + "\"," +
           "\"dropout\":0.5,\"head\":[64]," +
           "\"encoder\":[" +
           "{\"n_centroids\":64,\"k\":16,\"d\":2,\"channels\":" + std::to_string(c1) +
           ",\"pooling\":\"" + pooling + "\",\"sampling\":\"" + sampling + "\"" + fixed + "}," +
           "{\"n_centroids\":16,\"k\":12,\"d\":2,\"channels\":" + std::to_string(c2) +
           ",\"pooling\":\"" + pooling + "\",\"sampling\":\"" + sampling + "\"" + fixed + "}," +
           "{\"n_centroids\":4,\"k\":8,\"d\":2,\"channels\":" + std::to_string(c3) +
           ",\"pooling\":\"" + pooling + "\",\"sampling\":\"" + sampling + "\"" + fixed + "}]," +
           "\"train\":{\"epochs\":30,\"batch_size\":16}}";
}

inline std::string desk_segmenter(const std::string& group, int input_channels = 3,
                                  int num_classes = 2) {
    return std::string("{") + "\"task\":\"segment\",\"group\":\"" + group + "\"," +
           "\"num_classes\":" + std::to_string(num_classes) + "," +
           "\"input_channels\":" + std::to_string(input_channels) + "," +
           "\"center_clouds\":false,\"dropout\":0.5,\"head\":[32]," +
           "\"encoder\":[" +
           "{\"n_centroids\":64,\"k\":12,\"d\":2,\"channels\":6}," +
           "{\"n_centroids\":16,\"k\":8,\"d\":2,\"channels\":12}]," +
           "\"decoder\":[" +
           "{\"partner\":1,\"k\":6,\"d\":1,\"channels\":12}," +
           "{\"partner\":0,\"k\":6,\"d\":1,\"channels\":6}]," +
           "\"train\":{\"epochs\":30,\"batch_size\":32,\"augment\":false}}";
}

// Two tiny layers; used by gradient checks.
inline std::string tiny_classifier(const std::string& group, int input_channels = 2,
                                   int num_classes = 3) {
    return std::string("{") + "\"task\":\"classify\",\"group\":\"" + group + "\"," +
           "\"num_classes\":" + std::to_string(num_classes) + "," +
           "\"input_channels\":" + std::to_string(input_channels) + "," +
           "\"dropout\":0.0,\"head\":[8]," +
           "\"encoder\":[" +
           "{\"n_centroids\":8,\"k\":4,\"d\":2,\"channels\":3}," +
           "{\"n_centroids\":4,\"k\":3,\"d\":1,\"channels\":4}]}";
}

}  // namespace testutil
