// Generates the small frozen encoders bundled for tests: four strided conv
// layers with softplus activations, random weights from a fixed seed. The
// structure variant adds per-tap metric weights.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "facesketch/geometry.hpp"

namespace {

using facesketch::uniform_in;

nlohmann::ordered_json conv_layer(std::mt19937_64& rng, int in_c, int out_c) {
    const int kernel = 3;
    // Uniform fan-in scaling keeps activations in a tame range through depth.
    const double bound = std::sqrt(3.0 / (in_c * kernel * kernel));
    std::vector<double> weight(static_cast<size_t>(out_c) * in_c * kernel * kernel);
    for (double& w : weight) w = uniform_in(rng, -bound, bound);
    std::vector<double> bias(static_cast<size_t>(out_c));
    for (double& b : bias) b = uniform_in(rng, -0.1, 0.1);

    nlohmann::ordered_json j;
    j["type"] = "conv";
    j["in_channels"] = in_c;
    j["out_channels"] = out_c;
    j["kernel"] = kernel;
    j["stride"] = 2;
    j["padding"] = 1;
    j["weight"] = weight;
    j["bias"] = bias;
    return j;
}

nlohmann::ordered_json build_encoder(uint64_t seed, bool with_metric) {
    std::mt19937_64 rng(seed);
    const int channels[5] = {3, 8, 12, 16, 16};

    nlohmann::ordered_json j;
    j["format"] = "facesketch-encoder";
    j["input_channels"] = 3;
    auto layers = nlohmann::ordered_json::array();
    for (int i = 0; i < 4; ++i) {
        layers.push_back(conv_layer(rng, channels[i], channels[i + 1]));
        layers.push_back({{"type", "softplus"}});
    }
    j["layers"] = layers;
    j["taps"] = {1, 3, 5, 7}; // each softplus output

    if (with_metric) {
        auto metric = nlohmann::ordered_json::array();
        for (int i = 1; i <= 4; ++i) {
            std::vector<double> w(static_cast<size_t>(channels[i]));
            for (double& v : w) v = uniform_in(rng, 0.5, 1.5);
            metric.push_back(w);
        }
        j["metric_weights"] = metric;
    }
    return j;
}

int write_json(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::fprintf(stderr, "cannot write %s\n", path.c_str());
        return 1;
    }
    out << j.dump(1) << "\n";
    std::printf("wrote %s\n", path.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2 || argc > 3) {
        std::fprintf(stderr, "usage: make_toy_encoder <out_dir> [seed]\n");
        return 1;
    }
    const std::string out_dir = argv[1];
    const uint64_t seed = argc == 3 ? std::stoull(argv[2]) : 7;

    int rc = 0;
    rc |= write_json(out_dir + "/semantic_encoder.json", build_encoder(seed, false));
    rc |= write_json(out_dir + "/structure_encoder.json", build_encoder(seed + 1, true));
    return rc;
}
