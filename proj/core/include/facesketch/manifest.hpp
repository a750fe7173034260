#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace facesketch {

// Everything needed to reproduce a run byte-for-byte, plus content hashes to
// detect drifted inputs or weights at replay time.
struct RunManifest {
    std::string tool_version;
    std::string input_path;
    std::string input_sha256;
    int resolution = 224;

    int n_face = 0;
    int n_contour = 0;
    uint64_t abstraction_seed = 0;

    int iterations_per_round = 800;
    double step_size = 0.0;
    double w_clip = 1.0;
    double w_vgg = 1.0;
    double w_crop = 1.0;
    std::string round2_scope = "contour_only";
    int convergence_window = 100;
    double convergence_tol = 1e-3;
    uint64_t opt_seed = 0;
    int k = 16;
    int n_aug = 4;
    bool crop_on_raw = false;

    std::string model_backend = "builtin";
    std::string raster_backend = "reference";
    std::string weights_dir;
    std::map<std::string, std::string> weight_hashes; // file name -> sha256

    int round1_iterations_run = 0;
    int round2_iterations_run = 0;
};

std::string sha256_bytes(const void* data, size_t len);
std::string sha256_file(const std::string& path); // throws ValidationError if unreadable

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);

void save_manifest(const std::string& path, const RunManifest& m);
RunManifest load_manifest(const std::string& path);

} // namespace facesketch
