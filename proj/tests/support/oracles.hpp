#pragma once

#include <random>
#include <string>
#include <vector>

#include "facesketch/image.hpp"
#include "facesketch/keypoints.hpp"
#include "facesketch/stroke.hpp"

// Independent reference computations used to cross-check the library. These
// deliberately avoid sharing code paths with the implementations they verify:
// the FPS oracle recomputes every min-distance from scratch, the SSIM oracle
// evaluates the per-window formula directly, and the crop-loss oracle sums
// blocks with explicit loops.
namespace facesketch::testing {

std::vector<size_t> brute_fps_indices(const std::vector<Vec2>& pts, int n);

double direct_ssim(const RasterImage& a, const RasterImage& b);

double brute_crop_loss(const RasterImage& target, const RasterImage& sketch, int k);

SketchCanvas random_canvas(std::mt19937_64& rng, int n_strokes, int resolution);

RasterImage random_image(std::mt19937_64& rng, int channels, int h, int w);

// Shell helper for CLI tests; cmd should redirect stderr itself if wanted.
struct CommandResult {
    int exit_code = -1;
    std::string output;
};
CommandResult run_command(const std::string& cmd);

std::string make_temp_dir(const std::string& tag);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);
std::string assets_dir();

} // namespace facesketch::testing
