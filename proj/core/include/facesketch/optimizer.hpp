#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "facesketch/diff_render.hpp"
#include "facesketch/encoder.hpp"
#include "facesketch/image.hpp"
#include "facesketch/keypoints.hpp"
#include "facesketch/manifest.hpp"
#include "facesketch/shadow_loss.hpp"
#include "facesketch/stroke.hpp"

namespace facesketch {

enum class Round2Scope { contour_only, joint };

Round2Scope round2_scope_from_string(const std::string& s);
std::string to_string(Round2Scope scope);

struct LossWeights {
    double clip = 1.0;
    double vgg = 1.0;
    double crop = 1.0;
};

struct OptimizationConfig {
    int iterations_per_round = 800;
    double step_size = kDefaultStepSize; // normalized units; Adam-scaled
    LossWeights weights;
    Round2Scope round2_scope = Round2Scope::contour_only;
    int convergence_window = 100;
    double convergence_tol = 1e-3;
    uint64_t seed = 0;
    int k = 16;          // shadow-loss crop count
    int n_aug = 4;       // augmented views per semantic-loss evaluation
    bool crop_on_raw = false; // shadow target: raw photo instead of the masked face
    int snapshot_every = 0;   // record the canvas every N iterations (0 = off)

    // Base learning rate equivalent to one pixel per step at the usual
    // working resolution; raw unit steps overshoot the [0,1] canvas.
    static constexpr double kDefaultStepSize = 1.0 / 224.0;

    void validate() const;
};

struct LossRecord {
    int iteration = 0;
    double l_clip = 0.0;
    double l_vgg = 0.0;
    double l_crop = 0.0;
    double l_sum = 0.0;
    double grad_norm = 0.0;
};

struct LossReport {
    std::vector<LossRecord> records;
    std::map<int, SketchCanvas> snapshots; // iteration -> canvas copy

    // Mean l_sum over the first / last convergence-window records.
    double initial_window_mean(int window) const;
    double final_window_mean(int window) const;
};

// Header: iteration,l_clip,l_vgg,l_crop,l_sum,grad_norm
void write_loss_csv(std::ostream& out, const LossReport& report);

struct RoundResult {
    SketchCanvas canvas;
    LossReport report;
};

struct EncoderSet {
    const Encoder* semantic = nullptr;
    const Encoder* structure = nullptr;
};

// Round 1: gradient steps on the face strokes under the semantic loss only.
RoundResult run_round1(const RasterImage& target, const std::vector<Stroke>& face_strokes,
                       const OptimizationConfig& cfg, const EncoderSet& encoders,
                       const Rasterizer& rasterizer);

// Round 2: contour strokes are superimposed on s1 and the composite canvas is
// optimized under clip + structure + shadow losses. With scope contour_only
// the s1 geometry stays bit-identical.
RoundResult run_round2(const RasterImage& target, const MaskImage& mask,
                       const SketchCanvas& s1, const std::vector<Stroke>& contour_strokes,
                       const OptimizationConfig& cfg, const EncoderSet& encoders,
                       const Rasterizer& rasterizer);

struct PipelineConfig {
    OptimizationConfig opt;
    AbstractionConfig abstraction;
    int resolution = 224;
    std::string model_backend = "builtin"; // builtin | onnx
    std::string raster_backend = "reference";
    std::string weights_dir;               // encoders (+ onnx models)
};

struct PipelineResult {
    SketchCanvas s1;
    SketchCanvas s2;
    LossReport round1;
    LossReport round2;
    std::string svg; // final document rendered from s2
    RunManifest manifest;
};

// Full run: load -> landmarks -> FPS -> round 1 -> contours -> FPS -> round 2.
PipelineResult run_pipeline(const std::string& image_path, const PipelineConfig& cfg);

// Re-run a recorded manifest; validates input/weight hashes first.
PipelineResult replay_manifest(const RunManifest& manifest);

} // namespace facesketch
