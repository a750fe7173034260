#include "facesketch/optimizer.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <iomanip>
#include <numeric>
#include <stdexcept>

#include "facesketch/errors.hpp"
#include "facesketch/face_models.hpp"
#include "facesketch/image_io.hpp"
#include "facesketch/perceptual_loss.hpp"
#include "facesketch/svg.hpp"

#ifndef FACESKETCH_VERSION
#define FACESKETCH_VERSION "dev"
#endif

namespace facesketch {

Round2Scope round2_scope_from_string(const std::string& s) {
    if (s == "contour_only") return Round2Scope::contour_only;
    if (s == "joint") return Round2Scope::joint;
    throw ValidationError("unknown round2 scope '" + s + "'; expected contour_only or joint");
}

std::string to_string(Round2Scope scope) {
    return scope == Round2Scope::contour_only ? "contour_only" : "joint";
}

void OptimizationConfig::validate() const {
    if (iterations_per_round < 0)
        throw ValidationError("iterations_per_round must be non-negative, got " +
                              std::to_string(iterations_per_round));
    if (!(step_size > 0.0) || !std::isfinite(step_size))
        throw ValidationError("step_size must be a positive finite number");
    if (!std::isfinite(weights.clip) || !std::isfinite(weights.vgg) || !std::isfinite(weights.crop))
        throw ValidationError("loss weights must be finite");
    if (convergence_window < 1)
        throw ValidationError("convergence_window must be at least 1");
    if (!(convergence_tol >= 0.0) || !std::isfinite(convergence_tol))
        throw ValidationError("convergence_tol must be non-negative and finite");
    if (k < 1) throw ValidationError("k must be at least 1, got " + std::to_string(k));
    if (n_aug < 0) throw ValidationError("n_aug must be non-negative");
    if (snapshot_every < 0) throw ValidationError("snapshot_every must be non-negative");
}

namespace {

double window_mean(const std::vector<LossRecord>& records, size_t begin, size_t end) {
    double sum = 0.0;
    for (size_t i = begin; i < end; ++i) sum += records[i].l_sum;
    return sum / static_cast<double>(end - begin);
}

} // namespace

double LossReport::initial_window_mean(int window) const {
    if (records.empty()) return 0.0;
    return window_mean(records, 0, std::min(records.size(), static_cast<size_t>(window)));
}

double LossReport::final_window_mean(int window) const {
    if (records.empty()) return 0.0;
    const size_t n = std::min(records.size(), static_cast<size_t>(window));
    return window_mean(records, records.size() - n, records.size());
}

void write_loss_csv(std::ostream& out, const LossReport& report) {
    out << "iteration,l_clip,l_vgg,l_crop,l_sum,grad_norm\n";
    out << std::setprecision(12);
    for (const LossRecord& r : report.records)
        out << r.iteration << ',' << r.l_clip << ',' << r.l_vgg << ',' << r.l_crop << ','
            << r.l_sum << ',' << r.grad_norm << '\n';
}

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void axpy(GradImage& y, double a, const GradImage& x) {
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += a * x.data[i];
}

struct LossParts {
    double l_clip = 0.0;
    double l_vgg = 0.0;
    double l_crop = 0.0;
    double l_sum = 0.0;
    GradImage pixel_grad;
};

using LossFn = std::function<LossParts(const RasterImage& render, int iter)>;

struct AdamState {
    std::vector<double> m, v;
    int t = 0;
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}

    double step(size_t i, double g, double lr) {
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
        const double mhat = m[i] / (1.0 - std::pow(kBeta1, t));
        const double vhat = v[i] / (1.0 - std::pow(kBeta2, t));
        return lr * mhat / (std::sqrt(vhat) + kEps);
    }
};

bool converged(const std::vector<LossRecord>& records, const OptimizationConfig& cfg) {
    const size_t w = static_cast<size_t>(cfg.convergence_window);
    if (records.size() < 2 * w) return false;
    const double recent = window_mean(records, records.size() - w, records.size());
    const double prior = window_mean(records, records.size() - 2 * w, records.size() - w);
    const double rel = std::abs(recent - prior) / std::max(std::abs(prior), 1e-12);
    return rel < cfg.convergence_tol;
}

// Shared descent loop: Adam steps on the control points of the trainable
// strokes; everything else in the canvas renders but never moves.
LossReport optimize_strokes(SketchCanvas& canvas, const std::vector<size_t>& trainable,
                            const OptimizationConfig& cfg, const Rasterizer& rasterizer,
                            const LossFn& loss_fn) {
    LossReport report;
    if (cfg.iterations_per_round == 0 || trainable.empty()) return report;

    AdamState adam(trainable.size() * 8);
    for (int iter = 1; iter <= cfg.iterations_per_round; ++iter) {
        const RasterImage render = rasterizer.forward(canvas);
        LossParts parts = loss_fn(render, iter);
        if (!std::isfinite(parts.l_sum))
            throw NumericError("numeric failure at iteration " + std::to_string(iter) +
                               ": non-finite loss");
        const RenderGradients grads = rasterizer.backward(canvas, parts.pixel_grad);
        if (!grads.all_finite())
            throw NumericError("numeric failure at iteration " + std::to_string(iter) +
                               ": non-finite control-point gradient");

        ++adam.t;
        double norm2 = 0.0;
        size_t slot = 0;
        for (size_t idx : trainable) {
            Stroke& stroke = canvas.strokes[idx];
            const auto& g = grads.d_points[idx];
            for (int p = 0; p < 4; ++p) {
                norm2 += g[p].x * g[p].x + g[p].y * g[p].y;
                const double dx = adam.step(slot++, g[p].x, cfg.step_size);
                const double dy = adam.step(slot++, g[p].y, cfg.step_size);
                stroke.set_point(p, Vec2{stroke.points[p].x - dx, stroke.points[p].y - dy});
            }
        }

        report.records.push_back(
            {iter, parts.l_clip, parts.l_vgg, parts.l_crop, parts.l_sum, std::sqrt(norm2)});
        if (cfg.snapshot_every > 0 && iter % cfg.snapshot_every == 0)
            report.snapshots.emplace(iter, canvas);
        if (converged(report.records, cfg)) break;
    }
    return report;
}

} // namespace

RoundResult run_round1(const RasterImage& target, const std::vector<Stroke>& face_strokes,
                       const OptimizationConfig& cfg, const EncoderSet& encoders,
                       const Rasterizer& rasterizer) {
    cfg.validate();
    if (face_strokes.empty()) throw ValidationError("round 1 requires at least one face stroke");
    if (!encoders.semantic) throw ValidationError("round 1 requires a semantic encoder");

    SketchCanvas canvas;
    canvas.strokes = face_strokes;
    canvas.width_px = target.width;
    canvas.height_px = target.height;
    std::vector<size_t> trainable(canvas.strokes.size());
    std::iota(trainable.begin(), trainable.end(), size_t{0});

    const LossFn fn = [&](const RasterImage& render, int iter) {
        SemanticLossOptions opt;
        opt.n_aug = cfg.n_aug;
        opt.seed = mix_seed(cfg.seed, static_cast<uint64_t>(iter));
        auto [loss, grad] = semantic_loss(target, render, *encoders.semantic, opt);
        LossParts parts;
        parts.l_clip = loss;
        parts.l_sum = cfg.weights.clip * loss;
        for (double& g : grad.data) g *= cfg.weights.clip;
        parts.pixel_grad = std::move(grad);
        return parts;
    };

    LossReport report = optimize_strokes(canvas, trainable, cfg, rasterizer, fn);
    return {std::move(canvas), std::move(report)};
}

RoundResult run_round2(const RasterImage& target, const MaskImage& mask, const SketchCanvas& s1,
                       const std::vector<Stroke>& contour_strokes, const OptimizationConfig& cfg,
                       const EncoderSet& encoders, const Rasterizer& rasterizer) {
    cfg.validate();
    if (contour_strokes.empty()) return {s1, LossReport{}};
    if (mask.height != target.height || mask.width != target.width)
        throw ValidationError("mask resolution does not match the target image");

    const bool use_clip = cfg.weights.clip != 0.0;
    const bool use_vgg = cfg.weights.vgg != 0.0;
    const bool use_crop = cfg.weights.crop != 0.0;
    if (use_clip && !encoders.semantic)
        throw ValidationError("round 2 requires a semantic encoder (or set w_clip to 0)");
    if (use_vgg && !encoders.structure)
        throw ValidationError("round 2 requires a structure encoder (or set w_vgg to 0)");

    CropGrid grid;
    if (use_crop) {
        if (target.width != target.height)
            throw ValidationError("shadow loss requires a square working resolution");
        grid = make_crop_grid(cfg.k, target.width);
    }
    const RasterImage& crop_target = cfg.crop_on_raw ? target : mask.composite;

    SketchCanvas canvas = s1;
    const size_t base = canvas.strokes.size();
    canvas.strokes.insert(canvas.strokes.end(), contour_strokes.begin(), contour_strokes.end());

    std::vector<size_t> trainable;
    const size_t begin = cfg.round2_scope == Round2Scope::contour_only ? base : 0;
    for (size_t i = begin; i < canvas.strokes.size(); ++i) trainable.push_back(i);

    const LossFn fn = [&](const RasterImage& render, int iter) {
        LossParts parts;
        parts.pixel_grad = GradImage(render.channels, render.height, render.width);
        if (use_clip) {
            SemanticLossOptions opt;
            opt.n_aug = cfg.n_aug;
            opt.seed = mix_seed(cfg.seed, 0x52320000ULL + static_cast<uint64_t>(iter));
            auto [loss, grad] = semantic_loss(target, render, *encoders.semantic, opt);
            parts.l_clip = loss;
            axpy(parts.pixel_grad, cfg.weights.clip, grad);
        }
        if (use_vgg) {
            auto [loss, grad] = structure_loss(mask.composite, render, *encoders.structure);
            parts.l_vgg = loss;
            axpy(parts.pixel_grad, cfg.weights.vgg, grad);
        }
        if (use_crop) {
            auto [loss, grad] = crop_shadow_loss(crop_target, render, grid);
            parts.l_crop = loss;
            axpy(parts.pixel_grad, cfg.weights.crop, grad);
        }
        parts.l_sum = cfg.weights.clip * parts.l_clip + cfg.weights.vgg * parts.l_vgg +
                      cfg.weights.crop * parts.l_crop;
        return parts;
    };

    LossReport report = optimize_strokes(canvas, trainable, cfg, rasterizer, fn);

    if (cfg.round2_scope == Round2Scope::contour_only) {
        for (size_t i = 0; i < base; ++i)
            if (std::memcmp(canvas.strokes[i].points.data(), s1.strokes[i].points.data(),
                            sizeof(canvas.strokes[i].points)) != 0)
                throw std::logic_error("internal: frozen face stroke mutated during round 2");
    }
    return {std::move(canvas), std::move(report)};
}

namespace {

RunManifest build_manifest(const std::string& image_path, const PipelineConfig& cfg) {
    RunManifest m;
    m.tool_version = FACESKETCH_VERSION;
    m.input_path = image_path;
    m.input_sha256 = sha256_file(image_path);
    m.resolution = cfg.resolution;
    m.n_face = cfg.abstraction.n_face;
    m.n_contour = cfg.abstraction.n_contour;
    m.abstraction_seed = cfg.abstraction.seed;
    m.iterations_per_round = cfg.opt.iterations_per_round;
    m.step_size = cfg.opt.step_size;
    m.w_clip = cfg.opt.weights.clip;
    m.w_vgg = cfg.opt.weights.vgg;
    m.w_crop = cfg.opt.weights.crop;
    m.round2_scope = to_string(cfg.opt.round2_scope);
    m.convergence_window = cfg.opt.convergence_window;
    m.convergence_tol = cfg.opt.convergence_tol;
    m.opt_seed = cfg.opt.seed;
    m.k = cfg.opt.k;
    m.n_aug = cfg.opt.n_aug;
    m.crop_on_raw = cfg.opt.crop_on_raw;
    m.model_backend = cfg.model_backend;
    m.raster_backend = cfg.raster_backend;
    m.weights_dir = cfg.weights_dir;

    std::vector<std::string> weight_files = {"semantic_encoder.json", "structure_encoder.json"};
    if (cfg.model_backend == "onnx") {
        weight_files.push_back("landmarks.onnx");
        weight_files.push_back("face_parsing.onnx");
    }
    for (const std::string& f : weight_files) {
        const std::filesystem::path p = std::filesystem::path(cfg.weights_dir) / f;
        if (std::filesystem::exists(p)) m.weight_hashes[f] = sha256_file(p.string());
    }
    return m;
}

} // namespace

PipelineResult run_pipeline(const std::string& image_path, const PipelineConfig& cfg) {
    // Validation before any weight or model loading.
    cfg.opt.validate();
    cfg.abstraction.validate();
    if (cfg.resolution < 16)
        throw ValidationError("working resolution must be at least 16, got " +
                              std::to_string(cfg.resolution));
    if (cfg.opt.weights.crop != 0.0) make_crop_grid(cfg.opt.k, cfg.resolution);
    if (!std::filesystem::exists(image_path))
        throw ValidationError("cannot read input image: " + image_path);
    if (cfg.weights_dir.empty())
        throw WeightsError(
            "weights not found: weights directory not set (pass --weights-dir or set "
            "FACESKETCH_WEIGHTS_DIR)");
    if (!std::filesystem::is_directory(cfg.weights_dir))
        throw WeightsError("weights not found: " + cfg.weights_dir + " is not a directory");

    const auto weights_path = [&](const char* f) {
        return (std::filesystem::path(cfg.weights_dir) / f).string();
    };
    const Encoder semantic = Encoder::load(weights_path("semantic_encoder.json"));
    const Encoder structure = Encoder::load(weights_path("structure_encoder.json"));
    EncoderSet encoders{&semantic, &structure};

    const auto rasterizer = make_rasterizer(cfg.raster_backend);
    const auto landmarker = make_landmarker(cfg.model_backend, cfg.weights_dir);

    const RasterImage target = load_image(image_path, cfg.resolution);

    const size_t min_pool = std::max<size_t>(256, static_cast<size_t>(cfg.abstraction.n_face));
    const KeypointPool face_pool = detect_landmarks(target, *landmarker, min_pool);
    const std::vector<Vec2> face_seeds =
        fps_select(face_pool, cfg.abstraction.n_face, cfg.abstraction.seed);
    const std::vector<Stroke> face_strokes =
        init_strokes(face_seeds, RoundTag::face, cfg.abstraction.seed);

    PipelineResult result;
    RoundResult r1 = run_round1(target, face_strokes, cfg.opt, encoders, *rasterizer);
    result.s1 = std::move(r1.canvas);
    result.round1 = std::move(r1.report);

    if (cfg.abstraction.n_contour > 0) {
        const auto parser = make_parser(cfg.model_backend, cfg.weights_dir);
        const MaskImage mask = parse_face(target, *parser);
        const KeypointPool contour_pool = extract_contour_points(mask);
        const std::vector<Vec2> contour_seeds =
            fps_select(contour_pool, cfg.abstraction.n_contour, cfg.abstraction.seed);
        const std::vector<Stroke> contour_strokes =
            init_strokes(contour_seeds, RoundTag::contour, cfg.abstraction.seed + 1);
        RoundResult r2 = run_round2(target, mask, result.s1, contour_strokes, cfg.opt, encoders,
                                    *rasterizer);
        result.s2 = std::move(r2.canvas);
        result.round2 = std::move(r2.report);
    } else {
        result.s2 = result.s1;
    }

    result.svg = render_svg(result.s2);
    result.manifest = build_manifest(image_path, cfg);
    result.manifest.round1_iterations_run = static_cast<int>(result.round1.records.size());
    result.manifest.round2_iterations_run = static_cast<int>(result.round2.records.size());
    return result;
}

PipelineResult replay_manifest(const RunManifest& m) {
    if (!std::filesystem::exists(m.input_path))
        throw ValidationError("cannot read input image: " + m.input_path);
    if (!m.input_sha256.empty()) {
        const std::string actual = sha256_file(m.input_path);
        if (actual != m.input_sha256)
            throw ValidationError("input hash mismatch for " + m.input_path + ": manifest has " +
                                  m.input_sha256 + ", file is " + actual);
    }
    for (const auto& [file, recorded] : m.weight_hashes) {
        const std::filesystem::path p = std::filesystem::path(m.weights_dir) / file;
        if (!std::filesystem::exists(p)) throw WeightsError("weights not found: " + p.string());
        const std::string actual = sha256_file(p.string());
        if (actual != recorded)
            throw ValidationError("weights hash mismatch for " + p.string() + ": manifest has " +
                                  recorded + ", file is " + actual);
    }

    PipelineConfig cfg;
    cfg.opt.iterations_per_round = m.iterations_per_round;
    cfg.opt.step_size = m.step_size;
    cfg.opt.weights = {m.w_clip, m.w_vgg, m.w_crop};
    cfg.opt.round2_scope = round2_scope_from_string(m.round2_scope);
    cfg.opt.convergence_window = m.convergence_window;
    cfg.opt.convergence_tol = m.convergence_tol;
    cfg.opt.seed = m.opt_seed;
    cfg.opt.k = m.k;
    cfg.opt.n_aug = m.n_aug;
    cfg.opt.crop_on_raw = m.crop_on_raw;
    cfg.abstraction = {m.n_face, m.n_contour, m.abstraction_seed};
    cfg.resolution = m.resolution;
    cfg.model_backend = m.model_backend;
    cfg.raster_backend = m.raster_backend;
    cfg.weights_dir = m.weights_dir;
    return run_pipeline(m.input_path, cfg);
}

} // namespace facesketch
