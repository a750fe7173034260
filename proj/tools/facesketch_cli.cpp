#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "facesketch/errors.hpp"
#include "facesketch/eval.hpp"
#include "facesketch/image_io.hpp"
#include "facesketch/optimizer.hpp"
#include "facesketch/svg.hpp"

namespace fs = std::filesystem;
using namespace facesketch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitWeights = 3;
constexpr int kExitNumeric = 4;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const WeightsError*>(&e)) return kExitWeights;
    if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
    if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
    return 1;
}

std::string default_weights_dir() {
    const char* env = std::getenv("FACESKETCH_WEIGHTS_DIR");
    return env ? env : "";
}

struct SketchArgs {
    std::vector<std::string> inputs;
    std::string out_dir = ".";
    int strokes = 0;
    int n_face = -1;
    int n_contour = -1;
    int k = 16;
    int iters = 800;
    uint64_t seed = 0;
    std::string round2_scope = "contour_only";
    bool no_aug = false;
    std::string backend = "builtin";
    std::string raster_backend = "reference";
    std::string weights_dir = default_weights_dir();
    std::string style_path;
    bool snapshots = false;
    int workers = 1;
    int resolution = 224;
    double step_size = OptimizationConfig::kDefaultStepSize;
    double w_clip = 1.0, w_vgg = 1.0, w_crop = 1.0;
    bool crop_on_raw = false;
    std::string replay_path;
};

// Resolve the (S, N_f, N_c) triple from whichever of the three were given;
// an explicit total must match an explicit split.
void resolve_budget(SketchArgs& a) {
    const bool has_f = a.n_face >= 0, has_c = a.n_contour >= 0, has_s = a.strokes > 0;
    if (has_f && has_c) {
        if (has_s && a.n_face + a.n_contour != a.strokes)
            throw ValidationError("N_f + N_c must equal S: got " + std::to_string(a.n_face) +
                                  " + " + std::to_string(a.n_contour) +
                                  " != " + std::to_string(a.strokes));
        a.strokes = a.n_face + a.n_contour;
    } else if (has_s) {
        if (has_f) {
            a.n_contour = a.strokes - a.n_face;
        } else if (has_c) {
            a.n_face = a.strokes - a.n_contour;
        } else {
            a.n_face = (a.strokes + 1) / 2; // even split, face gets the odd stroke
            a.n_contour = a.strokes / 2;
        }
        if (a.n_face < 1 || a.n_contour < 0)
            throw ValidationError("stroke split out of range: S=" + std::to_string(a.strokes) +
                                  " N_f=" + std::to_string(a.n_face) +
                                  " N_c=" + std::to_string(a.n_contour));
    } else {
        throw ValidationError("specify --strokes or both --face and --contour");
    }
}

PipelineConfig make_pipeline_config(const SketchArgs& a) {
    PipelineConfig cfg;
    cfg.opt.iterations_per_round = a.iters;
    cfg.opt.step_size = a.step_size;
    cfg.opt.weights = {a.w_clip, a.w_vgg, a.w_crop};
    cfg.opt.round2_scope = round2_scope_from_string(a.round2_scope);
    cfg.opt.seed = a.seed;
    cfg.opt.k = a.k;
    cfg.opt.n_aug = a.no_aug ? 0 : 4;
    cfg.opt.crop_on_raw = a.crop_on_raw;
    cfg.opt.snapshot_every = a.snapshots ? 100 : 0;
    cfg.abstraction = {a.n_face, a.n_contour, a.seed};
    cfg.resolution = a.resolution;
    cfg.model_backend = a.backend;
    cfg.raster_backend = a.raster_backend;
    cfg.weights_dir = a.weights_dir;
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << text;
}

void write_artifacts(const fs::path& out_dir, const std::string& stem, PipelineResult& result,
                     const std::optional<StyleSpec>& style) {
    SketchCanvas styled = result.s2;
    if (style) styled = apply_style(styled, *style);

    write_text(out_dir / (stem + ".svg"), render_svg(styled));

    const auto rasterizer = make_rasterizer(result.manifest.raster_backend);
    save_png(rasterizer->forward(styled), (out_dir / (stem + ".png")).string());

    std::ostringstream csv;
    LossReport combined;
    combined.records = result.round1.records;
    const int offset = static_cast<int>(result.round1.records.size());
    for (LossRecord r : result.round2.records) {
        r.iteration += offset;
        combined.records.push_back(r);
    }
    write_loss_csv(csv, combined);
    write_text(out_dir / (stem + ".losses.csv"), csv.str());

    save_manifest((out_dir / (stem + ".manifest.json")).string(), result.manifest);

    for (const auto& [round_tag, report] :
         {std::pair{1, &result.round1}, std::pair{2, &result.round2}}) {
        for (const auto& [iter, canvas] : report->snapshots) {
            char name[64];
            std::snprintf(name, sizeof(name), "%s.round%d.iter%04d.png", stem.c_str(), round_tag,
                          iter);
            save_png(rasterizer->forward(canvas), (out_dir / name).string());
        }
    }
}

int cmd_sketch(SketchArgs args) {
    std::optional<StyleSpec> style;
    if (!args.style_path.empty()) style = load_style_spec(args.style_path);

    fs::create_directories(args.out_dir);

    if (!args.replay_path.empty()) {
        const RunManifest manifest = load_manifest(args.replay_path);
        PipelineResult result = replay_manifest(manifest);
        const std::string stem = fs::path(manifest.input_path).stem().string();
        write_artifacts(args.out_dir, stem, result, style);
        std::printf("replayed %s -> %s/%s.svg\n", args.replay_path.c_str(),
                    args.out_dir.c_str(), stem.c_str());
        return kExitOk;
    }

    resolve_budget(args);
    if (args.inputs.empty()) throw ValidationError("no input images given");
    const PipelineConfig cfg = make_pipeline_config(args);

    std::mutex log_mutex;
    std::atomic<int> next{0};
    std::atomic<int> worst_exit{kExitOk};

    auto work = [&] {
        for (int i = next.fetch_add(1); i < static_cast<int>(args.inputs.size());
             i = next.fetch_add(1)) {
            const std::string& input = args.inputs[static_cast<size_t>(i)];
            try {
                PipelineResult result = run_pipeline(input, cfg);
                const std::string stem = fs::path(input).stem().string();
                write_artifacts(args.out_dir, stem, result, style);
                std::lock_guard lock(log_mutex);
                std::printf("%s -> %s/%s.svg (%zu strokes, %d+%d iterations)\n", input.c_str(),
                            args.out_dir.c_str(), stem.c_str(), result.s2.strokes.size(),
                            result.manifest.round1_iterations_run,
                            result.manifest.round2_iterations_run);
            } catch (const std::exception& e) {
                std::lock_guard lock(log_mutex);
                std::fprintf(stderr, "error: %s: %s\n", input.c_str(), e.what());
                int code = exit_code_for(e);
                int cur = worst_exit.load();
                while (code > cur && !worst_exit.compare_exchange_weak(cur, code)) {
                }
            }
        }
    };

    const int n_workers =
        std::max(1, std::min(args.workers, static_cast<int>(args.inputs.size())));
    if (n_workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    return worst_exit.load();
}

int cmd_restyle(const std::string& svg_path, const std::string& style_path,
                const std::string& out_path) {
    std::ifstream in(svg_path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + svg_path);
    std::ostringstream buf;
    buf << in.rdbuf();

    const SketchCanvas canvas = parse_svg(buf.str());
    const StyleSpec style = load_style_spec(style_path);
    const SketchCanvas restyled = apply_style(canvas, style);
    write_text(out_path, render_svg(restyled));
    std::printf("restyled %s -> %s\n", svg_path.c_str(), out_path.c_str());
    return kExitOk;
}

int cmd_eval(const std::string& pairs_path, const std::string& out_csv, int resolution) {
    std::ifstream in(pairs_path);
    if (!in) throw ValidationError("cannot read pairs manifest " + pairs_path);

    std::vector<MetricRecord> records;
    std::vector<std::string> failures;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cols;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) cols.push_back(cell);
        if (first && cols.size() >= 1 && cols[0] == "pair_id") {
            first = false;
            continue; // header
        }
        first = false;
        if (cols.size() < 4)
            throw ValidationError("bad pairs row (want pair_id,photo,sketch,budget): " + line);
        const std::string& pair_id = cols[0];
        try {
            const auto t0 = std::chrono::steady_clock::now();
            const RasterImage photo = load_image(cols[1], resolution);
            const RasterImage sketch = load_image(cols[2], resolution);
            const double score = ssim(photo, sketch);
            const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
            records.push_back({pair_id, std::stoi(cols[3]), score, dt.count()});
        } catch (const std::exception& e) {
            failures.push_back(pair_id + ": " + e.what());
        }
    }
    if (records.empty() && failures.empty())
        throw ValidationError("pairs manifest " + pairs_path + " contains no entries");

    std::ostringstream csv;
    if (!records.empty()) write_metrics_csv(csv, records);
    for (const std::string& f : failures) csv << "# error " << f << '\n';
    if (out_csv.empty() || out_csv == "-")
        std::cout << csv.str();
    else
        write_text(out_csv, csv.str());

    for (const std::string& f : failures) std::fprintf(stderr, "error: %s\n", f.c_str());
    if (records.empty()) return kExitValidation;
    std::cout << format_table(aggregate(records));
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vector portrait sketching from face photos"};
    app.require_subcommand(1);

    SketchArgs sk;
    auto* sketch = app.add_subcommand("sketch", "Optimize a stroke sketch for each input photo");
    sketch->add_option("inputs", sk.inputs, "Input image paths");
    sketch->add_option("-o,--out-dir", sk.out_dir, "Output directory");
    sketch->add_option("--strokes", sk.strokes, "Total stroke budget S");
    sketch->add_option("--face", sk.n_face, "Face strokes N_f (round 1)");
    sketch->add_option("--contour", sk.n_contour, "Contour strokes N_c (round 2)");
    sketch->add_option("--k", sk.k, "Shadow-loss crop count (perfect square)");
    sketch->add_option("--iters", sk.iters, "Iterations per round");
    sketch->add_option("--seed", sk.seed, "RNG seed");
    sketch->add_option("--round2-scope", sk.round2_scope, "contour_only | joint");
    sketch->add_flag("--no-aug", sk.no_aug, "Disable augmented views in the semantic loss");
    sketch->add_option("--backend", sk.backend, "Model backend: builtin | onnx");
    sketch->add_option("--raster-backend", sk.raster_backend, "Rasterizer backend key");
    sketch->add_option("--weights-dir", sk.weights_dir,
                       "Weights directory (default: $FACESKETCH_WEIGHTS_DIR)");
    sketch->add_option("--style", sk.style_path, "Style JSON applied to the final SVG");
    sketch->add_flag("--snapshots", sk.snapshots, "Write a canvas PNG every 100 iterations");
    sketch->add_option("--workers", sk.workers, "Parallel images in batch mode");
    sketch->add_option("--resolution", sk.resolution, "Working resolution (square)");
    sketch->add_option("--step-size", sk.step_size, "Optimizer step size (normalized units)");
    sketch->add_option("--w-clip", sk.w_clip, "Semantic loss weight");
    sketch->add_option("--w-vgg", sk.w_vgg, "Structure loss weight");
    sketch->add_option("--w-crop", sk.w_crop, "Shadow loss weight");
    sketch->add_flag("--crop-on-raw", sk.crop_on_raw,
                     "Shadow loss against the raw photo instead of the masked face");
    sketch->add_option("--replay", sk.replay_path, "Re-run a recorded manifest");

    std::string restyle_svg, restyle_style, restyle_out;
    auto* restyle = app.add_subcommand("restyle", "Re-render an SVG with a new brush style");
    restyle->add_option("svg", restyle_svg, "Input SVG")->required();
    restyle->add_option("style", restyle_style, "Style JSON")->required();
    restyle->add_option("-o,--out", restyle_out, "Output SVG path");

    std::string eval_pairs, eval_out;
    int eval_resolution = 224;
    auto* eval = app.add_subcommand("eval", "SSIM metrics over photo/sketch pairs");
    eval->add_option("pairs", eval_pairs, "CSV manifest: pair_id,photo,sketch,budget")->required();
    eval->add_option("-o,--out", eval_out, "Metrics CSV path (default stdout)");
    eval->add_option("--resolution", eval_resolution, "Evaluation resolution");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sketch->parsed()) return cmd_sketch(std::move(sk));
        if (restyle->parsed()) {
            if (restyle_out.empty())
                restyle_out = fs::path(restyle_svg).replace_extension(".restyled.svg").string();
            return cmd_restyle(restyle_svg, restyle_style, restyle_out);
        }
        if (eval->parsed()) return cmd_eval(eval_pairs, eval_out, eval_resolution);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    }
    return kExitOk;
}
