#include "facesketch/face_models.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>
#include <opencv2/imgproc.hpp>

#include "facesketch/errors.hpp"

namespace facesketch {

const std::vector<PaletteEntry>& builtin_palette() {
    static const std::vector<PaletteEntry> palette = {
        {FaceAttribute::background, {255, 255, 255}},
        {FaceAttribute::skin, {241, 194, 125}},
        {FaceAttribute::hair, {60, 40, 30}},
        {FaceAttribute::eyes, {40, 40, 60}},
        {FaceAttribute::eyebrows, {70, 50, 35}},
        {FaceAttribute::nose, {205, 155, 90}},
        {FaceAttribute::lips, {188, 86, 96}},
        {FaceAttribute::ears, {231, 180, 110}},
        {FaceAttribute::neck, {225, 175, 105}},
    };
    return palette;
}

namespace {

// Pixels farther than this (in normalized RGB distance) from every palette
// color count as background; keeps noise images from classifying as a face.
constexpr double kPaletteTolerance = 0.08;

bool is_face_label(FaceAttribute a) {
    switch (a) {
        case FaceAttribute::skin:
        case FaceAttribute::nose:
        case FaceAttribute::eyes:
        case FaceAttribute::eyebrows:
        case FaceAttribute::lips:
        case FaceAttribute::ears:
            return true;
        default:
            return false;
    }
}

std::vector<uint8_t> classify_palette(const RasterImage& image) {
    if (image.channels != 3) throw ValidationError("face models expect a 3-channel image");
    const int h = image.height, w = image.width;
    std::vector<uint8_t> labels(static_cast<size_t>(h) * w,
                                static_cast<uint8_t>(FaceAttribute::background));
    const auto& palette = builtin_palette();
    const double tol2 = kPaletteTolerance * kPaletteTolerance;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double best = std::numeric_limits<double>::infinity();
            FaceAttribute attr = FaceAttribute::background;
            for (const PaletteEntry& e : palette) {
                double d2 = 0.0;
                for (int c = 0; c < 3; ++c) {
                    const double diff = image.at(c, y, x) - e.rgb[c] / 255.0;
                    d2 += diff * diff;
                }
                if (d2 < best) {
                    best = d2;
                    attr = e.attr;
                }
            }
            if (best <= tol2) labels[static_cast<size_t>(y) * w + x] = static_cast<uint8_t>(attr);
        }
    }
    return labels;
}

struct RegionStats {
    size_t count = 0;
    double cx = 0.0, cy = 0.0; // pixel-center centroid
    double x0 = std::numeric_limits<double>::infinity();
    double y0 = std::numeric_limits<double>::infinity();
    double x1 = -std::numeric_limits<double>::infinity();
    double y1 = -std::numeric_limits<double>::infinity();

    void add(int x, int y) {
        const double px = x + 0.5, py = y + 0.5;
        ++count;
        cx += px;
        cy += py;
        x0 = std::min(x0, px);
        y0 = std::min(y0, py);
        x1 = std::max(x1, px);
        y1 = std::max(y1, py);
    }
    void finish() {
        if (count) {
            cx /= static_cast<double>(count);
            cy /= static_cast<double>(count);
        }
    }
};

std::array<RegionStats, 11> region_stats(const std::vector<uint8_t>& labels, int h, int w) {
    std::array<RegionStats, 11> stats{};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            stats[labels[static_cast<size_t>(y) * w + x]].add(x, y);
    for (RegionStats& s : stats) s.finish();
    return stats;
}

const RegionStats& stat_of(const std::array<RegionStats, 11>& stats, FaceAttribute a) {
    return stats[static_cast<size_t>(a)];
}

// A classified label map counts as a face when enough of the frame matches
// the palette and the core attributes exist with plausible spatial layout
// (eyes above nose above lips, one eye per side). Pixel-count thresholds
// scale with resolution so small working sizes work.
void require_face(const std::array<RegionStats, 11>& stats,
                  const std::vector<uint8_t>& labels, int h, int w) {
    const double scale = static_cast<double>(h) * w / (224.0 * 224.0);
    const size_t min_core = std::max<size_t>(3, static_cast<size_t>(std::lround(30 * scale)));
    const size_t min_eye = std::max<size_t>(2, static_cast<size_t>(std::lround(10 * scale)));

    // Noise can match scattered palette pixels, but a portrait fills a large
    // share of the frame.
    size_t foreground = 0;
    for (uint8_t l : labels)
        if (l != static_cast<uint8_t>(FaceAttribute::background)) ++foreground;
    if (foreground < static_cast<size_t>(0.1 * h * w))
        throw ValidationError("no face found: foreground too sparse");

    const char* missing = nullptr;
    const FaceAttribute required[] = {FaceAttribute::skin, FaceAttribute::eyes,
                                      FaceAttribute::eyebrows, FaceAttribute::nose,
                                      FaceAttribute::lips};
    const char* names[] = {"skin", "eyes", "eyebrows", "nose", "lips"};
    for (size_t i = 0; i < 5; ++i)
        if (stat_of(stats, required[i]).count < min_core) {
            missing = names[i];
            break;
        }
    if (missing)
        throw ValidationError(std::string("no face found: ") + missing + " region absent");

    const RegionStats& skin = stat_of(stats, FaceAttribute::skin);
    if ((skin.x1 - skin.x0) * (skin.y1 - skin.y0) < 0.05 * h * w)
        throw ValidationError("no face found: face region too small");

    const RegionStats& eyes = stat_of(stats, FaceAttribute::eyes);
    const RegionStats& nose = stat_of(stats, FaceAttribute::nose);
    const RegionStats& lips = stat_of(stats, FaceAttribute::lips);
    if (!(eyes.cy < nose.cy && nose.cy < lips.cy))
        throw ValidationError("no face found: implausible feature layout");

    size_t left_eye = 0, right_eye = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (labels[static_cast<size_t>(y) * w + x] ==
                static_cast<uint8_t>(FaceAttribute::eyes)) {
                if (x + 0.5 < skin.cx)
                    ++left_eye;
                else
                    ++right_eye;
            }
    if (left_eye < min_eye || right_eye < min_eye)
        throw ValidationError("no face found: expected one eye on each side");

    bool has_background = false;
    for (uint8_t l : labels)
        if (l == static_cast<uint8_t>(FaceAttribute::background)) {
            has_background = true;
            break;
        }
    if (!has_background) throw ValidationError("no face found: mask has no background");
}

MaskImage build_mask(const RasterImage& image, std::vector<uint8_t> labels) {
    MaskImage mask;
    mask.height = image.height;
    mask.width = image.width;
    mask.composite = RasterImage::white(3, image.height, image.width);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            if (labels[static_cast<size_t>(y) * image.width + x] !=
                static_cast<uint8_t>(FaceAttribute::background))
                for (int c = 0; c < 3; ++c)
                    mask.composite.at(c, y, x) = image.at(c, y, x);
    mask.labels = std::move(labels);
    return mask;
}

// ---------------------------------------------------------------------------
// Builtin procedural backend

class BuiltinParser final : public FaceParser {
public:
    MaskImage parse(const RasterImage& image) override {
        std::vector<uint8_t> labels = classify_palette(image);
        const auto stats = region_stats(labels, image.height, image.width);
        require_face(stats, labels, image.height, image.width);
        return build_mask(image, std::move(labels));
    }
    std::string name() const override { return "builtin-parser"; }
};

class BuiltinLandmarker final : public FaceLandmarker {
public:
    std::vector<Vec2> landmarks68(const RasterImage& image) override {
        const int h = image.height, w = image.width;
        std::vector<uint8_t> labels = classify_palette(image);
        const auto stats = region_stats(labels, h, w);
        require_face(stats, labels, h, w);

        auto face_at = [&](double px, double py) {
            const int x = static_cast<int>(px), y = static_cast<int>(py);
            if (x < 0 || y < 0 || x >= w || y >= h) return false;
            return is_face_label(
                static_cast<FaceAttribute>(labels[static_cast<size_t>(y) * w + x]));
        };

        // Face centroid over the core attribute pixels.
        double fcx = 0.0, fcy = 0.0;
        size_t fcount = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (is_face_label(
                        static_cast<FaceAttribute>(labels[static_cast<size_t>(y) * w + x]))) {
                    fcx += x + 0.5;
                    fcy += y + 0.5;
                    ++fcount;
                }
        fcx /= static_cast<double>(fcount);
        fcy /= static_cast<double>(fcount);

        std::vector<Vec2> pts(68);
        auto set = [&](int i, double px, double py) {
            pts[static_cast<size_t>(i)] = Vec2{px / w, py / h};
        };

        // Jaw 0-16: rays from the face centroid sweeping left -> chin -> right,
        // stopping at the farthest face-labelled pixel.
        const double max_r = std::hypot(static_cast<double>(w), static_cast<double>(h));
        for (int t = 0; t <= 16; ++t) {
            const double alpha = M_PI - t * (M_PI / 16.0);
            const double dx = std::cos(alpha), dy = std::sin(alpha); // y grows downward
            double last_r = 0.0;
            for (double r = 0.0; r <= max_r; r += 0.5)
                if (face_at(fcx + r * dx, fcy + r * dy)) last_r = r;
            set(t, fcx + last_r * dx, fcy + last_r * dy);
        }

        // Brows 17-21 (viewer-left) and 22-26, sampled across each brow's width.
        auto brow_points = [&](bool left_side, int base) {
            RegionStats side{};
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    if (labels[static_cast<size_t>(y) * w + x] ==
                            static_cast<uint8_t>(FaceAttribute::eyebrows) &&
                        ((x + 0.5 < fcx) == left_side))
                        side.add(x, y);
            side.finish();
            if (side.count == 0) side = stat_of(stats, FaceAttribute::eyebrows);
            const double span = std::max(side.x1 - side.x0, 1.0);
            const double window = std::max(span / 8.0, 1.0);
            for (int i = 0; i < 5; ++i) {
                const double sx = side.x0 + span * i / 4.0;
                double sum_y = 0.0;
                size_t n = 0;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        if (labels[static_cast<size_t>(y) * w + x] ==
                                static_cast<uint8_t>(FaceAttribute::eyebrows) &&
                            ((x + 0.5 < fcx) == left_side) && std::abs(x + 0.5 - sx) <= window)
                            sum_y += y + 0.5, ++n;
                set(base + i, sx, n ? sum_y / static_cast<double>(n) : side.cy);
            }
        };
        brow_points(true, 17);
        brow_points(false, 22);

        // Nose ridge 27-30 down the nose midline; base 31-35 along its bottom.
        const RegionStats& nose = stat_of(stats, FaceAttribute::nose);
        const double nose_h = std::max(nose.y1 - nose.y0, 1.0);
        const double nose_w = std::max(nose.x1 - nose.x0, 1.0);
        for (int i = 0; i < 4; ++i)
            set(27 + i, nose.cx, nose.y0 + nose_h * (0.25 * i));
        for (int i = 0; i < 5; ++i)
            set(31 + i, nose.cx + nose_w * (-0.35 + 0.175 * i), nose.y1);

        // Eyes 36-41 (viewer-left) and 42-47: six points on each eye ellipse.
        auto eye_points = [&](bool left_side, int base) {
            RegionStats side{};
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    if (labels[static_cast<size_t>(y) * w + x] ==
                            static_cast<uint8_t>(FaceAttribute::eyes) &&
                        ((x + 0.5 < fcx) == left_side))
                        side.add(x, y);
            side.finish();
            const double cx = (side.x0 + side.x1) / 2.0, cy = (side.y0 + side.y1) / 2.0;
            const double a = std::max((side.x1 - side.x0) / 2.0, 1.0);
            const double b = std::max((side.y1 - side.y0) / 2.0, 1.0);
            const double angles[6] = {180.0, 120.0, 60.0, 0.0, 300.0, 240.0};
            for (int i = 0; i < 6; ++i) {
                const double th = angles[i] * M_PI / 180.0;
                set(base + i, cx + a * std::cos(th), cy - b * std::sin(th));
            }
        };
        eye_points(true, 36);
        eye_points(false, 42);

        // Lips: outer ring 48-59, inner ring 60-67 on scaled ellipses.
        const RegionStats& lips = stat_of(stats, FaceAttribute::lips);
        const double lcx = (lips.x0 + lips.x1) / 2.0, lcy = (lips.y0 + lips.y1) / 2.0;
        const double la = std::max((lips.x1 - lips.x0) / 2.0, 1.0);
        const double lb = std::max((lips.y1 - lips.y0) / 2.0, 1.0);
        const double outer[12] = {180, 150, 120, 90, 60, 30, 0, 330, 300, 270, 240, 210};
        for (int i = 0; i < 12; ++i) {
            const double th = outer[i] * M_PI / 180.0;
            set(48 + i, lcx + la * std::cos(th), lcy - lb * std::sin(th));
        }
        const double inner[8] = {180, 135, 90, 45, 0, 315, 270, 225};
        for (int i = 0; i < 8; ++i) {
            const double th = inner[i] * M_PI / 180.0;
            set(60 + i, lcx + 0.55 * la * std::cos(th), lcy - 0.45 * lb * std::sin(th));
        }
        return pts;
    }
    std::string name() const override { return "builtin-landmarker"; }
};

// ---------------------------------------------------------------------------
// ONNX backends via OpenCV DNN

std::string require_weights_file(const std::string& weights_dir, const std::string& file) {
    const std::filesystem::path p = std::filesystem::path(weights_dir) / file;
    if (!std::filesystem::exists(p)) throw WeightsError("weights not found: " + p.string());
    return p.string();
}

cv::Mat to_blob(const RasterImage& image, int size) {
    cv::Mat rgb(image.height, image.width, CV_32FC3);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            rgb.at<cv::Vec3f>(y, x) = cv::Vec3f(static_cast<float>(image.at(0, y, x)),
                                                static_cast<float>(image.at(1, y, x)),
                                                static_cast<float>(image.at(2, y, x)));
    cv::Mat resized;
    cv::resize(rgb, resized, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
    return cv::dnn::blobFromImage(resized);
}

// Coordinate-regression landmark model: input 1x3x192x192 RGB in [0,1],
// output 136 values interpreted as normalized (x, y) pairs.
class OnnxLandmarker final : public FaceLandmarker {
public:
    explicit OnnxLandmarker(const std::string& weights_dir)
        : path_(require_weights_file(weights_dir, "landmarks.onnx")),
          net_(cv::dnn::readNetFromONNX(path_)) {}

    std::vector<Vec2> landmarks68(const RasterImage& image) override {
        net_.setInput(to_blob(image, 192));
        cv::Mat out = net_.forward().reshape(1, 1);
        if (out.total() != 136)
            throw ValidationError("landmark model output has " + std::to_string(out.total()) +
                                  " values, expected 136");
        std::vector<Vec2> pts(68);
        for (int i = 0; i < 68; ++i)
            pts[static_cast<size_t>(i)] =
                Vec2{static_cast<double>(out.at<float>(0, 2 * i)),
                     static_cast<double>(out.at<float>(0, 2 * i + 1))};
        return pts;
    }
    std::string name() const override { return "onnx:" + path_; }

private:
    std::string path_;
    cv::dnn::Net net_;
};

// CelebAMask-HQ-style parsing model: input 1x3x512x512 RGB in [0,1], output
// 1x19xHxW logits. Class ids follow that dataset's convention.
class OnnxParser final : public FaceParser {
public:
    explicit OnnxParser(const std::string& weights_dir)
        : path_(require_weights_file(weights_dir, "face_parsing.onnx")),
          net_(cv::dnn::readNetFromONNX(path_)) {}

    MaskImage parse(const RasterImage& image) override {
        net_.setInput(to_blob(image, 512));
        cv::Mat out = net_.forward();
        if (out.dims != 4 || out.size[1] < 2)
            throw ValidationError("parsing model output is not a class-logit map");
        const int classes = out.size[1], oh = out.size[2], ow = out.size[3];

        cv::Mat label_map(oh, ow, CV_8UC1);
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                int best = 0;
                float best_v = -std::numeric_limits<float>::infinity();
                for (int c = 0; c < classes; ++c) {
                    const int idx[4] = {0, c, y, x};
                    const float v = out.at<float>(idx);
                    if (v > best_v) {
                        best_v = v;
                        best = c;
                    }
                }
                label_map.at<uint8_t>(y, x) = map_class(best);
            }
        cv::Mat resized;
        cv::resize(label_map, resized, cv::Size(image.width, image.height), 0, 0,
                   cv::INTER_NEAREST);

        std::vector<uint8_t> labels(static_cast<size_t>(image.height) * image.width);
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x)
                labels[static_cast<size_t>(y) * image.width + x] = resized.at<uint8_t>(y, x);

        bool any_fg = false, any_bg = false;
        for (uint8_t l : labels)
            (l == static_cast<uint8_t>(FaceAttribute::background) ? any_bg : any_fg) = true;
        if (!any_fg) throw ValidationError("no face found: parser labelled everything background");
        if (!any_bg) throw ValidationError("no face found: mask has no background");
        return build_mask(image, std::move(labels));
    }
    std::string name() const override { return "onnx:" + path_; }

private:
    static uint8_t map_class(int cls) {
        auto a = [](FaceAttribute x) { return static_cast<uint8_t>(x); };
        switch (cls) {
            case 1: return a(FaceAttribute::skin);
            case 2:
            case 3: return a(FaceAttribute::eyebrows);
            case 4:
            case 5: return a(FaceAttribute::eyes);
            case 6: return a(FaceAttribute::glasses);
            case 7:
            case 8:
            case 9: return a(FaceAttribute::ears);
            case 10: return a(FaceAttribute::nose);
            case 11:
            case 12:
            case 13: return a(FaceAttribute::lips);
            case 14:
            case 15: return a(FaceAttribute::neck);
            case 17: return a(FaceAttribute::hair);
            case 18: return a(FaceAttribute::hat);
            default: return a(FaceAttribute::background);
        }
    }

    std::string path_;
    cv::dnn::Net net_;
};

} // namespace

std::unique_ptr<FaceLandmarker> make_landmarker(const std::string& backend,
                                                const std::string& weights_dir) {
    if (backend == "builtin") return std::make_unique<BuiltinLandmarker>();
    if (backend == "onnx") return std::make_unique<OnnxLandmarker>(weights_dir);
    throw ValidationError("unknown model backend '" + backend + "'; available: builtin, onnx");
}

std::unique_ptr<FaceParser> make_parser(const std::string& backend,
                                        const std::string& weights_dir) {
    if (backend == "builtin") return std::make_unique<BuiltinParser>();
    if (backend == "onnx") return std::make_unique<OnnxParser>(weights_dir);
    throw ValidationError("unknown model backend '" + backend + "'; available: builtin, onnx");
}

KeypointPool detect_landmarks(const RasterImage& image, FaceLandmarker& landmarker,
                              size_t min_pool) {
    return densify_landmarks(landmarker.landmarks68(image), min_pool);
}

MaskImage parse_face(const RasterImage& image, FaceParser& parser) {
    MaskImage mask = parser.parse(image);
    if (mask.height != image.height || mask.width != image.width)
        throw ValidationError("parser returned a mask of the wrong resolution");
    return mask;
}

} // namespace facesketch
