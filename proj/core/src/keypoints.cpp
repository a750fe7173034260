#include "facesketch/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "facesketch/errors.hpp"

namespace facesketch {

void KeypointPool::push(const Vec2& p, Provenance prov, std::string meta) {
    points.push_back(p);
    provenance.push_back(prov);
    source_meta.push_back(std::move(meta));
}

double MaskImage::foreground_fraction() const {
    if (labels.empty()) return 0.0;
    size_t fg = 0;
    for (uint8_t l : labels)
        if (l != static_cast<uint8_t>(FaceAttribute::background)) ++fg;
    return static_cast<double>(fg) / static_cast<double>(labels.size());
}

KeypointPool dedup_pool(const KeypointPool& pool, double min_dist) {
    KeypointPool out;
    const double d2min = min_dist * min_dist;
    for (size_t i = 0; i < pool.size(); ++i) {
        bool keep = true;
        for (const Vec2& q : out.points) {
            if ((pool.points[i] - q).squared_norm() < d2min) {
                keep = false;
                break;
            }
        }
        if (keep) out.push(pool.points[i], pool.provenance[i], pool.source_meta[i]);
    }
    return out;
}

void AbstractionConfig::validate() const {
    if (n_face < 1)
        throw ValidationError("n_face must be at least 1, got " + std::to_string(n_face));
    if (n_contour < 0)
        throw ValidationError("n_contour must be non-negative, got " + std::to_string(n_contour));
}

std::vector<size_t> fps_select_indices(const KeypointPool& pool, int n) {
    if (n < 0) throw ValidationError("cannot select a negative number of points");
    const size_t want = static_cast<size_t>(n);
    if (want > pool.size())
        throw ValidationError("pool exhausted: requested " + std::to_string(want) +
                              " points from pool of " + std::to_string(pool.size()));
    std::vector<size_t> picked;
    if (want == 0) return picked;
    picked.reserve(want);

    Vec2 centroid{0.0, 0.0};
    for (const Vec2& p : pool.points) centroid += p;
    centroid = centroid * (1.0 / static_cast<double>(pool.size()));

    size_t first = 0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < pool.size(); ++i) {
        const double d2 = (pool.points[i] - centroid).squared_norm();
        if (d2 < best) {
            best = d2;
            first = i;
        }
    }
    picked.push_back(first);

    std::vector<double> min_d2(pool.size());
    for (size_t i = 0; i < pool.size(); ++i)
        min_d2[i] = (pool.points[i] - pool.points[first]).squared_norm();

    while (picked.size() < want) {
        size_t next = 0;
        double far = -1.0;
        for (size_t i = 0; i < pool.size(); ++i) {
            if (min_d2[i] > far) {
                far = min_d2[i];
                next = i;
            }
        }
        picked.push_back(next);
        for (size_t i = 0; i < pool.size(); ++i)
            min_d2[i] = std::min(min_d2[i], (pool.points[i] - pool.points[next]).squared_norm());
    }
    return picked;
}

std::vector<Vec2> fps_select(const KeypointPool& pool, int n, uint64_t /*seed*/) {
    std::vector<Vec2> out;
    for (size_t idx : fps_select_indices(pool, n)) out.push_back(pool.points[idx]);
    return out;
}

double covering_radius(const KeypointPool& pool, const std::vector<Vec2>& selected) {
    if (selected.empty()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (const Vec2& p : pool.points) {
        double near = std::numeric_limits<double>::infinity();
        for (const Vec2& s : selected) near = std::min(near, (p - s).squared_norm());
        worst = std::max(worst, near);
    }
    return std::sqrt(worst);
}

std::vector<Stroke> init_strokes(const std::vector<Vec2>& seeds, RoundTag tag, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Stroke> strokes;
    strokes.reserve(seeds.size());
    for (const Vec2& s : seeds) {
        std::array<Vec2, 4> pts;
        pts[0] = s;
        for (int i = 1; i < 4; ++i) {
            const double dx = uniform_in(rng, -kInitOffsetRange, kInitOffsetRange);
            const double dy = uniform_in(rng, -kInitOffsetRange, kInitOffsetRange);
            pts[i] = Vec2{s.x + dx, s.y + dy};
        }
        strokes.emplace_back(pts, tag);
    }
    return strokes;
}

KeypointPool extract_contour_points(const MaskImage& mask, const ContourConfig& cfg) {
    if (mask.composite.data.empty())
        throw ValidationError("empty contour: mask composite has no pixels");
    const int h = mask.composite.height;
    const int w = mask.composite.width;

    const std::vector<double> gray = to_gray(mask.composite);
    cv::Mat gray8(h, w, CV_8UC1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            gray8.at<uint8_t>(y, x) = cv::saturate_cast<uint8_t>(
                gray[static_cast<size_t>(y) * w + x] * 255.0);

    // Canny's internal magnitude with L2gradient=false is |gx| + |gy|, so
    // scale the fractional thresholds by the max L1 Sobel magnitude.
    cv::Mat gx, gy;
    cv::Sobel(gray8, gx, CV_64F, 1, 0, 3);
    cv::Sobel(gray8, gy, CV_64F, 0, 1, 3);
    double max_mag = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            max_mag = std::max(max_mag, std::abs(gx.at<double>(y, x)) + std::abs(gy.at<double>(y, x)));
    if (max_mag <= 0.0)
        throw ValidationError("empty contour: mask composite is constant");

    cv::Mat edges;
    cv::Canny(gray8, edges, cfg.canny_low * max_mag, cfg.canny_high * max_mag, 3, false);

    std::vector<Vec2> pts;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (edges.at<uint8_t>(y, x))
                pts.push_back(Vec2{(x + 0.5) / w, (y + 0.5) / h});
    if (pts.empty()) throw ValidationError("empty contour: no edges detected in mask composite");

    size_t stride = 1;
    if (cfg.max_points > 0 && pts.size() > static_cast<size_t>(cfg.max_points))
        stride = (pts.size() + cfg.max_points - 1) / static_cast<size_t>(cfg.max_points);

    KeypointPool pool;
    for (size_t i = 0; i < pts.size(); i += stride)
        pool.push(pts[i], Provenance::contour_edge, "edge");
    return dedup_pool(pool);
}

namespace {

struct LandmarkRun {
    const char* name;
    int begin; // inclusive
    int end;   // inclusive
    bool closed;
};

// Canonical 68-point layout: contiguous index runs per facial feature.
constexpr LandmarkRun kRuns[] = {
    {"jaw", 0, 16, false},       {"right_brow", 17, 21, false},
    {"left_brow", 22, 26, false}, {"nose_ridge", 27, 30, false},
    {"nose_base", 31, 35, false}, {"right_eye", 36, 41, true},
    {"left_eye", 42, 47, true},   {"lip_outer", 48, 59, true},
    {"lip_inner", 60, 67, true},
};

std::vector<Vec2> midpoint_round(const std::vector<Vec2>& poly, bool closed) {
    std::vector<Vec2> out;
    out.reserve(poly.size() * 2);
    for (size_t i = 0; i < poly.size(); ++i) {
        out.push_back(poly[i]);
        const bool last = (i + 1 == poly.size());
        if (last && !closed) break;
        const Vec2& next = poly[last ? 0 : i + 1];
        out.push_back((poly[i] + next) * 0.5);
    }
    return out;
}

} // namespace

KeypointPool densify_landmarks(const std::vector<Vec2>& base68, size_t min_points) {
    if (base68.size() != 68)
        throw ValidationError("landmark densification expects 68 points, got " +
                              std::to_string(base68.size()));
    std::vector<std::vector<Vec2>> polys;
    std::vector<bool> closed;
    for (const LandmarkRun& run : kRuns) {
        std::vector<Vec2> poly(base68.begin() + run.begin, base68.begin() + run.end + 1);
        polys.push_back(std::move(poly));
        closed.push_back(run.closed);
    }

    auto assemble = [&] {
        KeypointPool pool;
        for (size_t i = 0; i < polys.size(); ++i)
            for (const Vec2& p : polys[i])
                pool.push(p, Provenance::facial_landmark, kRuns[i].name);
        return dedup_pool(pool);
    };

    KeypointPool pool = assemble();
    for (int round = 0; pool.size() < min_points && round < 16; ++round) {
        for (size_t i = 0; i < polys.size(); ++i)
            polys[i] = midpoint_round(polys[i], closed[i]);
        pool = assemble();
    }
    return pool;
}

} // namespace facesketch
