#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facesketch/geometry.hpp"
#include "facesketch/image.hpp"
#include "facesketch/stroke.hpp"

namespace facesketch {

enum class Provenance : uint8_t { facial_landmark, contour_edge };

// Candidate seed positions in [0,1]^2 with their origin. Pools are
// deduplicated: no two points closer than kPoolDedupDistance.
struct KeypointPool {
    std::vector<Vec2> points;
    std::vector<Provenance> provenance;
    std::vector<std::string> source_meta;

    size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    void push(const Vec2& p, Provenance prov, std::string meta);
};

inline constexpr double kPoolDedupDistance = 1e-4;

// Drops points closer than min_dist to an earlier point; keeps first
// occurrence order.
KeypointPool dedup_pool(const KeypointPool& pool, double min_dist = kPoolDedupDistance);

// Stroke budget split: n_face strokes seeded at facial landmarks (round 1)
// and n_contour strokes seeded at mask-contour edges (round 2).
struct AbstractionConfig {
    int n_face = 0;
    int n_contour = 0;
    uint64_t seed = 0;

    int total() const { return n_face + n_contour; }
    void validate() const;
};

// Farthest point sampling. The first selection is the pool point nearest the
// pool centroid; each next point maximizes its minimum distance to the
// selected set; ties break toward the lowest pool index. The seed parameter
// is accepted for interface uniformity but the selection is deterministic.
// Throws ValidationError("pool exhausted ...") when n exceeds the pool.
std::vector<Vec2> fps_select(const KeypointPool& pool, int n, uint64_t seed = 0);

// Index-returning variant used by tests and the coverage diagnostics.
std::vector<size_t> fps_select_indices(const KeypointPool& pool, int n);

// Max over pool points of the distance to the nearest selected point.
double covering_radius(const KeypointPool& pool, const std::vector<Vec2>& selected);

// One stroke per seed: control point 1 sits exactly on the seed, points 2-4
// add independent uniform offsets in [-0.05, 0.05]^2 from the seeded RNG.
std::vector<Stroke> init_strokes(const std::vector<Vec2>& seeds, RoundTag tag, uint64_t seed);

inline constexpr double kInitOffsetRange = 0.05;

// Canny thresholds as fractions of the maximum gradient magnitude.
struct ContourConfig {
    double canny_low = 0.1;
    double canny_high = 0.2;
    int max_points = 4096;
};

// Face-parsing output: per-pixel attribute labels plus the masked composite
// (foreground attributes on a white background).
enum class FaceAttribute : uint8_t {
    background = 0,
    skin,
    nose,
    eyes,
    eyebrows,
    ears,
    lips,
    hair,
    hat,
    glasses,
    neck,
};

struct MaskImage {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> labels; // FaceAttribute per pixel, row-major
    RasterImage composite;

    FaceAttribute label_at(int y, int x) const {
        return static_cast<FaceAttribute>(labels[static_cast<size_t>(y) * width + x]);
    }
    double foreground_fraction() const;
};

// Edge keypoints of the masked composite via Canny, subsampled by uniform
// stride to at most cfg.max_points, then deduplicated. Throws
// ValidationError("empty contour") when no edges are found.
KeypointPool extract_contour_points(const MaskImage& mask, const ContourConfig& cfg = {});

// Midpoint densification of the 68-landmark layout along its semantic
// polylines (jaw, brows, nose, eyes, lips), repeated until the deduplicated
// pool holds at least min_points. Input must be the canonical 68-point
// ordering; source_meta names the feature each point belongs to.
KeypointPool densify_landmarks(const std::vector<Vec2>& base68, size_t min_points = 256);

} // namespace facesketch
