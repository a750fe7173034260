#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "facesketch/geometry.hpp"

namespace facesketch {

enum class RoundTag : uint8_t { face, contour };

inline const char* round_tag_name(RoundTag t) {
    return t == RoundTag::face ? "face" : "contour";
}

// Stroke width is stored in normalized canvas units; rendered width in pixels
// is width * min(width_px, height_px).
inline constexpr double kDefaultStrokeWidth = 1.5 / 224.0;

struct StrokeStyle {
    double width = kDefaultStrokeWidth;
    std::array<double, 3> color = {0.0, 0.0, 0.0};
    double opacity = 1.0;

    bool operator==(const StrokeStyle&) const = default;
};

// One cubic Bezier with render style. Control points clamp on write.
struct Stroke {
    std::array<Vec2, 4> points;
    StrokeStyle style;
    RoundTag tag = RoundTag::face;

    Stroke() = default;
    Stroke(const std::array<Vec2, 4>& pts, RoundTag t, StrokeStyle s = {}) : style(s), tag(t) {
        for (int i = 0; i < 4; ++i) points[i] = clamp_control_point(pts[i]);
    }

    void set_point(int i, const Vec2& p) { points[i] = clamp_control_point(p); }

    bool same_geometry(const Stroke& o) const {
        for (int i = 0; i < 4; ++i) {
            if (!(points[i] == o.points[i])) return false;
        }
        return true;
    }
};

// Ordered stroke collection; face strokes precede contour strokes and order
// within each group follows keypoint selection order.
struct SketchCanvas {
    std::vector<Stroke> strokes;
    int width_px = 224;
    int height_px = 224;

    bool empty() const { return strokes.empty(); }
    size_t size() const { return strokes.size(); }

    double stroke_width_px(const Stroke& s) const {
        return s.style.width * static_cast<double>(std::min(width_px, height_px));
    }

    size_t count_tag(RoundTag t) const {
        size_t n = 0;
        for (const auto& s : strokes) {
            if (s.tag == t) ++n;
        }
        return n;
    }
};

// Style re-render request: optional global fields plus per-stroke overrides
// keyed by stroke index. Unset fields keep the stroke's current value.
struct StyleOverride {
    std::optional<double> width;
    std::optional<std::array<double, 3>> color;
    std::optional<double> opacity;
};

struct StyleSpec {
    std::optional<double> width;
    std::optional<std::array<double, 3>> color;
    std::optional<double> opacity;
    std::map<size_t, StyleOverride> overrides;
};

// Applies a StyleSpec; geometry is copied bit-exactly. Throws ValidationError
// on out-of-range values or override indices.
SketchCanvas apply_style(const SketchCanvas& canvas, const StyleSpec& style);

// Reads a StyleSpec from its JSON file form (see README for the schema).
StyleSpec load_style_spec(const std::string& path);

} // namespace facesketch
