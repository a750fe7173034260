#include "facesketch/raster_preview.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace facesketch {

namespace {

// Recursive flatness-based subdivision, tolerance in pixels.
void flatten_bezier(const std::array<Vec2, 4>& p, double tol, int depth,
                    std::vector<Vec2>& out) {
    const double d1 = point_segment_squared_distance(p[1], p[0], p[3]);
    const double d2 = point_segment_squared_distance(p[2], p[0], p[3]);
    if (depth >= 16 || std::max(d1, d2) <= tol * tol) {
        out.push_back(p[3]);
        return;
    }
    // De Casteljau split at t = 0.5.
    const Vec2 p01 = (p[0] + p[1]) * 0.5;
    const Vec2 p12 = (p[1] + p[2]) * 0.5;
    const Vec2 p23 = (p[2] + p[3]) * 0.5;
    const Vec2 p012 = (p01 + p12) * 0.5;
    const Vec2 p123 = (p12 + p23) * 0.5;
    const Vec2 mid = (p012 + p123) * 0.5;
    flatten_bezier({p[0], p01, p012, mid}, tol, depth + 1, out);
    flatten_bezier({mid, p123, p23, p[3]}, tol, depth + 1, out);
}

double polyline_distance2(const std::vector<Vec2>& pts, const Vec2& q) {
    if (pts.size() == 1) return squared_distance(pts[0], q);
    double best = std::numeric_limits<double>::max();
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        best = std::min(best, point_segment_squared_distance(q, pts[i], pts[i + 1]));
    }
    return best;
}

} // namespace

RasterImage raster_preview(const SketchCanvas& canvas, int supersample) {
    RasterImage out = RasterImage::white(3, canvas.height_px, canvas.width_px);
    const double W = canvas.width_px;
    const double H = canvas.height_px;
    const int ss = std::max(1, supersample);
    const double inv_ss = 1.0 / static_cast<double>(ss);

    for (const auto& stroke : canvas.strokes) {
        std::array<Vec2, 4> px;
        for (int i = 0; i < 4; ++i) {
            px[i] = {stroke.points[i].x * W, stroke.points[i].y * H};
        }
        std::vector<Vec2> poly;
        poly.push_back(px[0]);
        flatten_bezier(px, 0.1, 0, poly);

        // Threshold at the half-coverage radius of the soft falloff profile:
        // the box-filtered profile is symmetric about the nominal radius, with
        // a half-pixel floor so sub-pixel strokes still draw.
        const double r = canvas.stroke_width_px(stroke) * 0.5;
        const double r_eff = std::max(r, 0.5);
        const double r2 = r_eff * r_eff;

        double minx = px[0].x, maxx = px[0].x, miny = px[0].y, maxy = px[0].y;
        for (int i = 1; i < 4; ++i) {
            minx = std::min(minx, px[i].x);
            maxx = std::max(maxx, px[i].x);
            miny = std::min(miny, px[i].y);
            maxy = std::max(maxy, px[i].y);
        }
        const double pad = r_eff + 1.0;
        const int x0 = std::max(0, static_cast<int>(std::floor(minx - pad)));
        const int y0 = std::max(0, static_cast<int>(std::floor(miny - pad)));
        const int x1 = std::min(canvas.width_px, static_cast<int>(std::ceil(maxx + pad)) + 1);
        const int y1 = std::min(canvas.height_px, static_cast<int>(std::ceil(maxy + pad)) + 1);

        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                int hits = 0;
                for (int sy = 0; sy < ss; ++sy) {
                    for (int sx = 0; sx < ss; ++sx) {
                        const Vec2 q{x + (sx + 0.5) * inv_ss, y + (sy + 0.5) * inv_ss};
                        if (polyline_distance2(poly, q) <= r2) ++hits;
                    }
                }
                if (hits == 0) continue;
                const double cov = hits / static_cast<double>(ss * ss);
                for (int c = 0; c < 3; ++c) {
                    const double darken = stroke.style.opacity * (1.0 - stroke.style.color[c]);
                    out.at(c, y, x) *= 1.0 - cov * darken;
                }
            }
        }
    }
    return out;
}

} // namespace facesketch
