#include "facesketch/diff_render.hpp"

#include <algorithm>
#include <cmath>

#include "facesketch/errors.hpp"

namespace facesketch {

double RenderGradients::max_abs() const {
    double m = 0.0;
    for (const auto& s : d_points) {
        for (const auto& p : s) {
            m = std::max({m, std::fabs(p.x), std::fabs(p.y)});
        }
    }
    return m;
}

bool RenderGradients::all_finite() const {
    for (const auto& s : d_points) {
        for (const auto& p : s) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
        }
    }
    return true;
}

namespace {

struct PixelRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0; // half-open
    bool empty() const { return x0 >= x1 || y0 >= y1; }
    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
};

// Per-stroke sampled polyline in pixel coordinates plus falloff constants.
//
// A pixel's coverage is the one-dimensional box integral of the falloff
// profile across the stroke: cov(d) = integral of profile(|d + t|) over
// t in [-1/2, 1/2], evaluated in closed form from the profile's
// antiderivative. The profile is a piecewise-quadratic smoothstep from 1 at
// the inner radius to 0 at the outer radius; its curvature is the smallest
// of any C1 ramp, and the box filter turns the curvature jumps into bounded
// third-derivative pulses, so the whole composition stays C2 in the control
// points and central finite differences track the analytic gradient even at
// coarse steps.
struct StrokeGeom {
    std::vector<Vec2> samples;                  // curve_samples points
    std::vector<std::array<double, 4>> bern;    // bernstein weights per sample
    PixelRect rect;
    double inner = 0.0;                         // full-coverage radius
    double outer = 1.0;                         // zero-coverage radius
    double band = 1.0;                          // outer - inner
    double tau = 0.05;                          // softmin temperature (px^2)
    double inv_tau = 20.0;
    double lse_cut = 2.0;                       // drop terms beyond this gap
    double floor2 = 0.0025;                     // hyperbola floor constant
    double reject = 1.0;                        // distance with surely zero coverage
    std::array<double, 3> darken = {0.0, 0.0, 0.0}; // opacity*(1-color_c)
};

// Quadratic smoothstep and its running integral on [0, 1].
double qstep(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (x <= 0.5) return 2.0 * x * x;
    const double y = 1.0 - x;
    return 1.0 - 2.0 * y * y;
}

double qstep_integral(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return x - 0.5;
    if (x <= 0.5) return (2.0 / 3.0) * x * x * x;
    const double y = 1.0 - x;
    return x - 0.5 + (2.0 / 3.0) * y * y * y;
}

StrokeGeom build_geom(const SketchCanvas& canvas, const Stroke& stroke,
                      const SoftRasterizer::Params& params) {
    StrokeGeom g;
    const double W = canvas.width_px;
    const double H = canvas.height_px;

    std::array<Vec2, 4> px;
    for (int i = 0; i < 4; ++i) {
        px[i] = {stroke.points[i].x * W, stroke.points[i].y * H};
    }

    const int n = std::max(2, params.curve_samples);
    g.samples.resize(n);
    g.bern.resize(n);
    for (int j = 0; j < n; ++j) {
        const double t = static_cast<double>(j) / static_cast<double>(n - 1);
        g.bern[j] = cubic_bernstein(t);
        g.samples[j] = cubic_bezier_point(px, t);
    }

    const double r = canvas.stroke_width_px(stroke) * 0.5;
    const double half_aa = params.aa_width_px * 0.5;
    g.inner = std::max(0.0, r - half_aa);
    g.outer = r + half_aa;
    g.band = g.outer - g.inner;
    g.tau = std::max(1e-6, params.softmin_tau);
    g.inv_tau = 1.0 / g.tau;
    g.lse_cut = 40.0 * g.tau;
    g.floor2 = g.tau * g.tau;
    // Support ends half a pixel past the outer radius; the soft minimum
    // undershoots the hard one by at most tau*ln(segments).
    const double support = g.outer + 0.5;
    g.reject =
        std::sqrt(support * support + g.tau * std::log(static_cast<double>(n - 1)));

    for (int c = 0; c < 3; ++c) {
        g.darken[c] = stroke.style.opacity * (1.0 - stroke.style.color[c]);
    }

    // Sample bounds plus the coverage support and the box-sample spread.
    double minx = g.samples[0].x, maxx = g.samples[0].x;
    double miny = g.samples[0].y, maxy = g.samples[0].y;
    for (const auto& p : g.samples) {
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    const double pad = g.reject + 0.5;
    g.rect.x0 = std::max(0, static_cast<int>(std::floor(minx - pad)));
    g.rect.y0 = std::max(0, static_cast<int>(std::floor(miny - pad)));
    g.rect.x1 = std::min(canvas.width_px, static_cast<int>(std::ceil(maxx + pad)) + 1);
    g.rect.y1 = std::min(canvas.height_px, static_cast<int>(std::ceil(maxy + pad)) + 1);
    return g;
}

// Reused per-segment buffers so the hot loops stay allocation-free.
struct SegScratch {
    std::vector<double> d2;
    std::vector<double> u;
};

struct SoftDist {
    double d2 = 0.0;   // soft minimum; can dip below zero near the curve
    double hard = 0.0; // hard minimum
    double norm = 1.0; // softmax normalizer
};

// Smooth minimum of squared distances to the sampled segments via log-sum-exp.
// A hard minimum has derivative jumps wherever the nearest segment changes
// (vertex bisectors, medial lines between curve branches); blending segments
// within a few tau of the minimum removes them at the cost of undershooting
// the true distance by at most tau*ln(segment count).
SoftDist soft_min_d2(const StrokeGeom& g, const Vec2& q, SegScratch& scr) {
    const size_t n = g.samples.size() - 1;
    scr.d2.resize(n);
    scr.u.resize(n);
    SoftDist out;
    out.hard = std::numeric_limits<double>::max();
    for (size_t j = 0; j < n; ++j) {
        const double d2 =
            point_segment_squared_distance(q, g.samples[j], g.samples[j + 1], &scr.u[j]);
        scr.d2[j] = d2;
        out.hard = std::min(out.hard, d2);
    }
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) {
        const double gap = scr.d2[j] - out.hard;
        if (gap <= g.lse_cut) sum += std::exp(-gap * g.inv_tau);
    }
    out.norm = sum;
    out.d2 = out.hard - g.tau * std::log(sum);
    return out;
}

// Falloff profile over transverse distance.
double falloff(const StrokeGeom& g, double t) {
    if (t <= g.inner) return 1.0;
    return 1.0 - qstep((t - g.inner) / g.band);
}

// Antiderivative of falloff(|t|); odd in t.
double falloff_integral(const StrokeGeom& g, double t) {
    const double a = std::fabs(t);
    double F;
    if (a <= g.inner) {
        F = a;
    } else if (a >= g.outer) {
        F = g.outer - 0.5 * g.band;
    } else {
        F = a - g.band * qstep_integral((a - g.inner) / g.band);
    }
    return t < 0.0 ? -F : F;
}

// Box-filtered coverage and its derivative with respect to the soft squared
// distance. The squared distance is floored by a smooth hyperbola before the
// square root, so log-sum-exp undershoot below zero stays differentiable.
double coverage_from_d2(const StrokeGeom& g, double d2_soft, double* deriv) {
    const double root = std::sqrt(d2_soft * d2_soft + g.floor2);
    const double d2p = 0.5 * (d2_soft + root);
    const double dc = std::sqrt(d2p);
    const double cov =
        falloff_integral(g, dc + 0.5) - falloff_integral(g, dc - 0.5);
    if (deriv) {
        const double slope = falloff(g, dc + 0.5) - falloff(g, std::fabs(dc - 0.5));
        *deriv = slope / (2.0 * dc) * 0.5 * (1.0 + d2_soft / root);
    }
    return cov;
}

} // namespace

RasterImage SoftRasterizer::forward(const SketchCanvas& canvas) const {
    RasterImage out = RasterImage::white(3, canvas.height_px, canvas.width_px);
    SegScratch scr;
    for (const auto& stroke : canvas.strokes) {
        const StrokeGeom g = build_geom(canvas, stroke, params_);
        if (g.rect.empty()) continue;
        const double reject2 = g.reject * g.reject;
        for (int y = g.rect.y0; y < g.rect.y1; ++y) {
            for (int x = g.rect.x0; x < g.rect.x1; ++x) {
                const Vec2 center{x + 0.5, y + 0.5};
                const SoftDist sd = soft_min_d2(g, center, scr);
                if (sd.hard >= reject2) continue;
                const double cov = coverage_from_d2(g, sd.d2, nullptr);
                if (cov <= 0.0) continue;
                for (int c = 0; c < 3; ++c) {
                    out.at(c, y, x) *= 1.0 - cov * g.darken[c];
                }
            }
        }
    }
    return out;
}

RenderGradients SoftRasterizer::backward(const SketchCanvas& canvas,
                                         const GradImage& loss_pixel_grad) const {
    if (loss_pixel_grad.channels != 3 || loss_pixel_grad.height != canvas.height_px ||
        loss_pixel_grad.width != canvas.width_px) {
        throw ValidationError("pixel gradient shape mismatch: expected 3x" +
                              std::to_string(canvas.height_px) + "x" +
                              std::to_string(canvas.width_px) + ", got " +
                              std::to_string(loss_pixel_grad.channels) + "x" +
                              std::to_string(loss_pixel_grad.height) + "x" +
                              std::to_string(loss_pixel_grad.width));
    }

    const size_t n_strokes = canvas.strokes.size();
    RenderGradients grads;
    grads.d_points.assign(n_strokes, {Vec2{}, Vec2{}, Vec2{}, Vec2{}});
    if (n_strokes == 0) return grads;

    SegScratch scr;

    // Pass 1: per-stroke coverage buffers plus the total product.
    struct CovBuffer {
        StrokeGeom geom;
        std::vector<double> cov; // rect-local
    };
    std::vector<CovBuffer> buffers(n_strokes);
    RasterImage total = RasterImage::white(3, canvas.height_px, canvas.width_px);

    for (size_t s = 0; s < n_strokes; ++s) {
        CovBuffer& buf = buffers[s];
        buf.geom = build_geom(canvas, canvas.strokes[s], params_);
        const PixelRect& rect = buf.geom.rect;
        if (rect.empty()) continue;
        const size_t area = static_cast<size_t>(rect.width()) * rect.height();
        buf.cov.assign(area, 0.0);
        const double reject2 = buf.geom.reject * buf.geom.reject;
        for (int y = rect.y0; y < rect.y1; ++y) {
            for (int x = rect.x0; x < rect.x1; ++x) {
                const size_t idx =
                    static_cast<size_t>(y - rect.y0) * rect.width() + (x - rect.x0);
                const Vec2 center{x + 0.5, y + 0.5};
                const SoftDist sd = soft_min_d2(buf.geom, center, scr);
                if (sd.hard >= reject2) continue;
                const double cov = coverage_from_d2(buf.geom, sd.d2, nullptr);
                if (cov <= 0.0) continue;
                buf.cov[idx] = cov;
                for (int c = 0; c < 3; ++c) {
                    total.at(c, y, x) *= 1.0 - cov * buf.geom.darken[c];
                }
            }
        }
    }

    // Pass 2: chain rule per stroke. d(out_c)/d(cov_s) is the product of the
    // other strokes' factors times -darken_c.
    for (size_t s = 0; s < n_strokes; ++s) {
        const CovBuffer& buf = buffers[s];
        const PixelRect& rect = buf.geom.rect;
        if (rect.empty()) continue;
        for (int y = rect.y0; y < rect.y1; ++y) {
            for (int x = rect.x0; x < rect.x1; ++x) {
                const size_t idx =
                    static_cast<size_t>(y - rect.y0) * rect.width() + (x - rect.x0);
                const double cov = buf.cov[idx];
                if (cov <= 0.0) continue;

                double d_loss_d_cov = 0.0;
                for (int c = 0; c < 3; ++c) {
                    const double gpix = loss_pixel_grad.at(c, y, x);
                    if (gpix == 0.0) continue;
                    const double factor = 1.0 - cov * buf.geom.darken[c];
                    double others;
                    if (factor > 1e-12) {
                        others = total.at(c, y, x) / factor;
                    } else {
                        others = 1.0;
                        for (size_t s2 = 0; s2 < n_strokes; ++s2) {
                            if (s2 == s) continue;
                            const CovBuffer& b2 = buffers[s2];
                            const PixelRect& r2 = b2.geom.rect;
                            if (x < r2.x0 || x >= r2.x1 || y < r2.y0 || y >= r2.y1) continue;
                            const size_t i2 =
                                static_cast<size_t>(y - r2.y0) * r2.width() + (x - r2.x0);
                            others *= 1.0 - b2.cov[i2] * b2.geom.darken[c];
                        }
                    }
                    d_loss_d_cov += gpix * (-buf.geom.darken[c]) * others;
                }
                if (d_loss_d_cov == 0.0) continue;

                // cov -> soft squared distance -> softmax-weighted segment
                // feet. The weights are the exact log-sum-exp derivative, so
                // no argmin is frozen anywhere.
                const Vec2 q{x + 0.5, y + 0.5};
                const SoftDist sd = soft_min_d2(buf.geom, q, scr);
                double d_cov_d_d2 = 0.0;
                coverage_from_d2(buf.geom, sd.d2, &d_cov_d_d2);
                if (d_cov_d_d2 == 0.0) continue;

                const double d_loss_d_d2 = d_loss_d_cov * d_cov_d_d2;
                const double inv_norm = 1.0 / sd.norm;
                const size_t n_seg = buf.geom.samples.size() - 1;
                for (size_t j = 0; j < n_seg; ++j) {
                    const double gap = scr.d2[j] - sd.hard;
                    if (gap > buf.geom.lse_cut) continue;
                    const double w_seg = std::exp(-gap * buf.geom.inv_tau) * inv_norm;
                    if (w_seg < 1e-12) continue;
                    const double u = scr.u[j];
                    const Vec2 a = buf.geom.samples[j];
                    const Vec2 b = buf.geom.samples[j + 1];
                    const Vec2 foot = a + (b - a) * u;
                    const double gx = -2.0 * (q.x - foot.x) * d_loss_d_d2 * w_seg;
                    const double gy = -2.0 * (q.y - foot.y) * d_loss_d_d2 * w_seg;
                    for (int i = 0; i < 4; ++i) {
                        const double w = (1.0 - u) * buf.geom.bern[j][i] +
                                         u * buf.geom.bern[j + 1][i];
                        grads.d_points[s][i].x += gx * w * canvas.width_px;
                        grads.d_points[s][i].y += gy * w * canvas.height_px;
                    }
                }
            }
        }
    }
    return grads;
}

std::unique_ptr<Rasterizer> make_rasterizer(const std::string& backend_key) {
    if (backend_key.empty() || backend_key == "reference") {
        return std::make_unique<SoftRasterizer>();
    }
    throw ValidationError("unknown rasterizer backend '" + backend_key +
                          "' (available: reference)");
}

CheckReport gradient_check(const Rasterizer& rasterizer, const SketchCanvas& canvas,
                           const PixelLossFn& loss, double h) {
    CheckReport report;
    const RasterImage base = rasterizer.forward(canvas);
    auto [base_loss, pixel_grad] = loss(base);
    (void)base_loss;
    const RenderGradients analytic = rasterizer.backward(canvas, pixel_grad);
    report.max_abs_gradient = analytic.max_abs();

    struct Entry {
        double fd = 0.0;
        double an = 0.0;
        int stroke = 0, point = 0, axis = 0;
    };
    std::vector<Entry> entries;
    entries.reserve(canvas.strokes.size() * 8);

    SketchCanvas work = canvas;
    for (size_t s = 0; s < canvas.strokes.size(); ++s) {
        for (int i = 0; i < 4; ++i) {
            for (int axis = 0; axis < 2; ++axis) {
                const Vec2 orig = canvas.strokes[s].points[i];
                Vec2 plus = orig, minus = orig;
                (axis == 0 ? plus.x : plus.y) += h;
                (axis == 0 ? minus.x : minus.y) -= h;

                work.strokes[s].points[i] = plus;
                const double lp = loss(rasterizer.forward(work)).first;
                work.strokes[s].points[i] = minus;
                const double lm = loss(rasterizer.forward(work)).first;
                work.strokes[s].points[i] = orig;

                Entry e;
                e.fd = (lp - lm) / (2.0 * h);
                e.an = axis == 0 ? analytic.d_points[s][i].x : analytic.d_points[s][i].y;
                e.stroke = static_cast<int>(s);
                e.point = i;
                e.axis = axis;
                entries.push_back(e);
            }
        }
    }

    // Errors are scaled by the largest gradient entry in the canvas. A purely
    // entrywise quotient would be dominated by coordinates whose true gradient
    // is near zero, where the finite difference carries only truncation noise.
    double scale = 1e-9;
    for (const Entry& e : entries) {
        scale = std::max({scale, std::fabs(e.fd), std::fabs(e.an)});
    }
    for (const Entry& e : entries) {
        const double rel = std::fabs(e.fd - e.an) / scale;
        report.rel_errors.push_back(rel);
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_stroke = e.stroke;
            report.worst_point = e.point;
            report.worst_axis = e.axis;
            report.analytic_at_worst = e.an;
            report.fd_at_worst = e.fd;
        }
    }
    return report;
}

} // namespace facesketch
