#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "facesketch/image.hpp"
#include "facesketch/stroke.hpp"

namespace facesketch {

// Gradients of a scalar loss with respect to every control-point coordinate,
// in normalized canvas units. Shape matches the canvas: strokes x 4 points.
struct RenderGradients {
    std::vector<std::array<Vec2, 4>> d_points;

    size_t stroke_count() const { return d_points.size(); }
    double max_abs() const;
    bool all_finite() const;
};

// Rasterization contract used by the optimizer: a forward render plus the
// adjoint that pulls per-pixel loss gradients back to control points.
class Rasterizer {
public:
    virtual ~Rasterizer() = default;

    // Anti-aliased composite of all strokes over a white background at the
    // canvas resolution. Deterministic for equal input.
    virtual RasterImage forward(const SketchCanvas& canvas) const = 0;

    // Gradients of the scalar loss implied by loss_pixel_grad. Throws
    // ValidationError on shape mismatch with the forward output.
    virtual RenderGradients backward(const SketchCanvas& canvas,
                                     const GradImage& loss_pixel_grad) const = 0;

    virtual std::string name() const = 0;
};

// Self-contained reference backend. Coverage comes from the distance to the
// stroke's sampled polyline (curve_samples points per curve) through a
// compact-support smoothstep falloff whose band is widened by the one-pixel
// footprint, approximating box-filtered pixel coverage with a single center
// evaluation; strokes composite multiplicatively toward black. The distance
// is a smooth (log-sum-exp) minimum over the polyline segments, so the
// coverage field is differentiable even where the nearest segment changes,
// and backward applies the exact derivative of the forward map.
class SoftRasterizer final : public Rasterizer {
public:
    struct Params {
        double aa_width_px = 1.0;  // falloff band width in pixels
        int curve_samples = 64;    // dense parameter samples per curve
        double softmin_tau = 0.05; // segment softmin temperature (px^2)
    };

    SoftRasterizer() = default;
    explicit SoftRasterizer(Params params) : params_(params) {}

    RasterImage forward(const SketchCanvas& canvas) const override;
    RenderGradients backward(const SketchCanvas& canvas,
                             const GradImage& loss_pixel_grad) const override;
    std::string name() const override { return "reference"; }

    const Params& params() const { return params_; }

private:
    Params params_;
};

// Resolves a backend by config key. "reference" is built in; unknown keys
// raise ValidationError listing the available backends.
std::unique_ptr<Rasterizer> make_rasterizer(const std::string& backend_key);

// Scalar loss of a rendered image together with its per-pixel gradient.
using PixelLossFn = std::function<std::pair<double, GradImage>(const RasterImage&)>;

// Result of comparing backward against central finite differences over all
// control-point coordinates of a canvas. Per-entry errors are scaled by the
// largest gradient entry of the canvas rather than entrywise, so coordinates
// whose true gradient is near zero are judged against the problem's gradient
// scale instead of against finite-difference truncation noise.
struct CheckReport {
    double max_rel_error = 0.0;
    double max_abs_gradient = 0.0;
    int worst_stroke = -1;
    int worst_point = -1;
    int worst_axis = -1; // 0 = x, 1 = y
    double analytic_at_worst = 0.0;
    double fd_at_worst = 0.0;
    std::vector<double> rel_errors; // stroke-major, then point, then axis
};

// Finite-difference harness for small canvases. h is the central-difference
// step in normalized units; the default sits inside the asymptotic regime for
// 32x32 canvases (truncation shrinks as h^2 down to roughly 1e-6) while
// staying far above double-precision roundoff.
CheckReport gradient_check(const Rasterizer& rasterizer, const SketchCanvas& canvas,
                           const PixelLossFn& loss, double h = 1e-4);

} // namespace facesketch
