#include "facesketch/perceptual_loss.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "facesketch/errors.hpp"
#include "facesketch/geometry.hpp"

namespace facesketch {

EmbeddingDistance embedding_distance_from_string(const std::string& s) {
    if (s == "cosine") return EmbeddingDistance::cosine;
    if (s == "l2") return EmbeddingDistance::l2;
    throw ValidationError("unknown embedding distance '" + s + "' (expected cosine or l2)");
}

std::vector<CropTransform> sample_crop_transforms(int n, int height, int width,
                                                  double scale_min, double scale_max,
                                                  uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<CropTransform> out;
    out.reserve(static_cast<size_t>(std::max(0, n)));
    const int short_side = std::min(height, width);
    for (int i = 0; i < n; ++i) {
        const double scale = uniform_in(rng, scale_min, scale_max);
        int size = static_cast<int>(std::lround(scale * short_side));
        size = std::clamp(size, 1, short_side);
        const int max_x = width - size;
        const int max_y = height - size;
        CropTransform t;
        t.size = size;
        t.x0 = max_x > 0 ? static_cast<int>(rng() % static_cast<uint64_t>(max_x + 1)) : 0;
        t.y0 = max_y > 0 ? static_cast<int>(rng() % static_cast<uint64_t>(max_y + 1)) : 0;
        out.push_back(t);
    }
    return out;
}

namespace {

struct BilinearTap {
    int x0, x1, y0, y1;
    double wx, wy; // weight of x1/y1 side
};

BilinearTap tap_for(int ox, int oy, const CropTransform& t, int out_w, int out_h) {
    const double sx = static_cast<double>(t.size) / out_w;
    const double sy = static_cast<double>(t.size) / out_h;
    double src_x = (ox + 0.5) * sx - 0.5;
    double src_y = (oy + 0.5) * sy - 0.5;
    src_x = std::clamp(src_x, 0.0, static_cast<double>(t.size - 1));
    src_y = std::clamp(src_y, 0.0, static_cast<double>(t.size - 1));
    BilinearTap b;
    b.x0 = static_cast<int>(std::floor(src_x));
    b.y0 = static_cast<int>(std::floor(src_y));
    b.x1 = std::min(b.x0 + 1, t.size - 1);
    b.y1 = std::min(b.y0 + 1, t.size - 1);
    b.wx = src_x - b.x0;
    b.wy = src_y - b.y0;
    b.x0 += t.x0;
    b.x1 += t.x0;
    b.y0 += t.y0;
    b.y1 += t.y0;
    return b;
}

} // namespace

RasterImage apply_crop_resize(const RasterImage& img, const CropTransform& t) {
    RasterImage out(img.channels, img.height, img.width);
    for (int oy = 0; oy < img.height; ++oy) {
        for (int ox = 0; ox < img.width; ++ox) {
            const BilinearTap b = tap_for(ox, oy, t, img.width, img.height);
            for (int c = 0; c < img.channels; ++c) {
                const double v00 = img.at(c, b.y0, b.x0);
                const double v01 = img.at(c, b.y0, b.x1);
                const double v10 = img.at(c, b.y1, b.x0);
                const double v11 = img.at(c, b.y1, b.x1);
                const double top = v00 * (1.0 - b.wx) + v01 * b.wx;
                const double bot = v10 * (1.0 - b.wx) + v11 * b.wx;
                out.at(c, oy, ox) = top * (1.0 - b.wy) + bot * b.wy;
            }
        }
    }
    return out;
}

GradImage crop_resize_adjoint(const GradImage& grad_out, const CropTransform& t,
                              int full_height, int full_width) {
    GradImage out(grad_out.channels, full_height, full_width);
    for (int oy = 0; oy < grad_out.height; ++oy) {
        for (int ox = 0; ox < grad_out.width; ++ox) {
            const BilinearTap b = tap_for(ox, oy, t, grad_out.width, grad_out.height);
            for (int c = 0; c < grad_out.channels; ++c) {
                const double g = grad_out.at(c, oy, ox);
                if (g == 0.0) continue;
                out.at(c, b.y0, b.x0) += g * (1.0 - b.wx) * (1.0 - b.wy);
                out.at(c, b.y0, b.x1) += g * b.wx * (1.0 - b.wy);
                out.at(c, b.y1, b.x0) += g * (1.0 - b.wx) * b.wy;
                out.at(c, b.y1, b.x1) += g * b.wx * b.wy;
            }
        }
    }
    return out;
}

namespace {

// One augmentation pass of the semantic loss; accumulates into loss/grad.
void semantic_pass(const RasterImage& target_view, const RasterImage& sketch_view,
                   const Encoder& encoder, EmbeddingDistance dist, double weight,
                   double* loss_acc, GradImage* view_grad_acc) {
    const EncoderActivations acts_t = encoder.forward(target_view);
    const EncoderActivations acts_s = encoder.forward(sketch_view);

    double loss = 0.0;
    std::vector<double> emb_cot(acts_s.embedding.size(), 0.0);
    const auto& et = acts_t.embedding;
    const auto& es = acts_s.embedding;
    if (dist == EmbeddingDistance::cosine) {
        double dot = 0.0;
        for (size_t i = 0; i < et.size(); ++i) dot += et[i] * es[i];
        loss += 1.0 - dot;
        for (size_t i = 0; i < et.size(); ++i) emb_cot[i] = -et[i];
    } else {
        for (size_t i = 0; i < et.size(); ++i) {
            const double d = es[i] - et[i];
            loss += d * d;
            emb_cot[i] = 2.0 * d;
        }
    }

    std::vector<Tensor> tap_cots(acts_s.tap_count());
    for (size_t l = 0; l < acts_s.tap_count(); ++l) {
        const Tensor& ft = acts_t.tap(l);
        const Tensor& fs = acts_s.tap(l);
        const double inv_n = 1.0 / static_cast<double>(fs.size());
        Tensor cot(fs.channels, fs.height, fs.width);
        double mse = 0.0;
        for (size_t i = 0; i < fs.v.size(); ++i) {
            const double d = fs.v[i] - ft.v[i];
            mse += d * d;
            cot.v[i] = 2.0 * d * inv_n;
        }
        loss += mse * inv_n;
        tap_cots[l] = std::move(cot);
    }

    const GradImage g = encoder.backward_to_input(acts_s, tap_cots, emb_cot);
    *loss_acc += weight * loss;
    for (size_t i = 0; i < view_grad_acc->data.size(); ++i) {
        view_grad_acc->data[i] += weight * g.data[i];
    }
}

} // namespace

std::pair<double, GradImage> semantic_loss(const RasterImage& target,
                                           const RasterImage& sketch,
                                           const Encoder& encoder,
                                           const SemanticLossOptions& opt) {
    if (!target.same_shape(sketch)) {
        throw ValidationError("semantic loss inputs must share resolution");
    }
    if (encoder.layer_count() == 0) {
        throw ValidationError("semantic encoder not loaded");
    }

    double loss = 0.0;
    GradImage grad(sketch.channels, sketch.height, sketch.width);

    if (opt.n_aug <= 0) {
        semantic_pass(target, sketch, encoder, opt.dist, 1.0, &loss, &grad);
        return {loss, std::move(grad)};
    }

    const auto transforms =
        sample_crop_transforms(opt.n_aug, sketch.height, sketch.width, opt.crop_scale_min,
                               opt.crop_scale_max, opt.seed);
    const double weight = 1.0 / static_cast<double>(transforms.size());
    for (const auto& t : transforms) {
        const RasterImage target_view = apply_crop_resize(target, t);
        const RasterImage sketch_view = apply_crop_resize(sketch, t);
        double view_loss = 0.0;
        GradImage view_grad(sketch.channels, sketch.height, sketch.width);
        semantic_pass(target_view, sketch_view, encoder, opt.dist, 1.0, &view_loss,
                      &view_grad);
        loss += weight * view_loss;
        const GradImage back = crop_resize_adjoint(view_grad, t, sketch.height, sketch.width);
        for (size_t i = 0; i < grad.data.size(); ++i) {
            grad.data[i] += weight * back.data[i];
        }
    }
    return {loss, std::move(grad)};
}

std::pair<double, GradImage> structure_loss(const RasterImage& mask_composite,
                                            const RasterImage& sketch,
                                            const Encoder& encoder) {
    if (!mask_composite.same_shape(sketch)) {
        throw ValidationError("structure loss inputs must share resolution");
    }
    if (encoder.layer_count() == 0) {
        throw ValidationError("structure encoder not loaded");
    }

    const EncoderActivations acts_t = encoder.forward(mask_composite);
    const EncoderActivations acts_s = encoder.forward(sketch);
    const auto& metric = encoder.metric_weights();
    for (size_t l = 0; l < acts_s.tap_count() && !metric.empty(); ++l) {
        if (metric[l].size() != static_cast<size_t>(acts_s.tap(l).channels)) {
            throw ValidationError("metric weight channels mismatch at tap " +
                                  std::to_string(l));
        }
    }

    constexpr double kNormEps = 1e-10;
    double loss = 0.0;
    std::vector<Tensor> tap_cots(acts_s.tap_count());

    for (size_t l = 0; l < acts_s.tap_count(); ++l) {
        const Tensor& ft = acts_t.tap(l);
        const Tensor& fs = acts_s.tap(l);
        const int C = fs.channels;
        const double inv_hw = 1.0 / (static_cast<double>(fs.height) * fs.width);
        Tensor cot(C, fs.height, fs.width);

        std::vector<double> fhat_t(C), fhat_s(C), g_hat(C);
        for (int y = 0; y < fs.height; ++y) {
            for (int x = 0; x < fs.width; ++x) {
                double st = kNormEps, ss = kNormEps;
                for (int c = 0; c < C; ++c) {
                    st += ft.at(c, y, x) * ft.at(c, y, x);
                    ss += fs.at(c, y, x) * fs.at(c, y, x);
                }
                const double nt = std::sqrt(st);
                const double ns = std::sqrt(ss);
                for (int c = 0; c < C; ++c) {
                    fhat_t[c] = ft.at(c, y, x) / nt;
                    fhat_s[c] = fs.at(c, y, x) / ns;
                }
                double dot_gs = 0.0;
                for (int c = 0; c < C; ++c) {
                    const double w = metric.empty() ? 1.0 : metric[l][c];
                    const double d = fhat_t[c] - fhat_s[c];
                    loss += w * d * d * inv_hw;
                    g_hat[c] = -2.0 * w * d * inv_hw; // d loss / d fhat_s
                    dot_gs += g_hat[c] * fhat_s[c];
                }
                for (int c = 0; c < C; ++c) {
                    cot.at(c, y, x) = (g_hat[c] - fhat_s[c] * dot_gs) / ns;
                }
            }
        }
        tap_cots[l] = std::move(cot);
    }

    GradImage grad = encoder.backward_to_input(acts_s, tap_cots, {});
    return {loss, std::move(grad)};
}

} // namespace facesketch
