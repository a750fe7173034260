#include "facesketch/shadow_loss.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "facesketch/errors.hpp"

namespace facesketch {

namespace {

bool is_valid_k(int k, int resolution, int* g_out) {
    const int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k))));
    if (g * g != k) return false;
    if (resolution % g != 0) return false;
    if (g_out) *g_out = g;
    return true;
}

std::string nearest_valid_ks(int k, int resolution) {
    int below = -1, above = -1;
    for (int cand = k - 1; cand >= 1; --cand) {
        if (is_valid_k(cand, resolution, nullptr)) {
            below = cand;
            break;
        }
    }
    for (int cand = k + 1; cand <= resolution * resolution; ++cand) {
        if (is_valid_k(cand, resolution, nullptr)) {
            above = cand;
            break;
        }
    }
    std::string s = "{";
    if (below > 0) s += std::to_string(below);
    if (below > 0 && above > 0) s += ", ";
    if (above > 0) s += std::to_string(above);
    s += "}";
    return s;
}

} // namespace

CropGrid make_crop_grid(int k, int resolution) {
    if (resolution <= 0) {
        throw ValidationError("crop grid resolution must be positive");
    }
    if (k < 1) {
        throw ValidationError("k must be >= 1, nearest valid values for resolution " +
                              std::to_string(resolution) + ": " +
                              nearest_valid_ks(1, resolution));
    }
    int g = 0;
    if (!is_valid_k(k, resolution, &g)) {
        throw ValidationError(
            "invalid k=" + std::to_string(k) +
            ": k must be a perfect square whose root divides the resolution " +
            std::to_string(resolution) + "; nearest valid values: " +
            nearest_valid_ks(k, resolution));
    }
    CropGrid grid;
    grid.k = k;
    grid.g = g;
    grid.block_px = resolution / g;
    grid.resolution = resolution;
    return grid;
}

std::pair<double, GradImage> crop_shadow_loss(const RasterImage& mask_composite,
                                              const RasterImage& sketch,
                                              const CropGrid& grid) {
    if (!mask_composite.same_shape(sketch)) {
        throw ValidationError("shadow loss inputs must share shape");
    }
    if (sketch.height != grid.resolution || sketch.width != grid.resolution) {
        throw ValidationError("image resolution " + std::to_string(sketch.width) + "x" +
                              std::to_string(sketch.height) +
                              " does not match crop grid resolution " +
                              std::to_string(grid.resolution));
    }

    const int C = sketch.channels;
    const double n_full = static_cast<double>(sketch.size());
    const double n_block =
        static_cast<double>(C) * grid.block_px * grid.block_px;

    // Full-image term.
    double full = 0.0;
    for (size_t i = 0; i < sketch.data.size(); ++i) {
        const double d = sketch.data[i] - mask_composite.data[i];
        full += d * d;
    }
    full /= n_full;

    // Per-block means, accumulated block by block.
    double block_sum = 0.0;
    for (int by = 0; by < grid.g; ++by) {
        for (int bx = 0; bx < grid.g; ++bx) {
            double acc = 0.0;
            for (int c = 0; c < C; ++c) {
                for (int y = by * grid.block_px; y < (by + 1) * grid.block_px; ++y) {
                    for (int x = bx * grid.block_px; x < (bx + 1) * grid.block_px; ++x) {
                        const double d = sketch.at(c, y, x) - mask_composite.at(c, y, x);
                        acc += d * d;
                    }
                }
            }
            block_sum += acc / n_block;
        }
    }
    const double loss = full + block_sum / static_cast<double>(grid.k);

    // d/dS = 2*(S-I) * (1/n_full + 1/(k*n_block)); block sizes are uniform so
    // the weight is the same for every pixel.
    const double w = 2.0 * (1.0 / n_full + 1.0 / (grid.k * n_block));
    GradImage grad(sketch.channels, sketch.height, sketch.width);
    for (size_t i = 0; i < sketch.data.size(); ++i) {
        grad.data[i] = w * (sketch.data[i] - mask_composite.data[i]);
    }
    return {loss, std::move(grad)};
}

} // namespace facesketch
