#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "facesketch/encoder.hpp"
#include "facesketch/image.hpp"

namespace facesketch {

enum class EmbeddingDistance { cosine, l2 };

EmbeddingDistance embedding_distance_from_string(const std::string& s);

// Paired random-crop augmentation: the same crop window is applied to the
// target and the sketch before encoding.
struct CropTransform {
    int x0 = 0;
    int y0 = 0;
    int size = 0;
};

std::vector<CropTransform> sample_crop_transforms(int n, int height, int width,
                                                  double scale_min, double scale_max,
                                                  uint64_t seed);

// Crop then bilinearly resize back to the input resolution.
RasterImage apply_crop_resize(const RasterImage& img, const CropTransform& t);

// Adjoint of apply_crop_resize: splats output-pixel gradients back onto the
// full-resolution grid.
GradImage crop_resize_adjoint(const GradImage& grad_out, const CropTransform& t,
                              int full_height, int full_width);

struct SemanticLossOptions {
    int n_aug = 4; // <= 0 disables augmentation (single identity pass)
    uint64_t seed = 0;
    EmbeddingDistance dist = EmbeddingDistance::cosine;
    double crop_scale_min = 0.8;
    double crop_scale_max = 1.0;
};

// Embedding distance between target and sketch plus the summed per-tap mean
// squared difference of intermediate activations, averaged over paired
// augmentations. Returns the loss and its gradient w.r.t. sketch pixels.
std::pair<double, GradImage> semantic_loss(const RasterImage& target,
                                           const RasterImage& sketch,
                                           const Encoder& encoder,
                                           const SemanticLossOptions& opt = {});

// Learned patch-similarity distance between the masked target and the sketch:
// per-tap unit-normalized channel features, squared difference weighted by the
// encoder's metric weights, spatially averaged and summed over taps.
std::pair<double, GradImage> structure_loss(const RasterImage& mask_composite,
                                            const RasterImage& sketch,
                                            const Encoder& encoder);

} // namespace facesketch
