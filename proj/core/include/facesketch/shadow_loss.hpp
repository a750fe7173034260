#pragma once

#include <utility>

#include "facesketch/image.hpp"

namespace facesketch {

// Non-overlapping square tiling of the working resolution used by the shadow
// loss. k must be a perfect square whose root divides the resolution.
struct CropGrid {
    int k = 1;        // number of blocks
    int g = 1;        // grid side, g*g == k
    int block_px = 0; // block side length in pixels
    int resolution = 0;
};

// Validates k against the resolution. Throws ValidationError listing the
// nearest valid k values when the constraint fails.
CropGrid make_crop_grid(int k, int resolution);

// Shadow-filling distance loss against the masked target: mean squared pixel
// difference over the whole image plus the mean over the k blocks of each
// block's mean squared difference. The returned gradient is the exact
// analytic derivative with respect to the sketch pixels.
std::pair<double, GradImage> crop_shadow_loss(const RasterImage& mask_composite,
                                              const RasterImage& sketch,
                                              const CropGrid& grid);

} // namespace facesketch
