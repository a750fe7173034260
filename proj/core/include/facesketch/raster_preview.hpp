#pragma once

#include "facesketch/image.hpp"
#include "facesketch/stroke.hpp"

namespace facesketch {

// Non-differentiable preview renderer, independent of the soft rasterizer:
// curves are flattened by recursive De Casteljau subdivision and pixels are
// covered by hard-threshold supersampling. Used for docs, snapshots and as a
// cross-check against SoftRasterizer::forward.
RasterImage raster_preview(const SketchCanvas& canvas, int supersample = 3);

} // namespace facesketch
