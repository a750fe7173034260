#pragma once

#include <string>

#include "facesketch/image.hpp"

namespace facesketch {

// Loads an image file as RGB in [0,1]. When resolution > 0 the image is
// scaled on the shorter side and center-cropped to resolution x resolution.
// Throws ValidationError if the file cannot be read.
RasterImage load_image(const std::string& path, int resolution = 0);

// 8-bit PNG export (RGB). Throws ValidationError on write failure.
void save_png(const RasterImage& image, const std::string& path);

} // namespace facesketch
