#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace facesketch {

// Planar CHW image, values in [0,1] for rendered/loaded content. Pixels are
// kept in double precision; quantization to 8 bits happens only at PNG IO.
struct RasterImage {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data; // size channels*height*width, plane-major

    RasterImage() = default;
    RasterImage(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w),
          data(static_cast<size_t>(c) * h * w, fill) {}

    static RasterImage white(int c, int h, int w) { return RasterImage(c, h, w, 1.0); }

    double& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }

    double* plane(int c) { return data.data() + static_cast<size_t>(c) * height * width; }
    const double* plane(int c) const {
        return data.data() + static_cast<size_t>(c) * height * width;
    }

    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool same_shape(const RasterImage& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

// Gradient buffer with the same CHW layout as a RasterImage.
struct GradImage {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    GradImage() = default;
    GradImage(int c, int h, int w)
        : channels(c), height(h), width(w),
          data(static_cast<size_t>(c) * h * w, 0.0) {}

    double& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }

    double* plane(int c) { return data.data() + static_cast<size_t>(c) * height * width; }
    const double* plane(int c) const {
        return data.data() + static_cast<size_t>(c) * height * width;
    }

    size_t size() const { return data.size(); }
    bool same_shape(const RasterImage& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

// Rec.601 luma; used by SSIM and edge extraction.
inline std::vector<double> to_gray(const RasterImage& img) {
    std::vector<double> gray(static_cast<size_t>(img.height) * img.width);
    if (img.channels >= 3) {
        const double* r = img.plane(0);
        const double* g = img.plane(1);
        const double* b = img.plane(2);
        for (size_t i = 0; i < gray.size(); ++i) {
            gray[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
        }
    } else {
        const double* p = img.plane(0);
        for (size_t i = 0; i < gray.size(); ++i) gray[i] = p[i];
    }
    return gray;
}

inline double mean_abs_diff(const RasterImage& a, const RasterImage& b) {
    assert(a.same_shape(b));
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        acc += std::fabs(a.data[i] - b.data[i]);
    }
    return a.data.empty() ? 0.0 : acc / static_cast<double>(a.data.size());
}

} // namespace facesketch
