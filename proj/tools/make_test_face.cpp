// Paints the bundled flat-color frontal face used by CI: every region uses an
// exact color from the builtin palette so the procedural landmarker and
// parser classify it losslessly.
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#include "facesketch/face_models.hpp"
#include "facesketch/image.hpp"
#include "facesketch/image_io.hpp"

namespace {

using facesketch::FaceAttribute;
using facesketch::RasterImage;

void fill_color(RasterImage& img, FaceAttribute attr,
                const std::function<bool(double, double)>& inside) {
    const auto& palette = facesketch::builtin_palette();
    const facesketch::PaletteEntry* entry = nullptr;
    for (const auto& e : palette)
        if (e.attr == attr) entry = &e;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (inside(x + 0.5, y + 0.5))
                for (int c = 0; c < 3; ++c) img.at(c, y, x) = entry->rgb[c] / 255.0;
}

auto ellipse(double cx, double cy, double rx, double ry) {
    return [=](double x, double y) {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        return dx * dx + dy * dy <= 1.0;
    };
}

auto rect(double x0, double y0, double x1, double y1) {
    return [=](double x, double y) { return x >= x0 && x < x1 && y >= y0 && y < y1; };
}

} // namespace

int main(int argc, char** argv) {
    const std::string out = argc > 1 ? argv[1] : "test_face.png";
    const int res = 224;
    RasterImage img = RasterImage::white(3, res, res);

    fill_color(img, FaceAttribute::hair, ellipse(112, 80, 78, 70));
    fill_color(img, FaceAttribute::neck, rect(94, 185, 130, 224));
    fill_color(img, FaceAttribute::skin, ellipse(112, 118, 62, 78));
    fill_color(img, FaceAttribute::ears, ellipse(47, 124, 10, 16));
    fill_color(img, FaceAttribute::ears, ellipse(177, 124, 10, 16));
    fill_color(img, FaceAttribute::eyebrows, rect(76, 90, 104, 97));
    fill_color(img, FaceAttribute::eyebrows, rect(120, 90, 148, 97));
    fill_color(img, FaceAttribute::eyes, ellipse(90, 108, 11, 6));
    fill_color(img, FaceAttribute::eyes, ellipse(134, 108, 11, 6));
    fill_color(img, FaceAttribute::nose, ellipse(112, 130, 8, 15));
    fill_color(img, FaceAttribute::lips, ellipse(112, 162, 19, 8));

    facesketch::save_png(img, out);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}
