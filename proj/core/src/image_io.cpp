#include "facesketch/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "facesketch/errors.hpp"

namespace facesketch {

RasterImage load_image(const std::string& path, int resolution) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) {
        throw ValidationError("cannot read image: " + path);
    }
    if (resolution > 0) {
        const double scale =
            static_cast<double>(resolution) / std::min(bgr.cols, bgr.rows);
        cv::Mat resized;
        cv::resize(bgr, resized, cv::Size(), scale, scale,
                   scale < 1.0 ? cv::INTER_AREA : cv::INTER_LINEAR);
        const int x0 = (resized.cols - resolution) / 2;
        const int y0 = (resized.rows - resolution) / 2;
        bgr = resized(cv::Rect(x0, y0, resolution, resolution)).clone();
    }

    RasterImage out(3, bgr.rows, bgr.cols);
    for (int y = 0; y < bgr.rows; ++y) {
        const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            out.at(0, y, x) = row[x][2] / 255.0;
            out.at(1, y, x) = row[x][1] / 255.0;
            out.at(2, y, x) = row[x][0] / 255.0;
        }
    }
    return out;
}

void save_png(const RasterImage& image, const std::string& path) {
    cv::Mat bgr(image.height, image.width, CV_8UC3);
    for (int y = 0; y < image.height; ++y) {
        cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width; ++x) {
            auto q = [&](int c) {
                const double v = image.channels >= 3 ? image.at(c, y, x) : image.at(0, y, x);
                return cv::saturate_cast<uchar>(v * 255.0);
            };
            row[x] = cv::Vec3b(q(2), q(1), q(0));
        }
    }
    if (!cv::imwrite(path, bgr)) {
        throw ValidationError("cannot write image: " + path);
    }
}

} // namespace facesketch
