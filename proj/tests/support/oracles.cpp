#include "oracles.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <sys/wait.h>

namespace facesketch::testing {

std::vector<size_t> brute_fps_indices(const std::vector<Vec2>& pts, int n) {
    const size_t want = static_cast<size_t>(n);
    if (want > pts.size()) throw std::runtime_error("oracle: n exceeds pool");
    std::vector<size_t> sel;
    if (want == 0) return sel;

    Vec2 centroid{0.0, 0.0};
    for (const Vec2& p : pts) centroid += p;
    centroid = centroid * (1.0 / static_cast<double>(pts.size()));

    std::vector<char> used(pts.size(), 0);
    size_t first = 0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < pts.size(); ++i) {
        const double d = squared_distance(pts[i], centroid);
        if (d < best) {
            best = d;
            first = i;
        }
    }
    sel.push_back(first);
    used[first] = 1;

    while (sel.size() < want) {
        size_t arg = pts.size();
        double far = -1.0;
        for (size_t i = 0; i < pts.size(); ++i) {
            if (used[i]) continue;
            double near = std::numeric_limits<double>::infinity();
            for (size_t j : sel) near = std::min(near, squared_distance(pts[i], pts[j]));
            if (near > far) {
                far = near;
                arg = i;
            }
        }
        sel.push_back(arg);
        used[arg] = 1;
    }
    return sel;
}

double direct_ssim(const RasterImage& a, const RasterImage& b) {
    constexpr int win = 11;
    constexpr double sigma = 1.5;
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    const int h = a.height, w = a.width;

    auto gray = [](const RasterImage& img, int y, int x) {
        if (img.channels >= 3)
            return 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
        return img.at(0, y, x);
    };

    double weight[win][win];
    double wsum = 0.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double dy = i - win / 2, dx = j - win / 2;
            weight[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
            wsum += weight[i][j];
        }
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) weight[i][j] /= wsum;

    double total = 0.0;
    size_t count = 0;
    for (int y0 = 0; y0 + win <= h; ++y0) {
        for (int x0 = 0; x0 + win <= w; ++x0) {
            double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    const double px = gray(a, y0 + i, x0 + j);
                    const double py = gray(b, y0 + i, x0 + j);
                    const double wt = weight[i][j];
                    mx += wt * px;
                    my += wt * py;
                    mxx += wt * px * px;
                    myy += wt * py * py;
                    mxy += wt * px * py;
                }
            const double vx = mxx - mx * mx;
            const double vy = myy - my * my;
            const double cov = mxy - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

double brute_crop_loss(const RasterImage& target, const RasterImage& sketch, int k) {
    const int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k))));
    const int bs = sketch.height / g;
    const int C = sketch.channels;

    double full = 0.0;
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < sketch.height; ++y)
            for (int x = 0; x < sketch.width; ++x) {
                const double d = sketch.at(c, y, x) - target.at(c, y, x);
                full += d * d;
            }
    full /= static_cast<double>(C) * sketch.height * sketch.width;

    double blocks = 0.0;
    for (int by = 0; by < g; ++by)
        for (int bx = 0; bx < g; ++bx) {
            double acc = 0.0;
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < bs; ++y)
                    for (int x = 0; x < bs; ++x) {
                        const double d = sketch.at(c, by * bs + y, bx * bs + x) -
                                         target.at(c, by * bs + y, bx * bs + x);
                        acc += d * d;
                    }
            blocks += acc / (static_cast<double>(C) * bs * bs);
        }
    return full + blocks / static_cast<double>(k);
}

SketchCanvas random_canvas(std::mt19937_64& rng, int n_strokes, int resolution) {
    SketchCanvas canvas;
    canvas.width_px = resolution;
    canvas.height_px = resolution;
    for (int s = 0; s < n_strokes; ++s) {
        std::array<Vec2, 4> pts;
        for (auto& p : pts) p = {uniform_in(rng, 0.05, 0.95), uniform_in(rng, 0.05, 0.95)};
        canvas.strokes.emplace_back(pts, (s % 2) ? RoundTag::contour : RoundTag::face);
    }
    return canvas;
}

RasterImage random_image(std::mt19937_64& rng, int channels, int h, int w) {
    RasterImage img(channels, h, w);
    for (double& v : img.data) v = uniform_unit(rng);
    return img;
}

CommandResult run_command(const std::string& cmd) {
    CommandResult res;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return res;
    char buf[4096];
    while (size_t n = fread(buf, 1, sizeof(buf), pipe)) res.output.append(buf, n);
    const int status = pclose(pipe);
    if (WIFEXITED(status)) res.exit_code = WEXITSTATUS(status);
    return res;
}

std::string make_temp_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    std::ostringstream name;
    name << "facesketch_test_" << tag << "_" << std::hex << rng();
    const auto dir = std::filesystem::temp_directory_path() / name.str();
    std::filesystem::create_directories(dir);
    return dir.string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string assets_dir() { return FACESKETCH_TEST_ASSETS; }

} // namespace facesketch::testing
