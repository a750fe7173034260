#include <filesystem>
#include <string>

#include "doctest.h"
#include "facesketch/stroke.hpp"
#include "facesketch/svg.hpp"
#include "oracles.hpp"

using namespace facesketch;
namespace ft = facesketch::testing;
namespace fs = std::filesystem;

namespace {

std::string cli() { return FACESKETCH_CLI_PATH; }

std::string face_png() { return ft::assets_dir() + "/test_face.png"; }

std::string toy_weights() { return ft::assets_dir() + "/toy_weights"; }

std::string quick_flags() {
    return " --face 4 --contour 2 --iters 8 --resolution 64 --no-aug --weights-dir " +
           toy_weights();
}

// One shared sketch run; later cases reuse its artifacts.
struct SketchRun {
    std::string dir;
    int exit_code = -1;
    std::string output;
};

const SketchRun& base_run() {
    static SketchRun run = [] {
        SketchRun r;
        r.dir = ft::make_temp_dir("cli_sketch");
        const auto res =
            ft::run_command(cli() + " sketch " + face_png() + " -o " + r.dir + quick_flags() +
                            " --seed 5 2>&1");
        r.exit_code = res.exit_code;
        r.output = res.output;
        return r;
    }();
    return run;
}

size_t count_substr(const std::string& text, const std::string& needle) {
    size_t n = 0;
    for (size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size()))
        ++n;
    return n;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("sketch writes the full artifact set and exits 0") {
    const auto& run = base_run();
    CAPTURE(run.output);
    REQUIRE(run.exit_code == 0);
    CHECK(fs::exists(run.dir + "/test_face.svg"));
    CHECK(fs::exists(run.dir + "/test_face.png"));
    CHECK(fs::exists(run.dir + "/test_face.losses.csv"));
    CHECK(fs::exists(run.dir + "/test_face.manifest.json"));

    const std::string svg = ft::read_file(run.dir + "/test_face.svg");
    CHECK(count_substr(svg, "<path") == 6);
    const std::string csv = ft::read_file(run.dir + "/test_face.losses.csv");
    CHECK(csv.rfind("iteration,l_clip,l_vgg,l_crop,l_sum,grad_norm\n", 0) == 0);
    const std::string manifest = ft::read_file(run.dir + "/test_face.manifest.json");
    CHECK(manifest.find("sha256") != std::string::npos);
    CHECK(manifest.find("test_face.png") != std::string::npos);
}

TEST_CASE("inconsistent stroke budget exits with the validation code") {
    const auto res = ft::run_command(cli() + " sketch " + face_png() +
                                     " --strokes 40 --face 30 --contour 20 2>&1");
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("N_f + N_c must equal S") != std::string::npos);
}

TEST_CASE("invalid crop count exits with the validation code") {
    const auto res =
        ft::run_command(cli() + " sketch " + face_png() + quick_flags() + " --k 5 2>&1");
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("invalid k=5") != std::string::npos);
}

TEST_CASE("missing weights exit with the weights code") {
    const auto res = ft::run_command(cli() + " sketch " + face_png() +
                                     " --face 2 --contour 0 --iters 2 --resolution 64" +
                                     " --weights-dir /nonexistent/weights 2>&1");
    CHECK(res.exit_code == 3);
    CHECK(res.output.find("weights not found") != std::string::npos);
}

TEST_CASE("replay reproduces the SVG byte-for-byte") {
    const auto& run = base_run();
    REQUIRE(run.exit_code == 0);
    const std::string replay_dir = ft::make_temp_dir("cli_replay");
    const auto res = ft::run_command(cli() + " sketch --replay " + run.dir +
                                     "/test_face.manifest.json -o " + replay_dir + " 2>&1");
    CAPTURE(res.output);
    REQUIRE(res.exit_code == 0);
    CHECK(ft::read_file(replay_dir + "/test_face.svg") ==
          ft::read_file(run.dir + "/test_face.svg"));
}

TEST_CASE("restyle changes brush style but preserves geometry") {
    const auto& run = base_run();
    REQUIRE(run.exit_code == 0);
    const std::string dir = ft::make_temp_dir("cli_restyle");
    const std::string style_path = dir + "/style.json";
    ft::write_file(style_path,
                   "{\"width\": 0.0133928571, \"color\": [0.8, 0.1, 0.1],"
                   " \"overrides\": {\"0\": {\"opacity\": 0.5}}}");
    const std::string out_path = dir + "/restyled.svg";
    const auto res = ft::run_command(cli() + " restyle " + run.dir + "/test_face.svg " +
                                     style_path + " -o " + out_path + " 2>&1");
    CAPTURE(res.output);
    REQUIRE(res.exit_code == 0);

    const auto before = parse_svg(ft::read_file(run.dir + "/test_face.svg"));
    const auto after = parse_svg(ft::read_file(out_path));
    REQUIRE(after.strokes.size() == before.strokes.size());
    for (size_t i = 0; i < before.strokes.size(); ++i) {
        CHECK(after.strokes[i].same_geometry(before.strokes[i]));
        CHECK(after.strokes[i].style.width == doctest::Approx(0.0133928571).epsilon(1e-6));
        CHECK(after.strokes[i].style.color[0] == doctest::Approx(0.8).epsilon(1e-6));
    }
    CHECK(after.strokes[0].style.opacity == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("eval scores identical images at ssim 1") {
    const std::string dir = ft::make_temp_dir("cli_eval");
    const std::string pairs = dir + "/pairs.csv";
    ft::write_file(pairs, "pair_id,photo,sketch,budget\np1," + face_png() + "," + face_png() +
                              ",6\n");
    const auto res = ft::run_command(cli() + " eval " + pairs + " -o " + dir +
                                     "/metrics.csv --resolution 64 2>&1");
    CAPTURE(res.output);
    REQUIRE(res.exit_code == 0);
    const std::string csv = ft::read_file(dir + "/metrics.csv");
    CHECK(csv.rfind("pair_id,budget,ssim,runtime_s\n", 0) == 0);
    CHECK(csv.find("p1,6,1,") != std::string::npos);
    CHECK(res.output.find("budget") != std::string::npos);
    CHECK(res.output.find("1.0000") != std::string::npos);
}

TEST_CASE("eval reports unreadable pairs and exits with the validation code") {
    const std::string dir = ft::make_temp_dir("cli_eval_bad");
    const std::string pairs = dir + "/pairs.csv";
    ft::write_file(pairs, "p1,/missing/photo.png,/missing/sketch.png,6\n");
    const auto res = ft::run_command(cli() + " eval " + pairs + " 2>&1");
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("p1") != std::string::npos);
}

TEST_CASE("batch mode with workers writes every output") {
    const std::string dir = ft::make_temp_dir("cli_batch");
    fs::copy_file(face_png(), dir + "/a.png");
    fs::copy_file(face_png(), dir + "/b.png");
    const std::string out = dir + "/out";
    const auto res = ft::run_command(cli() + " sketch " + dir + "/a.png " + dir + "/b.png -o " +
                                     out + " --face 2 --contour 0 --iters 4 --resolution 64" +
                                     " --no-aug --weights-dir " + toy_weights() +
                                     " --workers 2 2>&1");
    CAPTURE(res.output);
    REQUIRE(res.exit_code == 0);
    CHECK(fs::exists(out + "/a.svg"));
    CHECK(fs::exists(out + "/b.svg"));
    // Same photo, same config: the two runs must agree.
    CHECK(ft::read_file(out + "/a.svg") == ft::read_file(out + "/b.svg"));
}

TEST_CASE("bad invocations exit nonzero") {
    CHECK(ft::run_command(cli() + " 2>&1").exit_code != 0);
    CHECK(ft::run_command(cli() + " sketch --face 2 --contour 0 2>&1").exit_code != 0);
    CHECK(ft::run_command(cli() + " frobnicate 2>&1").exit_code != 0);
}

} // TEST_SUITE
