#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "facesketch/errors.hpp"
#include "facesketch/face_models.hpp"
#include "facesketch/image_io.hpp"
#include "facesketch/keypoints.hpp"
#include "oracles.hpp"

using namespace facesketch;
namespace ft = facesketch::testing;

namespace {

KeypointPool pool_from(const std::vector<Vec2>& pts) {
    KeypointPool pool;
    for (const Vec2& p : pts) pool.push(p, Provenance::contour_edge, "test");
    return pool;
}

KeypointPool random_pool(std::mt19937_64& rng, int n) {
    KeypointPool pool;
    for (int i = 0; i < n; ++i) {
        pool.push({uniform_unit(rng), uniform_unit(rng)}, Provenance::facial_landmark, "rnd");
    }
    return dedup_pool(pool);
}

std::array<int, 3> skin_rgb() {
    for (const auto& e : builtin_palette()) {
        if (e.attr == FaceAttribute::skin) return e.rgb;
    }
    return {0, 0, 0};
}

MaskImage circle_mask(int res, double radius_frac) {
    MaskImage mask;
    mask.height = res;
    mask.width = res;
    mask.labels.assign(static_cast<size_t>(res) * res,
                       static_cast<uint8_t>(FaceAttribute::background));
    mask.composite = RasterImage::white(3, res, res);
    const auto rgb = skin_rgb();
    const double r = radius_frac * res;
    for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
            const double dx = (x + 0.5) - res / 2.0, dy = (y + 0.5) - res / 2.0;
            if (dx * dx + dy * dy > r * r) continue;
            mask.labels[static_cast<size_t>(y) * res + x] =
                static_cast<uint8_t>(FaceAttribute::skin);
            for (int c = 0; c < 3; ++c) mask.composite.at(c, y, x) = rgb[c] / 255.0;
        }
    }
    return mask;
}

std::vector<Vec2> synthetic_68() {
    // A plausible frontal layout: jaw arc plus feature boxes. Only the index
    // runs matter for densification, not anatomical accuracy.
    std::vector<Vec2> p(68);
    for (int i = 0; i <= 16; ++i) {
        const double t = i / 16.0;
        p[i] = {0.2 + 0.6 * t, 0.35 + 0.5 * std::sin(t * 3.14159265)};
    }
    for (int i = 17; i <= 21; ++i) p[i] = {0.28 + 0.04 * (i - 17), 0.30};
    for (int i = 22; i <= 26; ++i) p[i] = {0.56 + 0.04 * (i - 22), 0.30};
    for (int i = 27; i <= 30; ++i) p[i] = {0.50, 0.34 + 0.04 * (i - 27)};
    for (int i = 31; i <= 35; ++i) p[i] = {0.44 + 0.03 * (i - 31), 0.52};
    for (int i = 36; i <= 41; ++i) {
        const double a = (i - 36) * 3.14159265 / 3.0;
        p[i] = {0.34 + 0.05 * std::cos(a), 0.36 - 0.02 * std::sin(a)};
    }
    for (int i = 42; i <= 47; ++i) {
        const double a = (i - 42) * 3.14159265 / 3.0;
        p[i] = {0.63 + 0.05 * std::cos(a), 0.36 - 0.02 * std::sin(a)};
    }
    for (int i = 48; i <= 59; ++i) {
        const double a = (i - 48) * 3.14159265 / 6.0;
        p[i] = {0.5 + 0.09 * std::cos(a), 0.68 - 0.04 * std::sin(a)};
    }
    for (int i = 60; i <= 67; ++i) {
        const double a = (i - 60) * 3.14159265 / 4.0;
        p[i] = {0.5 + 0.05 * std::cos(a), 0.68 - 0.02 * std::sin(a)};
    }
    return p;
}

} // namespace

TEST_SUITE("keypoints") {

TEST_CASE("dedup keeps first occurrences and enforces min spacing") {
    KeypointPool pool = pool_from({{0.5, 0.5},
                                   {0.5 + 2e-5, 0.5}, // too close, dropped
                                   {0.6, 0.6},
                                   {0.5, 0.5}, // duplicate, dropped
                                   {0.6, 0.6 + 2e-4}}); // just far enough
    const auto out = dedup_pool(pool);
    REQUIRE(out.size() == 3);
    CHECK(out.points[0] == Vec2{0.5, 0.5});
    CHECK(out.points[1] == Vec2{0.6, 0.6});
    for (size_t i = 0; i < out.size(); ++i) {
        for (size_t j = i + 1; j < out.size(); ++j) {
            CHECK(distance(out.points[i], out.points[j]) >= kPoolDedupDistance);
        }
    }
}

TEST_CASE("fps matches a from-scratch greedy recomputation") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 60; ++trial) {
        const auto pool = random_pool(rng, 3 + static_cast<int>(rng() % 10));
        const int n = 1 + static_cast<int>(rng() % pool.size());
        const auto got = fps_select_indices(pool, n);
        const auto want = ft::brute_fps_indices(pool.points, n);
        CHECK(got == want);
    }
}

TEST_CASE("fps first point is the pool point nearest the centroid") {
    std::mt19937_64 rng(111);
    for (int trial = 0; trial < 20; ++trial) {
        const auto pool = random_pool(rng, 12);
        Vec2 c{0, 0};
        for (const Vec2& p : pool.points) c += p;
        c = c * (1.0 / static_cast<double>(pool.size()));
        size_t best = 0;
        for (size_t i = 1; i < pool.size(); ++i) {
            if (squared_distance(pool.points[i], c) < squared_distance(pool.points[best], c))
                best = i;
        }
        CHECK(fps_select_indices(pool, 1) == std::vector<size_t>{best});
    }
}

TEST_CASE("fps selecting the whole pool covers every point") {
    std::mt19937_64 rng(121);
    const auto pool = random_pool(rng, 9);
    const auto idx = fps_select_indices(pool, static_cast<int>(pool.size()));
    std::set<size_t> seen(idx.begin(), idx.end());
    CHECK(seen.size() == pool.size());
}

TEST_CASE("fps ties break toward the lowest index") {
    const auto pool = pool_from({{0, 0}, {1, 0}, {0, 1}, {1, 1}, {0.5, 0.5}});
    const auto idx = fps_select_indices(pool, 5);
    CHECK(idx == std::vector<size_t>{4, 0, 1, 2, 3});
    CHECK(idx == ft::brute_fps_indices(pool.points, 5));
    // Repeat calls stay identical.
    CHECK(idx == fps_select_indices(pool, 5));
}

TEST_CASE("fps seed parameter does not change the selection") {
    std::mt19937_64 rng(131);
    const auto pool = random_pool(rng, 30);
    CHECK(fps_select(pool, 8, 1) == fps_select(pool, 8, 999));
}

TEST_CASE("covering radius shrinks as the budget grows") {
    std::mt19937_64 rng(141);
    const auto pool = random_pool(rng, 64);
    double prev = covering_radius(pool, {});
    for (int n = 1; n <= 12; ++n) {
        const double r = covering_radius(pool, fps_select(pool, n));
        CHECK(r <= prev);
        prev = r;
    }
    CHECK(covering_radius(pool, fps_select(pool, static_cast<int>(pool.size()))) == 0.0);
}

TEST_CASE("fps rejects a budget beyond the pool") {
    const auto pool = pool_from({{0.1, 0.1}, {0.9, 0.9}});
    CHECK_THROWS_WITH_AS(fps_select(pool, 3),
                         doctest::Contains("pool exhausted: requested 3 points from pool of 2"),
                         ValidationError);
    CHECK(fps_select(pool, 0).empty());
}

TEST_CASE("abstraction config validation") {
    AbstractionConfig ok{4, 2, 0};
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.total() == 6);
    AbstractionConfig no_face{0, 5, 0};
    CHECK_THROWS_WITH_AS(no_face.validate(), doctest::Contains("n_face must be at least 1"),
                         ValidationError);
    AbstractionConfig neg{3, -1, 0};
    CHECK_THROWS_WITH_AS(neg.validate(), doctest::Contains("n_contour must be non-negative"),
                         ValidationError);
}

TEST_CASE("init_strokes anchors the first control point on its seed") {
    std::mt19937_64 rng(151);
    std::vector<Vec2> seeds;
    for (int i = 0; i < 50; ++i) seeds.push_back({uniform_unit(rng), uniform_unit(rng)});
    const auto strokes = init_strokes(seeds, RoundTag::face, 9);
    REQUIRE(strokes.size() == seeds.size());
    for (size_t s = 0; s < seeds.size(); ++s) {
        CHECK(strokes[s].points[0] == clamp_control_point(seeds[s]));
        CHECK(strokes[s].tag == RoundTag::face);
        for (int i = 1; i < 4; ++i) {
            CHECK(std::fabs(strokes[s].points[i].x - seeds[s].x) <= kInitOffsetRange + 1e-12);
            CHECK(std::fabs(strokes[s].points[i].y - seeds[s].y) <= kInitOffsetRange + 1e-12);
        }
    }
}

TEST_CASE("init_strokes is seed-deterministic and seed-sensitive") {
    std::vector<Vec2> seeds{{0.3, 0.3}, {0.7, 0.6}};
    const auto a = init_strokes(seeds, RoundTag::contour, 42);
    const auto b = init_strokes(seeds, RoundTag::contour, 42);
    const auto c = init_strokes(seeds, RoundTag::contour, 43);
    for (size_t s = 0; s < seeds.size(); ++s) {
        CHECK(a[s].same_geometry(b[s]));
    }
    bool any_diff = false;
    for (size_t s = 0; s < seeds.size(); ++s) {
        if (!a[s].same_geometry(c[s])) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("densify grows 68 landmarks to the pool floor") {
    const auto base = synthetic_68();
    const auto pool = densify_landmarks(base);
    CHECK(pool.size() >= 256);
    // Original vertices survive densification.
    for (const Vec2& p : base) {
        bool found = false;
        for (const Vec2& q : pool.points) {
            if (distance(p, q) < kPoolDedupDistance) {
                found = true;
                break;
            }
        }
        CHECK(found);
    }
    // Dedup invariant holds on the result.
    for (size_t i = 0; i < pool.size() && i < 64; ++i) {
        for (size_t j = i + 1; j < pool.size(); ++j) {
            CHECK(squared_distance(pool.points[i], pool.points[j]) >=
                  kPoolDedupDistance * kPoolDedupDistance * 0.999);
        }
    }
    CHECK_THROWS_AS(densify_landmarks(std::vector<Vec2>(67)), ValidationError);
}

TEST_CASE("densified points carry their feature names") {
    const auto pool = densify_landmarks(synthetic_68());
    std::set<std::string> names(pool.source_meta.begin(), pool.source_meta.end());
    for (const char* feature : {"jaw", "right_brow", "left_brow", "nose_ridge", "nose_base",
                                "right_eye", "left_eye", "lip_outer", "lip_inner"}) {
        CHECK(names.count(feature) == 1);
    }
    for (Provenance prov : pool.provenance) CHECK(prov == Provenance::facial_landmark);
}

TEST_CASE("contour points of a disc hug the circle") {
    const int res = 128;
    const double radius_frac = 0.3;
    const auto mask = circle_mask(res, radius_frac);
    const auto pool = extract_contour_points(mask);
    CHECK(pool.size() >= 32);
    for (const Vec2& p : pool.points) {
        const double dx = p.x * res - res / 2.0, dy = p.y * res - res / 2.0;
        const double dist_to_circle = std::fabs(std::sqrt(dx * dx + dy * dy) - radius_frac * res);
        CHECK(dist_to_circle <= 2.0);
    }
    for (Provenance prov : pool.provenance) CHECK(prov == Provenance::contour_edge);
}

TEST_CASE("contour extraction caps the pool size") {
    std::mt19937_64 rng(161);
    MaskImage mask;
    mask.height = mask.width = 96;
    mask.labels.assign(96 * 96, static_cast<uint8_t>(FaceAttribute::skin));
    mask.composite = ft::random_image(rng, 3, 96, 96); // edges everywhere
    ContourConfig cfg;
    cfg.max_points = 100;
    const auto pool = extract_contour_points(mask, cfg);
    CHECK(pool.size() <= 100);
    CHECK(pool.size() >= 50);
}

TEST_CASE("constant composites have no contour") {
    MaskImage mask;
    mask.height = mask.width = 32;
    mask.labels.assign(32 * 32, static_cast<uint8_t>(FaceAttribute::background));
    mask.composite = RasterImage::white(3, 32, 32);
    CHECK_THROWS_WITH_AS(extract_contour_points(mask), doctest::Contains("empty contour"),
                         ValidationError);
    MaskImage empty;
    CHECK_THROWS_WITH_AS(extract_contour_points(empty), doctest::Contains("empty contour"),
                         ValidationError);
}

TEST_CASE("builtin landmarker is deterministic on the bundled face") {
    const auto img = load_image(ft::assets_dir() + "/test_face.png", 224);
    auto lm = make_landmarker("builtin", "");
    const auto a = lm->landmarks68(img);
    const auto b = lm->landmarks68(img);
    REQUIRE(a.size() == 68);
    CHECK(a == b);
    for (const Vec2& p : a) {
        CHECK(p.x >= 0.0);
        CHECK(p.x <= 1.0);
        CHECK(p.y >= 0.0);
        CHECK(p.y <= 1.0);
    }
}

TEST_CASE("builtin landmarks match the committed golden layout") {
    const auto img = load_image(ft::assets_dir() + "/test_face.png", 224);
    auto lm = make_landmarker("builtin", "");
    const auto got = lm->landmarks68(img);

    std::ifstream in(ft::assets_dir() + "/golden/landmarks68.json");
    REQUIRE(in.good());
    nlohmann::json j;
    in >> j;
    REQUIRE(j.size() == 68);
    for (size_t i = 0; i < 68; ++i) {
        CHECK(std::fabs(got[i].x - j[i][0].get<double>()) <= 1e-9);
        CHECK(std::fabs(got[i].y - j[i][1].get<double>()) <= 1e-9);
    }
}

TEST_CASE("landmark pool reaches the seeding floor") {
    const auto img = load_image(ft::assets_dir() + "/test_face.png", 224);
    auto lm = make_landmarker("builtin", "");
    const auto pool = detect_landmarks(img, *lm);
    CHECK(pool.size() >= 256);
    const auto again = detect_landmarks(img, *lm);
    CHECK(pool.points == again.points);
}

TEST_CASE("builtin parser produces a plausible mask for the bundled face") {
    const auto img = load_image(ft::assets_dir() + "/test_face.png", 224);
    auto parser = make_parser("builtin", "");
    const auto mask = parser->parse(img);
    CHECK(mask.height == 224);
    CHECK(mask.width == 224);
    CHECK(mask.foreground_fraction() > 0.2);
    CHECK(mask.foreground_fraction() < 0.9);
    // Background pixels composite to pure white.
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.label_at(y, x) != FaceAttribute::background) continue;
            CHECK(mask.composite.at(0, y, x) == 1.0);
        }
    }
}

TEST_CASE("noise is rejected as faceless") {
    std::mt19937_64 rng(171);
    const auto noise = ft::random_image(rng, 3, 224, 224);
    auto parser = make_parser("builtin", "");
    CHECK_THROWS_WITH_AS(parser->parse(noise), doctest::Contains("no face found"),
                         ValidationError);
    auto lm = make_landmarker("builtin", "");
    CHECK_THROWS_WITH_AS(lm->landmarks68(noise), doctest::Contains("no face found"),
                         ValidationError);
}

TEST_CASE("unknown model backends are named in the error") {
    CHECK_THROWS_WITH_AS(make_landmarker("caffe", ""),
                         doctest::Contains("unknown model backend 'caffe'"), ValidationError);
    CHECK_THROWS_WITH_AS(make_parser("caffe", ""),
                         doctest::Contains("available: builtin, onnx"), ValidationError);
}

} // TEST_SUITE
