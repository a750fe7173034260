#include <cmath>
#include <random>

#include "doctest.h"
#include "facesketch/errors.hpp"
#include "facesketch/shadow_loss.hpp"
#include "oracles.hpp"

using namespace facesketch;
namespace ft = facesketch::testing;

TEST_SUITE("shadow") {

TEST_CASE("crop grid derives side and block size") {
    const auto grid = make_crop_grid(16, 224);
    CHECK(grid.k == 16);
    CHECK(grid.g == 4);
    CHECK(grid.block_px == 56);
    CHECK(grid.resolution == 224);
    const auto single = make_crop_grid(1, 64);
    CHECK(single.g == 1);
    CHECK(single.block_px == 64);
}

TEST_CASE("invalid k lists the nearest valid values") {
    CHECK_THROWS_WITH_AS(make_crop_grid(5, 224), doctest::Contains("invalid k=5"),
                         ValidationError);
    CHECK_THROWS_WITH_AS(make_crop_grid(5, 224), doctest::Contains("{4, 16}"), ValidationError);
    CHECK_THROWS_AS(make_crop_grid(0, 224), ValidationError);
    CHECK_THROWS_AS(make_crop_grid(9, 224), ValidationError); // 3 does not divide 224
    CHECK_THROWS_AS(make_crop_grid(16, 0), ValidationError);
}

TEST_CASE("identical images give zero loss and zero gradient") {
    std::mt19937_64 rng(2);
    const auto img = ft::random_image(rng, 3, 32, 32);
    const auto [loss, grad] = crop_shadow_loss(img, img, make_crop_grid(16, 32));
    CHECK(loss == 0.0);
    for (double v : grad.data) CHECK(v == 0.0);
}

TEST_CASE("k=1 equals twice the full-image mean squared error") {
    std::mt19937_64 rng(3);
    const auto target = ft::random_image(rng, 3, 32, 32);
    const auto sketch = ft::random_image(rng, 3, 32, 32);
    double mse = 0.0;
    for (size_t i = 0; i < sketch.data.size(); ++i) {
        const double d = sketch.data[i] - target.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(sketch.data.size());
    const auto [loss, grad] = crop_shadow_loss(target, sketch, make_crop_grid(1, 32));
    CHECK(loss == doctest::Approx(2.0 * mse).epsilon(1e-12));
}

TEST_CASE("loss matches the brute-force block oracle") {
    std::mt19937_64 rng(5);
    for (int k : {1, 4, 16}) {
        for (int trial = 0; trial < 5; ++trial) {
            const auto target = ft::random_image(rng, 3, 64, 64);
            const auto sketch = ft::random_image(rng, 3, 64, 64);
            const auto [loss, grad] = crop_shadow_loss(target, sketch, make_crop_grid(k, 64));
            const double oracle = ft::brute_crop_loss(target, sketch, k);
            CHECK(loss == doctest::Approx(oracle).epsilon(1e-12));
        }
    }
}

TEST_CASE("4x4 binary images with 2x2 blocks match the oracle exactly") {
    std::mt19937_64 rng(6);
    const auto grid = make_crop_grid(4, 4);
    CHECK(grid.block_px == 2);
    for (int trial = 0; trial < 20; ++trial) {
        RasterImage target(3, 4, 4), sketch(3, 4, 4);
        for (double& v : target.data) v = static_cast<double>(rng() % 2);
        for (double& v : sketch.data) v = static_cast<double>(rng() % 2);
        const auto [loss, grad] = crop_shadow_loss(target, sketch, grid);
        CHECK(loss == doctest::Approx(ft::brute_crop_loss(target, sketch, 4)).epsilon(1e-12));
    }
    // Hand-enumerable case: exactly one differing pixel.
    RasterImage a(3, 4, 4, 0.0), b(3, 4, 4, 0.0);
    b.at(0, 0, 0) = 1.0;
    const auto [loss, grad] = crop_shadow_loss(a, b, grid);
    // full term 1/48; the touched block contributes (1/12)/4.
    CHECK(loss == doctest::Approx(1.0 / 48.0 + 1.0 / 48.0).epsilon(1e-12));
}

TEST_CASE("gradient matches finite differences") {
    std::mt19937_64 rng(7);
    const auto target = ft::random_image(rng, 3, 8, 8);
    auto sketch = ft::random_image(rng, 3, 8, 8);
    const auto grid = make_crop_grid(4, 8);
    const auto [loss, grad] = crop_shadow_loss(target, sketch, grid);
    const double h = 1e-6;
    for (int trial = 0; trial < 24; ++trial) {
        const size_t i = rng() % sketch.data.size();
        const double keep = sketch.data[i];
        sketch.data[i] = keep + h;
        const double up = crop_shadow_loss(target, sketch, grid).first;
        sketch.data[i] = keep - h;
        const double down = crop_shadow_loss(target, sketch, grid).first;
        sketch.data[i] = keep;
        const double fd = (up - down) / (2.0 * h);
        CHECK(grad.data[i] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("loss is invariant to permuting blocks consistently in both images") {
    std::mt19937_64 rng(11);
    const auto grid = make_crop_grid(4, 32);
    auto target = ft::random_image(rng, 3, 32, 32);
    auto sketch = ft::random_image(rng, 3, 32, 32);
    const double base = crop_shadow_loss(target, sketch, grid).first;

    // Swap the two top blocks in both images.
    auto swap_blocks = [&](RasterImage& img) {
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < grid.block_px; ++y)
                for (int x = 0; x < grid.block_px; ++x)
                    std::swap(img.at(c, y, x), img.at(c, y, x + grid.block_px));
    };
    swap_blocks(target);
    swap_blocks(sketch);
    CHECK(crop_shadow_loss(target, sketch, grid).first == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("shape and resolution mismatches are rejected") {
    std::mt19937_64 rng(13);
    const auto a = ft::random_image(rng, 3, 32, 32);
    const auto b = ft::random_image(rng, 3, 16, 16);
    CHECK_THROWS_WITH_AS(crop_shadow_loss(a, b, make_crop_grid(4, 32)),
                         doctest::Contains("share shape"), ValidationError);
    CHECK_THROWS_WITH_AS(crop_shadow_loss(b, b, make_crop_grid(4, 32)),
                         doctest::Contains("does not match crop grid resolution"),
                         ValidationError);
}

} // TEST_SUITE
