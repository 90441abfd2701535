#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "esrkit/image.hpp"
#include "oracles.hpp"

using esr::DegradeConfig;
using esr::ImageU8;
using esr::ResizeDirection;
using esr::Tensor;

namespace {

ImageU8 make_image(int h, int w, uint8_t fill) {
    ImageU8 img;
    img.height = h;
    img.width = w;
    img.pixels.assign(static_cast<size_t>(h) * w * 3, fill);
    return img;
}

std::filesystem::path tmp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

// Independent 1-D antialiased cubic resample of one row (a = -0.5),
// re-derived from the standard definition.
std::vector<double> cubic_downsample_row(const std::vector<double>& in, int scale) {
    auto kernel = [](double x) {
        x = std::fabs(x);
        if (x < 1) return (1.5 * x - 2.5) * x * x + 1.0;
        if (x < 2) return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0;
        return 0.0;
    };
    const int out_len = static_cast<int>(in.size()) / scale;
    std::vector<double> out(out_len);
    for (int i = 0; i < out_len; ++i) {
        const double center = (i + 0.5) * scale - 0.5;
        double total = 0.0, acc = 0.0;
        for (int j = static_cast<int>(std::floor(center)) - 2 * scale;
             j <= static_cast<int>(std::ceil(center)) + 2 * scale; ++j) {
            const double w = kernel((center - j) / scale) / scale;
            if (w == 0.0) continue;
            const int idx = std::clamp(j, 0, static_cast<int>(in.size()) - 1);
            acc += w * in[idx];
            total += w;
        }
        out[i] = acc / total;
    }
    return out;
}

}  // namespace

TEST_CASE("png save/load round trip preserves pixels") {
    std::mt19937_64 rng(3);
    ImageU8 img = make_image(13, 9, 0);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& p : img.pixels) p = static_cast<uint8_t>(byte(rng));
    const auto path = tmp_file("esr_roundtrip.png");
    esr::save_png(img, path.string());
    const ImageU8 back = esr::load_png(path.string());
    CHECK(back.height == img.height);
    CHECK(back.width == img.width);
    CHECK(back.pixels == img.pixels);
    std::filesystem::remove(path);
}

TEST_CASE("corrupt png reports the byte offset") {
    const auto path = tmp_file("esr_corrupt.png");
    {
        esr::save_png(make_image(8, 8, 120), path.string());
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekg(0, std::ios::end);
        const auto size = f.tellg();
        f.seekp(static_cast<std::streamoff>(size) / 2);
        f.write("\xde\xad\xbe\xef", 4);
    }
    CHECK_THROWS_WITH_AS(esr::load_png(path.string()),
                         doctest::Contains("byte offset"), esr::Error);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(esr::load_png("/nonexistent/no.png"), esr::Error);
}

TEST_CASE("to_tensor and to_image invert each other") {
    std::mt19937_64 rng(5);
    ImageU8 img = make_image(6, 7, 0);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& p : img.pixels) p = static_cast<uint8_t>(byte(rng));
    const ImageU8 back = esr::to_image(esr::to_tensor(img));
    CHECK(back.pixels == img.pixels);

    // out-of-range values clamp
    Tensor t(1, 3, 1, 1);
    t.at(0, 0, 0, 0) = -0.5f;
    t.at(0, 1, 0, 0) = 1.7f;
    t.at(0, 2, 0, 0) = 0.5f;
    const ImageU8 c = esr::to_image(t);
    CHECK(c.at(0, 0, 0) == 0);
    CHECK(c.at(0, 0, 1) == 255);
    CHECK(c.at(0, 0, 2) == 128);  // round half away from zero
}

TEST_CASE("psnr closed form: constant 25/255 offset gives 20.17 dB") {
    const ImageU8 hr = make_image(24, 24, 100);
    const ImageU8 sr = make_image(24, 24, 125);
    CHECK(esr::psnr(sr, hr) == doctest::Approx(20.17).epsilon(0.0005));
}

TEST_CASE("psnr ignores the 4-pixel border") {
    std::mt19937_64 rng(11);
    ImageU8 hr = make_image(20, 20, 90);
    ImageU8 sr = make_image(20, 20, 110);
    const double base = esr::psnr(sr, hr);
    CHECK(std::isfinite(base));
    // scribble on the border only
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
            if (y >= 4 && y < 16 && x >= 4 && x < 16) continue;
            for (int c = 0; c < 3; ++c) sr.at(y, x, c) = static_cast<uint8_t>(rng() % 256);
        }
    CHECK(esr::psnr(sr, hr) == base);
    CHECK(esr::psnr(sr, hr, 0) != base);
}

TEST_CASE("psnr of identical crops is +infinity; errors are explicit") {
    const ImageU8 a = make_image(16, 16, 42);
    CHECK(std::isinf(esr::psnr(a, a)));
    const ImageU8 b = make_image(16, 15, 42);
    CHECK_THROWS_AS(esr::psnr(a, b), esr::Error);
    const ImageU8 tiny = make_image(8, 8, 0);
    CHECK_THROWS_AS(esr::psnr(tiny, tiny, 4), esr::Error);
}

TEST_CASE("bicubic degrade: constant image stays constant") {
    Tensor t(1, 3, 16, 16);
    for (auto& v : t.data()) v = 0.6f;
    const Tensor lr = esr::bicubic_resize(t, DegradeConfig{}, ResizeDirection::Down);
    CHECK(lr.h() == 4);
    CHECK(lr.w() == 4);
    for (float v : lr.data()) CHECK(v == doctest::Approx(0.6f).epsilon(1e-6));
}

TEST_CASE("bicubic with scale 1 is the identity") {
    std::mt19937_64 rng(17);
    const Tensor t = oracle::random_tensor(rng, 1, 3, 8, 8, 0.0f, 1.0f);
    DegradeConfig cfg;
    cfg.scale = 1;
    const Tensor out = esr::bicubic_resize(t, cfg, ResizeDirection::Down);
    CHECK(oracle::max_abs_diff(out, t) == 0.0);
}

TEST_CASE("bicubic downsample matches an independent 1-D oracle") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> row(16);
    for (auto& v : row) v = uni(rng);
    Tensor t(1, 1, 1, 16);  // single row: the vertical pass is a no-op blend
    for (int x = 0; x < 16; ++x) t.at(0, 0, 0, x) = static_cast<float>(row[x]);

    DegradeConfig cfg;
    cfg.scale = 2;
    // h=1 is not divisible by 2; tile vertically instead
    Tensor t2(1, 1, 2, 16);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 16; ++x) t2.at(0, 0, y, x) = t.at(0, 0, 0, x);
    const Tensor lr = esr::bicubic_resize(t2, cfg, ResizeDirection::Down);
    const auto want = cubic_downsample_row(row, 2);
    REQUIRE(lr.w() == static_cast<int>(want.size()));
    for (int x = 0; x < lr.w(); ++x)
        CHECK(lr.at(0, 0, 0, x) == doctest::Approx(want[x]).epsilon(1e-5));
}

TEST_CASE("bicubic upsample then downsample is near-lossless on smooth data") {
    Tensor t(1, 1, 8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            t.at(0, 0, y, x) = 0.5f + 0.4f * std::sin(0.3f * x + 0.2f * y);
    DegradeConfig cfg;
    cfg.scale = 2;
    const Tensor up = esr::bicubic_resize(t, cfg, ResizeDirection::Up);
    CHECK(up.h() == 16);
    const Tensor back = esr::bicubic_resize(up, cfg, ResizeDirection::Down);
    CHECK(oracle::max_abs_diff(back, t) <= 0.02);
}

TEST_CASE("bicubic degrade rejects non-divisible dimensions") {
    Tensor t(1, 3, 10, 10);
    CHECK_THROWS_AS(esr::bicubic_resize(t, DegradeConfig{}, ResizeDirection::Down),
                    esr::Error);
}

TEST_CASE("rgb_to_gray applies the 0.299/0.587/0.114 weights") {
    Tensor t(1, 3, 1, 1);
    t.at(0, 0, 0, 0) = 1.0f;
    t.at(0, 1, 0, 0) = 0.5f;
    t.at(0, 2, 0, 0) = 0.25f;
    const Tensor g = esr::rgb_to_gray(t);
    CHECK(g.c() == 1);
    CHECK(g.at(0, 0, 0, 0) == doctest::Approx(0.299 + 0.587 * 0.5 + 0.114 * 0.25));
}
