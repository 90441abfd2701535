#include "esrkit/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>

namespace esr {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

struct ReadState {
    FILE* file = nullptr;
    size_t offset = 0;
    bool short_read = false;
};

void read_fn(png_structp png, png_bytep out, png_size_t len) {
    auto* st = static_cast<ReadState*>(png_get_io_ptr(png));
    const size_t got = std::fread(out, 1, len, st->file);
    st->offset += got;
    if (got != len) {
        st->short_read = true;
        png_error(png, "unexpected end of file");
    }
}

}  // namespace

ImageU8 load_png(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw Error("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("libpng init failed");
    }

    ReadState state{file.get(), 0, false};
    ImageU8 img;
    std::vector<png_bytep> rows;

    if (setjmp(png_jmpbuf(png))) {
        const size_t off = state.offset;
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("PNG decode error in " + path + " near byte offset " +
                    std::to_string(off));
    }

    png_set_read_fn(png, &state, read_fn);
    png_read_info(png, info);

    // Normalize everything to 8-bit RGB.
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    img.height = static_cast<int>(png_get_image_height(png, info));
    img.width = static_cast<int>(png_get_image_width(png, info));
    if (img.height <= 0 || img.width <= 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("PNG with empty dimensions: " + path);
    }
    img.pixels.assign(static_cast<size_t>(img.height) * img.width * 3, 0);
    rows.resize(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = img.pixels.data() + static_cast<size_t>(y) * img.width * 3;

    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void save_png(const ImageU8& img, const std::string& path) {
    if (img.pixels.size() != static_cast<size_t>(img.height) * img.width * 3)
        throw Error("image pixel buffer does not match dimensions");
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw Error("cannot write " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("PNG encode error for " + path);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(
                               img.pixels.data() + static_cast<size_t>(y) * img.width * 3));
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

Tensor to_tensor(const ImageU8& img) {
    Tensor t(1, 3, img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                t.at(0, c, y, x) = img.at(y, x, c) / 255.0f;
    return t;
}

ImageU8 to_image(const Tensor& t) {
    if (t.n() != 1 || t.c() != 3)
        throw Error("to_image: expected 1x3xHxW tensor, got " + t.shape_str());
    ImageU8 img;
    img.height = t.h();
    img.width = t.w();
    img.pixels.assign(static_cast<size_t>(t.h()) * t.w() * 3, 0);
    for (int y = 0; y < t.h(); ++y)
        for (int x = 0; x < t.w(); ++x)
            for (int c = 0; c < 3; ++c) {
                float v = t.at(0, c, y, x);
                v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                img.at(y, x, c) = static_cast<uint8_t>(std::lround(v * 255.0f));
            }
    return img;
}

namespace {

// Cubic interpolation kernel with a = -0.5.
double cubic(double x) {
    x = std::fabs(x);
    if (x < 1.0) return 1.5 * x * x * x - 2.5 * x * x + 1.0;
    if (x < 2.0) return -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0;
    return 0.0;
}

struct SampleTaps {
    std::vector<int> index;      // clamped source indices
    std::vector<double> weight;  // normalized weights
};

// Resampling plan for one axis. `scale` = out/in. When antialias is on and
// scale < 1, the kernel is stretched by 1/scale.
std::vector<SampleTaps> plan_axis(int in_len, int out_len, double scale, bool antialias) {
    const double kscale = (antialias && scale < 1.0) ? scale : 1.0;
    const double support = 2.0 / kscale;
    std::vector<SampleTaps> plan(out_len);
    for (int i = 0; i < out_len; ++i) {
        const double center = (i + 0.5) / scale - 0.5;
        const int left = static_cast<int>(std::floor(center - support)) + 1;
        const int right = static_cast<int>(std::floor(center + support));
        SampleTaps taps;
        double total = 0.0;
        for (int j = left; j <= right; ++j) {
            const double w = cubic((center - j) * kscale) * kscale;
            if (w == 0.0) continue;
            int idx = j < 0 ? 0 : (j >= in_len ? in_len - 1 : j);
            taps.index.push_back(idx);
            taps.weight.push_back(w);
            total += w;
        }
        for (double& w : taps.weight) w /= total;
        plan[i] = std::move(taps);
    }
    return plan;
}

}  // namespace

Tensor bicubic_resize(const Tensor& t, const DegradeConfig& cfg, ResizeDirection dir) {
    if (cfg.scale < 1) throw Error("bicubic_resize: scale must be >= 1");
    if (cfg.scale == 1) return t;
    int out_h, out_w;
    double scale;
    if (dir == ResizeDirection::Down) {
        if (t.h() % cfg.scale != 0 || t.w() % cfg.scale != 0)
            throw Error("bicubic_resize: dims " + t.shape_str() +
                        " not divisible by scale " + std::to_string(cfg.scale));
        out_h = t.h() / cfg.scale;
        out_w = t.w() / cfg.scale;
        scale = 1.0 / cfg.scale;
    } else {
        out_h = t.h() * cfg.scale;
        out_w = t.w() * cfg.scale;
        scale = cfg.scale;
    }

    const auto plan_h = plan_axis(t.h(), out_h, scale, cfg.antialias);
    const auto plan_w = plan_axis(t.w(), out_w, scale, cfg.antialias);

    // Horizontal pass, then vertical, in double precision.
    std::vector<double> mid(static_cast<size_t>(t.n()) * t.c() * t.h() * out_w);
    auto mid_at = [&](int n, int c, int y, int x) -> double& {
        return mid[((static_cast<size_t>(n) * t.c() + c) * t.h() + y) * out_w + x];
    };
    for (int n = 0; n < t.n(); ++n)
        for (int c = 0; c < t.c(); ++c)
            for (int y = 0; y < t.h(); ++y)
                for (int x = 0; x < out_w; ++x) {
                    const auto& taps = plan_w[x];
                    double acc = 0.0;
                    for (size_t k = 0; k < taps.index.size(); ++k)
                        acc += taps.weight[k] * t.at(n, c, y, taps.index[k]);
                    mid_at(n, c, y, x) = acc;
                }

    Tensor out(t.n(), t.c(), out_h, out_w);
    for (int n = 0; n < t.n(); ++n)
        for (int c = 0; c < t.c(); ++c)
            for (int y = 0; y < out_h; ++y) {
                const auto& taps = plan_h[y];
                for (int x = 0; x < out_w; ++x) {
                    double acc = 0.0;
                    for (size_t k = 0; k < taps.index.size(); ++k)
                        acc += taps.weight[k] * mid_at(n, c, taps.index[k], x);
                    out.at(n, c, y, x) = static_cast<float>(acc);
                }
            }
    return out;
}

Tensor rgb_to_gray(const Tensor& t) {
    if (t.c() != 3)
        throw Error("rgb_to_gray: expected 3 channels, got " + std::to_string(t.c()));
    Tensor out(t.n(), 1, t.h(), t.w());
    for (int n = 0; n < t.n(); ++n)
        for (int y = 0; y < t.h(); ++y)
            for (int x = 0; x < t.w(); ++x)
                out.at(n, 0, y, x) = 0.299f * t.at(n, 0, y, x) +
                                     0.587f * t.at(n, 1, y, x) +
                                     0.114f * t.at(n, 2, y, x);
    return out;
}

double psnr(const ImageU8& sr, const ImageU8& hr, int border) {
    if (border < 0) throw Error("psnr: border must be nonnegative");
    if (sr.height != hr.height || sr.width != hr.width)
        throw Error("psnr: dimension mismatch " + std::to_string(sr.width) + "x" +
                    std::to_string(sr.height) + " vs " + std::to_string(hr.width) + "x" +
                    std::to_string(hr.height));
    if (sr.height <= 2 * border || sr.width <= 2 * border)
        throw Error("psnr: image smaller than 2*border+1");

    double sum = 0.0;
    int64_t count = 0;
    for (int y = border; y < sr.height - border; ++y)
        for (int x = border; x < sr.width - border; ++x)
            for (int c = 0; c < 3; ++c) {
                const double d = (static_cast<int>(sr.at(y, x, c)) -
                                  static_cast<int>(hr.at(y, x, c))) / 255.0;
                sum += d * d;
                ++count;
            }
    const double mse = sum / static_cast<double>(count);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

}  // namespace esr
