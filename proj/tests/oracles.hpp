// Independent brute-force oracles: straightforward nested loops with no
// shared code paths with the library kernels, used to pin their semantics.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "esrkit/tensor.hpp"

namespace oracle {

// Cross-correlation with zero padding, accumulated in double with a loop
// order (in-channel outermost) different from the library's.
inline esr::Tensor conv2d(const esr::Tensor& x, const esr::ConvParams& p,
                          const esr::Tensor& w, const std::vector<float>* bias) {
    const int oh = p.out_h(x.h());
    const int ow = p.out_w(x.w());
    esr::Tensor y(x.n(), p.out_channels, oh, ow);
    const int cpg_in = p.in_channels / p.groups;
    const int cpg_out = p.out_channels / p.groups;
    for (int n = 0; n < x.n(); ++n)
        for (int oc = 0; oc < p.out_channels; ++oc) {
            const int g = oc / cpg_out;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bias ? (*bias)[oc] : 0.0;
                    for (int ic = 0; ic < cpg_in; ++ic)
                        for (int ky = 0; ky < p.kernel_h; ++ky)
                            for (int kx = 0; kx < p.kernel_w; ++kx) {
                                const int iy = oy * p.stride + ky * p.dilation - p.padding;
                                const int ix = ox * p.stride + kx * p.dilation - p.padding;
                                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w())
                                    continue;
                                acc += static_cast<double>(
                                           x.at(n, g * cpg_in + ic, iy, ix)) *
                                       w.at(oc, ic, ky, kx);
                            }
                    y.at(n, oc, oy, ox) = static_cast<float>(acc);
                }
        }
    return y;
}

inline esr::Tensor pixel_shuffle(const esr::Tensor& x, int s) {
    esr::Tensor y(x.n(), x.c() / (s * s), x.h() * s, x.w() * s);
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < y.c(); ++c)
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w)
                    for (int i = 0; i < s; ++i)
                        for (int j = 0; j < s; ++j)
                            y.at(n, c, h * s + i, w * s + j) =
                                x.at(n, c * s * s + i * s + j, h, w);
    return y;
}

inline esr::Tensor pool(const esr::Tensor& x, esr::PoolKind kind, int k, int stride) {
    if (kind == esr::PoolKind::GlobalAvg) {
        esr::Tensor y(x.n(), x.c(), 1, 1);
        for (int n = 0; n < x.n(); ++n)
            for (int c = 0; c < x.c(); ++c) {
                double acc = 0.0;
                for (int h = 0; h < x.h(); ++h)
                    for (int w = 0; w < x.w(); ++w) acc += x.at(n, c, h, w);
                y.at(n, c, 0, 0) = static_cast<float>(acc / (x.h() * x.w()));
            }
        return y;
    }
    const int oh = (x.h() - k) / stride + 1;
    const int ow = (x.w() - k) / stride + 1;
    esr::Tensor y(x.n(), x.c(), oh, ow);
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = kind == esr::PoolKind::Max
                                     ? -std::numeric_limits<double>::infinity()
                                     : 0.0;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const double v = x.at(n, c, oy * stride + ky, ox * stride + kx);
                            if (kind == esr::PoolKind::Max)
                                acc = std::max(acc, v);
                            else
                                acc += v;
                        }
                    y.at(n, c, oy, ox) = static_cast<float>(
                        kind == esr::PoolKind::Max ? acc : acc / (k * k));
                }
    return y;
}

// align-corners-false bilinear with clamped source coordinates
inline esr::Tensor resize_bilinear(const esr::Tensor& x, int oh, int ow) {
    esr::Tensor y(x.n(), x.c(), oh, ow);
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double sy = (oy + 0.5) * x.h() / oh - 0.5;
                    double sx = (ox + 0.5) * x.w() / ow - 0.5;
                    sy = std::clamp(sy, 0.0, static_cast<double>(x.h() - 1));
                    sx = std::clamp(sx, 0.0, static_cast<double>(x.w() - 1));
                    const int y0 = static_cast<int>(std::floor(sy));
                    const int x0 = static_cast<int>(std::floor(sx));
                    const int y1 = std::min(y0 + 1, x.h() - 1);
                    const int x1 = std::min(x0 + 1, x.w() - 1);
                    const double fy = sy - y0;
                    const double fx = sx - x0;
                    y.at(n, c, oy, ox) = static_cast<float>(
                        (1 - fy) * ((1 - fx) * x.at(n, c, y0, x0) +
                                    fx * x.at(n, c, y0, x1)) +
                        fy * ((1 - fx) * x.at(n, c, y1, x0) + fx * x.at(n, c, y1, x1)));
                }
    return y;
}

inline double max_abs_diff(const esr::Tensor& a, const esr::Tensor& b) {
    if (!a.same_shape(b)) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
    return m;
}

inline esr::Tensor random_tensor(std::mt19937_64& rng, int n, int c, int h, int w,
                                 float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> uni(lo, hi);
    esr::Tensor t(n, c, h, w);
    for (auto& v : t.data()) v = uni(rng);
    return t;
}

}  // namespace oracle
