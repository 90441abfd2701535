#include "esrkit/losses.hpp"

#include <cmath>
#include <random>

#include "esrkit/image.hpp"
#include "esrkit/reparam.hpp"

namespace esr {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
    if (!a.same_shape(b))
        throw Error(std::string(who) + ": shapes differ, " + a.shape_str() + " vs " +
                    b.shape_str());
}

// Valid (pad-free) depthwise convolution with one of the fixed 3x3 kernels.
Tensor fixed_valid(const Tensor& x, FixedKernelId id) {
    if (x.h() < 3 || x.w() < 3)
        throw Error("input smaller than the 3x3 derivative kernel");
    const Tensor k = fixed_kernel(id);
    ConvParams p;
    p.out_channels = p.in_channels = p.groups = x.c();
    p.kernel_h = p.kernel_w = 3;
    p.has_bias = false;
    Tensor w(x.c(), 1, 3, 3);
    for (int c = 0; c < x.c(); ++c)
        for (int u = 0; u < 3; ++u)
            for (int v = 0; v < 3; ++v) w.at(c, 0, u, v) = k.at(0, 0, u, v);
    return conv2d(x, p, w);
}

}  // namespace

double l1(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "l1");
    double acc = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i)
        acc += std::abs(static_cast<double>(a.data()[i]) - b.data()[i]);
    return acc / static_cast<double>(a.numel());
}

double l2(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "l2");
    double acc = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i) {
        const double d = static_cast<double>(a.data()[i]) - b.data()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.numel());
}

RandomFeatureExtractor::RandomFeatureExtractor(uint64_t seed, int features, int k)
    : seed_(seed), k_(k), w1_(features, 3, k, k), w2_(features, features, k, k),
      b1_(features, 0.0f), b2_(features, 0.0f) {
    if (k < 1 || k % 2 == 0) throw Error("extractor kernel size must be odd");
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> gauss(0.0f, 0.1f);
    for (auto& v : w1_.data()) v = gauss(rng);
    for (auto& v : b1_) v = gauss(rng);
    for (auto& v : w2_.data()) v = gauss(rng);
    for (auto& v : b2_) v = gauss(rng);
}

Tensor RandomFeatureExtractor::operator()(const Tensor& x) const {
    if (x.c() != 3)
        throw Error("extractor expects 3-channel input, got " + x.shape_str());
    ConvParams p1;
    p1.out_channels = w1_.n();
    p1.in_channels = 3;
    p1.kernel_h = p1.kernel_w = k_;
    p1.padding = k_ / 2;
    Tensor h = conv2d(x, p1, w1_, b1_);
    h = activation(h, ActKind::LeakyRelu, 0.05f);
    ConvParams p2 = p1;
    p2.in_channels = w1_.n();
    return conv2d(h, p2, w2_, b2_);
}

double contrastive(const Tensor& sr, const Tensor& hr, const Tensor& lr_up,
                   const RandomFeatureExtractor& extractor, double eps) {
    check_same_shape(sr, hr, "contrastive");
    check_same_shape(sr, lr_up, "contrastive");
    const Tensor f_sr = extractor(sr);
    const double num = l1(f_sr, extractor(hr));
    const double den = l1(f_sr, extractor(lr_up));
    return num / (den + eps);
}

GvTerms gv_loss(const Tensor& sr, const Tensor& hr, const GvConfig& cfg) {
    check_same_shape(sr, hr, "gv_loss");
    if (cfg.n < 2) throw Error("gv_loss: patch size must be >= 2");
    const Tensor gs = rgb_to_gray(sr);
    const Tensor gh = rgb_to_gray(hr);

    // Per-patch sample variance of one gradient map, cropped to multiples
    // of n.
    auto variance_map = [&](const Tensor& grad) {
        const int n = cfg.n;
        const int ph = grad.h() / n;
        const int pw = grad.w() / n;
        if (ph == 0 || pw == 0)
            throw Error("gv_loss: gradient map smaller than patch size " +
                        std::to_string(n));
        std::vector<double> vars;
        vars.reserve(static_cast<size_t>(grad.n()) * ph * pw);
        for (int b = 0; b < grad.n(); ++b)
            for (int py = 0; py < ph; ++py)
                for (int px = 0; px < pw; ++px) {
                    double sum = 0.0, sq = 0.0;
                    for (int y = 0; y < n; ++y)
                        for (int x = 0; x < n; ++x) {
                            const double v = grad.at(b, 0, py * n + y, px * n + x);
                            sum += v;
                            sq += v * v;
                        }
                    const double cnt = static_cast<double>(n) * n;
                    vars.push_back((sq - sum * sum / cnt) / (cnt - 1.0));
                }
        return vars;
    };
    auto term = [&](FixedKernelId id) {
        const auto vs = variance_map(fixed_valid(gs, id));
        const auto vh = variance_map(fixed_valid(gh, id));
        double acc = 0.0;
        for (size_t i = 0; i < vs.size(); ++i) {
            const double d = vs[i] - vh[i];
            acc += d * d;
        }
        return std::sqrt(acc / static_cast<double>(vs.size()));
    };
    return {term(FixedKernelId::SobelX), term(FixedKernelId::SobelY),
            term(FixedKernelId::Laplacian)};
}

double eg_loss(const Tensor& sr, const Tensor& hr, const GvConfig& cfg) {
    const GvTerms t = gv_loss(sr, hr, cfg);
    return l1(sr, hr) + cfg.lambda_x * t.lx + cfg.lambda_y * t.ly + cfg.lambda_l * t.ll;
}

double hfen(const Tensor& sr, const Tensor& hr) {
    check_same_shape(sr, hr, "hfen");
    return l1(fixed_valid(sr, FixedKernelId::Laplacian),
              fixed_valid(hr, FixedKernelId::Laplacian));
}

}  // namespace esr
