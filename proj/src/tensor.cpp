#include "esrkit/tensor.hpp"

#include <cmath>

namespace esr {

void ConvParams::check() const {
    if (out_channels <= 0 || in_channels <= 0)
        throw Error("conv channels must be positive");
    if (kernel_h <= 0 || kernel_w <= 0)
        throw Error("conv kernel dims must be positive");
    if (stride <= 0 || dilation <= 0)
        throw Error("conv stride/dilation must be positive");
    if (padding < 0) throw Error("conv padding must be nonnegative");
    if (groups <= 0) throw Error("conv groups must be positive");
    if (in_channels % groups != 0)
        throw Error("in_channels " + std::to_string(in_channels) +
                    " not divisible by groups " + std::to_string(groups));
    if (out_channels % groups != 0)
        throw Error("out_channels " + std::to_string(out_channels) +
                    " not divisible by groups " + std::to_string(groups));
}

void BnParams::check() const {
    const size_t c = gamma.size();
    if (beta.size() != c || running_mean.size() != c || running_var.size() != c)
        throw Error("batchnorm vectors have mismatched lengths");
    if (epsilon <= 0.0f) throw Error("batchnorm epsilon must be positive");
    for (float v : running_var)
        if (v < 0.0f) throw Error("batchnorm running_var must be nonnegative");
}

ActKind act_kind_from_string(const std::string& s) {
    if (s == "relu") return ActKind::Relu;
    if (s == "lrelu" || s == "leaky_relu") return ActKind::LeakyRelu;
    if (s == "prelu") return ActKind::Prelu;
    if (s == "silu") return ActKind::Silu;
    if (s == "gelu") return ActKind::Gelu;
    if (s == "sigmoid") return ActKind::Sigmoid;
    throw Error("unknown activation kind: " + s);
}

std::string act_kind_to_string(ActKind k) {
    switch (k) {
        case ActKind::Relu: return "relu";
        case ActKind::LeakyRelu: return "lrelu";
        case ActKind::Prelu: return "prelu";
        case ActKind::Silu: return "silu";
        case ActKind::Gelu: return "gelu";
        case ActKind::Sigmoid: return "sigmoid";
    }
    return "?";
}

Tensor conv2d(const Tensor& input, const ConvParams& p, const Tensor& weight,
              const std::optional<std::vector<float>>& bias) {
    p.check();
    if (input.c() != p.in_channels)
        throw Error("conv2d: input has " + std::to_string(input.c()) +
                    " channels, params expect in_channels=" +
                    std::to_string(p.in_channels));
    const int cpg_in = p.in_channels / p.groups;
    const int cpg_out = p.out_channels / p.groups;
    if (weight.n() != p.out_channels || weight.c() != cpg_in ||
        weight.h() != p.kernel_h || weight.w() != p.kernel_w)
        throw Error("conv2d: weight shape " + weight.shape_str() + " does not match (" +
                    std::to_string(p.out_channels) + "," + std::to_string(cpg_in) + "," +
                    std::to_string(p.kernel_h) + "," + std::to_string(p.kernel_w) + ")");
    if (p.has_bias) {
        if (!bias || static_cast<int>(bias->size()) != p.out_channels)
            throw Error("conv2d: bias length must equal out_channels=" +
                        std::to_string(p.out_channels));
    } else if (bias) {
        throw Error("conv2d: bias given but params.has_bias is false");
    }

    const int oh = p.out_h(input.h());
    const int ow = p.out_w(input.w());
    if (oh <= 0 || ow <= 0)
        throw Error("conv2d: empty output for input " + input.shape_str());

    Tensor out(input.n(), p.out_channels, oh, ow);
    for (int n = 0; n < input.n(); ++n) {
        for (int oc = 0; oc < p.out_channels; ++oc) {
            const int g = oc / cpg_out;
            const int ic0 = g * cpg_in;
            const float b = p.has_bias ? (*bias)[oc] : 0.0f;
            for (int y = 0; y < oh; ++y) {
                for (int x = 0; x < ow; ++x) {
                    float acc = 0.0f;
                    for (int kh = 0; kh < p.kernel_h; ++kh) {
                        const int iy = y * p.stride - p.padding + kh * p.dilation;
                        if (iy < 0 || iy >= input.h()) continue;
                        for (int kw = 0; kw < p.kernel_w; ++kw) {
                            const int ix = x * p.stride - p.padding + kw * p.dilation;
                            if (ix < 0 || ix >= input.w()) continue;
                            for (int ic = 0; ic < cpg_in; ++ic) {
                                acc += input.at(n, ic0 + ic, iy, ix) *
                                       weight.at(oc, ic, kh, kw);
                            }
                        }
                    }
                    out.at(n, oc, y, x) = acc + b;
                }
            }
        }
    }
    return out;
}

Tensor pixel_shuffle(const Tensor& input, int s) {
    if (s <= 0) throw Error("pixel_shuffle: scale must be positive");
    if (input.c() % (s * s) != 0)
        throw Error("pixel_shuffle: channels " + std::to_string(input.c()) +
                    " not divisible by s^2=" + std::to_string(s * s));
    const int oc = input.c() / (s * s);
    Tensor out(input.n(), oc, input.h() * s, input.w() * s);
    for (int n = 0; n < input.n(); ++n)
        for (int c = 0; c < oc; ++c)
            for (int y = 0; y < input.h(); ++y)
                for (int x = 0; x < input.w(); ++x)
                    for (int i = 0; i < s; ++i)
                        for (int j = 0; j < s; ++j)
                            out.at(n, c, y * s + i, x * s + j) =
                                input.at(n, c * s * s + i * s + j, y, x);
    return out;
}

namespace {

inline float sigmoid_f(float x) { return 1.0f / (1.0f + std::exp(-x)); }

// Exact normal-CDF form x * Phi(x).
inline float gelu_f(float x) {
    return x * 0.5f * (1.0f + std::erf(x / std::sqrt(2.0f)));
}

}  // namespace

Tensor activation(const Tensor& input, ActKind kind, float slope,
                  const std::vector<float>* prelu_slopes) {
    if (kind == ActKind::Prelu) {
        if (!prelu_slopes || static_cast<int>(prelu_slopes->size()) != input.c())
            throw Error("prelu: slope vector length must equal channel count " +
                        std::to_string(input.c()));
    }
    Tensor out = input;
    const int64_t plane = static_cast<int64_t>(input.h()) * input.w();
    auto& d = out.data();
    for (int n = 0; n < input.n(); ++n) {
        for (int c = 0; c < input.c(); ++c) {
            const float a = (kind == ActKind::Prelu) ? (*prelu_slopes)[c] : slope;
            float* p = d.data() + (static_cast<int64_t>(n) * input.c() + c) * plane;
            for (int64_t i = 0; i < plane; ++i) {
                const float x = p[i];
                switch (kind) {
                    case ActKind::Relu: p[i] = x > 0.0f ? x : 0.0f; break;
                    case ActKind::LeakyRelu:
                    case ActKind::Prelu: p[i] = x > 0.0f ? x : a * x; break;
                    case ActKind::Silu: p[i] = x * sigmoid_f(x); break;
                    case ActKind::Gelu: p[i] = gelu_f(x); break;
                    case ActKind::Sigmoid: p[i] = sigmoid_f(x); break;
                }
            }
        }
    }
    return out;
}

Tensor batchnorm_inference(const Tensor& input, const BnParams& bn) {
    bn.check();
    if (static_cast<int>(bn.gamma.size()) != input.c())
        throw Error("batchnorm: input has " + std::to_string(input.c()) +
                    " channels, bn vectors have length " +
                    std::to_string(bn.gamma.size()));
    Tensor out = input;
    for (int n = 0; n < input.n(); ++n) {
        for (int c = 0; c < input.c(); ++c) {
            const float inv = 1.0f / std::sqrt(bn.running_var[c] + bn.epsilon);
            const float scale = bn.gamma[c] * inv;
            const float shift = bn.beta[c] - bn.running_mean[c] * scale;
            for (int y = 0; y < input.h(); ++y)
                for (int x = 0; x < input.w(); ++x)
                    out.at(n, c, y, x) = input.at(n, c, y, x) * scale + shift;
        }
    }
    return out;
}

Tensor resize(const Tensor& input, ResizeMode mode, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw Error("resize: output dims must be >= 1");
    Tensor out(input.n(), input.c(), out_h, out_w);
    const double sy = static_cast<double>(input.h()) / out_h;
    const double sx = static_cast<double>(input.w()) / out_w;
    for (int n = 0; n < input.n(); ++n) {
        for (int c = 0; c < input.c(); ++c) {
            for (int y = 0; y < out_h; ++y) {
                for (int x = 0; x < out_w; ++x) {
                    float v;
                    if (mode == ResizeMode::Nearest) {
                        int iy = std::min(static_cast<int>(y * sy), input.h() - 1);
                        int ix = std::min(static_cast<int>(x * sx), input.w() - 1);
                        v = input.at(n, c, iy, ix);
                    } else {
                        const double fy = (y + 0.5) * sy - 0.5;
                        const double fx = (x + 0.5) * sx - 0.5;
                        const int y0c = static_cast<int>(std::floor(fy));
                        const int x0c = static_cast<int>(std::floor(fx));
                        const double wy = fy - y0c;
                        const double wx = fx - x0c;
                        auto clampi = [](int v, int hi) {
                            return v < 0 ? 0 : (v > hi ? hi : v);
                        };
                        const int y0 = clampi(y0c, input.h() - 1);
                        const int y1 = clampi(y0c + 1, input.h() - 1);
                        const int x0 = clampi(x0c, input.w() - 1);
                        const int x1 = clampi(x0c + 1, input.w() - 1);
                        const double top = input.at(n, c, y0, x0) * (1.0 - wx) +
                                           input.at(n, c, y0, x1) * wx;
                        const double bot = input.at(n, c, y1, x0) * (1.0 - wx) +
                                           input.at(n, c, y1, x1) * wx;
                        v = static_cast<float>(top * (1.0 - wy) + bot * wy);
                    }
                    out.at(n, c, y, x) = v;
                }
            }
        }
    }
    return out;
}

Tensor pool(const Tensor& input, PoolKind kind, int k, int stride) {
    if (kind == PoolKind::GlobalAvg) {
        k = input.h() > input.w() ? input.h() : input.w();
        Tensor out(input.n(), input.c(), 1, 1);
        const double plane = static_cast<double>(input.h()) * input.w();
        for (int n = 0; n < input.n(); ++n) {
            for (int c = 0; c < input.c(); ++c) {
                double acc = 0.0;
                for (int y = 0; y < input.h(); ++y)
                    for (int x = 0; x < input.w(); ++x) acc += input.at(n, c, y, x);
                out.at(n, c, 0, 0) = static_cast<float>(acc / plane);
            }
        }
        return out;
    }
    if (k <= 0 || stride <= 0) throw Error("pool: k and stride must be positive");
    if (k > input.h() || k > input.w())
        throw Error("pool: window " + std::to_string(k) + " larger than input " +
                    input.shape_str());
    const int oh = (input.h() - k) / stride + 1;
    const int ow = (input.w() - k) / stride + 1;
    Tensor out(input.n(), input.c(), oh, ow);
    for (int n = 0; n < input.n(); ++n) {
        for (int c = 0; c < input.c(); ++c) {
            for (int y = 0; y < oh; ++y) {
                for (int x = 0; x < ow; ++x) {
                    if (kind == PoolKind::Max) {
                        float m = input.at(n, c, y * stride, x * stride);
                        for (int i = 0; i < k; ++i)
                            for (int j = 0; j < k; ++j) {
                                const float v = input.at(n, c, y * stride + i, x * stride + j);
                                if (v > m) m = v;
                            }
                        out.at(n, c, y, x) = m;
                    } else {
                        double acc = 0.0;
                        for (int i = 0; i < k; ++i)
                            for (int j = 0; j < k; ++j)
                                acc += input.at(n, c, y * stride + i, x * stride + j);
                        out.at(n, c, y, x) = static_cast<float>(acc / (k * k));
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace esr
