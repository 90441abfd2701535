#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace esr {

// Domain error raised by every module; the CLI maps it to exit code 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense NCHW float tensor, row-major with w fastest.
class Tensor {
public:
    Tensor() = default;
    Tensor(int n, int c, int h, int w)
        : n_(n), c_(c), h_(h), w_(w),
          data_(static_cast<size_t>(check_dims(n, c, h, w)), 0.0f) {}
    Tensor(int n, int c, int h, int w, std::vector<float> data)
        : n_(n), c_(c), h_(h), w_(w), data_(std::move(data)) {
        if (data_.size() != static_cast<size_t>(check_dims(n, c, h, w)))
            throw Error("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_str());
    }

    int n() const { return n_; }
    int c() const { return c_; }
    int h() const { return h_; }
    int w() const { return w_; }
    int64_t numel() const { return static_cast<int64_t>(n_) * c_ * h_ * w_; }

    float& at(int n, int c, int h, int w) {
        return data_[((static_cast<size_t>(n) * c_ + c) * h_ + h) * w_ + w];
    }
    float at(int n, int c, int h, int w) const {
        return data_[((static_cast<size_t>(n) * c_ + c) * h_ + h) * w_ + w];
    }

    std::vector<float>& data() { return data_; }
    const std::vector<float>& data() const { return data_; }

    bool same_shape(const Tensor& o) const {
        return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
    }
    std::string shape_str() const {
        return std::to_string(n_) + "x" + std::to_string(c_) + "x" +
               std::to_string(h_) + "x" + std::to_string(w_);
    }

private:
    static int64_t check_dims(int n, int c, int h, int w) {
        if (n < 0 || c < 0 || h < 0 || w < 0)
            throw Error("negative tensor dimension");
        return static_cast<int64_t>(n) * c * h * w;
    }

    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<float> data_;
};

struct ConvParams {
    int out_channels = 0;
    int in_channels = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    int stride = 1;
    int dilation = 1;
    int padding = 0;  // symmetric zero pad
    int groups = 1;
    bool has_bias = true;

    void check() const;
    int out_h(int h) const {
        return (h + 2 * padding - dilation * (kernel_h - 1) - 1) / stride + 1;
    }
    int out_w(int w) const {
        return (w + 2 * padding - dilation * (kernel_w - 1) - 1) / stride + 1;
    }
};

struct BnParams {
    std::vector<float> gamma;
    std::vector<float> beta;
    std::vector<float> running_mean;
    std::vector<float> running_var;
    float epsilon = 1e-5f;

    void check() const;
};

enum class ActKind { Relu, LeakyRelu, Prelu, Silu, Gelu, Sigmoid };

ActKind act_kind_from_string(const std::string& s);
std::string act_kind_to_string(ActKind k);

enum class PoolKind { Max, Avg, GlobalAvg };
enum class ResizeMode { Nearest, Bilinear };

// Direct cross-correlation with zero padding. Accumulation is
// kernel-row-major, then input-channel, so serial results are bitwise
// reproducible.
Tensor conv2d(const Tensor& input, const ConvParams& params, const Tensor& weight,
              const std::optional<std::vector<float>>& bias = std::nullopt);

// out[n, c', h*s+i, w*s+j] = in[n, c'*s*s + i*s + j, h, w]
Tensor pixel_shuffle(const Tensor& input, int s);

Tensor activation(const Tensor& input, ActKind kind, float slope = 0.0f,
                  const std::vector<float>* prelu_slopes = nullptr);

Tensor batchnorm_inference(const Tensor& input, const BnParams& bn);

// nearest: floor index mapping; bilinear: align-corners-false, i.e. the
// source coordinate of output pixel i is (i + 0.5) * in/out - 0.5, clamped.
Tensor resize(const Tensor& input, ResizeMode mode, int out_h, int out_w);

// Window reduction without padding; window must fit inside the input.
Tensor pool(const Tensor& input, PoolKind kind, int k, int stride);

}  // namespace esr
