#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esrkit/tensor.hpp"

namespace esr {

// 8-bit RGB image, row-major, pixel buffer length h*w*3.
struct ImageU8 {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> pixels;

    uint8_t& at(int y, int x, int c) {
        return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
};

// Bicubic degradation settings: cubic kernel with a = -0.5, support widened
// by the scale factor on downsampling when antialias is on.
struct DegradeConfig {
    int scale = 4;
    bool antialias = true;
};

ImageU8 load_png(const std::string& path);
void save_png(const ImageU8& img, const std::string& path);

// v -> v/255 into [0,1]; inverse rounds half away from zero after clamping.
Tensor to_tensor(const ImageU8& img);
ImageU8 to_image(const Tensor& t);

enum class ResizeDirection { Down, Up };

// Separable cubic resampling (a = -0.5). Down requires spatial dims divisible
// by the scale; weights are normalized per output sample and border taps are
// edge-replicated, matching the reference antialiased bicubic pipeline.
Tensor bicubic_resize(const Tensor& t, const DegradeConfig& cfg, ResizeDirection dir);

// 0.299 R + 0.587 G + 0.114 B
Tensor rgb_to_gray(const Tensor& t);

// Challenge protocol PSNR: crop `border` pixels on all sides, MSE over RGB in
// [0,1] scale, 10*log10(1/MSE). Identical crops return +infinity.
double psnr(const ImageU8& sr, const ImageU8& hr, int border = 4);

}  // namespace esr
