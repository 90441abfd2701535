#pragma once

#include <cstdint>

#include "esrkit/tensor.hpp"

namespace esr {

// Mean absolute / mean squared difference. Shapes must match.
double l1(const Tensor& a, const Tensor& b);
double l2(const Tensor& a, const Tensor& b);

// Fixed two-conv feature extractor phi used by the contrastive loss. Weights
// are drawn once from the seeded generator; identical seeds give identical
// extractors.
class RandomFeatureExtractor {
public:
    explicit RandomFeatureExtractor(uint64_t seed, int features = 16, int k = 3);

    Tensor operator()(const Tensor& x) const;
    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    int k_;
    Tensor w1_, w2_;
    std::vector<float> b1_, b2_;
};

// ||phi(sr) - phi(hr)||_1 / (||phi(sr) - phi(lr_up)||_1 + eps), both
// distances mean-reduced. lr_up is the bicubic-upsampled LR at SR size.
double contrastive(const Tensor& sr, const Tensor& hr, const Tensor& lr_up,
                   const RandomFeatureExtractor& extractor, double eps = 1e-8);

struct GvConfig {
    int n = 8;  // patch size of the variance map
    double lambda_x = 0.01;
    double lambda_y = 0.01;
    double lambda_l = 0.01;
};

struct GvTerms {
    double lx = 0.0;
    double ly = 0.0;
    double ll = 0.0;
};

// Gradient-variance terms: grayscale, valid sobel_x/sobel_y/laplacian maps,
// n x n patch sample variance (denominator n^2 - 1), L2 distance of the SR
// and HR variance maps per kernel.
GvTerms gv_loss(const Tensor& sr, const Tensor& hr, const GvConfig& cfg = {});

// Edge-enhanced gradient loss: L1 + lambda_x Lx + lambda_y Ly + lambda_l Ll.
double eg_loss(const Tensor& sr, const Tensor& hr, const GvConfig& cfg = {});

// High-frequency error norm: mean |laplacian(sr) - laplacian(hr)|,
// per channel, valid convolution.
double hfen(const Tensor& sr, const Tensor& hr);

}  // namespace esr
