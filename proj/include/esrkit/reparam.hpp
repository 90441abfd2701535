#pragma once

#include <string>
#include <utility>
#include <vector>

#include "esrkit/arch.hpp"
#include "esrkit/tensor.hpp"
#include "esrkit/weights.hpp"

namespace esr {

enum class FixedKernelId { SobelX, SobelY, Laplacian };

FixedKernelId fixed_kernel_from_string(const std::string& s);
std::string fixed_kernel_to_string(FixedKernelId id);

// 1x1x3x3 constant kernel, never trained.
// sobel_x = [[1,0,-1],[2,0,-2],[1,0,-1]], sobel_y its transpose,
// laplacian = [[0,1,0],[1,-4,1],[0,1,0]] (4-neighbor form).
Tensor fixed_kernel(FixedKernelId id);

// Merged convolution weights: weight (O, I, k, k) plus dense bias of length O
// (zeros when the source had none).
struct ConvWB {
    Tensor weight;
    std::vector<float> bias;
};

// WX + X = (W + I)X: adds 1 at [c, c, center, center]. W must map C -> C
// with odd kernel dims.
ConvWB merge_identity(const Tensor& weight, std::vector<float> bias);

// Absorb inference-mode BN into the preceding convolution:
// W'_c = W_c * g_c / sqrt(var_c + eps), b'_c = beta_c + (b_c - mean_c) * g_c / sqrt(var_c + eps).
ConvWB fold_bn(const Tensor& weight, const std::vector<float>& bias, const BnParams& bn);

// Collapse conv1x1 -> convkxk into one k x k convolution. Equivalence holds on
// the full output, borders included, when the reference branch pads the
// intermediate feature with the constant b1 rather than zero.
ConvWB merge_seq_1x1_kxk(const Tensor& w1, const std::vector<float>& b1,
                         const Tensor& w3, const std::vector<float>& b3);

// One branch of a multi-branch training-time block. All branches of a merge
// share out/in channel counts and target a common odd k x k kernel.
struct Branch {
    enum class Variant { ConvKxK, Conv1xK, ConvKx1, Seq1x1KxK, Identity, ScaledFixed };

    Variant variant = Variant::ConvKxK;
    int index = 0;  // canonical summation order

    // ConvKxK / Conv1xK / ConvKx1: weight + bias.
    // Seq1x1KxK: weight (1x1) + bias, then weight2 (k x k) + bias2.
    // ScaledFixed: weight (1x1 scale) + bias, then the constant depthwise kernel.
    Tensor weight;
    std::vector<float> bias;
    Tensor weight2;
    std::vector<float> bias2;
    FixedKernelId fixed = FixedKernelId::SobelX;

    static Branch conv(Tensor w, std::vector<float> b, int index = 0);
    static Branch seq(Tensor w1, std::vector<float> b1, Tensor w3, std::vector<float> b3,
                      int index = 0);
    static Branch identity(int index = 0);
    static Branch scaled_fixed(Tensor scale, std::vector<float> b, FixedKernelId id,
                               int index = 0);
};

// Lower every branch to an equivalent k x k kernel and sum. Branches are
// summed sorted by their index so the result is order invariant.
ConvWB merge_parallel(const std::vector<Branch>& branches, int k);

// Remove out channels of `layer` not in `keep` and the matching in-channel
// slices of every direct consumer. Supported adjacency: conv -> conv,
// conv -> act -> conv, and concat bookkeeping in between.
std::pair<ArchSpec, WeightStore> prune_channels(const ArchSpec& arch,
                                                const WeightStore& weights,
                                                const std::string& layer_name,
                                                const std::vector<int>& keep);

// Collapse every tagged branch group (nodes sharing a rep=<id> attribute)
// into a single convolution and fold every conv-adjacent bn. Idempotent.
std::pair<ArchSpec, WeightStore> collapse_arch(const ArchSpec& arch,
                                               const WeightStore& weights);

}  // namespace esr
