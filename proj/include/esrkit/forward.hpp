#pragma once

#include "esrkit/arch.hpp"
#include "esrkit/tensor.hpp"
#include "esrkit/weights.hpp"

namespace esr {

// Execute the graph on one input tensor. Weights are bound strictly first;
// evaluation is serial and deterministic.
Tensor forward(const ArchSpec& arch, const WeightStore& weights, const Tensor& input);

}  // namespace esr
