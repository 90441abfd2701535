#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esrkit/arch.hpp"
#include "esrkit/weights.hpp"

namespace esr {

// Challenge efficiency metrics for one arch at one input size. flops counts
// multiply-accumulates; activations counts elements of conv outputs only.
struct MetricsReport {
    int64_t params = 0;
    int64_t flops = 0;
    int64_t activations = 0;
    int conv_count = 0;
    int64_t peak_activation_bytes = 0;
    double runtime_ms = -1.0;  // < 0 when not timed
    int input_h = 256;
    int input_w = 256;

    std::string csv_header() const;
    std::string csv_row() const;
    std::string text() const;
};

int64_t count_params(const ArchSpec& arch);
int64_t count_flops(const ArchSpec& arch, int input_h = 256, int input_w = 256);
int64_t count_activations(const ArchSpec& arch, int input_h = 256, int input_w = 256);
int count_convs(const ArchSpec& arch);

// Max over the topological schedule of live tensor bytes (4 bytes/element);
// a tensor is live from its producer until its last consumer.
int64_t estimate_peak_memory(const ArchSpec& arch, int input_h, int input_w);

// Best-of-`trials` average wall-clock milliseconds per input.
double time_inference(const ArchSpec& arch, const WeightStore& weights,
                      const std::vector<Tensor>& inputs, int trials = 3);

MetricsReport profile(const ArchSpec& arch, int input_h = 256, int input_w = 256);

}  // namespace esr
