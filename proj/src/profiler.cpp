#include "esrkit/profiler.hpp"

#include <chrono>
#include <iomanip>
#include <limits>
#include <sstream>

#include "esrkit/forward.hpp"

namespace esr {

namespace {

int input_channels_of(const ArchSpec& arch, const std::vector<std::vector<ChanShape>>& shapes,
                      const NodeSpec& node) {
    const InputRef& ref = node.inputs.at(0);
    if (ref.is_graph_input()) return arch.in_channels;
    return shapes[arch.find(ref.node)][ref.slot].c;
}

}  // namespace

int64_t count_params(const ArchSpec& arch) {
    const auto shapes = infer_shapes(arch, 64, 64);
    int64_t total = 0;
    for (const NodeSpec& n : arch.nodes) {
        if (n.kind == "conv") {
            const ConvParams p = conv_params_for(n, input_channels_of(arch, shapes, n));
            total += static_cast<int64_t>(p.out_channels) * (p.in_channels / p.groups) *
                     p.kernel_h * p.kernel_w;
            if (p.has_bias) total += p.out_channels;
        } else if (n.kind == "bn") {
            total += 4LL * input_channels_of(arch, shapes, n);
        } else if (n.kind == "act" && n.attr_str("fn") == "prelu") {
            total += input_channels_of(arch, shapes, n);
        } else if (n.kind == "mul" && n.attr_str("weight", "") == "channel") {
            total += input_channels_of(arch, shapes, n);
        }
    }
    return total;
}

int64_t count_flops(const ArchSpec& arch, int input_h, int input_w) {
    const auto shapes = infer_shapes(arch, input_h, input_w);
    int64_t total = 0;
    for (size_t i = 0; i < arch.nodes.size(); ++i) {
        const NodeSpec& n = arch.nodes[i];
        if (n.kind == "conv") {
            const ConvParams p = conv_params_for(n, input_channels_of(arch, shapes, n));
            const ChanShape& out = shapes[i][0];
            total += static_cast<int64_t>(out.c) * out.h * out.w *
                     (p.in_channels / p.groups) * p.kernel_h * p.kernel_w;
        } else if (n.kind == "mul") {
            // attention gates and channel weighting: one multiply per element
            const ChanShape& out = shapes[i][0];
            total += static_cast<int64_t>(out.c) * out.h * out.w;
        }
    }
    return total;
}

int64_t count_activations(const ArchSpec& arch, int input_h, int input_w) {
    const auto shapes = infer_shapes(arch, input_h, input_w);
    int64_t total = 0;
    for (size_t i = 0; i < arch.nodes.size(); ++i)
        if (arch.nodes[i].kind == "conv") {
            const ChanShape& out = shapes[i][0];
            total += static_cast<int64_t>(out.c) * out.h * out.w;
        }
    return total;
}

int count_convs(const ArchSpec& arch) {
    int count = 0;
    for (const NodeSpec& n : arch.nodes)
        if (n.kind == "conv") ++count;
    return count;
}

int64_t estimate_peak_memory(const ArchSpec& arch, int input_h, int input_w) {
    const auto shapes = infer_shapes(arch, input_h, input_w);
    const int n_nodes = static_cast<int>(arch.nodes.size());

    // last step each producer's outputs are read; -1 keys the graph input
    std::map<std::string, int> last_use;
    last_use["input"] = 0;
    for (int i = 0; i < n_nodes; ++i)
        for (const InputRef& ref : arch.nodes[i].inputs)
            last_use[ref.is_graph_input() ? "input" : ref.node] = i;

    auto bytes_of = [](const ChanShape& s) {
        return 4LL * s.c * s.h * s.w;
    };
    const int64_t input_bytes = 4LL * arch.in_channels * input_h * input_w;

    int64_t peak = 0;
    for (int step = 0; step < n_nodes; ++step) {
        int64_t live = 0;
        if (last_use.at("input") >= step) live += input_bytes;
        for (int j = 0; j <= step; ++j) {
            const std::string& name = arch.nodes[j].name;
            const auto it = last_use.find(name);
            const int last = it == last_use.end() ? j : std::max(it->second, j);
            if (last < step) continue;
            for (const ChanShape& s : shapes[j]) live += bytes_of(s);
        }
        peak = std::max(peak, live);
    }
    return peak;
}

double time_inference(const ArchSpec& arch, const WeightStore& weights,
                      const std::vector<Tensor>& inputs, int trials) {
    if (inputs.empty()) throw Error("time_inference: empty input list");
    if (trials < 1) throw Error("time_inference: trials must be >= 1");
    double best = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        const auto start = std::chrono::steady_clock::now();
        for (const Tensor& in : inputs) forward(arch, weights, in);
        const auto stop = std::chrono::steady_clock::now();
        const double ms =
            std::chrono::duration<double, std::milli>(stop - start).count() /
            static_cast<double>(inputs.size());
        best = std::min(best, ms);
    }
    return best;
}

MetricsReport profile(const ArchSpec& arch, int input_h, int input_w) {
    MetricsReport r;
    r.params = count_params(arch);
    r.flops = count_flops(arch, input_h, input_w);
    r.activations = count_activations(arch, input_h, input_w);
    r.conv_count = count_convs(arch);
    r.peak_activation_bytes = estimate_peak_memory(arch, input_h, input_w);
    r.input_h = input_h;
    r.input_w = input_w;
    return r;
}

std::string MetricsReport::csv_header() const {
    return "params,flops,activations,conv_count,peak_activation_bytes,runtime_ms,"
           "input_h,input_w";
}

std::string MetricsReport::csv_row() const {
    std::ostringstream out;
    out << params << ',' << flops << ',' << activations << ',' << conv_count << ','
        << peak_activation_bytes << ',';
    if (runtime_ms >= 0)
        out << std::fixed << std::setprecision(3) << runtime_ms;
    out << ',' << input_h << ',' << input_w;
    return out.str();
}

std::string MetricsReport::text() const {
    std::ostringstream out;
    out << std::fixed;
    out << "input size      " << input_h << "x" << input_w << "\n";
    out << "params          " << params << "  (" << std::setprecision(3)
        << params / 1e6 << "M)\n";
    out << "flops (MACs)    " << flops << "  (" << std::setprecision(2) << flops / 1e9
        << "G)\n";
    out << "activations     " << activations << "  (" << std::setprecision(2)
        << activations / 1e6 << "M)\n";
    out << "conv layers     " << conv_count << "\n";
    out << "peak activ mem  " << peak_activation_bytes << " bytes  ("
        << std::setprecision(2) << peak_activation_bytes / 1048576.0 << " MiB)\n";
    if (runtime_ms >= 0)
        out << "runtime         " << std::setprecision(3) << runtime_ms << " ms\n";
    return out.str();
}

}  // namespace esr
