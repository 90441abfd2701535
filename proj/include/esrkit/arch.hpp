#pragma once

#include <map>
#include <string>
#include <vector>

#include "esrkit/tensor.hpp"

namespace esr {

// Reference to a producing node output. `node` is "input" for the graph
// input; `slot` selects a split output.
struct InputRef {
    std::string node;
    int slot = 0;

    bool is_graph_input() const { return node == "input"; }
    std::string str() const {
        return slot == 0 ? node : node + ":" + std::to_string(slot);
    }
};

// One layer node. Kinds: conv, bn, act, pixel_shuffle, add, mul, concat,
// split, pool, resize, global_skip_ref. Hyperparameters are stored as
// key=value strings; typed accessors below.
struct NodeSpec {
    std::string name;
    std::string kind;
    std::map<std::string, std::string> attrs;
    std::vector<InputRef> inputs;

    bool has_attr(const std::string& key) const { return attrs.count(key) > 0; }
    int attr_int(const std::string& key) const;
    int attr_int(const std::string& key, int fallback) const;
    double attr_double(const std::string& key, double fallback) const;
    std::string attr_str(const std::string& key) const;
    std::string attr_str(const std::string& key, const std::string& fallback) const;
};

// Declarative dataflow graph; nodes are listed in topological order.
struct ArchSpec {
    int scale = 4;
    int in_channels = 3;
    std::vector<NodeSpec> nodes;

    // index of a node by name, -1 if absent
    int find(const std::string& name) const;
    const NodeSpec& node(const std::string& name) const;
};

struct Diagnostic {
    std::string node;  // empty for graph-level issues
    std::string message;
};

// Spatial-free shape of one node output.
struct ChanShape {
    int c = 0;
    int h = 0;
    int w = 0;
};

// Empty result iff the graph invariants hold.
std::vector<Diagnostic> validate(const ArchSpec& arch);

// Per-node output shapes for a given input size. Throws Error if the graph
// does not validate.
std::vector<std::vector<ChanShape>> infer_shapes(const ArchSpec& arch, int input_h,
                                                 int input_w);

// Resolved conv hyperparameters for a conv node given its input channel count.
ConvParams conv_params_for(const NodeSpec& node, int in_channels);

// Text format: optional "scale N" / "in_channels N" header lines, then one
// node per line: `name kind key=value... inputs=a,b:1`.
ArchSpec parse_arch(const std::string& text);
ArchSpec load_arch(const std::string& path);
std::string serialize_arch(const ArchSpec& arch);
void save_arch(const ArchSpec& arch, const std::string& path);

}  // namespace esr
