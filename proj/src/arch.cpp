#include "esrkit/arch.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace esr {

int NodeSpec::attr_int(const std::string& key) const {
    auto it = attrs.find(key);
    if (it == attrs.end())
        throw Error("node " + name + ": missing attribute '" + key + "'");
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw Error("node " + name + ": attribute " + key + "=" + it->second +
                    " is not an integer");
    }
}

int NodeSpec::attr_int(const std::string& key, int fallback) const {
    return attrs.count(key) ? attr_int(key) : fallback;
}

double NodeSpec::attr_double(const std::string& key, double fallback) const {
    auto it = attrs.find(key);
    if (it == attrs.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw Error("node " + name + ": attribute " + key + "=" + it->second +
                    " is not a number");
    }
}

std::string NodeSpec::attr_str(const std::string& key) const {
    auto it = attrs.find(key);
    if (it == attrs.end())
        throw Error("node " + name + ": missing attribute '" + key + "'");
    return it->second;
}

std::string NodeSpec::attr_str(const std::string& key, const std::string& fallback) const {
    auto it = attrs.find(key);
    return it == attrs.end() ? fallback : it->second;
}

int ArchSpec::find(const std::string& name) const {
    for (size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].name == name) return static_cast<int>(i);
    return -1;
}

const NodeSpec& ArchSpec::node(const std::string& name) const {
    const int i = find(name);
    if (i < 0) throw Error("no node named " + name);
    return nodes[i];
}

ConvParams conv_params_for(const NodeSpec& node, int in_channels) {
    ConvParams p;
    p.out_channels = node.attr_int("out");
    p.in_channels = in_channels;
    if (node.has_attr("k")) {
        p.kernel_h = p.kernel_w = node.attr_int("k");
    } else {
        p.kernel_h = node.attr_int("kh");
        p.kernel_w = node.attr_int("kw");
    }
    p.stride = node.attr_int("stride", 1);
    p.dilation = node.attr_int("dilation", 1);
    p.padding = node.attr_int("pad", 0);
    p.groups = node.attr_int("groups", 1);
    p.has_bias = node.attr_int("bias", 1) != 0;
    return p;
}

namespace {

const std::set<std::string> kKnownKinds = {
    "conv", "bn",    "act",  "pixel_shuffle", "add",    "mul",
    "concat", "split", "pool", "resize",        "global_skip_ref"};

std::vector<int> split_sizes(const NodeSpec& node) {
    std::vector<int> sizes;
    std::stringstream ss(node.attr_str("sizes"));
    std::string part;
    while (std::getline(ss, part, ','))
        sizes.push_back(std::stoi(part));
    return sizes;
}

// Shared walk used by validate (collecting) and infer_shapes (throwing).
// Returns per-node output-slot shapes; on problems appends diagnostics and
// leaves the node's shapes empty (downstream users of it get flagged too,
// once, via the unresolved marker).
std::vector<std::vector<ChanShape>> walk_shapes(const ArchSpec& arch, int input_h,
                                                int input_w,
                                                std::vector<Diagnostic>& diags) {
    std::vector<std::vector<ChanShape>> shapes(arch.nodes.size());
    std::map<std::string, int> index;
    const ChanShape input_shape{arch.in_channels, input_h, input_w};

    auto diag = [&](const std::string& node, const std::string& msg) {
        diags.push_back({node, msg});
    };

    if (arch.scale < 1) diag("", "declared scale must be >= 1");
    if (arch.in_channels < 1) diag("", "declared input channels must be >= 1");

    for (size_t i = 0; i < arch.nodes.size(); ++i) {
        const NodeSpec& n = arch.nodes[i];
        if (n.name.empty() || n.name == "input") {
            diag(n.name, "invalid node name");
            continue;
        }
        if (index.count(n.name)) {
            diag(n.name, "duplicate node name");
            continue;
        }

        bool ok = true;
        if (!kKnownKinds.count(n.kind)) {
            diag(n.name, "unknown kind '" + n.kind + "'");
            ok = false;
        }

        std::vector<ChanShape> ins;
        for (const InputRef& ref : n.inputs) {
            if (ref.is_graph_input()) {
                ins.push_back(input_shape);
                continue;
            }
            auto it = index.find(ref.node);
            if (it == index.end()) {
                diag(n.name, "input reference '" + ref.node +
                                 "' does not resolve to a prior node");
                ok = false;
                break;
            }
            const auto& src = shapes[it->second];
            if (src.empty()) {  // upstream already diagnosed
                ok = false;
                break;
            }
            if (ref.slot < 0 || ref.slot >= static_cast<int>(src.size())) {
                diag(n.name, "input reference '" + ref.str() + "' has no slot " +
                                 std::to_string(ref.slot));
                ok = false;
                break;
            }
            ins.push_back(src[ref.slot]);
        }
        index[n.name] = static_cast<int>(i);
        if (!ok) continue;

        auto need_inputs = [&](size_t cnt) {
            if (ins.size() != cnt) {
                diag(n.name, n.kind + " expects " + std::to_string(cnt) +
                                 " input(s), has " + std::to_string(ins.size()));
                return false;
            }
            return true;
        };

        try {
            std::vector<ChanShape> out;
            if (n.kind == "conv") {
                if (!need_inputs(1)) continue;
                ConvParams p = conv_params_for(n, ins[0].c);
                p.check();
                const int oh = p.out_h(ins[0].h);
                const int ow = p.out_w(ins[0].w);
                if (oh <= 0 || ow <= 0) throw Error("conv output is empty");
                out.push_back({p.out_channels, oh, ow});
            } else if (n.kind == "bn") {
                if (!need_inputs(1)) continue;
                out.push_back(ins[0]);
            } else if (n.kind == "act") {
                if (!need_inputs(1)) continue;
                act_kind_from_string(n.attr_str("fn"));
                out.push_back(ins[0]);
            } else if (n.kind == "pixel_shuffle") {
                if (!need_inputs(1)) continue;
                const int s = n.attr_int("s");
                if (s < 1) throw Error("pixel_shuffle scale must be >= 1");
                if (ins[0].c % (s * s) != 0)
                    throw Error("channels " + std::to_string(ins[0].c) +
                                " not divisible by s^2=" + std::to_string(s * s));
                out.push_back({ins[0].c / (s * s), ins[0].h * s, ins[0].w * s});
            } else if (n.kind == "add" || n.kind == "mul") {
                const bool channel_weight =
                    n.kind == "mul" && n.attr_str("weight", "") == "channel";
                if (channel_weight) {
                    if (!need_inputs(1)) continue;
                } else {
                    if (ins.size() < 2)
                        throw Error(n.kind + " needs at least 2 inputs");
                    for (size_t j = 1; j < ins.size(); ++j)
                        if (ins[j].c != ins[0].c || ins[j].h != ins[0].h ||
                            ins[j].w != ins[0].w)
                            throw Error("input shapes disagree");
                }
                out.push_back(ins[0]);
            } else if (n.kind == "concat") {
                if (ins.size() < 2) throw Error("concat needs at least 2 inputs");
                int c = ins[0].c;
                for (size_t j = 1; j < ins.size(); ++j) {
                    if (ins[j].h != ins[0].h || ins[j].w != ins[0].w)
                        throw Error("concat spatial dims disagree");
                    c += ins[j].c;
                }
                out.push_back({c, ins[0].h, ins[0].w});
            } else if (n.kind == "split") {
                if (!need_inputs(1)) continue;
                const auto sizes = split_sizes(n);
                int total = 0;
                for (int s : sizes) {
                    if (s <= 0) throw Error("split sizes must be positive");
                    total += s;
                }
                if (total != ins[0].c)
                    throw Error("split sizes sum to " + std::to_string(total) +
                                ", input has " + std::to_string(ins[0].c) +
                                " channels");
                for (int s : sizes) out.push_back({s, ins[0].h, ins[0].w});
            } else if (n.kind == "pool") {
                if (!need_inputs(1)) continue;
                const std::string kind = n.attr_str("fn");
                if (kind == "global_avg") {
                    out.push_back({ins[0].c, 1, 1});
                } else if (kind == "max" || kind == "avg") {
                    const int k = n.attr_int("k");
                    const int stride = n.attr_int("stride", k);
                    if (k > ins[0].h || k > ins[0].w)
                        throw Error("pool window larger than input");
                    out.push_back({ins[0].c, (ins[0].h - k) / stride + 1,
                                   (ins[0].w - k) / stride + 1});
                } else {
                    throw Error("unknown pool fn '" + kind + "'");
                }
            } else if (n.kind == "resize") {
                const std::string mode = n.attr_str("mode");
                if (mode != "nearest" && mode != "bilinear")
                    throw Error("unknown resize mode '" + mode + "'");
                int oh, ow;
                if (ins.size() == 2) {
                    // second input supplies the target spatial size
                    oh = ins[1].h;
                    ow = ins[1].w;
                } else if (ins.size() == 1 && n.has_attr("scale")) {
                    const int s = n.attr_int("scale");
                    oh = ins[0].h * s;
                    ow = ins[0].w * s;
                } else if (ins.size() == 1) {
                    oh = n.attr_int("out_h");
                    ow = n.attr_int("out_w");
                } else {
                    throw Error("resize takes 1 input (+size attrs) or 2 inputs");
                }
                if (oh < 1 || ow < 1) throw Error("resize output dims must be >= 1");
                out.push_back({ins[0].c, oh, ow});
            } else if (n.kind == "global_skip_ref") {
                if (!need_inputs(1)) continue;
                out.push_back(ins[0]);
            }
            shapes[i] = std::move(out);
        } catch (const Error& e) {
            diag(n.name, e.what());
        }
    }
    return shapes;
}

}  // namespace

std::vector<Diagnostic> validate(const ArchSpec& arch) {
    std::vector<Diagnostic> diags;
    // Channel arithmetic is checked at a nominal input size; every rule
    // except pool-window fit is resolution independent.
    walk_shapes(arch, 64, 64, diags);
    return diags;
}

std::vector<std::vector<ChanShape>> infer_shapes(const ArchSpec& arch, int input_h,
                                                 int input_w) {
    std::vector<Diagnostic> diags;
    auto shapes = walk_shapes(arch, input_h, input_w, diags);
    if (!diags.empty())
        throw Error("invalid arch: node '" + diags[0].node + "': " + diags[0].message);
    return shapes;
}

namespace {

InputRef parse_ref(const std::string& token) {
    const auto pos = token.rfind(':');
    if (pos == std::string::npos) return {token, 0};
    return {token.substr(0, pos), std::stoi(token.substr(pos + 1))};
}

}  // namespace

ArchSpec parse_arch(const std::string& text) {
    ArchSpec arch;
    std::istringstream stream(text);
    std::string line;
    int lineno = 0;
    while (std::getline(stream, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::vector<std::string> tokens;
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
        if (tokens.empty()) continue;

        if (tokens[0] == "scale" && tokens.size() == 2) {
            arch.scale = std::stoi(tokens[1]);
            continue;
        }
        if (tokens[0] == "in_channels" && tokens.size() == 2) {
            arch.in_channels = std::stoi(tokens[1]);
            continue;
        }
        if (tokens.size() < 2)
            throw Error("arch line " + std::to_string(lineno) +
                        ": expected 'name kind ...'");

        NodeSpec node;
        node.name = tokens[0];
        node.kind = tokens[1];
        for (size_t i = 2; i < tokens.size(); ++i) {
            const auto eq = tokens[i].find('=');
            if (eq == std::string::npos)
                throw Error("arch line " + std::to_string(lineno) +
                            ": expected key=value, got '" + tokens[i] + "'");
            const std::string key = tokens[i].substr(0, eq);
            const std::string value = tokens[i].substr(eq + 1);
            if (key == "inputs") {
                std::stringstream rs(value);
                std::string ref;
                while (std::getline(rs, ref, ','))
                    node.inputs.push_back(parse_ref(ref));
            } else {
                node.attrs[key] = value;
            }
        }
        arch.nodes.push_back(std::move(node));
    }
    return arch;
}

ArchSpec load_arch(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open arch file " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_arch(buf.str());
}

std::string serialize_arch(const ArchSpec& arch) {
    std::ostringstream out;
    out << "scale " << arch.scale << "\n";
    out << "in_channels " << arch.in_channels << "\n";
    for (const NodeSpec& n : arch.nodes) {
        out << n.name << " " << n.kind;
        for (const auto& [k, v] : n.attrs) out << " " << k << "=" << v;
        if (!n.inputs.empty()) {
            out << " inputs=";
            for (size_t i = 0; i < n.inputs.size(); ++i) {
                if (i) out << ",";
                out << n.inputs[i].str();
            }
        }
        out << "\n";
    }
    return out.str();
}

void save_arch(const ArchSpec& arch, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write arch file " + path);
    f << serialize_arch(arch);
}

}  // namespace esr
