#include "esrkit/reparam.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace esr {

FixedKernelId fixed_kernel_from_string(const std::string& s) {
    if (s == "sobel_x") return FixedKernelId::SobelX;
    if (s == "sobel_y") return FixedKernelId::SobelY;
    if (s == "laplacian") return FixedKernelId::Laplacian;
    throw Error("unknown fixed kernel '" + s + "'");
}

std::string fixed_kernel_to_string(FixedKernelId id) {
    switch (id) {
        case FixedKernelId::SobelX: return "sobel_x";
        case FixedKernelId::SobelY: return "sobel_y";
        case FixedKernelId::Laplacian: return "laplacian";
    }
    return "?";
}

Tensor fixed_kernel(FixedKernelId id) {
    Tensor k(1, 1, 3, 3);
    switch (id) {
        case FixedKernelId::SobelX: {
            const float v[9] = {1, 0, -1, 2, 0, -2, 1, 0, -1};
            std::copy(v, v + 9, k.data().begin());
            break;
        }
        case FixedKernelId::SobelY: {
            const float v[9] = {1, 2, 1, 0, 0, 0, -1, -2, -1};
            std::copy(v, v + 9, k.data().begin());
            break;
        }
        case FixedKernelId::Laplacian: {
            const float v[9] = {0, 1, 0, 1, -4, 1, 0, 1, 0};
            std::copy(v, v + 9, k.data().begin());
            break;
        }
    }
    return k;
}

ConvWB merge_identity(const Tensor& weight, std::vector<float> bias) {
    if (weight.n() != weight.c() * 1)
        throw Error("merge_identity: channel map must be square, got " +
                    weight.shape_str());
    if (weight.h() % 2 == 0 || weight.w() % 2 == 0)
        throw Error("merge_identity: kernel dims must be odd");
    if (bias.empty()) bias.assign(weight.n(), 0.0f);
    ConvWB out{weight, std::move(bias)};
    const int ch = weight.h() / 2;
    const int cw = weight.w() / 2;
    for (int c = 0; c < weight.n(); ++c) out.weight.at(c, c, ch, cw) += 1.0f;
    return out;
}

ConvWB fold_bn(const Tensor& weight, const std::vector<float>& bias, const BnParams& bn) {
    bn.check();
    if (static_cast<int>(bn.gamma.size()) != weight.n())
        throw Error("fold_bn: bn has " + std::to_string(bn.gamma.size()) +
                    " channels, conv has " + std::to_string(weight.n()) +
                    " out channels");
    ConvWB out{weight, std::vector<float>(weight.n(), 0.0f)};
    for (int o = 0; o < weight.n(); ++o) {
        const float scale = bn.gamma[o] / std::sqrt(bn.running_var[o] + bn.epsilon);
        for (int i = 0; i < weight.c(); ++i)
            for (int u = 0; u < weight.h(); ++u)
                for (int v = 0; v < weight.w(); ++v)
                    out.weight.at(o, i, u, v) = weight.at(o, i, u, v) * scale;
        const float b = bias.empty() ? 0.0f : bias[o];
        out.bias[o] = bn.beta[o] + (b - bn.running_mean[o]) * scale;
    }
    return out;
}

ConvWB merge_seq_1x1_kxk(const Tensor& w1, const std::vector<float>& b1,
                         const Tensor& w3, const std::vector<float>& b3) {
    if (w1.h() != 1 || w1.w() != 1)
        throw Error("merge_seq: first weight must be 1x1, got " + w1.shape_str());
    if (w3.c() != w1.n())
        throw Error("merge_seq: inner channels disagree, " + std::to_string(w3.c()) +
                    " vs " + std::to_string(w1.n()));
    const int co = w3.n(), cm = w3.c(), ci = w1.c();
    ConvWB out{Tensor(co, ci, w3.h(), w3.w()), std::vector<float>(co, 0.0f)};
    for (int o = 0; o < co; ++o)
        for (int i = 0; i < ci; ++i)
            for (int u = 0; u < w3.h(); ++u)
                for (int v = 0; v < w3.w(); ++v) {
                    float acc = 0.0f;
                    for (int m = 0; m < cm; ++m)
                        acc += w3.at(o, m, u, v) * w1.at(m, i, 0, 0);
                    out.weight.at(o, i, u, v) = acc;
                }
    for (int o = 0; o < co; ++o) {
        float acc = b3.empty() ? 0.0f : b3[o];
        if (!b1.empty())
            for (int m = 0; m < cm; ++m) {
                float ksum = 0.0f;
                for (int u = 0; u < w3.h(); ++u)
                    for (int v = 0; v < w3.w(); ++v) ksum += w3.at(o, m, u, v);
                acc += ksum * b1[m];
            }
        out.bias[o] = acc;
    }
    return out;
}

Branch Branch::conv(Tensor w, std::vector<float> b, int index) {
    Branch br;
    br.index = index;
    if (w.h() == 1 && w.w() > 1)
        br.variant = Variant::Conv1xK;
    else if (w.w() == 1 && w.h() > 1)
        br.variant = Variant::ConvKx1;
    else
        br.variant = Variant::ConvKxK;
    br.weight = std::move(w);
    br.bias = std::move(b);
    return br;
}

Branch Branch::seq(Tensor w1, std::vector<float> b1, Tensor w3, std::vector<float> b3,
                   int index) {
    Branch br;
    br.variant = Variant::Seq1x1KxK;
    br.index = index;
    br.weight = std::move(w1);
    br.bias = std::move(b1);
    br.weight2 = std::move(w3);
    br.bias2 = std::move(b3);
    return br;
}

Branch Branch::identity(int index) {
    Branch br;
    br.variant = Variant::Identity;
    br.index = index;
    return br;
}

Branch Branch::scaled_fixed(Tensor scale, std::vector<float> b, FixedKernelId id,
                            int index) {
    Branch br;
    br.variant = Variant::ScaledFixed;
    br.index = index;
    br.weight = std::move(scale);
    br.bias = std::move(b);
    br.fixed = id;
    return br;
}

namespace {

// Center-embed a (possibly 1xk / kx1 / 1x1) kernel into k x k.
void add_centered(Tensor& acc, const Tensor& w, float scale = 1.0f) {
    const int oy = (acc.h() - w.h()) / 2;
    const int ox = (acc.w() - w.w()) / 2;
    for (int o = 0; o < w.n(); ++o)
        for (int i = 0; i < w.c(); ++i)
            for (int u = 0; u < w.h(); ++u)
                for (int v = 0; v < w.w(); ++v)
                    acc.at(o, i, oy + u, ox + v) += scale * w.at(o, i, u, v);
}

ConvWB lower_branch(const Branch& br, int k, int out_ch, int in_ch, size_t pos) {
    const std::string where = "merge_parallel: branch " + std::to_string(pos);
    ConvWB low{Tensor(out_ch, in_ch, k, k), std::vector<float>(out_ch, 0.0f)};
    switch (br.variant) {
        case Branch::Variant::ConvKxK:
        case Branch::Variant::Conv1xK:
        case Branch::Variant::ConvKx1: {
            if (br.weight.n() != out_ch || br.weight.c() != in_ch)
                throw Error(where + ": channel mismatch " + br.weight.shape_str());
            if (br.weight.h() > k || br.weight.w() > k ||
                (k - br.weight.h()) % 2 != 0 || (k - br.weight.w()) % 2 != 0)
                throw Error(where + ": kernel " + br.weight.shape_str() +
                            " cannot be centered in " + std::to_string(k) + "x" +
                            std::to_string(k));
            add_centered(low.weight, br.weight);
            if (!br.bias.empty()) {
                if (static_cast<int>(br.bias.size()) != out_ch)
                    throw Error(where + ": bias length mismatch");
                low.bias = br.bias;
            }
            break;
        }
        case Branch::Variant::Seq1x1KxK: {
            if (br.weight.c() != in_ch || br.weight2.n() != out_ch)
                throw Error(where + ": channel mismatch in sequence");
            if (br.weight2.h() != k || br.weight2.w() != k)
                throw Error(where + ": second kernel must be " + std::to_string(k) +
                            "x" + std::to_string(k));
            low = merge_seq_1x1_kxk(br.weight, br.bias, br.weight2, br.bias2);
            if (low.bias.empty()) low.bias.assign(out_ch, 0.0f);
            break;
        }
        case Branch::Variant::Identity: {
            if (out_ch != in_ch)
                throw Error(where + ": identity branch needs matching channels");
            const int c = k / 2;
            for (int o = 0; o < out_ch; ++o) low.weight.at(o, o, c, c) = 1.0f;
            break;
        }
        case Branch::Variant::ScaledFixed: {
            if (br.weight.n() != out_ch || br.weight.c() != in_ch ||
                br.weight.h() != 1 || br.weight.w() != 1)
                throw Error(where + ": scale must be a 1x1 map, got " +
                            br.weight.shape_str());
            const Tensor d = fixed_kernel(br.fixed);
            if (d.h() != k || d.w() != k)
                throw Error(where + ": fixed kernel size " + std::to_string(d.h()) +
                            " does not match merge size " + std::to_string(k));
            float ksum = 0.0f;
            for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v) ksum += d.at(0, 0, u, v);
            for (int o = 0; o < out_ch; ++o) {
                for (int i = 0; i < in_ch; ++i)
                    for (int u = 0; u < k; ++u)
                        for (int v = 0; v < k; ++v)
                            low.weight.at(o, i, u, v) =
                                d.at(0, 0, u, v) * br.weight.at(o, i, 0, 0);
                if (!br.bias.empty()) low.bias[o] = br.bias[o] * ksum;
            }
            break;
        }
    }
    return low;
}

}  // namespace

ConvWB merge_parallel(const std::vector<Branch>& branches, int k) {
    if (branches.empty()) throw Error("merge_parallel: no branches");
    if (k < 1 || k % 2 == 0) throw Error("merge_parallel: k must be odd");

    int out_ch = -1, in_ch = -1;
    for (const Branch& br : branches) {
        if (br.variant == Branch::Variant::Identity) continue;
        const int o = br.variant == Branch::Variant::Seq1x1KxK ? br.weight2.n()
                                                               : br.weight.n();
        const int i = br.weight.c();
        if (out_ch < 0) {
            out_ch = o;
            in_ch = i;
        } else if (o != out_ch || i != in_ch) {
            throw Error("merge_parallel: branch channel counts disagree");
        }
    }
    if (out_ch < 0)
        throw Error("merge_parallel: cannot infer channels from identity-only branches");

    // Canonical summation order: sorted by branch index.
    std::vector<size_t> order(branches.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return branches[a].index < branches[b].index;
    });

    ConvWB merged{Tensor(out_ch, in_ch, k, k), std::vector<float>(out_ch, 0.0f)};
    for (size_t pos : order) {
        const ConvWB low = lower_branch(branches[pos], k, out_ch, in_ch, pos);
        for (size_t i = 0; i < merged.weight.data().size(); ++i)
            merged.weight.data()[i] += low.weight.data()[i];
        for (int o = 0; o < out_ch; ++o) merged.bias[o] += low.bias[o];
    }
    return merged;
}

// ---------------------------------------------------------------------------
// Graph transforms
// ---------------------------------------------------------------------------

namespace {

std::vector<std::pair<int, int>> consumers_of(const ArchSpec& arch,
                                              const std::string& name) {
    std::vector<std::pair<int, int>> out;  // node index, input position
    for (size_t i = 0; i < arch.nodes.size(); ++i)
        for (size_t j = 0; j < arch.nodes[i].inputs.size(); ++j)
            if (arch.nodes[i].inputs[j].node == name)
                out.push_back({static_cast<int>(i), static_cast<int>(j)});
    return out;
}

Tensor slice_out_channels(const Tensor& w, const std::vector<int>& keep) {
    Tensor out(static_cast<int>(keep.size()), w.c(), w.h(), w.w());
    for (size_t o = 0; o < keep.size(); ++o)
        for (int i = 0; i < w.c(); ++i)
            for (int u = 0; u < w.h(); ++u)
                for (int v = 0; v < w.w(); ++v)
                    out.at(static_cast<int>(o), i, u, v) = w.at(keep[o], i, u, v);
    return out;
}

Tensor slice_in_channels(const Tensor& w, const std::vector<int>& keep) {
    Tensor out(w.n(), static_cast<int>(keep.size()), w.h(), w.w());
    for (int o = 0; o < w.n(); ++o)
        for (size_t i = 0; i < keep.size(); ++i)
            for (int u = 0; u < w.h(); ++u)
                for (int v = 0; v < w.w(); ++v)
                    out.at(o, static_cast<int>(i), u, v) = w.at(o, keep[i], u, v);
    return out;
}

Tensor slice_vector(const Tensor& t, const std::vector<int>& keep) {
    Tensor out(1, static_cast<int>(keep.size()), 1, 1);
    for (size_t i = 0; i < keep.size(); ++i)
        out.at(0, static_cast<int>(i), 0, 0) = t.at(0, keep[i], 0, 0);
    return out;
}

}  // namespace

std::pair<ArchSpec, WeightStore> prune_channels(const ArchSpec& arch,
                                                const WeightStore& weights,
                                                const std::string& layer_name,
                                                const std::vector<int>& keep) {
    if (keep.empty()) throw Error("prune_channels: empty keep set");
    const int layer_idx = arch.find(layer_name);
    if (layer_idx < 0) throw Error("prune_channels: no node named " + layer_name);
    if (arch.nodes[layer_idx].kind != "conv")
        throw Error("prune_channels: " + layer_name + " is not a conv node");

    ArchSpec out_arch = arch;
    WeightStore out_weights = weights;
    NodeSpec& layer = out_arch.nodes[layer_idx];
    const int out_ch = layer.attr_int("out");
    std::vector<int> sorted_keep = keep;
    std::sort(sorted_keep.begin(), sorted_keep.end());
    sorted_keep.erase(std::unique(sorted_keep.begin(), sorted_keep.end()),
                      sorted_keep.end());
    for (int idx : sorted_keep)
        if (idx < 0 || idx >= out_ch)
            throw Error("prune_channels: keep index " + std::to_string(idx) +
                        " out of range [0, " + std::to_string(out_ch) + ")");
    if (layer.attr_int("groups", 1) != 1)
        throw Error("prune_channels: grouped conv layers are unsupported");

    out_weights.put(layer_name + ".weight",
                    slice_out_channels(weights.get(layer_name + ".weight"), sorted_keep));
    if (layer.attr_int("bias", 1) != 0) {
        Tensor b = weights.get(layer_name + ".bias");
        out_weights.put(layer_name + ".bias", slice_vector(b, sorted_keep));
    }
    layer.attrs["out"] = std::to_string(sorted_keep.size());

    // Propagate kept-channel lists through passthrough nodes into consumer
    // convs. `kept` is relative to the producer's original channel layout.
    struct Pending {
        std::string producer;
        std::vector<int> kept;
        int original_channels;
    };
    const auto shapes = infer_shapes(arch, 64, 64);
    std::vector<Pending> queue{{layer_name, sorted_keep, out_ch}};

    while (!queue.empty()) {
        const Pending cur = queue.back();
        queue.pop_back();
        for (auto [ci, pos] : consumers_of(out_arch, cur.producer)) {
            NodeSpec& consumer = out_arch.nodes[ci];
            if (consumer.kind == "conv") {
                if (consumer.attr_int("groups", 1) != 1)
                    throw Error("prune_channels: unsupported topology, grouped conv '" +
                                consumer.name + "' consumes pruned channels");
                out_weights.put(consumer.name + ".weight",
                                slice_in_channels(out_weights.get(consumer.name + ".weight"),
                                                  cur.kept));
            } else if (consumer.kind == "act") {
                if (consumer.attr_str("fn") == "prelu")
                    out_weights.put(consumer.name + ".slope",
                                    slice_vector(out_weights.get(consumer.name + ".slope"),
                                                 cur.kept));
                queue.push_back({consumer.name, cur.kept, cur.original_channels});
            } else if (consumer.kind == "concat") {
                // Rebuild the kept list in the concat's channel space.
                std::vector<int> kept;
                int offset = 0;
                for (const InputRef& ref : consumer.inputs) {
                    int c;
                    if (ref.is_graph_input())
                        c = arch.in_channels;
                    else
                        c = shapes[arch.find(ref.node)][ref.slot].c;
                    if (ref.node == cur.producer) {
                        for (int idx : cur.kept) kept.push_back(offset + idx);
                        c = cur.original_channels;
                    } else {
                        for (int i = 0; i < c; ++i) kept.push_back(offset + i);
                    }
                    offset += c;
                }
                queue.push_back({consumer.name, kept, offset});
            } else {
                throw Error("prune_channels: unsupported topology, pruned channels reach '" +
                            consumer.name + "' of kind " + consumer.kind);
            }
        }
    }
    return {std::move(out_arch), std::move(out_weights)};
}

namespace {

struct BranchChain {
    std::vector<int> conv_nodes;  // in execution order; empty = identity
};

// Collapse one tagged branch group into a single conv written in place of
// its add node.
void collapse_group(ArchSpec& arch, WeightStore& weights, const std::string& group_id,
                    const std::vector<int>& members) {
    int add_idx = -1;
    std::set<int> member_set(members.begin(), members.end());
    for (int idx : members) {
        if (arch.nodes[idx].kind == "add") {
            if (add_idx >= 0)
                throw Error("collapse_arch: group '" + group_id +
                            "' has more than one add node");
            add_idx = idx;
        } else if (arch.nodes[idx].kind != "conv") {
            throw Error("collapse_arch: group '" + group_id + "' contains node '" +
                        arch.nodes[idx].name + "' of kind " + arch.nodes[idx].kind);
        }
    }
    if (add_idx < 0)
        throw Error("collapse_arch: group '" + group_id + "' has no add node");
    const NodeSpec add_node = arch.nodes[add_idx];

    // Walk each add input back through group convs to the common source.
    std::vector<BranchChain> chains;
    std::vector<InputRef> sources;
    for (const InputRef& ref : add_node.inputs) {
        BranchChain chain;
        InputRef cur = ref;
        while (!cur.is_graph_input()) {
            const int idx = arch.find(cur.node);
            if (idx < 0 || !member_set.count(idx) || arch.nodes[idx].kind != "conv") break;
            if (chain.conv_nodes.size() == 2)
                throw Error("collapse_arch: group '" + group_id +
                            "' has a branch longer than two convolutions");
            chain.conv_nodes.insert(chain.conv_nodes.begin(), idx);
            cur = arch.nodes[idx].inputs[0];
        }
        chains.push_back(std::move(chain));
        sources.push_back(cur);
    }
    for (size_t i = 1; i < sources.size(); ++i)
        if (sources[i].str() != sources[0].str())
            throw Error("collapse_arch: group '" + group_id +
                        "' branches do not share a common source");

    // Merge size: the largest kernel in the group.
    int k = 1;
    for (const auto& chain : chains)
        for (int idx : chain.conv_nodes) {
            const NodeSpec& n = arch.nodes[idx];
            const ConvParams p = conv_params_for(n, 1);
            k = std::max({k, p.kernel_h, p.kernel_w});
        }
    if (k % 2 == 0)
        throw Error("collapse_arch: group '" + group_id + "' needs an odd merge kernel");

    auto bias_of = [&](const NodeSpec& n) -> std::vector<float> {
        if (n.attr_int("bias", 1) == 0) return {};
        return weights.get(n.name + ".bias").data();
    };
    auto check_plain = [&](const NodeSpec& n, int expected_pad) {
        if (n.attr_int("stride", 1) != 1 || n.attr_int("dilation", 1) != 1)
            throw Error("collapse_arch: group '" + group_id + "' conv '" + n.name +
                        "' must have stride 1 and dilation 1");
        if (n.attr_int("pad", 0) != expected_pad)
            throw Error("collapse_arch: group '" + group_id + "' conv '" + n.name +
                        "' has padding " + std::to_string(n.attr_int("pad", 0)) +
                        ", expected " + std::to_string(expected_pad));
    };
    auto expand_grouped = [&](const Tensor& w, int groups, int in_ch) -> Tensor {
        if (groups == 1) return w;
        Tensor dense(w.n(), in_ch, w.h(), w.w());
        const int cpg_in = in_ch / groups;
        const int cpg_out = w.n() / groups;
        for (int o = 0; o < w.n(); ++o) {
            const int g = o / cpg_out;
            for (int i = 0; i < cpg_in; ++i)
                for (int u = 0; u < w.h(); ++u)
                    for (int v = 0; v < w.w(); ++v)
                        dense.at(o, g * cpg_in + i, u, v) = w.at(o, i, u, v);
        }
        return dense;
    };

    std::vector<Branch> branches;
    int order = 0;
    for (const auto& chain : chains) {
        if (chain.conv_nodes.empty()) {
            branches.push_back(Branch::identity(order++));
            continue;
        }
        if (chain.conv_nodes.size() == 1) {
            const NodeSpec& n = arch.nodes[chain.conv_nodes[0]];
            const Tensor& w = weights.get(n.name + ".weight");
            check_plain(n, std::min(w.h(), w.w()) == 1 && std::max(w.h(), w.w()) == 1
                               ? 0
                               : (w.h() == w.w() ? w.h() / 2 : n.attr_int("pad", 0)));
            const int groups = n.attr_int("groups", 1);
            Tensor dense = expand_grouped(w, groups, w.c() * groups);
            branches.push_back(Branch::conv(std::move(dense), bias_of(n), order++));
            continue;
        }
        // Two-conv sequence: 1x1 then k x k (possibly depthwise fixed).
        const NodeSpec& first = arch.nodes[chain.conv_nodes[0]];
        const NodeSpec& second = arch.nodes[chain.conv_nodes[1]];
        const Tensor& w1 = weights.get(first.name + ".weight");
        if (w1.h() != 1 || w1.w() != 1)
            throw Error("collapse_arch: group '" + group_id + "' sequence '" +
                        first.name + "' must start with a 1x1 conv");
        if (first.attr_int("groups", 1) != 1)
            throw Error("collapse_arch: group '" + group_id +
                        "' sequence cannot start with a grouped conv");
        const std::vector<float> b1 = bias_of(first);
        if (!b1.empty() && k > 1)
            throw Error("collapse_arch: group '" + group_id + "' sequence '" +
                        first.name +
                        "' carries a bias before a spatial conv; the graph "
                        "zero-pads the intermediate, so the pair is not "
                        "exactly collapsible");
        check_plain(first, 0);
        const Tensor& w2raw = weights.get(second.name + ".weight");
        check_plain(second, k / 2);
        const int groups2 = second.attr_int("groups", 1);
        Tensor w2 = expand_grouped(w2raw, groups2, w2raw.c() * groups2);
        if (w2.h() != k || w2.w() != k)
            throw Error("collapse_arch: group '" + group_id + "' sequence '" +
                        second.name + "' must end with the merge-size conv");
        branches.push_back(
            Branch::seq(w1, b1, std::move(w2), bias_of(second), order++));
    }

    const ConvWB merged = merge_parallel(branches, k);

    // Replace the add node by the merged conv (same name keeps downstream
    // references valid) and drop the branch nodes.
    NodeSpec conv_node;
    conv_node.name = add_node.name;
    conv_node.kind = "conv";
    conv_node.attrs["out"] = std::to_string(merged.weight.n());
    conv_node.attrs["k"] = std::to_string(k);
    conv_node.attrs["pad"] = std::to_string(k / 2);
    conv_node.inputs = {sources[0]};

    std::set<int> to_remove(member_set);
    to_remove.erase(add_idx);
    for (int idx : to_remove)
        for (const char* suffix : {".weight", ".bias"})
            weights.erase(arch.nodes[idx].name + suffix);

    std::vector<NodeSpec> new_nodes;
    for (size_t i = 0; i < arch.nodes.size(); ++i) {
        if (to_remove.count(static_cast<int>(i))) continue;
        if (static_cast<int>(i) == add_idx)
            new_nodes.push_back(conv_node);
        else
            new_nodes.push_back(arch.nodes[i]);
    }
    arch.nodes = std::move(new_nodes);
    weights.put(conv_node.name + ".weight", merged.weight);
    weights.put(conv_node.name + ".bias",
                Tensor(1, merged.weight.n(), 1, 1, merged.bias));
}

}  // namespace

std::pair<ArchSpec, WeightStore> collapse_arch(const ArchSpec& arch,
                                               const WeightStore& weights) {
    {
        const auto diags = validate(arch);
        if (!diags.empty())
            throw Error("collapse_arch: invalid arch: node '" + diags[0].node +
                        "': " + diags[0].message);
    }
    weights.bind_strict(arch);

    ArchSpec out_arch = arch;
    WeightStore out_weights = weights;

    // Pass 1: merge tagged branch groups.
    for (;;) {
        std::map<std::string, std::vector<int>> groups;
        for (size_t i = 0; i < out_arch.nodes.size(); ++i)
            if (out_arch.nodes[i].has_attr("rep"))
                groups[out_arch.nodes[i].attr_str("rep")].push_back(static_cast<int>(i));
        if (groups.empty()) break;
        collapse_group(out_arch, out_weights, groups.begin()->first,
                       groups.begin()->second);
    }

    // Pass 2: fold bn into the producing conv. The bn node keeps its name
    // (and takes over the conv) so downstream references stay valid.
    for (;;) {
        bool changed = false;
        for (size_t i = 0; i < out_arch.nodes.size(); ++i) {
            if (out_arch.nodes[i].kind != "bn") continue;
            const NodeSpec bn_node = out_arch.nodes[i];
            const InputRef src = bn_node.inputs[0];
            const int conv_idx = src.is_graph_input() ? -1 : out_arch.find(src.node);
            if (conv_idx < 0 || out_arch.nodes[conv_idx].kind != "conv")
                throw Error("collapse_arch: bn node '" + bn_node.name +
                            "' is not adjacent to a convolution");
            if (consumers_of(out_arch, src.node).size() != 1)
                throw Error("collapse_arch: conv '" + src.node +
                            "' feeding bn '" + bn_node.name +
                            "' has other consumers");

            const NodeSpec conv = out_arch.nodes[conv_idx];
            BnParams bn;
            bn.gamma = out_weights.get(bn_node.name + ".gamma").data();
            bn.beta = out_weights.get(bn_node.name + ".beta").data();
            bn.running_mean = out_weights.get(bn_node.name + ".mean").data();
            bn.running_var = out_weights.get(bn_node.name + ".var").data();
            bn.epsilon = static_cast<float>(bn_node.attr_double("eps", 1e-5));
            std::vector<float> bias;
            if (conv.attr_int("bias", 1) != 0)
                bias = out_weights.get(conv.name + ".bias").data();
            const ConvWB folded = fold_bn(out_weights.get(conv.name + ".weight"), bias, bn);

            NodeSpec folded_node = conv;
            folded_node.name = bn_node.name;
            folded_node.attrs["bias"] = "1";
            for (const char* suffix : {".weight", ".bias"})
                out_weights.erase(conv.name + suffix);
            for (const char* suffix : {".gamma", ".beta", ".mean", ".var"})
                out_weights.erase(bn_node.name + suffix);
            out_weights.put(bn_node.name + ".weight", folded.weight);
            out_weights.put(bn_node.name + ".bias",
                            Tensor(1, folded.weight.n(), 1, 1, folded.bias));

            std::vector<NodeSpec> new_nodes;
            for (size_t j = 0; j < out_arch.nodes.size(); ++j) {
                if (static_cast<int>(j) == conv_idx) continue;
                if (j == i)
                    new_nodes.push_back(folded_node);
                else
                    new_nodes.push_back(out_arch.nodes[j]);
            }
            out_arch.nodes = std::move(new_nodes);
            changed = true;
            break;
        }
        if (!changed) break;
    }
    return {std::move(out_arch), std::move(out_weights)};
}

}  // namespace esr
