#include "esrkit/builders.hpp"

#include <string>
#include <vector>

namespace esr {

namespace {

constexpr int kScale = 4;

// Thin helper to keep the builders declarative. Every method returns the
// name of the node it appended so graphs read as dataflow.
struct Graph {
    ArchSpec arch;

    explicit Graph(int in_channels = 3) {
        arch.scale = kScale;
        arch.in_channels = in_channels;
    }

    std::string add(const std::string& name, const std::string& kind,
                    std::vector<std::string> inputs,
                    std::map<std::string, std::string> attrs = {}) {
        NodeSpec n;
        n.name = name;
        n.kind = kind;
        n.attrs = std::move(attrs);
        for (const auto& ref : inputs) {
            const auto pos = ref.rfind(':');
            if (pos != std::string::npos && ref.find_first_not_of("0123456789", pos + 1) ==
                                                std::string::npos)
                n.inputs.push_back({ref.substr(0, pos), std::stoi(ref.substr(pos + 1))});
            else
                n.inputs.push_back({ref, 0});
        }
        arch.nodes.push_back(std::move(n));
        return name;
    }

    std::string conv3(const std::string& name, const std::string& in, int out) {
        return add(name, "conv", {in}, {{"out", std::to_string(out)}, {"k", "3"}, {"pad", "1"}});
    }
    std::string conv1(const std::string& name, const std::string& in, int out) {
        return add(name, "conv", {in}, {{"out", std::to_string(out)}, {"k", "1"}});
    }
    std::string act(const std::string& name, const std::string& in, const std::string& fn,
                    double slope = 0.0) {
        std::map<std::string, std::string> attrs{{"fn", fn}};
        if (slope != 0.0) attrs["slope"] = std::to_string(slope);
        return add(name, "act", {in}, std::move(attrs));
    }
};

int clamp_distill(int distill, int channels) {
    return distill < channels ? distill : channels / 2;
}

// Full ESA as in RFDN: reduce, strided conv, pool, three-conv group,
// bilinear upsample, side path, 1x1, sigmoid gate.
std::string esa(Graph& g, const std::string& p, const std::string& x, int channels,
                int f, bool simplified) {
    const auto c1 = g.conv1(p + "_c1", x, f);
    auto cur = g.add(p + "_c2", "conv", {c1},
                     {{"out", std::to_string(f)}, {"k", "3"}, {"stride", "2"}});
    cur = g.add(p + "_pool", "pool", {cur}, {{"fn", "max"}, {"k", "7"}, {"stride", "3"}});
    if (simplified) {
        cur = g.conv3(p + "_g1", cur, f);
    } else {
        cur = g.act(p + "_ga1", g.conv3(p + "_g1", cur, f), "relu");
        cur = g.act(p + "_ga2", g.conv3(p + "_g2", cur, f), "relu");
        cur = g.conv3(p + "_g3", cur, f);
    }
    cur = g.add(p + "_up", "resize", {cur, x}, {{"mode", "bilinear"}});
    const auto cf = g.conv1(p + "_cf", c1, f);
    cur = g.add(p + "_sum", "add", {cur, cf});
    cur = g.act(p + "_sig", g.conv1(p + "_c4", cur, channels), "sigmoid");
    return g.add(p + "_mul", "mul", {cur, x});
}

}  // namespace

ArchSpec build_imdn(int channels, int blocks, int distill, double slope) {
    const int c = channels;
    const int d = clamp_distill(distill, channels);
    Graph g;
    const auto head = g.conv3("head", "input", c);
    std::string cur = head;
    for (int i = 1; i <= blocks; ++i) {
        const std::string p = "b" + std::to_string(i);
        const std::string block_in = cur;
        std::vector<std::string> distilled;
        for (int j = 1; j <= 3; ++j) {
            const std::string s = p + "_s" + std::to_string(j);
            cur = g.act(p + "_a" + std::to_string(j),
                        g.conv3(p + "_c" + std::to_string(j), cur, c), "leaky_relu",
                        slope);
            g.add(s, "split", {cur},
                  {{"sizes", std::to_string(d) + "," + std::to_string(c - d)}});
            distilled.push_back(s + ":0");
            cur = s + ":1";
        }
        distilled.push_back(g.act(p + "_a4", g.conv3(p + "_c4", cur, d), "leaky_relu", slope));
        const auto cat = g.add(p + "_cat", "concat", distilled);
        const auto fused = g.conv1(p + "_c5", cat, c);
        cur = g.add(p + "_add", "add", {fused, block_in});
    }
    cur = g.conv3("fuse", cur, c);
    cur = g.add("skip", "add", {cur, head});
    cur = g.conv3("up", cur, 3 * kScale * kScale);
    g.add("ps", "pixel_shuffle", {cur}, {{"s", std::to_string(kScale)}});
    return g.arch;
}

ArchSpec build_rfdn(int channels, int blocks, int distill) {
    const int c = channels;
    const int d = clamp_distill(distill, channels);
    const int f = std::max(4, channels / 4);
    Graph g;
    const auto head = g.conv3("head", "input", c);
    std::string cur = head;
    std::vector<std::string> block_outs;
    for (int i = 1; i <= blocks; ++i) {
        const std::string p = "b" + std::to_string(i);
        std::vector<std::string> distilled;
        for (int j = 1; j <= 3; ++j) {
            const std::string sj = std::to_string(j);
            distilled.push_back(
                g.act(p + "_da" + sj, g.conv1(p + "_d" + sj, cur, d), "leaky_relu", 0.05));
            // shallow residual block on the remaining path
            const auto r = g.conv3(p + "_r" + sj, cur, c);
            const auto s = g.add(p + "_s" + sj, "add", {r, cur});
            cur = g.act(p + "_sa" + sj, s, "leaky_relu", 0.05);
        }
        distilled.push_back(
            g.act(p + "_a4", g.conv3(p + "_c4", cur, d), "leaky_relu", 0.05));
        const auto cat = g.add(p + "_cat", "concat", distilled);
        const auto fused = g.conv1(p + "_fuse", cat, c);
        cur = esa(g, p + "_esa", fused, c, f, /*simplified=*/false);
        block_outs.push_back(cur);
    }
    std::string cur2 = blocks > 1 ? g.add("g_cat", "concat", block_outs) : cur;
    cur2 = g.act("g_act", g.conv1("g_fuse", cur2, c), "leaky_relu", 0.05);
    cur2 = g.conv3("g_c3", cur2, c);
    cur2 = g.add("g_add", "add", {cur2, head});
    cur2 = g.conv3("up", cur2, 3 * kScale * kScale);
    g.add("ps", "pixel_shuffle", {cur2}, {{"s", std::to_string(kScale)}});
    return g.arch;
}

ArchSpec build_rlfn(int channels, int blocks, int esa_channels) {
    const int c = channels;
    Graph g;
    const auto head = g.conv3("head", "input", c);
    std::string cur = head;
    for (int i = 1; i <= blocks; ++i) {
        const std::string p = "b" + std::to_string(i);
        const std::string block_in = cur;
        for (int j = 1; j <= 3; ++j) {
            const std::string sj = std::to_string(j);
            cur = g.act(p + "_a" + sj, g.conv3(p + "_c" + sj, cur, c), "relu");
        }
        cur = g.add(p + "_add", "add", {cur, block_in});
        cur = g.conv1(p + "_c5", cur, c);
        cur = esa(g, p + "_esa", cur, c, esa_channels, /*simplified=*/true);
    }
    cur = g.conv3("g_c3", cur, c);
    cur = g.add("g_add", "add", {cur, head});
    cur = g.conv3("up", cur, 3 * kScale * kScale);
    g.add("ps", "pixel_shuffle", {cur}, {{"s", std::to_string(kScale)}});
    return g.arch;
}

namespace {

// RepBlock: 1x1 expand -> 3x3 reduce, summed with a skip. Train form tags
// the three nodes as one collapsible group; deploy form is the single conv
// the group merges into (same name, so both forms wire identically).
std::string rep_block(Graph& g, const std::string& p, const std::string& in, int c,
                      bool deploy) {
    if (deploy) return g.conv3(p + "_add", in, c);
    const std::map<std::string, std::string> tag{{"rep", p}};
    auto e = g.add(p + "_e", "conv", {in},
                   {{"out", std::to_string(2 * c)}, {"k", "1"}, {"bias", "0"}, {"rep", p}});
    auto r = g.add(p + "_r", "conv", {e},
                   {{"out", std::to_string(c)}, {"k", "3"}, {"pad", "1"}, {"rep", p}});
    return g.add(p + "_add", "add", {r, in}, tag);
}

std::string conv_maybe_bn(Graph& g, const std::string& p, const std::string& in, int out,
                          bool deploy) {
    if (deploy) return g.conv3(p, in, out);
    const auto cv = g.add(p + "_c", "conv", {in},
                          {{"out", std::to_string(out)}, {"k", "3"}, {"pad", "1"},
                           {"bias", "0"}});
    return g.add(p, "bn", {cv});
}

}  // namespace

ArchSpec build_fmen(int pairs, int channels, int att_channels, bool deploy) {
    const int c = channels;
    const int a = att_channels;
    Graph g;
    const auto head = g.conv3("head", "input", c);
    std::string cur = head;
    for (int i = 1; i <= pairs; ++i) {
        const std::string p = "p" + std::to_string(i);
        // ERB: two RepBlocks around one ReLU
        cur = rep_block(g, p + "_erb1", cur, c, deploy);
        cur = g.act(p + "_erb_a", cur, "relu");
        cur = rep_block(g, p + "_erb2", cur, c, deploy);
        const std::string trunk = cur;
        // HFAB: BN-bracketed attention over a narrow RepBlock
        auto att = g.act(p + "_h_a1", conv_maybe_bn(g, p + "_h_b1", trunk, a, deploy), "relu");
        att = rep_block(g, p + "_h_rep", att, a, deploy);
        att = g.act(p + "_h_a2", att, "relu");
        att = conv_maybe_bn(g, p + "_h_b2", att, c, deploy);
        att = g.act(p + "_h_sig", att, "sigmoid");
        cur = g.add(p + "_h_mul", "mul", {att, trunk});
    }
    cur = g.conv3("g_c3", cur, c);
    cur = g.add("g_add", "add", {cur, head});
    cur = g.conv3("up", cur, 3 * kScale * kScale);
    g.add("ps", "pixel_shuffle", {cur}, {{"s", std::to_string(kScale)}});
    return g.arch;
}

namespace {

// Blueprint-separable conv: pointwise then depthwise k=3.
std::string bsconv(Graph& g, const std::string& p, const std::string& in, int out) {
    const auto pw = g.conv1(p + "_pw", in, out);
    return g.add(p + "_dw", "conv", {pw},
                 {{"out", std::to_string(out)}, {"k", "3"}, {"pad", "1"},
                  {"groups", std::to_string(out)}});
}

}  // namespace

ArchSpec build_bsrn(int esdb, int channels) {
    const int c = channels;
    const int d = c / 2;
    Graph g;
    // Shallow extraction: replicate the input, map linearly, then refine
    // depthwise.
    const int reps = (c + 2) / 3;
    std::vector<std::string> copies(static_cast<size_t>(reps), "input");
    auto cur = g.add("sh_rep", "concat", copies);
    cur = g.conv1("sh_lin", cur, c);
    const auto shallow = g.add("sh_dw", "conv", {cur},
                               {{"out", std::to_string(c)}, {"k", "3"}, {"pad", "1"},
                                {"groups", std::to_string(c)}});
    cur = shallow;
    std::vector<std::string> block_outs;
    for (int i = 1; i <= esdb; ++i) {
        const std::string p = "e" + std::to_string(i);
        const std::string block_in = cur;
        std::vector<std::string> distilled;
        for (int j = 1; j <= 3; ++j) {
            const std::string sj = std::to_string(j);
            distilled.push_back(
                g.act(p + "_da" + sj, g.conv1(p + "_d" + sj, cur, d), "gelu"));
            auto body = g.act(p + "_ba" + sj, bsconv(g, p + "_b" + sj, cur, c), "gelu");
            cur = g.add(p + "_s" + sj, "add", {body, cur});
        }
        distilled.push_back(g.act(p + "_a4", bsconv(g, p + "_b4", cur, d), "gelu"));
        const auto cat = g.add(p + "_cat", "concat", distilled);
        auto fused = g.conv1(p + "_fuse", cat, c);
        fused = g.add(p + "_cw", "mul", {fused}, {{"weight", "channel"}});
        cur = g.add(p + "_add", "add", {fused, block_in});
        block_outs.push_back(cur);
    }
    std::string cur2 = esdb > 1 ? g.add("g_cat", "concat", block_outs) : cur;
    cur2 = g.act("g_act", g.conv1("g_fuse", cur2, c), "gelu");
    cur2 = g.conv3("g_c3", cur2, c);
    cur2 = g.add("g_add", "add", {cur2, shallow});
    cur2 = g.conv3("up", cur2, 3 * kScale * kScale);
    g.add("ps", "pixel_shuffle", {cur2}, {{"s", std::to_string(kScale)}});
    return g.arch;
}

}  // namespace esr
