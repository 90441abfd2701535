#include "esrkit/forward.hpp"

#include <map>
#include <vector>

namespace esr {

namespace {

std::vector<float> as_vector(const Tensor& t) {
    return t.data();
}

}  // namespace

Tensor forward(const ArchSpec& arch, const WeightStore& weights, const Tensor& input) {
    {
        const auto diags = validate(arch);
        if (!diags.empty())
            throw Error("invalid arch: node '" + diags[0].node + "': " + diags[0].message);
    }
    weights.bind_strict(arch);
    if (input.c() != arch.in_channels)
        throw Error("forward: input has " + std::to_string(input.c()) +
                    " channels, arch declares " + std::to_string(arch.in_channels));
    if (arch.nodes.empty()) throw Error("forward: empty graph");

    std::map<std::string, std::vector<Tensor>> values;
    auto resolve = [&](const InputRef& ref) -> const Tensor& {
        if (ref.is_graph_input()) return input;
        return values.at(ref.node).at(ref.slot);
    };

    for (const NodeSpec& n : arch.nodes) {
        std::vector<Tensor> out;
        if (n.kind == "conv") {
            const Tensor& x = resolve(n.inputs[0]);
            ConvParams p = conv_params_for(n, x.c());
            const Tensor& w = weights.get(n.name + ".weight");
            if (p.has_bias)
                out.push_back(conv2d(x, p, w, as_vector(weights.get(n.name + ".bias"))));
            else
                out.push_back(conv2d(x, p, w));
        } else if (n.kind == "bn") {
            BnParams bn;
            bn.gamma = as_vector(weights.get(n.name + ".gamma"));
            bn.beta = as_vector(weights.get(n.name + ".beta"));
            bn.running_mean = as_vector(weights.get(n.name + ".mean"));
            bn.running_var = as_vector(weights.get(n.name + ".var"));
            bn.epsilon = static_cast<float>(n.attr_double("eps", 1e-5));
            out.push_back(batchnorm_inference(resolve(n.inputs[0]), bn));
        } else if (n.kind == "act") {
            const ActKind kind = act_kind_from_string(n.attr_str("fn"));
            const Tensor& x = resolve(n.inputs[0]);
            if (kind == ActKind::Prelu) {
                const auto slopes = as_vector(weights.get(n.name + ".slope"));
                out.push_back(activation(x, kind, 0.0f, &slopes));
            } else {
                out.push_back(activation(x, kind,
                                         static_cast<float>(n.attr_double("slope", 0.0))));
            }
        } else if (n.kind == "pixel_shuffle") {
            out.push_back(pixel_shuffle(resolve(n.inputs[0]), n.attr_int("s")));
        } else if (n.kind == "add") {
            Tensor acc = resolve(n.inputs[0]);
            for (size_t i = 1; i < n.inputs.size(); ++i) {
                const Tensor& t = resolve(n.inputs[i]);
                for (size_t j = 0; j < acc.data().size(); ++j)
                    acc.data()[j] += t.data()[j];
            }
            out.push_back(std::move(acc));
        } else if (n.kind == "mul") {
            if (n.attr_str("weight", "") == "channel") {
                Tensor acc = resolve(n.inputs[0]);
                const Tensor& w = weights.get(n.name + ".weight");
                for (int b = 0; b < acc.n(); ++b)
                    for (int c = 0; c < acc.c(); ++c) {
                        const float s = w.at(0, c, 0, 0);
                        for (int y = 0; y < acc.h(); ++y)
                            for (int x = 0; x < acc.w(); ++x) acc.at(b, c, y, x) *= s;
                    }
                out.push_back(std::move(acc));
            } else {
                Tensor acc = resolve(n.inputs[0]);
                for (size_t i = 1; i < n.inputs.size(); ++i) {
                    const Tensor& t = resolve(n.inputs[i]);
                    for (size_t j = 0; j < acc.data().size(); ++j)
                        acc.data()[j] *= t.data()[j];
                }
                out.push_back(std::move(acc));
            }
        } else if (n.kind == "concat") {
            const Tensor& first = resolve(n.inputs[0]);
            int c_total = 0;
            for (const auto& ref : n.inputs) c_total += resolve(ref).c();
            Tensor acc(first.n(), c_total, first.h(), first.w());
            int c_off = 0;
            for (const auto& ref : n.inputs) {
                const Tensor& t = resolve(ref);
                for (int b = 0; b < t.n(); ++b)
                    for (int c = 0; c < t.c(); ++c)
                        for (int y = 0; y < t.h(); ++y)
                            for (int x = 0; x < t.w(); ++x)
                                acc.at(b, c_off + c, y, x) = t.at(b, c, y, x);
                c_off += t.c();
            }
            out.push_back(std::move(acc));
        } else if (n.kind == "split") {
            const Tensor& x = resolve(n.inputs[0]);
            std::vector<int> sizes;
            {
                std::string spec = n.attr_str("sizes");
                size_t pos = 0;
                while (pos < spec.size()) {
                    size_t comma = spec.find(',', pos);
                    if (comma == std::string::npos) comma = spec.size();
                    sizes.push_back(std::stoi(spec.substr(pos, comma - pos)));
                    pos = comma + 1;
                }
            }
            int c_off = 0;
            for (int sz : sizes) {
                Tensor part(x.n(), sz, x.h(), x.w());
                for (int b = 0; b < x.n(); ++b)
                    for (int c = 0; c < sz; ++c)
                        for (int y = 0; y < x.h(); ++y)
                            for (int xx = 0; xx < x.w(); ++xx)
                                part.at(b, c, y, xx) = x.at(b, c_off + c, y, xx);
                c_off += sz;
                out.push_back(std::move(part));
            }
        } else if (n.kind == "pool") {
            const Tensor& x = resolve(n.inputs[0]);
            const std::string fn = n.attr_str("fn");
            if (fn == "global_avg") {
                out.push_back(pool(x, PoolKind::GlobalAvg, 0, 1));
            } else {
                const int k = n.attr_int("k");
                const int stride = n.attr_int("stride", k);
                out.push_back(pool(x, fn == "max" ? PoolKind::Max : PoolKind::Avg, k, stride));
            }
        } else if (n.kind == "resize") {
            const Tensor& x = resolve(n.inputs[0]);
            const ResizeMode mode = n.attr_str("mode") == "nearest"
                                        ? ResizeMode::Nearest
                                        : ResizeMode::Bilinear;
            int oh, ow;
            if (n.inputs.size() == 2) {
                const Tensor& ref = resolve(n.inputs[1]);
                oh = ref.h();
                ow = ref.w();
            } else if (n.has_attr("scale")) {
                oh = x.h() * n.attr_int("scale");
                ow = x.w() * n.attr_int("scale");
            } else {
                oh = n.attr_int("out_h");
                ow = n.attr_int("out_w");
            }
            out.push_back(resize(x, mode, oh, ow));
        } else if (n.kind == "global_skip_ref") {
            out.push_back(resolve(n.inputs[0]));
        } else {
            throw Error("forward: unknown kind '" + n.kind + "'");
        }
        values[n.name] = std::move(out);
    }
    return values.at(arch.nodes.back().name).at(0);
}

}  // namespace esr
