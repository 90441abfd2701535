#include "esrkit/weights.hpp"

#include <cstring>
#include <fstream>
#include <random>
#include <vector>

#include "esrkit/reparam.hpp"

namespace esr {

const Tensor& WeightStore::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw Error("missing weight tensor '" + name + "'");
    return it->second;
}

namespace {

struct Requirement {
    std::string name;
    int n, c, h, w;
};

// Every tensor a strict binding demands, with exact shapes.
std::vector<Requirement> required_entries(const ArchSpec& arch) {
    const auto shapes = infer_shapes(arch, 64, 64);
    std::vector<Requirement> reqs;
    auto input_shape_of = [&](const NodeSpec& node) -> ChanShape {
        const InputRef& ref = node.inputs.at(0);
        if (ref.is_graph_input()) return {arch.in_channels, 0, 0};
        return shapes[arch.find(ref.node)][ref.slot];
    };

    for (const NodeSpec& node : arch.nodes) {
        if (node.kind == "conv") {
            const ConvParams p = conv_params_for(node, input_shape_of(node).c);
            reqs.push_back({node.name + ".weight", p.out_channels,
                            p.in_channels / p.groups, p.kernel_h, p.kernel_w});
            if (p.has_bias)
                reqs.push_back({node.name + ".bias", 1, p.out_channels, 1, 1});
        } else if (node.kind == "bn") {
            const int c = input_shape_of(node).c;
            for (const char* part : {".gamma", ".beta", ".mean", ".var"})
                reqs.push_back({node.name + part, 1, c, 1, 1});
        } else if (node.kind == "act" && node.attr_str("fn") == "prelu") {
            reqs.push_back({node.name + ".slope", 1, input_shape_of(node).c, 1, 1});
        } else if (node.kind == "mul" && node.attr_str("weight", "") == "channel") {
            reqs.push_back({node.name + ".weight", 1, input_shape_of(node).c, 1, 1});
        }
    }
    return reqs;
}

}  // namespace

void WeightStore::bind_strict(const ArchSpec& arch) const {
    const auto reqs = required_entries(arch);
    std::map<std::string, bool> seen;
    for (const auto& r : reqs) {
        auto it = tensors_.find(r.name);
        if (it == tensors_.end())
            throw Error("binding failure: missing tensor '" + r.name + "'");
        const Tensor& t = it->second;
        if (t.n() != r.n || t.c() != r.c || t.h() != r.h || t.w() != r.w)
            throw Error("binding failure: tensor '" + r.name + "' has shape " +
                        t.shape_str() + ", expected " + std::to_string(r.n) + "x" +
                        std::to_string(r.c) + "x" + std::to_string(r.h) + "x" +
                        std::to_string(r.w));
        seen[r.name] = true;
    }
    for (const auto& [name, t] : tensors_)
        if (!seen.count(name))
            throw Error("binding failure: orphan tensor '" + name + "'");
}

namespace {

constexpr char kMagic[4] = {'E', 'S', 'R', 'W'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
    // Assumes little-endian host, as the rest of the toolchain does.
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_le(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw Error("truncated ESRW file");
    return v;
}

}  // namespace

void save_weights(const WeightStore& store, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f.write(kMagic, 4);
    write_le<uint32_t>(f, kVersion);
    write_le<uint32_t>(f, static_cast<uint32_t>(store.size()));
    for (const auto& [name, t] : store.entries()) {
        if (name.size() > 0xffff) throw Error("tensor name too long: " + name);
        write_le<uint16_t>(f, static_cast<uint16_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le<uint8_t>(f, 0);  // dtype f32
        write_le<uint8_t>(f, 4);
        for (int d : {t.n(), t.c(), t.h(), t.w()}) write_le<uint32_t>(f, static_cast<uint32_t>(d));
        f.write(reinterpret_cast<const char*>(t.data().data()),
                static_cast<std::streamsize>(t.data().size() * sizeof(float)));
    }
    if (!f) throw Error("write error on " + path);
}

WeightStore load_weights(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw Error(path + " is not an ESRW weight file");
    const uint32_t version = read_le<uint32_t>(f);
    if (version != kVersion)
        throw Error("unsupported ESRW version " + std::to_string(version));
    const uint32_t count = read_le<uint32_t>(f);
    WeightStore store;
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = read_le<uint16_t>(f);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        if (!f) throw Error("truncated ESRW file");
        const uint8_t dtype = read_le<uint8_t>(f);
        if (dtype != 0) throw Error("unsupported dtype " + std::to_string(dtype));
        const uint8_t ndim = read_le<uint8_t>(f);
        std::vector<uint32_t> dims(ndim);
        uint64_t numel = 1;
        for (auto& d : dims) {
            d = read_le<uint32_t>(f);
            numel *= d;
        }
        // Trailing dims of 1 are implied for vectors stored with fewer dims.
        while (dims.size() < 4) dims.push_back(1);
        if (ndim > 4 || dims.size() != 4)
            throw Error("tensor '" + name + "' has unsupported rank");
        std::vector<float> data(numel);
        f.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(numel * sizeof(float)));
        if (!f) throw Error("truncated ESRW file");
        store.put(name, Tensor(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                               static_cast<int>(dims[2]), static_cast<int>(dims[3]),
                               std::move(data)));
    }
    return store;
}

WeightStore random_weights(const ArchSpec& arch, uint64_t seed, float stddev) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> gauss(0.0f, stddev);
    WeightStore store;
    const auto reqs = required_entries(arch);
    for (const auto& r : reqs) {
        Tensor t(r.n, r.c, r.h, r.w);

        // Fixed derivative kernels keep their constant weights.
        const auto dot = r.name.rfind('.');
        const std::string node_name = r.name.substr(0, dot);
        const std::string role = r.name.substr(dot + 1);
        const int node_idx = arch.find(node_name);
        const NodeSpec* node = node_idx >= 0 ? &arch.nodes[node_idx] : nullptr;
        if (node && node->kind == "conv" && node->has_attr("fixed") && role == "weight") {
            const Tensor k = fixed_kernel(fixed_kernel_from_string(node->attr_str("fixed")));
            for (int o = 0; o < t.n(); ++o)
                for (int u = 0; u < 3; ++u)
                    for (int v = 0; v < 3; ++v) t.at(o, 0, u, v) = k.at(0, 0, u, v);
            store.put(r.name, std::move(t));
            continue;
        }

        if (role == "gamma") {
            for (auto& v : t.data()) v = 1.0f + 0.1f * gauss(rng);
        } else if (role == "var") {
            for (auto& v : t.data()) v = 1.0f + std::abs(gauss(rng));
        } else if (role == "mean" || role == "beta" || role == "bias") {
            for (auto& v : t.data()) v = 0.1f * gauss(rng);
        } else if (role == "slope") {
            for (auto& v : t.data()) v = 0.05f + 0.01f * gauss(rng);
        } else if (node && node->kind == "mul") {
            // channel weighting, centered at 1
            for (auto& v : t.data()) v = 1.0f + gauss(rng);
        } else {
            for (auto& v : t.data()) v = gauss(rng);
        }
        store.put(r.name, std::move(t));
    }
    return store;
}

}  // namespace esr
