#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "esrkit/arch.hpp"
#include "esrkit/tensor.hpp"

namespace esr {

// Named tensor table backing an ArchSpec.
//
// On-disk format ("ESRW"): magic bytes, version u32 LE, tensor count u32;
// per tensor: name length u16, name bytes, dtype u8 (0 = f32), ndim u8,
// dims u32 x ndim, raw little-endian f32 payload. Strictly sequential.
class WeightStore {
public:
    void put(const std::string& name, Tensor t) { tensors_[name] = std::move(t); }
    bool has(const std::string& name) const { return tensors_.count(name) > 0; }
    const Tensor& get(const std::string& name) const;
    void erase(const std::string& name) { tensors_.erase(name); }
    size_t size() const { return tensors_.size(); }
    const std::map<std::string, Tensor>& entries() const { return tensors_; }

    // Every learnable node resolves to tensors of the exact implied shapes
    // and no orphan entries remain. Throws on the first violation.
    void bind_strict(const ArchSpec& arch) const;

private:
    std::map<std::string, Tensor> tensors_;
};

WeightStore load_weights(const std::string& path);
void save_weights(const WeightStore& store, const std::string& path);

// Seeded Gaussian init for every tensor bind_strict expects; bn stats are
// set to identity-with-jitter so folded outputs stay well-scaled.
WeightStore random_weights(const ArchSpec& arch, uint64_t seed, float stddev = 0.1f);

}  // namespace esr
