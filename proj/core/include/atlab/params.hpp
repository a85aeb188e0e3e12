#pragma once

#include <optional>
#include <string>
#include <vector>

#include "atlab/tensor.hpp"

namespace atlab {

// Parameter partition: the feature-extractor weights and the linear-head
// weights are trained and frozen independently.
enum class ParamGroup { extractor, head };

struct ParamEntry {
    std::string name;
    Tensor tensor;
    Tensor momentum;  // same shape, zero-initialized
    ParamGroup group;
};

// Named, ordered map of trainable tensors with per-tensor momentum buffers.
// Entries keep shared handles, so updates are visible to the layers that own
// the same storage.
class ParameterSet {
public:
    void add(std::string name, Tensor tensor, ParamGroup group);

    ParamEntry* find(const std::string& name);
    const ParamEntry* find(const std::string& name) const;

    std::vector<ParamEntry>& entries() { return entries_; }
    const std::vector<ParamEntry>& entries() const { return entries_; }

    void zero_grad();
    void set_requires_grad(bool flag, std::optional<ParamGroup> group = std::nullopt);

private:
    std::vector<ParamEntry> entries_;
};

// v <- momentum * v + grad + weight_decay * param; param <- param - lr * v;
// gradients are cleared afterwards. Only entries in `group` (all when absent)
// with requires_grad set are touched; a trainable entry without a gradient is
// an error.
void sgd_step(ParameterSet& params, double lr, double momentum, double weight_decay,
              std::optional<ParamGroup> group = std::nullopt);

// Temporarily clears requires_grad on a group of parameters (e.g. while
// crafting attacks, where only input gradients are needed).
class ParamGradPause {
public:
    explicit ParamGradPause(ParameterSet& params);
    ~ParamGradPause();
    ParamGradPause(const ParamGradPause&) = delete;
    ParamGradPause& operator=(const ParamGradPause&) = delete;

private:
    ParameterSet& params_;
    std::vector<bool> saved_;
};

}  // namespace atlab
