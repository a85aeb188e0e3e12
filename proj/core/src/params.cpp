#include "atlab/params.hpp"

#include "atlab/errors.hpp"

namespace atlab {

void ParameterSet::add(std::string name, Tensor tensor, ParamGroup group) {
    if (find(name)) throw ConfigError("parameter '" + name + "' registered twice");
    ParamEntry e;
    e.name = std::move(name);
    e.momentum = Tensor(tensor.shape());
    e.tensor = std::move(tensor);
    e.tensor.set_requires_grad(true);
    e.group = group;
    entries_.push_back(std::move(e));
}

ParamEntry* ParameterSet::find(const std::string& name) {
    for (auto& e : entries_)
        if (e.name == name) return &e;
    return nullptr;
}

const ParamEntry* ParameterSet::find(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return &e;
    return nullptr;
}

void ParameterSet::zero_grad() {
    for (auto& e : entries_) e.tensor.drop_grad();
}

void ParameterSet::set_requires_grad(bool flag, std::optional<ParamGroup> group) {
    for (auto& e : entries_)
        if (!group || e.group == *group) e.tensor.set_requires_grad(flag);
}

void sgd_step(ParameterSet& params, double lr, double momentum, double weight_decay,
              std::optional<ParamGroup> group) {
    for (auto& e : params.entries()) {
        if (group && e.group != *group) continue;
        if (!e.tensor.requires_grad()) continue;
        if (!e.tensor.has_grad())
            throw NumericError("sgd_step: parameter '" + e.name +
                               "' is trainable but has no gradient");
        auto p = e.tensor.values();
        auto g = e.tensor.grad();
        auto v = e.momentum.values();
        const float m = static_cast<float>(momentum);
        const float wd = static_cast<float>(weight_decay);
        const float step = static_cast<float>(lr);
        for (std::size_t i = 0; i < p.size(); ++i) {
            v[i] = m * v[i] + g[i] + wd * p[i];
            p[i] -= step * v[i];
        }
        e.tensor.drop_grad();
    }
}

ParamGradPause::ParamGradPause(ParameterSet& params) : params_(params) {
    saved_.reserve(params.entries().size());
    for (auto& e : params.entries()) {
        saved_.push_back(e.tensor.requires_grad());
        e.tensor.set_requires_grad(false);
    }
}

ParamGradPause::~ParamGradPause() {
    for (std::size_t i = 0; i < params_.entries().size() && i < saved_.size(); ++i)
        params_.entries()[i].tensor.set_requires_grad(saved_[i]);
}

}  // namespace atlab
