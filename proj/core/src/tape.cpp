#include "atlab/tape.hpp"

#include <algorithm>

#include "atlab/errors.hpp"

namespace atlab {

bool Tape::needs_grad(const Tensor& t) const {
    if (!t.defined()) return false;
    if (t.requires_grad()) return true;
    return produced_.count(t.impl().get()) > 0;
}

void Tape::record(const char* op, std::initializer_list<Tensor> inputs, const Tensor& output,
                  BackwardFn fn) {
    Record rec;
    rec.op = op;
    rec.inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) rec.inputs.push_back(t.impl());
    rec.output = output.impl();
    rec.backward = std::move(fn);
    produced_.insert(rec.output.get());
    records_.push_back(std::move(rec));
}

void Tape::backward(const Tensor& root) {
    if (!root.defined() || produced_.count(root.impl().get()) == 0)
        throw NumericError("backward: root tensor was not produced by this tape");
    if (root.numel() != 1) throw ShapeError("backward: root must be a scalar");

    // Intermediate gradients are recomputed per call; only leaves accumulate.
    for (Record& rec : records_) {
        rec.output->grad.assign(rec.output->values.size(), 0.0f);
    }
    Tensor r = root;
    r.grad()[0] = 1.0f;

    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        if (it->backward) it->backward();
    }
}

void Tape::clear() {
    records_.clear();
    produced_.clear();
}

}  // namespace atlab
