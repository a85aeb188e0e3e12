#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "atlab/tensor.hpp"

namespace atlab {

// Define-by-run reverse-mode tape. Ops append records in execution order, so
// the record list is topologically sorted by construction; backward() replays
// it once in reverse. A tape lives for one forward pass and is confined to a
// single worker.
class Tape {
public:
    using BackwardFn = std::function<void()>;

    struct Record {
        const char* op;
        std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
        std::shared_ptr<detail::TensorImpl> output;
        BackwardFn backward;  // saved intermediates live in the closure
    };

    // True if gradients must flow through t: either a requires_grad leaf or a
    // value produced on this tape from one.
    bool needs_grad(const Tensor& t) const;

    void record(const char* op, std::initializer_list<Tensor> inputs, const Tensor& output,
                BackwardFn fn);

    // Seeds d(root)/d(root) = 1 and accumulates gradients into every
    // requires_grad leaf reachable from root. Intermediate gradients are
    // rebuilt from scratch on each call; leaf gradients accumulate additively
    // across calls. root must be a scalar produced by this tape.
    void backward(const Tensor& root);

    std::size_t size() const { return records_.size(); }
    void clear();

private:
    std::vector<Record> records_;
    std::unordered_set<const detail::TensorImpl*> produced_;
};

}  // namespace atlab
