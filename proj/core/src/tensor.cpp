#include "atlab/tensor.hpp"

#include <cmath>
#include <sstream>

#include "atlab/errors.hpp"

namespace atlab {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape shape, float fill) : impl_(std::make_shared<detail::TensorImpl>()) {
    const std::int64_t n = shape_numel(shape);
    impl_->shape = std::move(shape);
    impl_->values.assign(static_cast<std::size_t>(n), fill);
}

Tensor Tensor::from(Shape shape, std::vector<float> values) {
    const std::int64_t n = shape_numel(shape);
    if (n != static_cast<std::int64_t>(values.size()))
        throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                         shape_str(shape));
    Tensor t;
    t.impl_ = std::make_shared<detail::TensorImpl>();
    t.impl_->shape = std::move(shape);
    t.impl_->values = std::move(values);
    return t;
}

Tensor Tensor::scalar(float value) { return from({1}, {value}); }

const Shape& Tensor::shape() const {
    if (!impl_) throw ShapeError("use of undefined tensor");
    return impl_->shape;
}

int Tensor::dim(std::size_t i) const {
    const Shape& s = shape();
    if (i >= s.size()) throw ShapeError("dim index out of range for shape " + shape_str(s));
    return s[i];
}

std::int64_t Tensor::numel() const {
    shape();
    return static_cast<std::int64_t>(impl_->values.size());
}

float* Tensor::data() {
    shape();
    return impl_->values.data();
}

const float* Tensor::data() const {
    shape();
    return impl_->values.data();
}

std::span<float> Tensor::values() {
    shape();
    return impl_->values;
}

std::span<const float> Tensor::values() const {
    shape();
    return impl_->values;
}

float Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() requires a scalar tensor, got " + shape_str(shape()));
    return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
    shape();
    impl_->requires_grad = flag;
    return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<float> Tensor::grad() {
    shape();
    if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0f);
    return impl_->grad;
}

std::span<const float> Tensor::grad() const {
    shape();
    if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0f);
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (has_grad()) impl_->grad.assign(impl_->values.size(), 0.0f);
}

void Tensor::drop_grad() {
    if (impl_) impl_->grad.clear();
}

Tensor Tensor::clone() const {
    shape();
    Tensor t;
    t.impl_ = std::make_shared<detail::TensorImpl>();
    t.impl_->shape = impl_->shape;
    t.impl_->values = impl_->values;
    t.impl_->requires_grad = impl_->requires_grad;
    return t;
}

void Tensor::ensure_finite(const char* what) const {
    for (float v : values()) {
        if (!std::isfinite(v))
            throw NumericError(std::string(what) + ": non-finite value encountered");
    }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

}  // namespace atlab
