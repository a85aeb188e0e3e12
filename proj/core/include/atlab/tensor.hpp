#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace atlab {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl {
    Shape shape;
    std::vector<float> values;
    std::vector<float> grad;  // empty until requested; same length as values otherwise
    bool requires_grad = false;
};
}  // namespace detail

// Dense row-major float tensor. Copies are shallow handles sharing storage;
// clone() makes a deep copy. Values produced by tape ops are treated as
// immutable; leaves (parameters, attack inputs) may be updated in place
// between forward passes.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);

    static Tensor from(Shape shape, std::vector<float> values);
    static Tensor scalar(float value);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    int dim(std::size_t i) const;
    std::int64_t numel() const;

    float* data();
    const float* data() const;
    std::span<float> values();
    std::span<const float> values() const;
    float item() const;  // scalar tensors only

    bool requires_grad() const;
    Tensor& set_requires_grad(bool flag);

    bool has_grad() const;
    // Allocates a zero-filled gradient buffer on first access.
    std::span<float> grad();
    std::span<const float> grad() const;
    void zero_grad();
    void drop_grad();

    Tensor clone() const;  // deep copy of values; gradient not copied
    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

    // Throws NumericError if any value is NaN or infinite.
    void ensure_finite(const char* what) const;

    std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

// Throws ShapeError unless the two shapes are identical.
void check_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace atlab
