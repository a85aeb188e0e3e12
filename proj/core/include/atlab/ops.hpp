#pragma once

#include <vector>

#include "atlab/tape.hpp"
#include "atlab/tensor.hpp"

namespace atlab {

// Differentiable tensor ops. Each op computes its forward result immediately
// and, when gradients must flow, appends a backward record to the tape.

Tensor relu(Tape& tape, const Tensor& x);

// Elementwise sum of two same-shape tensors (residual shortcuts).
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);

// Elementwise (Hadamard) product of two same-shape tensors.
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape);

// Sum of all elements, as a scalar tensor.
Tensor sum(Tape& tape, const Tensor& x);

// Cross-correlation of x[N,C,H,W] with kernel[F,C,kh,kw].
// Output spatial extent: floor((H + 2*padding - kh)/stride) + 1.
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& kernel, int stride, int padding);

enum class PoolKind { max, avg };

// Per-window max or mean over x[N,C,H,W]. Max routes gradient to the argmax,
// first occurrence in row-major window order on ties. Average divides by the
// full window area (padding counted as zeros).
Tensor pool2d(Tape& tape, const Tensor& x, PoolKind kind, int window, int stride, int padding = 0);

// Spatial mean per channel: [N,C,H,W] -> [N,C].
Tensor global_avg_pool(Tape& tape, const Tensor& x);

struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
    bool ready = false;  // set once train mode has populated the stats
};

// Train mode normalizes with per-channel batch statistics (biased variance)
// and folds them into the running stats; eval mode normalizes with the
// running stats and requires state.ready.
Tensor batchnorm2d(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, bool train, double momentum = 0.1, double eps = 1e-5);

// out[N,K] = x[N,D] * weight[K,D]^T + bias[K]
Tensor linear(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias);

// Mean over the batch of -log softmax(logits)[label], stabilized by row-max
// subtraction; accumulation in double.
Tensor cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels);

// Loss of each row separately (no tape interaction).
std::vector<double> per_sample_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Row-wise argmax (first index on ties).
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace atlab
