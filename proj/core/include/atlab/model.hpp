#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atlab/ops.hpp"
#include "atlab/params.hpp"
#include "atlab/tape.hpp"
#include "atlab/tensor.hpp"

namespace atlab {

struct ArchSpec {
    std::string name = "plain-4-block";  // or "mini-resnet-4-block", "plain", "mini-resnet"
    std::vector<int> widths = {8, 16, 16, 32};
    int in_channels = 3;
    int in_h = 32;
    int in_w = 32;
    int classes = 10;

    std::string canonical() const;  // stable string form, used for checkpoint hashing
};

struct ConvLayer {
    Tensor weight;  // [F,C,kh,kw]
    int stride = 1;
    int padding = 1;
};

struct BatchNormLayer {
    Tensor gamma;
    Tensor beta;
    BatchNormState state;
    double momentum = 0.1;
    double eps = 1e-5;
};

// One tap block. Plain: conv-bn-relu(-pool). Residual: conv-bn-relu-conv-bn
// plus shortcut (1x1 conv + bn when the channel count changes), sum,
// relu(-pool). The tap is the block output, after the final ReLU, so tapped
// activations are nonnegative.
struct Block {
    bool residual = false;
    ConvLayer conv1;
    BatchNormLayer bn1;
    ConvLayer conv2;       // residual only
    BatchNormLayer bn2;    // residual only
    bool has_projection = false;
    ConvLayer proj;
    BatchNormLayer proj_bn;
    bool pool = true;  // 2x2 stride-2 max pool at block end
};

// Per-block activations x^k for one batch; sample_view(i) exposes the 2-D
// form x̃^k (rows = feature maps, columns = vectorized spatial positions).
struct BlockActivation {
    int block = 0;  // 1-based index k
    Tensor activation;  // [N, C_k, H_k, W_k]

    int batch() const { return activation.dim(0); }
    int channels() const { return activation.dim(1); }
    int spatial() const { return activation.dim(2) * activation.dim(3); }
    const float* sample_view(int i) const {
        return activation.data() + static_cast<std::int64_t>(i) * channels() * spatial();
    }
};

// Feature extractor f (block stack) composed with a linear head g over the
// globally averaged final block output.
class BlockTappedModel {
public:
    ArchSpec arch;
    std::vector<Block> blocks;
    Tensor head_weight;  // [classes, C_last]
    Tensor head_bias;    // [classes]
    ParameterSet params;

    Tensor forward(Tape& tape, const Tensor& x, bool train);
    Tensor forward_with_taps(Tape& tape, const Tensor& x, bool train,
                             std::vector<BlockActivation>& taps);

    // Declared tap shapes (C_k, H_k, W_k) for the spec input size.
    std::vector<Shape> tap_shapes() const;

    BlockTappedModel clone() const;

    // All state tensors (parameters + BN running stats) in a stable order,
    // for checkpointing and fingerprints.
    std::vector<std::pair<std::string, Tensor>> state_tensors() const;
    bool bn_stats_ready() const;
    void set_bn_stats_ready(bool ready);
};

// Builds and He-initializes a registered architecture; deterministic per seed.
BlockTappedModel build_model(const ArchSpec& spec, std::uint64_t seed);

// Redraws the head parameters; extractor parameters and BN stats untouched.
void reinit_head(BlockTappedModel& model, std::uint64_t seed);

// FNV-1a over the raw bits of extractor parameters and BN running stats.
std::uint64_t extractor_fingerprint(const BlockTappedModel& model);

}  // namespace atlab
