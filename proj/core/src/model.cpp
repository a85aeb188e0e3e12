#include "atlab/model.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "atlab/errors.hpp"
#include "atlab/rng.hpp"

namespace atlab {

namespace {

void fill_he_normal(Tensor& t, int fan_in, std::mt19937& rng) {
    std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
    for (float& v : t.values()) v = dist(rng);
}

Tensor make_conv_weight(int out_c, int in_c, int k, std::mt19937& rng) {
    Tensor w(Shape{out_c, in_c, k, k});
    fill_he_normal(w, in_c * k * k, rng);
    return w;
}

// Running stats exist from construction (mean 0, var 1), so a model is
// evaluable immediately; adversarial training crafts its first batch in eval
// mode before any train-mode forward has run.
BatchNormLayer make_bn(int channels) {
    BatchNormLayer bn;
    bn.gamma = Tensor(Shape{channels}, 1.0f);
    bn.beta = Tensor(Shape{channels}, 0.0f);
    bn.state.running_mean = Tensor(Shape{channels}, 0.0f);
    bn.state.running_var = Tensor(Shape{channels}, 1.0f);
    bn.state.ready = true;
    return bn;
}

void register_block_params(ParameterSet& params, Block& blk, int index) {
    const std::string p = "block" + std::to_string(index + 1) + ".";
    params.add(p + "conv1.weight", blk.conv1.weight, ParamGroup::extractor);
    params.add(p + "bn1.gamma", blk.bn1.gamma, ParamGroup::extractor);
    params.add(p + "bn1.beta", blk.bn1.beta, ParamGroup::extractor);
    if (blk.residual) {
        params.add(p + "conv2.weight", blk.conv2.weight, ParamGroup::extractor);
        params.add(p + "bn2.gamma", blk.bn2.gamma, ParamGroup::extractor);
        params.add(p + "bn2.beta", blk.bn2.beta, ParamGroup::extractor);
        if (blk.has_projection) {
            params.add(p + "proj.weight", blk.proj.weight, ParamGroup::extractor);
            params.add(p + "proj_bn.gamma", blk.proj_bn.gamma, ParamGroup::extractor);
            params.add(p + "proj_bn.beta", blk.proj_bn.beta, ParamGroup::extractor);
        }
    }
}

// Plain blocks pool after their ReLU; residual blocks pool first, so the
// identity shortcut feeds the (nonnegative) pooled input straight into the
// addition and the convs run at the halved resolution.
Tensor block_forward(Tape& tape, Block& blk, const Tensor& x, bool train) {
    if (!blk.residual) {
        Tensor y = conv2d(tape, x, blk.conv1.weight, blk.conv1.stride, blk.conv1.padding);
        y = batchnorm2d(tape, y, blk.bn1.gamma, blk.bn1.beta, blk.bn1.state, train,
                        blk.bn1.momentum, blk.bn1.eps);
        y = relu(tape, y);
        if (blk.pool) y = pool2d(tape, y, PoolKind::max, 2, 2);
        return y;
    }
    Tensor in = blk.pool ? pool2d(tape, x, PoolKind::max, 2, 2) : x;
    Tensor y = conv2d(tape, in, blk.conv1.weight, blk.conv1.stride, blk.conv1.padding);
    y = batchnorm2d(tape, y, blk.bn1.gamma, blk.bn1.beta, blk.bn1.state, train, blk.bn1.momentum,
                    blk.bn1.eps);
    y = relu(tape, y);
    y = conv2d(tape, y, blk.conv2.weight, blk.conv2.stride, blk.conv2.padding);
    y = batchnorm2d(tape, y, blk.bn2.gamma, blk.bn2.beta, blk.bn2.state, train, blk.bn2.momentum,
                    blk.bn2.eps);
    Tensor shortcut = in;
    if (blk.has_projection) {
        shortcut = conv2d(tape, in, blk.proj.weight, blk.proj.stride, blk.proj.padding);
        shortcut = batchnorm2d(tape, shortcut, blk.proj_bn.gamma, blk.proj_bn.beta,
                               blk.proj_bn.state, train, blk.proj_bn.momentum, blk.proj_bn.eps);
    }
    y = add(tape, y, shortcut);
    return relu(tape, y);
}

bool arch_is_residual(const std::string& name, bool& fixed4) {
    fixed4 = false;
    if (name == "plain") return false;
    if (name == "mini-resnet") return true;
    if (name == "plain-4-block") {
        fixed4 = true;
        return false;
    }
    if (name == "mini-resnet-4-block") {
        fixed4 = true;
        return true;
    }
    throw ConfigError("unknown architecture '" + name + "'");
}

}  // namespace

std::string ArchSpec::canonical() const {
    std::ostringstream os;
    os << name << "|";
    for (std::size_t i = 0; i < widths.size(); ++i) os << (i ? "," : "") << widths[i];
    os << "|" << in_channels << "x" << in_h << "x" << in_w << "|" << classes;
    return os.str();
}

BlockTappedModel build_model(const ArchSpec& spec, std::uint64_t seed) {
    bool fixed4 = false;
    const bool residual = arch_is_residual(spec.name, fixed4);
    if (spec.widths.empty()) throw ConfigError("architecture needs at least one block width");
    if (fixed4 && spec.widths.size() != 4)
        throw ConfigError("architecture '" + spec.name + "' requires exactly 4 block widths");
    for (int wdt : spec.widths)
        if (wdt <= 0) throw ConfigError("block widths must be positive");
    if (spec.classes < 2) throw ConfigError("need at least 2 classes");
    const int min_extent = 1 << static_cast<int>(spec.widths.size());
    if (spec.in_h < min_extent || spec.in_w < min_extent)
        throw ConfigError("input " + std::to_string(spec.in_h) + "x" + std::to_string(spec.in_w) +
                          " too small for " + std::to_string(spec.widths.size()) + " pooled blocks");

    BlockTappedModel model;
    model.arch = spec;
    std::mt19937 rng = make_rng(seed);

    int in_c = spec.in_channels;
    for (std::size_t b = 0; b < spec.widths.size(); ++b) {
        const int out_c = spec.widths[b];
        Block blk;
        blk.residual = residual;
        blk.conv1.weight = make_conv_weight(out_c, in_c, 3, rng);
        blk.bn1 = make_bn(out_c);
        if (residual) {
            blk.conv2.weight = make_conv_weight(out_c, out_c, 3, rng);
            blk.bn2 = make_bn(out_c);
            if (in_c != out_c) {
                blk.has_projection = true;
                blk.proj.weight = make_conv_weight(out_c, in_c, 1, rng);
                blk.proj.padding = 0;
                blk.proj_bn = make_bn(out_c);
            }
        }
        register_block_params(model.params, blk, static_cast<int>(b));
        model.blocks.push_back(std::move(blk));
        in_c = out_c;
    }

    model.head_weight = Tensor(Shape{spec.classes, spec.widths.back()});
    fill_he_normal(model.head_weight, spec.widths.back(), rng);
    model.head_bias = Tensor(Shape{spec.classes});
    model.params.add("head.weight", model.head_weight, ParamGroup::head);
    model.params.add("head.bias", model.head_bias, ParamGroup::head);
    return model;
}

Tensor BlockTappedModel::forward(Tape& tape, const Tensor& x, bool train) {
    std::vector<BlockActivation> taps;
    return forward_with_taps(tape, x, train, taps);
}

Tensor BlockTappedModel::forward_with_taps(Tape& tape, const Tensor& x, bool train,
                                           std::vector<BlockActivation>& taps) {
    if (x.rank() != 4) throw ShapeError("model forward: expected input [N,C,H,W]");
    if (x.dim(1) != arch.in_channels)
        throw ShapeError("model forward: input has " + std::to_string(x.dim(1)) +
                         " channels, architecture expects " + std::to_string(arch.in_channels));
    taps.clear();
    taps.reserve(blocks.size());
    Tensor y = x;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        y = block_forward(tape, blocks[b], y, train);
        taps.push_back(BlockActivation{static_cast<int>(b) + 1, y});
    }
    Tensor pooled = global_avg_pool(tape, y);
    return linear(tape, pooled, head_weight, head_bias);
}

std::vector<Shape> BlockTappedModel::tap_shapes() const {
    std::vector<Shape> out;
    int h = arch.in_h, w = arch.in_w;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        // 3x3 stride-1 pad-1 convs preserve extent; the block pool halves it.
        if (blocks[b].pool) {
            h = (h - 2) / 2 + 1;
            w = (w - 2) / 2 + 1;
        }
        out.push_back(Shape{arch.widths[b], h, w});
    }
    return out;
}

BlockTappedModel BlockTappedModel::clone() const {
    BlockTappedModel copy;
    copy.arch = arch;
    auto clone_bn = [](const BatchNormLayer& bn) {
        BatchNormLayer out;
        out.gamma = bn.gamma.clone();
        out.beta = bn.beta.clone();
        out.momentum = bn.momentum;
        out.eps = bn.eps;
        out.state.ready = bn.state.ready;
        if (bn.state.running_mean.defined()) {
            out.state.running_mean = bn.state.running_mean.clone();
            out.state.running_var = bn.state.running_var.clone();
        }
        return out;
    };
    for (const Block& blk : blocks) {
        Block nb;
        nb.residual = blk.residual;
        nb.pool = blk.pool;
        nb.conv1 = ConvLayer{blk.conv1.weight.clone(), blk.conv1.stride, blk.conv1.padding};
        nb.bn1 = clone_bn(blk.bn1);
        if (blk.residual) {
            nb.conv2 = ConvLayer{blk.conv2.weight.clone(), blk.conv2.stride, blk.conv2.padding};
            nb.bn2 = clone_bn(blk.bn2);
            nb.has_projection = blk.has_projection;
            if (blk.has_projection) {
                nb.proj = ConvLayer{blk.proj.weight.clone(), blk.proj.stride, blk.proj.padding};
                nb.proj_bn = clone_bn(blk.proj_bn);
            }
        }
        register_block_params(copy.params, nb, static_cast<int>(copy.blocks.size()));
        copy.blocks.push_back(std::move(nb));
    }
    copy.head_weight = head_weight.clone();
    copy.head_bias = head_bias.clone();
    copy.params.add("head.weight", copy.head_weight, ParamGroup::head);
    copy.params.add("head.bias", copy.head_bias, ParamGroup::head);
    // carry momentum buffers so a cloned model resumes training identically
    for (const auto& e : params.entries()) {
        ParamEntry* dst = copy.params.find(e.name);
        std::copy(e.momentum.values().begin(), e.momentum.values().end(),
                  dst->momentum.values().begin());
    }
    return copy;
}

std::vector<std::pair<std::string, Tensor>> BlockTappedModel::state_tensors() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& e : params.entries()) out.emplace_back(e.name, e.tensor);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const std::string p = "block" + std::to_string(b + 1) + ".";
        auto add_bn = [&](const std::string& tag, const BatchNormLayer& bn) {
            if (bn.state.running_mean.defined()) {
                out.emplace_back(p + tag + ".running_mean", bn.state.running_mean);
                out.emplace_back(p + tag + ".running_var", bn.state.running_var);
            }
        };
        add_bn("bn1", blocks[b].bn1);
        if (blocks[b].residual) {
            add_bn("bn2", blocks[b].bn2);
            if (blocks[b].has_projection) add_bn("proj_bn", blocks[b].proj_bn);
        }
    }
    return out;
}

bool BlockTappedModel::bn_stats_ready() const {
    for (const Block& blk : blocks) {
        if (!blk.bn1.state.ready) return false;
        if (blk.residual && !blk.bn2.state.ready) return false;
        if (blk.residual && blk.has_projection && !blk.proj_bn.state.ready) return false;
    }
    return true;
}

void BlockTappedModel::set_bn_stats_ready(bool ready) {
    for (Block& blk : blocks) {
        auto ensure = [&](BatchNormLayer& bn) {
            if (!bn.state.running_mean.defined()) {
                bn.state.running_mean = Tensor(Shape{bn.gamma.dim(0)});
                bn.state.running_var = Tensor(Shape{bn.gamma.dim(0)}, 1.0f);
            }
            bn.state.ready = ready;
        };
        ensure(blk.bn1);
        if (blk.residual) {
            ensure(blk.bn2);
            if (blk.has_projection) ensure(blk.proj_bn);
        }
    }
}

void reinit_head(BlockTappedModel& model, std::uint64_t seed) {
    std::mt19937 rng = make_rng(derive_seed(seed, 0x68656164ULL));  // distinct head stream
    fill_he_normal(model.head_weight, model.arch.widths.back(), rng);
    for (float& v : model.head_bias.values()) v = 0.0f;
    ParamEntry* w = model.params.find("head.weight");
    ParamEntry* b = model.params.find("head.bias");
    for (float& v : w->momentum.values()) v = 0.0f;
    for (float& v : b->momentum.values()) v = 0.0f;
    w->tensor.drop_grad();
    b->tensor.drop_grad();
}

std::uint64_t extractor_fingerprint(const BlockTappedModel& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const Tensor& t) {
        for (float v : t.values()) {
            std::uint32_t bits;
            static_assert(sizeof(bits) == sizeof(v));
            std::memcpy(&bits, &v, sizeof(bits));
            for (int i = 0; i < 4; ++i) {
                h ^= (bits >> (8 * i)) & 0xffu;
                h *= 0x100000001b3ULL;
            }
        }
    };
    for (const auto& e : model.params.entries())
        if (e.group == ParamGroup::extractor) mix(e.tensor);
    for (const auto& [name, tensor] : model.state_tensors())
        if (name.find("running_") != std::string::npos) mix(tensor);
    return h;
}

}  // namespace atlab
