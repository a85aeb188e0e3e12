#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "atlab/errors.hpp"
#include "atlab/model.hpp"
#include "atlab/rng.hpp"
#include "support/testutil.hpp"

using namespace atlab;
using testutil::random_tensor;

namespace {

bool same_values(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        if (a.values()[i] != b.values()[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("build_model: mini-resnet widths [16,32,64,64] on 32x32x3") {
    ArchSpec spec;
    spec.name = "mini-resnet-4-block";
    spec.widths = {16, 32, 64, 64};
    BlockTappedModel model = build_model(spec, 1);

    CHECK(model.blocks.size() == 4);
    CHECK(model.head_weight.dim(1) == 64);  // head input = final width under GAP
    const auto shapes = model.tap_shapes();
    REQUIRE(shapes.size() == 4);
    CHECK(shapes[0] == Shape{16, 16, 16});
    CHECK(shapes[1] == Shape{32, 8, 8});
    CHECK(shapes[2] == Shape{64, 4, 4});
    CHECK(shapes[3] == Shape{64, 2, 2});

    // residual blocks 1..3 change channel count and need projections
    CHECK(model.blocks[0].has_projection);
    CHECK(model.blocks[1].has_projection);
    CHECK(model.blocks[2].has_projection);
    CHECK_FALSE(model.blocks[3].has_projection);

    Tape tape;
    std::mt19937 rng = make_rng(2);
    Tensor x = random_tensor({2, 3, 32, 32}, rng, 0.0f, 1.0f);
    std::vector<BlockActivation> taps;
    Tensor logits = model.forward_with_taps(tape, x, /*train=*/true, taps);
    CHECK(logits.shape() == Shape{2, 10});
    REQUIRE(taps.size() == 4);
    for (std::size_t b = 0; b < 4; ++b) {
        CHECK(taps[b].activation.dim(1) == shapes[b][0]);
        CHECK(taps[b].activation.dim(2) == shapes[b][1]);
        CHECK(taps[b].activation.dim(3) == shapes[b][2]);
    }
}

TEST_CASE("build_model: determinism and validation") {
    ArchSpec spec;  // default plain-4-block
    BlockTappedModel a = build_model(spec, 42);
    BlockTappedModel b = build_model(spec, 42);
    for (std::size_t i = 0; i < a.params.entries().size(); ++i)
        CHECK(same_values(a.params.entries()[i].tensor, b.params.entries()[i].tensor));

    BlockTappedModel c = build_model(spec, 43);
    CHECK_FALSE(same_values(a.params.entries()[0].tensor, c.params.entries()[0].tensor));

    ArchSpec bad = spec;
    bad.name = "resnet-50";
    CHECK_THROWS_AS(build_model(bad, 1), ConfigError);
    bad = spec;
    bad.widths = {8, 16};  // the 4-block names pin the block count
    CHECK_THROWS_AS(build_model(bad, 1), ConfigError);
    bad = spec;
    bad.widths = {8, -16, 8, 8};
    CHECK_THROWS_AS(build_model(bad, 1), ConfigError);
    bad = spec;
    bad.in_h = 8;  // four stride-2 pools cannot fit
    CHECK_THROWS_AS(build_model(bad, 1), ConfigError);
}

TEST_CASE("plain stack: tap spatial extents halve per block") {
    ArchSpec spec;
    spec.name = "plain";
    spec.widths = {4, 8, 8};
    spec.in_h = 24;
    spec.in_w = 24;
    BlockTappedModel model = build_model(spec, 3);
    const auto shapes = model.tap_shapes();
    int h = 24;
    for (std::size_t b = 0; b < shapes.size(); ++b) {
        h /= 2;
        CHECK(shapes[b][1] == h);
        CHECK(shapes[b][2] == h);
    }

    // declared shapes match the real forward
    Tape tape;
    std::mt19937 rng = make_rng(4);
    Tensor x = random_tensor({1, 3, 24, 24}, rng, 0.0f, 1.0f);
    std::vector<BlockActivation> taps;
    model.forward_with_taps(tape, x, true, taps);
    for (std::size_t b = 0; b < taps.size(); ++b) {
        CHECK(taps[b].activation.dim(2) == shapes[b][1]);
        CHECK(taps[b].activation.dim(3) == shapes[b][2]);
    }
}

TEST_CASE("forward_with_taps: taps never perturb the forward result") {
    ArchSpec spec;
    spec.widths = {4, 8, 8, 8};
    BlockTappedModel model = build_model(spec, 7);
    std::mt19937 rng = make_rng(8);
    Tensor x = random_tensor({3, 3, 32, 32}, rng, 0.0f, 1.0f);

    Tape t1;
    std::vector<BlockActivation> taps;
    Tensor tapped = model.forward_with_taps(t1, x, true, taps);
    // fresh BN stats for the untapped pass so both see identical state
    BlockTappedModel model2 = build_model(spec, 7);
    Tape t2;
    Tensor untapped = model2.forward(t2, x, true);

    CHECK(same_values(tapped, untapped));
    CHECK(taps.size() == model.blocks.size());

    // block outputs are taken after the final ReLU: nonnegative
    for (const auto& tap : taps)
        for (float v : tap.activation.values()) CHECK(v >= 0.0f);
}

TEST_CASE("forward: input validation") {
    ArchSpec spec;
    spec.widths = {4, 4, 4, 4};
    BlockTappedModel model = build_model(spec, 1);
    Tape tape;
    std::mt19937 rng = make_rng(9);
    CHECK_THROWS_AS(model.forward(tape, random_tensor({1, 1, 32, 32}, rng), true), ShapeError);
    CHECK_THROWS_AS(model.forward(tape, random_tensor({3, 32, 32}, rng), true), ShapeError);
    // larger spatial extents are accepted natively (GAP head)
    CHECK_NOTHROW(model.forward(tape, random_tensor({1, 3, 64, 64}, rng, 0.0f, 1.0f), true));
}

TEST_CASE("reinit_head: extractor untouched, head redrawn deterministically") {
    ArchSpec spec;
    spec.widths = {4, 8, 8, 8};
    BlockTappedModel model = build_model(spec, 5);
    const std::uint64_t before = extractor_fingerprint(model);
    const Tensor old_head = model.head_weight.clone();

    reinit_head(model, 123);
    CHECK(extractor_fingerprint(model) == before);
    CHECK_FALSE(same_values(model.head_weight, old_head));
    for (float v : model.head_bias.values()) CHECK(v == 0.0f);

    const Tensor head1 = model.head_weight.clone();
    reinit_head(model, 123);
    CHECK(same_values(model.head_weight, head1));  // same seed, same head

    reinit_head(model, 124);
    CHECK_FALSE(same_values(model.head_weight, head1));
}

TEST_CASE("clone: deep copy with shared nothing") {
    ArchSpec spec;
    spec.name = "mini-resnet";
    spec.widths = {4, 8};
    spec.in_h = 16;
    spec.in_w = 16;
    BlockTappedModel model = build_model(spec, 11);

    // push some BN statistics through
    Tape tape;
    std::mt19937 rng = make_rng(12);
    model.forward(tape, random_tensor({4, 3, 16, 16}, rng, 0.0f, 1.0f), true);

    BlockTappedModel copy = model.clone();
    CHECK(extractor_fingerprint(copy) == extractor_fingerprint(model));
    copy.head_weight.values()[0] += 1.0f;
    CHECK_FALSE(same_values(copy.head_weight, model.head_weight));
    copy.blocks[0].conv1.weight.values()[0] += 1.0f;
    CHECK_FALSE(extractor_fingerprint(copy) == extractor_fingerprint(model));
}

TEST_CASE("state_tensors: stable order, covers params and BN stats") {
    ArchSpec spec;
    spec.widths = {4, 4, 4, 4};
    BlockTappedModel model = build_model(spec, 1);
    const auto tensors = model.state_tensors();
    // 4 blocks x (conv + gamma + beta) + head w/b + 4 blocks x 2 running stats
    CHECK(tensors.size() == 4 * 3 + 2 + 4 * 2);
    CHECK(tensors[0].first == "block1.conv1.weight");
    CHECK(tensors[12].first == "head.weight");
}
