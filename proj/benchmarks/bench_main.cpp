#include <benchmark/benchmark.h>

#include <random>

#include "atlab/activity.hpp"
#include "atlab/attack.hpp"
#include "atlab/model.hpp"
#include "atlab/ops.hpp"
#include "atlab/redundancy.hpp"
#include "atlab/rng.hpp"
#include "atlab/tape.hpp"
#include "atlab/trainer.hpp"

using namespace atlab;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
    std::mt19937 rng = make_rng(seed);
    std::uniform_real_distribution<float> dist(lo, hi);
    Tensor t(std::move(shape));
    for (float& v : t.values()) v = dist(rng);
    return t;
}

void BM_Conv2dForward(benchmark::State& state) {
    const int width = static_cast<int>(state.range(0));
    Tensor x = random_tensor({32, width, 16, 16}, 1, -1.0f, 1.0f);
    Tensor k = random_tensor({width, width, 3, 3}, 2, -0.5f, 0.5f);
    for (auto _ : state) {
        Tape tape;
        Tensor out = conv2d(tape, x, k, 1, 1);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(16)->Arg(32);

void BM_TrainStep(benchmark::State& state) {
    ArchSpec spec;
    spec.widths = {8, 16, 16, 32};
    BlockTappedModel model = build_model(spec, 3);
    Tensor x = random_tensor({64, 3, 32, 32}, 4);
    std::vector<int> labels(64);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
    for (auto _ : state) {
        Tape tape;
        Tensor logits = model.forward(tape, x, true);
        Tensor loss = cross_entropy(tape, logits, labels);
        tape.backward(loss);
        sgd_step(model.params, 0.01, 0.9, 5e-4);
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_TrainStep);

void BM_PgdStep(benchmark::State& state) {
    ArchSpec spec;
    spec.widths = {8, 16, 16, 32};
    BlockTappedModel model = build_model(spec, 5);
    model.set_bn_stats_ready(true);
    Tensor x = random_tensor({64, 3, 32, 32}, 6);
    std::vector<int> labels(64);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
    AttackConfig cfg;
    cfg.norm = Norm::l2;
    cfg.epsilon = 1.0;
    cfg.alpha = 1.0;
    cfg.steps = 1;
    cfg.random_init = false;
    for (auto _ : state) {
        Tensor adv = pgd_attack(model, x, labels, cfg, 7);
        benchmark::DoNotOptimize(adv.data());
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_PgdStep);

void BM_CosineCluster(benchmark::State& state) {
    const int channels = static_cast<int>(state.range(0));
    const int spatial = 64;
    std::mt19937 rng = make_rng(8);
    std::uniform_real_distribution<float> unit(0.01f, 1.0f);
    std::vector<float> rows(static_cast<std::size_t>(channels) * spatial);
    for (float& v : rows) v = unit(rng);
    for (auto _ : state) {
        const SimilarityMatrix s = cosine_matrix({channels, spatial, rows.data()});
        const ClusterSet clusters = threshold_cluster(s, 0.95);
        benchmark::DoNotOptimize(redundancy_stats(clusters, s).clusters);
    }
}
BENCHMARK(BM_CosineCluster)->Arg(16)->Arg(64)->Arg(128);

void BM_ActivityMask(benchmark::State& state) {
    std::mt19937 rng = make_rng(9);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    std::vector<float> maps(64 * 256);
    for (float& v : maps) v = unit(rng);
    const ActivityThresholds th;
    for (auto _ : state) {
        auto mask = densely_active_mask({64, 256, maps.data()}, th);
        benchmark::DoNotOptimize(mask);
    }
}
BENCHMARK(BM_ActivityMask);

}  // namespace

BENCHMARK_MAIN();
