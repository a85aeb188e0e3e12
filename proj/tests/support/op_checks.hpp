#pragma once

// Per-op and composite gradient checks shared by the unit suite and the
// acceptance suite: engine backward vs central finite differences of the
// double-precision references.

#include <algorithm>
#include <numeric>
#include <random>

#include "atlab/ops.hpp"
#include "atlab/rng.hpp"
#include "atlab/tape.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

namespace testutil {

using atlab::Shape;
using atlab::Tape;
using atlab::Tensor;

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;

    void fold(std::span<const float> analytic, const CheckedGrad& numeric) {
        max_rel_err = std::max(max_rel_err, testutil::max_rel_err(analytic, numeric));
        checked += analytic.size() - numeric.unreliable;
        skipped += numeric.unreliable;
    }
};

// values bounded away from zero, for ops with a kink at the origin
inline Tensor random_tensor_off_origin(Shape shape, std::mt19937& rng) {
    Tensor t = random_tensor(std::move(shape), rng);
    for (float& v : t.values()) {
        if (v >= 0.0f && v < 0.01f) v += 0.01f;
        if (v < 0.0f && v > -0.01f) v -= 0.01f;
    }
    return t;
}

// well-separated values (shuffled progression), for max-pool argmax stability
inline Tensor separated_tensor(Shape shape, std::mt19937& rng) {
    const auto n = atlab::shape_numel(shape);
    std::vector<float> vals(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < vals.size(); ++i)
        vals[i] = -1.0f + 0.05f * static_cast<float>(i % 64) + 0.0001f * static_cast<float>(i / 64);
    std::shuffle(vals.begin(), vals.end(), rng);
    return Tensor::from(std::move(shape), std::move(vals));
}

inline constexpr double kFdStep = 1e-3;
inline constexpr double kGradTol = 1e-4;

inline GradCheckResult check_relu(std::uint64_t seed) {
    std::mt19937 rng = atlab::make_rng(seed);
    Tensor x = random_tensor_off_origin({3, 5, 4}, rng);
    Tensor r = random_tensor(x.shape(), rng);
    x.set_requires_grad(true);

    Tape tape;
    Tensor loss = atlab::sum(tape, atlab::mul(tape, atlab::relu(tape, x), r));
    tape.backward(loss);

    const auto rd = widen(r.values());
    auto f = [&](const oracle::dvec& xv) {
        const auto out = oracle::relu(xv);
        return std::inner_product(out.begin(), out.end(), rd.begin(), 0.0);
    };
    GradCheckResult res;
    res.fold(x.grad(), numeric_grad_checked(f, widen(x.values()), kFdStep));
    return res;
}

inline GradCheckResult check_conv2d(std::uint64_t seed) {
    std::mt19937 rng = atlab::make_rng(seed);
    const int n = 2, c = 3, h = 6, w = 5, f = 4, kh = 3, kw = 3, stride = 1, pad = 1;
    Tensor x = random_tensor({n, c, h, w}, rng);
    Tensor k = random_tensor({f, c, kh, kw}, rng);
    x.set_requires_grad(true);
    k.set_requires_grad(true);

    Tape tape;
    Tensor out = atlab::conv2d(tape, x, k, stride, pad);
    Tensor r = random_tensor(out.shape(), rng);
    Tensor loss = atlab::sum(tape, atlab::mul(tape, out, r));
    tape.backward(loss);

    const auto rd = widen(r.values());
    int oh = 0, ow = 0;
    auto loss_of = [&](const oracle::dvec& xv, const oracle::dvec& kv) {
        const auto o = oracle::conv2d(xv, n, c, h, w, kv, f, kh, kw, stride, pad, oh, ow);
        return std::inner_product(o.begin(), o.end(), rd.begin(), 0.0);
    };
    const auto kd = widen(k.values());
    const auto xd = widen(x.values());
    GradCheckResult res;
    res.fold(x.grad(), numeric_grad_checked([&](const oracle::dvec& v) { return loss_of(v, kd); },
                                            xd, kFdStep));
    res.fold(k.grad(), numeric_grad_checked([&](const oracle::dvec& v) { return loss_of(xd, v); },
                                            kd, kFdStep));
    return res;
}

inline GradCheckResult check_batchnorm(std::uint64_t seed) {
    std::mt19937 rng = atlab::make_rng(seed);
    const int n = 3, c = 4, h = 4, w = 3;
    const double eps = 1e-5;
    Tensor x = random_tensor({n, c, h, w}, rng);
    Tensor gamma = random_tensor({c}, rng, 0.5f, 1.5f);
    Tensor beta = random_tensor({c}, rng, -0.5f, 0.5f);
    x.set_requires_grad(true);
    gamma.set_requires_grad(true);
    beta.set_requires_grad(true);

    Tape tape;
    atlab::BatchNormState state;
    Tensor out = atlab::batchnorm2d(tape, x, gamma, beta, state, /*train=*/true, 0.1, eps);
    Tensor r = random_tensor(out.shape(), rng);
    Tensor loss = atlab::sum(tape, atlab::mul(tape, out, r));
    tape.backward(loss);

    const auto rd = widen(r.values());
    auto loss_of = [&](const oracle::dvec& xv, const oracle::dvec& gv, const oracle::dvec& bv) {
        const auto o = oracle::batchnorm_train(xv, n, c, h, w, gv, bv, eps);
        return std::inner_product(o.begin(), o.end(), rd.begin(), 0.0);
    };
    const auto xd = widen(x.values());
    const auto gd = widen(gamma.values());
    const auto bd = widen(beta.values());
    GradCheckResult res;
    res.fold(x.grad(), numeric_grad_checked(
                           [&](const oracle::dvec& v) { return loss_of(v, gd, bd); }, xd, kFdStep));
    res.fold(gamma.grad(), numeric_grad_checked(
                               [&](const oracle::dvec& v) { return loss_of(xd, v, bd); }, gd, kFdStep));
    res.fold(beta.grad(), numeric_grad_checked(
                              [&](const oracle::dvec& v) { return loss_of(xd, gd, v); }, bd, kFdStep));
    return res;
}

inline GradCheckResult check_pool(std::uint64_t seed, bool max_kind) {
    std::mt19937 rng = atlab::make_rng(seed);
    const int n = 2, c = 3, h = 6, w = 6, window = 2, stride = 2, pad = 0;
    Tensor x = max_kind ? separated_tensor({n, c, h, w}, rng) : random_tensor({n, c, h, w}, rng);
    x.set_requires_grad(true);

    Tape tape;
    Tensor out = atlab::pool2d(tape, x, max_kind ? atlab::PoolKind::max : atlab::PoolKind::avg,
                               window, stride, pad);
    Tensor r = random_tensor(out.shape(), rng);
    Tensor loss = atlab::sum(tape, atlab::mul(tape, out, r));
    tape.backward(loss);

    const auto rd = widen(r.values());
    int oh = 0, ow = 0;
    auto f = [&](const oracle::dvec& xv) {
        const auto o = oracle::pool2d(xv, n, c, h, w, max_kind, window, stride, pad, oh, ow);
        return std::inner_product(o.begin(), o.end(), rd.begin(), 0.0);
    };
    GradCheckResult res;
    res.fold(x.grad(), numeric_grad_checked(f, widen(x.values()), kFdStep));
    return res;
}

inline GradCheckResult check_linear(std::uint64_t seed) {
    std::mt19937 rng = atlab::make_rng(seed);
    const int n = 4, d = 7, k = 3;
    Tensor x = random_tensor({n, d}, rng);
    Tensor w = random_tensor({k, d}, rng);
    Tensor b = random_tensor({k}, rng);
    x.set_requires_grad(true);
    w.set_requires_grad(true);
    b.set_requires_grad(true);

    Tape tape;
    Tensor out = atlab::linear(tape, x, w, b);
    Tensor r = random_tensor(out.shape(), rng);
    Tensor loss = atlab::sum(tape, atlab::mul(tape, out, r));
    tape.backward(loss);

    const auto rd = widen(r.values());
    auto loss_of = [&](const oracle::dvec& xv, const oracle::dvec& wv, const oracle::dvec& bv) {
        const auto o = oracle::linear(xv, n, d, wv, k, bv);
        return std::inner_product(o.begin(), o.end(), rd.begin(), 0.0);
    };
    const auto xd = widen(x.values());
    const auto wd = widen(w.values());
    const auto bd = widen(b.values());
    GradCheckResult res;
    res.fold(x.grad(), numeric_grad_checked(
                           [&](const oracle::dvec& v) { return loss_of(v, wd, bd); }, xd, kFdStep));
    res.fold(w.grad(), numeric_grad_checked(
                           [&](const oracle::dvec& v) { return loss_of(xd, v, bd); }, wd, kFdStep));
    res.fold(b.grad(), numeric_grad_checked(
                           [&](const oracle::dvec& v) { return loss_of(xd, wd, v); }, bd, kFdStep));
    return res;
}

inline GradCheckResult check_cross_entropy(std::uint64_t seed) {
    std::mt19937 rng = atlab::make_rng(seed);
    const int n = 5, k = 4;
    Tensor logits = random_tensor({n, k}, rng, -2.0f, 2.0f);
    logits.set_requires_grad(true);
    std::vector<int> labels(n);
    std::uniform_int_distribution<int> ld(0, k - 1);
    for (auto& l : labels) l = ld(rng);

    Tape tape;
    Tensor loss = atlab::cross_entropy(tape, logits, labels);
    tape.backward(loss);

    auto f = [&](const oracle::dvec& lv) { return oracle::cross_entropy(lv, n, k, labels); };
    GradCheckResult res;
    res.fold(logits.grad(), numeric_grad_checked(f, widen(logits.values()), kFdStep));
    return res;
}

inline GradCheckResult check_global_avg_pool(std::uint64_t seed) {
    std::mt19937 rng = atlab::make_rng(seed);
    const int n = 2, c = 4, h = 3, w = 5;
    Tensor x = random_tensor({n, c, h, w}, rng);
    x.set_requires_grad(true);
    Tape tape;
    Tensor out = atlab::global_avg_pool(tape, x);
    Tensor r = random_tensor(out.shape(), rng);
    Tensor loss = atlab::sum(tape, atlab::mul(tape, out, r));
    tape.backward(loss);

    const auto rd = widen(r.values());
    auto f = [&](const oracle::dvec& xv) {
        const auto o = oracle::global_avg_pool(xv, n, c, h, w);
        return std::inner_product(o.begin(), o.end(), rd.begin(), 0.0);
    };
    GradCheckResult res;
    res.fold(x.grad(), numeric_grad_checked(f, widen(x.values()), kFdStep));
    return res;
}

// conv -> bn -> relu -> maxpool -> flatten -> linear -> cross-entropy, all
// parameter and input gradients against FD of the double reference.
inline GradCheckResult check_composite(std::uint64_t seed) {
    std::mt19937 rng = atlab::make_rng(seed);
    const int n = 2, c = 3, h = 8, w = 8, f = 4, classes = 5;
    const double eps = 1e-5;
    Tensor x = random_tensor({n, c, h, w}, rng);
    Tensor k = random_tensor({f, c, 3, 3}, rng, -0.5f, 0.5f);
    Tensor gamma = random_tensor({f}, rng, 0.5f, 1.5f);
    Tensor beta = random_tensor({f}, rng, -0.3f, 0.3f);
    const int flat = f * (h / 2) * (w / 2);
    Tensor wl = random_tensor({classes, flat}, rng, -0.3f, 0.3f);
    Tensor b = random_tensor({classes}, rng, -0.2f, 0.2f);
    std::vector<int> labels(n);
    std::uniform_int_distribution<int> ld(0, classes - 1);
    for (auto& l : labels) l = ld(rng);

    for (Tensor* t : {&x, &k, &gamma, &beta, &wl, &b}) t->set_requires_grad(true);

    Tape tape;
    atlab::BatchNormState state;
    Tensor y = atlab::conv2d(tape, x, k, 1, 1);
    y = atlab::batchnorm2d(tape, y, gamma, beta, state, true, 0.1, eps);
    y = atlab::relu(tape, y);
    y = atlab::pool2d(tape, y, atlab::PoolKind::max, 2, 2);
    y = atlab::reshape(tape, y, {n, flat});
    y = atlab::linear(tape, y, wl, b);
    Tensor loss = atlab::cross_entropy(tape, y, labels);
    tape.backward(loss);

    auto ref = [&](const oracle::dvec& xv, const oracle::dvec& kv, const oracle::dvec& gv,
                   const oracle::dvec& bv, const oracle::dvec& wv, const oracle::dvec& blv) {
        int oh = 0, ow = 0;
        auto o = oracle::conv2d(xv, n, c, h, w, kv, f, 3, 3, 1, 1, oh, ow);
        o = oracle::batchnorm_train(o, n, f, oh, ow, gv, bv, eps);
        o = oracle::relu(o);
        int ph = 0, pw = 0;
        o = oracle::pool2d(o, n, f, oh, ow, true, 2, 2, 0, ph, pw);
        o = oracle::linear(o, n, flat, wv, classes, blv);
        return oracle::cross_entropy(o, n, classes, labels);
    };

    const auto xd = widen(x.values());
    const auto kd = widen(k.values());
    const auto gd = widen(gamma.values());
    const auto bd = widen(beta.values());
    const auto wd = widen(wl.values());
    const auto bld = widen(b.values());

    GradCheckResult res;
    res.fold(x.grad(), numeric_grad_checked(
                           [&](const oracle::dvec& v) { return ref(v, kd, gd, bd, wd, bld); }, xd,
                           kFdStep));
    res.fold(k.grad(), numeric_grad_checked(
                           [&](const oracle::dvec& v) { return ref(xd, v, gd, bd, wd, bld); }, kd,
                           kFdStep));
    res.fold(gamma.grad(), numeric_grad_checked(
                               [&](const oracle::dvec& v) { return ref(xd, kd, v, bd, wd, bld); },
                               gd, kFdStep));
    res.fold(beta.grad(), numeric_grad_checked(
                              [&](const oracle::dvec& v) { return ref(xd, kd, gd, v, wd, bld); },
                              bd, kFdStep));
    res.fold(wl.grad(), numeric_grad_checked(
                            [&](const oracle::dvec& v) { return ref(xd, kd, gd, bd, v, bld); }, wd,
                            kFdStep));
    res.fold(b.grad(), numeric_grad_checked(
                           [&](const oracle::dvec& v) { return ref(xd, kd, gd, bd, wd, v); }, bld,
                           kFdStep));
    return res;
}

}  // namespace testutil
