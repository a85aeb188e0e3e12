#include "atlab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>

#include "atlab/errors.hpp"
#include "atlab/parallel.hpp"
#include "gemm.hpp"

namespace atlab {

namespace {

void check_rank4(const Tensor& x, const char* what) {
    if (x.rank() != 4) throw ShapeError(std::string(what) + ": expected a 4-D tensor, got " + shape_str(x.shape()));
}

std::shared_ptr<std::vector<float>> make_buffer(std::int64_t n) {
    return std::make_shared<std::vector<float>>(static_cast<std::size_t>(n), 0.0f);
}

// Fills the [C*kh*kw x N*OH*OW] patch matrix for one image (columns
// n*OH*OW ... (n+1)*OH*OW). Out-of-bounds (padded) taps become zeros.
void im2col_image(const float* x, int c, int h, int w, int kh, int kw, int stride, int padding,
                  int oh, int ow, float* col, std::int64_t col_ld, std::int64_t col_offset) {
    for (int ci = 0; ci < c; ++ci) {
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                const std::int64_t row = (static_cast<std::int64_t>(ci) * kh + ki) * kw + kj;
                float* dst = col + row * col_ld + col_offset;
                const float* src = x + static_cast<std::int64_t>(ci) * h * w;
                for (int i = 0; i < oh; ++i) {
                    const int yi = i * stride - padding + ki;
                    if (yi < 0 || yi >= h) {
                        for (int j = 0; j < ow; ++j) dst[i * ow + j] = 0.0f;
                        continue;
                    }
                    for (int j = 0; j < ow; ++j) {
                        const int xj = j * stride - padding + kj;
                        dst[i * ow + j] = (xj >= 0 && xj < w) ? src[yi * w + xj] : 0.0f;
                    }
                }
            }
        }
    }
}

// Scatter-adds one image's patch-matrix gradient back onto the input grid.
void col2im_image(const float* dcol, int c, int h, int w, int kh, int kw, int stride, int padding,
                  int oh, int ow, float* dx) {
    for (int ci = 0; ci < c; ++ci) {
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                const std::int64_t row = (static_cast<std::int64_t>(ci) * kh + ki) * kw + kj;
                const float* src = dcol + row * (static_cast<std::int64_t>(oh) * ow);
                float* dst = dx + static_cast<std::int64_t>(ci) * h * w;
                for (int i = 0; i < oh; ++i) {
                    const int yi = i * stride - padding + ki;
                    if (yi < 0 || yi >= h) continue;
                    for (int j = 0; j < ow; ++j) {
                        const int xj = j * stride - padding + kj;
                        if (xj >= 0 && xj < w) dst[yi * w + xj] += src[i * ow + j];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor relu(Tape& tape, const Tensor& x) {
    Tensor out(x.shape());
    const auto xv = x.values();
    auto ov = out.values();
    parallel_for(x.numel(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) ov[i] = xv[i] > 0.0f ? xv[i] : 0.0f;
    });
    if (tape.needs_grad(x)) {
        Tensor xc = x, outc = out;
        tape.record("relu", {x}, out, [xc, outc]() mutable {
            const auto go = outc.grad();
            const auto xv2 = xc.values();
            auto gx = xc.grad();
            for (std::int64_t i = 0; i < xc.numel(); ++i)
                if (xv2[i] > 0.0f) gx[i] += go[i];
        });
    }
    return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out(a.shape());
    const auto av = a.values();
    const auto bv = b.values();
    auto ov = out.values();
    parallel_for(a.numel(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) ov[i] = av[i] + bv[i];
    });
    if (tape.needs_grad(a) || tape.needs_grad(b)) {
        const bool na = tape.needs_grad(a);
        const bool nb = tape.needs_grad(b);
        Tensor ac = a, bc = b, outc = out;
        tape.record("add", {a, b}, out, [ac, bc, outc, na, nb]() mutable {
            const auto go = outc.grad();
            if (na) {
                auto ga = ac.grad();
                for (std::int64_t i = 0; i < ac.numel(); ++i) ga[i] += go[i];
            }
            if (nb) {
                auto gb = bc.grad();
                for (std::int64_t i = 0; i < bc.numel(); ++i) gb[i] += go[i];
            }
        });
    }
    return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a.shape());
    const auto av = a.values();
    const auto bv = b.values();
    auto ov = out.values();
    for (std::int64_t i = 0; i < a.numel(); ++i) ov[i] = av[i] * bv[i];
    if (tape.needs_grad(a) || tape.needs_grad(b)) {
        const bool na = tape.needs_grad(a);
        const bool nb = tape.needs_grad(b);
        Tensor ac = a, bc = b, outc = out;
        tape.record("mul", {a, b}, out, [ac, bc, outc, na, nb]() mutable {
            const auto go = outc.grad();
            if (na) {
                auto ga = ac.grad();
                const auto bv2 = bc.values();
                for (std::int64_t i = 0; i < ac.numel(); ++i) ga[i] += go[i] * bv2[i];
            }
            if (nb) {
                auto gb = bc.grad();
                const auto av2 = ac.values();
                for (std::int64_t i = 0; i < bc.numel(); ++i) gb[i] += go[i] * av2[i];
            }
        });
    }
    return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(new_shape));
    Tensor out = Tensor::from(std::move(new_shape),
                              std::vector<float>(x.values().begin(), x.values().end()));
    if (tape.needs_grad(x)) {
        Tensor xc = x, outc = out;
        tape.record("reshape", {x}, out, [xc, outc]() mutable {
            const auto go = outc.grad();
            auto gx = xc.grad();
            for (std::int64_t i = 0; i < xc.numel(); ++i) gx[i] += go[i];
        });
    }
    return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
    double acc = 0.0;
    for (float v : x.values()) acc += v;
    Tensor out = Tensor::scalar(static_cast<float>(acc));
    if (tape.needs_grad(x)) {
        Tensor xc = x, outc = out;
        tape.record("sum", {x}, out, [xc, outc]() mutable {
            const float go = outc.grad()[0];
            auto gx = xc.grad();
            for (std::int64_t i = 0; i < xc.numel(); ++i) gx[i] += go;
        });
    }
    return out;
}

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& kernel, int stride, int padding) {
    check_rank4(x, "conv2d input");
    check_rank4(kernel, "conv2d kernel");
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    if (padding < 0) throw ShapeError("conv2d: padding must be >= 0");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int f = kernel.dim(0), kc = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    if (kc != c)
        throw ShapeError("conv2d: input has " + std::to_string(c) + " channels but kernel expects " +
                         std::to_string(kc));
    if (kh > h + 2 * padding || kw > w + 2 * padding)
        throw ShapeError("conv2d: kernel exceeds padded input extent");
    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (w + 2 * padding - kw) / stride + 1;

    const std::int64_t ckk = static_cast<std::int64_t>(c) * kh * kw;
    const std::int64_t out_hw = static_cast<std::int64_t>(oh) * ow;
    const std::int64_t cols = static_cast<std::int64_t>(n) * out_hw;

    auto col = make_buffer(ckk * cols);
    Tensor out(Shape{n, f, oh, ow});
    const float* xp = x.data();
    const float* kp = kernel.data();
    float* op = out.data();
    float* colp = col->data();

    parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t img = lo; img < hi; ++img) {
            im2col_image(xp + img * c * h * w, c, h, w, kh, kw, stride, padding, oh, ow, colp, cols,
                         img * out_hw);
            detail::gemm_nn(f, out_hw, ckk, kp, ckk, colp + img * out_hw, cols,
                            op + img * f * out_hw, out_hw, /*parallel=*/false);
        }
    });

    const bool need_x = tape.needs_grad(x);
    const bool need_k = tape.needs_grad(kernel);
    if (need_x || need_k) {
        Tensor xc = x, kc2 = kernel, outc = out;
        tape.record("conv2d", {x, kernel}, out, [xc, kc2, outc, col, stride, padding, n, c, h, w, f,
                                                 kh, kw, oh, ow, ckk, out_hw, cols, need_x,
                                                 need_k]() mutable {
            const float* go = outc.grad().data();
            if (need_k) {
                // dK = dYt[F x N*OH*OW] * col^T, reduction in ascending column order.
                std::vector<float> dyt(static_cast<std::size_t>(f) * cols);
                parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
                    for (std::int64_t img = lo; img < hi; ++img)
                        for (int fi = 0; fi < f; ++fi)
                            std::copy_n(go + (img * f + fi) * out_hw, out_hw,
                                        dyt.data() + fi * cols + img * out_hw);
                });
                auto gk = kc2.grad();
                detail::gemm_nt(f, ckk, cols, dyt.data(), cols, col->data(), cols, gk.data(), ckk);
            }
            if (need_x) {
                auto gx = xc.grad();
                const float* kp2 = kc2.data();
                parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
                    std::vector<float> dcol(static_cast<std::size_t>(ckk) * out_hw);
                    for (std::int64_t img = lo; img < hi; ++img) {
                        std::fill(dcol.begin(), dcol.end(), 0.0f);
                        detail::gemm_tn(ckk, out_hw, f, kp2, ckk, go + img * f * out_hw, out_hw,
                                        dcol.data(), out_hw, /*parallel=*/false);
                        col2im_image(dcol.data(), c, h, w, kh, kw, stride, padding, oh, ow,
                                     gx.data() + img * c * h * w);
                    }
                });
            }
        });
    }
    return out;
}

Tensor pool2d(Tape& tape, const Tensor& x, PoolKind kind, int window, int stride, int padding) {
    check_rank4(x, "pool2d input");
    if (window < 1 || stride < 1 || padding < 0) throw ShapeError("pool2d: bad window/stride/padding");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (window > h + 2 * padding || window > w + 2 * padding)
        throw ShapeError("pool2d: window exceeds padded input extent");
    const int oh = (h + 2 * padding - window) / stride + 1;
    const int ow = (w + 2 * padding - window) / stride + 1;
    Tensor out(Shape{n, c, oh, ow});

    const float* xp = x.data();
    float* op = out.data();
    const std::int64_t planes = static_cast<std::int64_t>(n) * c;
    const bool need = tape.needs_grad(x);

    if (kind == PoolKind::max) {
        // argmax recorded as flat input offset, first occurrence on ties
        auto argmax = std::make_shared<std::vector<std::int64_t>>(out.numel(), -1);
        parallel_for(planes, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t pl = lo; pl < hi; ++pl) {
                const float* src = xp + pl * h * w;
                float* dst = op + pl * static_cast<std::int64_t>(oh) * ow;
                std::int64_t* am = argmax->data() + pl * static_cast<std::int64_t>(oh) * ow;
                for (int i = 0; i < oh; ++i) {
                    for (int j = 0; j < ow; ++j) {
                        float best = -std::numeric_limits<float>::infinity();
                        std::int64_t best_at = -1;
                        for (int ki = 0; ki < window; ++ki) {
                            const int yi = i * stride - padding + ki;
                            if (yi < 0 || yi >= h) continue;
                            for (int kj = 0; kj < window; ++kj) {
                                const int xj = j * stride - padding + kj;
                                if (xj < 0 || xj >= w) continue;
                                const float v = src[yi * w + xj];
                                if (v > best) {
                                    best = v;
                                    best_at = pl * h * w + yi * w + xj;
                                }
                            }
                        }
                        dst[i * ow + j] = best;
                        am[i * ow + j] = best_at;
                    }
                }
            }
        });
        if (need) {
            Tensor xc = x, outc = out;
            tape.record("maxpool2d", {x}, out, [xc, outc, argmax]() mutable {
                const auto go = outc.grad();
                auto gx = xc.grad();
                for (std::int64_t i = 0; i < outc.numel(); ++i)
                    if ((*argmax)[i] >= 0) gx[(*argmax)[i]] += go[i];
            });
        }
    } else {
        const float inv_area = 1.0f / (static_cast<float>(window) * window);
        parallel_for(planes, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t pl = lo; pl < hi; ++pl) {
                const float* src = xp + pl * h * w;
                float* dst = op + pl * static_cast<std::int64_t>(oh) * ow;
                for (int i = 0; i < oh; ++i) {
                    for (int j = 0; j < ow; ++j) {
                        float acc = 0.0f;
                        for (int ki = 0; ki < window; ++ki) {
                            const int yi = i * stride - padding + ki;
                            if (yi < 0 || yi >= h) continue;
                            for (int kj = 0; kj < window; ++kj) {
                                const int xj = j * stride - padding + kj;
                                if (xj >= 0 && xj < w) acc += src[yi * w + xj];
                            }
                        }
                        dst[i * ow + j] = acc * inv_area;
                    }
                }
            }
        });
        if (need) {
            Tensor xc = x, outc = out;
            tape.record("avgpool2d", {x}, out,
                        [xc, outc, window, stride, padding, n, c, h, w, oh, ow, inv_area]() mutable {
                            const auto go = outc.grad();
                            auto gx = xc.grad();
                            const std::int64_t pl_count = static_cast<std::int64_t>(n) * c;
                            for (std::int64_t pl = 0; pl < pl_count; ++pl) {
                                const float* gop = go.data() + pl * static_cast<std::int64_t>(oh) * ow;
                                float* gxp = gx.data() + pl * h * w;
                                for (int i = 0; i < oh; ++i)
                                    for (int j = 0; j < ow; ++j) {
                                        const float g = gop[i * ow + j] * inv_area;
                                        for (int ki = 0; ki < window; ++ki) {
                                            const int yi = i * stride - padding + ki;
                                            if (yi < 0 || yi >= h) continue;
                                            for (int kj = 0; kj < window; ++kj) {
                                                const int xj = j * stride - padding + kj;
                                                if (xj >= 0 && xj < w) gxp[yi * w + xj] += g;
                                            }
                                        }
                                    }
                            }
                        });
        }
    }
    return out;
}

Tensor global_avg_pool(Tape& tape, const Tensor& x) {
    check_rank4(x, "global_avg_pool input");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    Tensor out(Shape{n, c});
    const float* xp = x.data();
    float* op = out.data();
    parallel_for(static_cast<std::int64_t>(n) * c, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t pl = lo; pl < hi; ++pl) {
            double acc = 0.0;
            const float* src = xp + pl * hw;
            for (std::int64_t i = 0; i < hw; ++i) acc += src[i];
            op[pl] = static_cast<float>(acc / static_cast<double>(hw));
        }
    });
    if (tape.needs_grad(x)) {
        Tensor xc = x, outc = out;
        tape.record("global_avg_pool", {x}, out, [xc, outc, hw]() mutable {
            const auto go = outc.grad();
            auto gx = xc.grad();
            const float inv = 1.0f / static_cast<float>(hw);
            for (std::int64_t pl = 0; pl < outc.numel(); ++pl) {
                const float g = go[pl] * inv;
                float* dst = gx.data() + pl * hw;
                for (std::int64_t i = 0; i < hw; ++i) dst[i] += g;
            }
        });
    }
    return out;
}

Tensor batchnorm2d(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, bool train, double momentum, double eps) {
    check_rank4(x, "batchnorm2d input");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (gamma.numel() != c || beta.numel() != c)
        throw ShapeError("batchnorm2d: gamma/beta channel count does not match input (" +
                         std::to_string(c) + " channels)");
    if (!state.running_mean.defined()) {
        state.running_mean = Tensor(Shape{c});
        state.running_var = Tensor(Shape{c}, 1.0f);
    }
    if (!train && !state.ready)
        throw ConfigError("batchnorm2d: eval mode before any running statistics exist");

    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    const std::int64_t per_channel = static_cast<std::int64_t>(n) * hw;
    Tensor out(x.shape());
    auto xhat = make_buffer(x.numel());
    std::vector<float> invstd(c), mean_used(c);

    if (train) {
        float* rm = state.running_mean.data();
        float* rv = state.running_var.data();
        const float* xp = x.data();
        for (int ci = 0; ci < c; ++ci) {
            double s = 0.0;
            for (int img = 0; img < n; ++img) {
                const float* src = xp + (static_cast<std::int64_t>(img) * c + ci) * hw;
                for (std::int64_t i = 0; i < hw; ++i) s += src[i];
            }
            const double mu = s / static_cast<double>(per_channel);
            double sq = 0.0;
            for (int img = 0; img < n; ++img) {
                const float* src = xp + (static_cast<std::int64_t>(img) * c + ci) * hw;
                for (std::int64_t i = 0; i < hw; ++i) {
                    const double d = src[i] - mu;
                    sq += d * d;
                }
            }
            const double var = sq / static_cast<double>(per_channel);
            mean_used[ci] = static_cast<float>(mu);
            invstd[ci] = static_cast<float>(1.0 / std::sqrt(var + eps));
            const double var_unbiased =
                per_channel > 1 ? var * static_cast<double>(per_channel) / (per_channel - 1) : var;
            rm[ci] = static_cast<float>((1.0 - momentum) * rm[ci] + momentum * mu);
            rv[ci] = static_cast<float>((1.0 - momentum) * rv[ci] + momentum * var_unbiased);
        }
        state.ready = true;
    } else {
        const float* rm = state.running_mean.data();
        const float* rv = state.running_var.data();
        for (int ci = 0; ci < c; ++ci) {
            mean_used[ci] = rm[ci];
            invstd[ci] = static_cast<float>(1.0 / std::sqrt(static_cast<double>(rv[ci]) + eps));
        }
    }

    const float* xp = x.data();
    const float* gp = gamma.data();
    const float* bp = beta.data();
    float* op = out.data();
    float* xh = xhat->data();
    parallel_for(static_cast<std::int64_t>(n) * c, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t pl = lo; pl < hi; ++pl) {
            const int ci = static_cast<int>(pl % c);
            const float mu = mean_used[ci], is = invstd[ci], g = gp[ci], b = bp[ci];
            const float* src = xp + pl * hw;
            float* xhd = xh + pl * hw;
            float* dst = op + pl * hw;
            for (std::int64_t i = 0; i < hw; ++i) {
                const float xn = (src[i] - mu) * is;
                xhd[i] = xn;
                dst[i] = g * xn + b;
            }
        }
    });

    const bool need_x = tape.needs_grad(x);
    const bool need_g = tape.needs_grad(gamma);
    const bool need_b = tape.needs_grad(beta);
    if (need_x || need_g || need_b) {
        Tensor xc = x, gc = gamma, bc = beta, outc = out;
        auto invstd_saved = std::make_shared<std::vector<float>>(std::move(invstd));
        tape.record("batchnorm2d", {x, gamma, beta}, out,
                    [xc, gc, bc, outc, xhat, invstd_saved, n, c, hw, per_channel, train, need_x,
                     need_g, need_b]() mutable {
                        const auto go = outc.grad();
                        const float* xh2 = xhat->data();
                        for (int ci = 0; ci < c; ++ci) {
                            double sum_go = 0.0, sum_go_xhat = 0.0;
                            for (int img = 0; img < n; ++img) {
                                const std::int64_t base = (static_cast<std::int64_t>(img) * c + ci) * hw;
                                for (std::int64_t i = 0; i < hw; ++i) {
                                    sum_go += go[base + i];
                                    sum_go_xhat += static_cast<double>(go[base + i]) * xh2[base + i];
                                }
                            }
                            if (need_g) gc.grad()[ci] += static_cast<float>(sum_go_xhat);
                            if (need_b) bc.grad()[ci] += static_cast<float>(sum_go);
                            if (need_x) {
                                auto gx = xc.grad();
                                const float g = gc.values()[ci];
                                const float is = (*invstd_saved)[ci];
                                if (train) {
                                    const float mean_go = static_cast<float>(sum_go / per_channel);
                                    const float mean_go_xhat =
                                        static_cast<float>(sum_go_xhat / per_channel);
                                    for (int img = 0; img < n; ++img) {
                                        const std::int64_t base =
                                            (static_cast<std::int64_t>(img) * c + ci) * hw;
                                        for (std::int64_t i = 0; i < hw; ++i)
                                            gx[base + i] += g * is *
                                                            (go[base + i] - mean_go -
                                                             xh2[base + i] * mean_go_xhat);
                                    }
                                } else {
                                    for (int img = 0; img < n; ++img) {
                                        const std::int64_t base =
                                            (static_cast<std::int64_t>(img) * c + ci) * hw;
                                        for (std::int64_t i = 0; i < hw; ++i)
                                            gx[base + i] += g * is * go[base + i];
                                    }
                                }
                            }
                        }
                    });
    }
    return out;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.rank() != 2 || weight.rank() != 2 || bias.rank() != 1)
        throw ShapeError("linear: expected x[N,D], weight[K,D], bias[K]");
    const int n = x.dim(0), d = x.dim(1);
    const int k = weight.dim(0), wd = weight.dim(1);
    if (wd != d || bias.dim(0) != k)
        throw ShapeError("linear: dimension mismatch x" + shape_str(x.shape()) + " weight" +
                         shape_str(weight.shape()) + " bias" + shape_str(bias.shape()));
    Tensor out(Shape{n, k});
    float* op = out.data();
    const float* bp = bias.data();
    for (int i = 0; i < n; ++i) std::copy_n(bp, k, op + static_cast<std::int64_t>(i) * k);
    detail::gemm_nt(n, k, d, x.data(), d, weight.data(), d, op, k);

    const bool need_x = tape.needs_grad(x);
    const bool need_w = tape.needs_grad(weight);
    const bool need_b = tape.needs_grad(bias);
    if (need_x || need_w || need_b) {
        Tensor xc = x, wc = weight, bc = bias, outc = out;
        tape.record("linear", {x, weight, bias}, out,
                    [xc, wc, bc, outc, n, d, k, need_x, need_w, need_b]() mutable {
                        const auto go = outc.grad();
                        if (need_x)
                            detail::gemm_nn(n, d, k, go.data(), k, wc.data(), d, xc.grad().data(), d);
                        if (need_w)
                            detail::gemm_tn(k, d, n, go.data(), k, xc.data(), d, wc.grad().data(), d);
                        if (need_b) {
                            auto gb = bc.grad();
                            for (int i = 0; i < n; ++i)
                                for (int j = 0; j < k; ++j) gb[j] += go[static_cast<std::int64_t>(i) * k + j];
                        }
                    });
    }
    return out;
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) throw ShapeError("cross_entropy: expected logits[N,K]");
    const int n = logits.dim(0), k = logits.dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw ShapeError("cross_entropy: got " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
    for (int label : labels)
        if (label < 0 || label >= k)
            throw DataError("cross_entropy: label " + std::to_string(label) + " out of range [0," +
                            std::to_string(k) + ")");

    auto softmax = make_buffer(logits.numel());
    const float* lp = logits.data();
    float* sp = softmax->data();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const float* row = lp + static_cast<std::int64_t>(i) * k;
        float mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
        const double lse = mx + std::log(denom);
        total += lse - row[labels[i]];
        float* srow = sp + static_cast<std::int64_t>(i) * k;
        for (int j = 0; j < k; ++j)
            srow[j] = static_cast<float>(std::exp(static_cast<double>(row[j]) - lse));
    }
    Tensor out = Tensor::scalar(static_cast<float>(total / n));
    out.ensure_finite("cross_entropy");

    if (tape.needs_grad(logits)) {
        Tensor lc = logits, outc = out;
        auto labels_saved = std::make_shared<std::vector<int>>(labels);
        tape.record("cross_entropy", {logits}, out, [lc, outc, softmax, labels_saved, n, k]() mutable {
            const float go = outc.grad()[0];
            auto gl = lc.grad();
            const float* sp2 = softmax->data();
            const float inv_n = 1.0f / static_cast<float>(n);
            for (int i = 0; i < n; ++i) {
                const std::int64_t base = static_cast<std::int64_t>(i) * k;
                for (int j = 0; j < k; ++j) {
                    const float onehot = (j == (*labels_saved)[i]) ? 1.0f : 0.0f;
                    gl[base + j] += go * (sp2[base + j] - onehot) * inv_n;
                }
            }
        });
    }
    return out;
}

std::vector<double> per_sample_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) throw ShapeError("per_sample_cross_entropy: expected logits[N,K]");
    const int n = logits.dim(0), k = logits.dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw ShapeError("per_sample_cross_entropy: label count mismatch");
    std::vector<double> out(n);
    const float* lp = logits.data();
    for (int i = 0; i < n; ++i) {
        const int label = labels[i];
        if (label < 0 || label >= k) throw DataError("per_sample_cross_entropy: label out of range");
        const float* row = lp + static_cast<std::int64_t>(i) * k;
        float mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
        out[i] = mx + std::log(denom) - row[label];
    }
    return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
    if (logits.rank() != 2) throw ShapeError("argmax_rows: expected [N,K]");
    const int n = logits.dim(0), k = logits.dim(1);
    std::vector<int> out(n);
    const float* lp = logits.data();
    for (int i = 0; i < n; ++i) {
        const float* row = lp + static_cast<std::int64_t>(i) * k;
        int best = 0;
        for (int j = 1; j < k; ++j)
            if (row[j] > row[best]) best = j;
        out[i] = best;
    }
    return out;
}

}  // namespace atlab
