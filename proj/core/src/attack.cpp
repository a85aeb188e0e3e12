#include "atlab/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "atlab/errors.hpp"
#include "atlab/ops.hpp"
#include "atlab/rng.hpp"

namespace atlab {

namespace {

void steepest_dir_span(float* g, std::int64_t n, Norm p) {
    if (p == Norm::linf) {
        for (std::int64_t i = 0; i < n; ++i) g[i] = (g[i] > 0.0f) ? 1.0f : (g[i] < 0.0f ? -1.0f : 0.0f);
        return;
    }
    double sq = 0.0;
    for (std::int64_t i = 0; i < n; ++i) sq += static_cast<double>(g[i]) * g[i];
    if (sq == 0.0) return;  // zero gradient stalls the attack rather than erroring
    const float inv = static_cast<float>(1.0 / std::sqrt(sq));
    for (std::int64_t i = 0; i < n; ++i) g[i] *= inv;
}

void project_span(float* adv, const float* ref, std::int64_t n, double eps, Norm p,
                  const ClipBounds* clip) {
    if (p == Norm::linf) {
        const float e = static_cast<float>(eps);
        for (std::int64_t i = 0; i < n; ++i) {
            // float bounds round at the magnitude of ref; pull them one ulp
            // toward ref when that rounding lands outside the ball
            float hi = ref[i] + e;
            if (static_cast<double>(hi) - ref[i] > eps) hi = std::nextafter(hi, ref[i]);
            float lo = ref[i] - e;
            if (static_cast<double>(ref[i]) - lo > eps) lo = std::nextafter(lo, ref[i]);
            adv[i] = std::min(std::max(adv[i], lo), hi);
        }
    } else {
        auto norm_of = [&] {
            double sq = 0.0;
            for (std::int64_t i = 0; i < n; ++i) {
                const double d = static_cast<double>(adv[i]) - ref[i];
                sq += d * d;
            }
            return std::sqrt(sq);
        };
        // Rescale until the float-stored point is feasible: writing
        // ref + delta*scale rounds at the magnitude of ref, which can push a
        // tiny-budget delta back outside the ball, and a shrink smaller than
        // one ulp of ref is a float fixed point. The shrink escalates until
        // the stored norm actually drops below eps.
        double norm = norm_of();
        double shrink = 1e-7;
        for (int pass = 0; norm > eps && pass < 64; ++pass) {
            const float scale = static_cast<float>(eps / norm * (1.0 - shrink));
            for (std::int64_t i = 0; i < n; ++i) adv[i] = ref[i] + (adv[i] - ref[i]) * scale;
            norm = norm_of();
            shrink = std::min(1e-3, shrink * 4.0);
        }
    }
    if (clip) {
        // ref lies inside the clip interval, so clamping never grows any
        // coordinate's distance from ref and the ball constraint survives
        for (std::int64_t i = 0; i < n; ++i) adv[i] = std::min(std::max(adv[i], clip->lo), clip->hi);
    }
}

void random_init_span(float* adv, const float* ref, std::int64_t n, double eps, Norm p,
                      std::mt19937& rng) {
    if (p == Norm::linf) {
        std::uniform_real_distribution<float> u(-static_cast<float>(eps), static_cast<float>(eps));
        for (std::int64_t i = 0; i < n; ++i) adv[i] = ref[i] + u(rng);
    } else {
        // uniform in the ball: gaussian direction, radius eps * U^(1/n)
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> dir(static_cast<std::size_t>(n));
        double sq = 0.0;
        for (auto& d : dir) {
            d = gauss(rng);
            sq += d * d;
        }
        const double norm = std::sqrt(sq);
        const double radius = eps * std::pow(u(rng), 1.0 / static_cast<double>(n));
        const double scale = norm > 0.0 ? radius / norm : 0.0;
        for (std::int64_t i = 0; i < n; ++i)
            adv[i] = ref[i] + static_cast<float>(dir[static_cast<std::size_t>(i)] * scale);
    }
}

}  // namespace

const char* norm_name(Norm p) { return p == Norm::l2 ? "l2" : "linf"; }

Norm norm_from_name(const std::string& name) {
    if (name == "l2" || name == "2") return Norm::l2;
    if (name == "linf" || name == "inf") return Norm::linf;
    throw ConfigError("unknown norm '" + name + "' (expected l2 or linf)");
}

void AttackConfig::validate() const {
    if (epsilon < 0.0) throw ConfigError("attack: epsilon must be >= 0");
    if (steps < 0) throw ConfigError("attack: steps must be >= 0");
    if (restarts < 1) throw ConfigError("attack: restarts must be >= 1");
    if (steps > 0 && epsilon > 0.0 && resolved_alpha() <= 0.0)
        throw ConfigError("attack: alpha must be > 0 when steps > 0");
    if (clip.lo > clip.hi) throw ConfigError("attack: clip bounds inverted");
}

Tensor steepest_ascent_dir(const Tensor& grad, Norm p) {
    Tensor out = grad.clone();
    steepest_dir_span(out.data(), out.numel(), p);
    return out;
}

Tensor project_ball(const Tensor& x_adv, const Tensor& x, double epsilon, Norm p,
                    const ClipBounds* clip) {
    check_same_shape(x_adv, x, "project_ball");
    if (epsilon < 0.0) throw ConfigError("project_ball: epsilon must be >= 0");
    Tensor out = x_adv.clone();
    project_span(out.data(), x.data(), out.numel(), epsilon, p, clip);
    return out;
}

Tensor pgd_attack(const LossGradFn& fn, const Tensor& x, const AttackConfig& cfg,
                  std::uint64_t seed, const IterateObserver& observer) {
    cfg.validate();
    if (x.rank() < 1) throw ShapeError("pgd_attack: undefined input");
    if (cfg.epsilon == 0.0) return x.clone();

    const int batch = x.dim(0);
    const std::int64_t per_sample = x.numel() / batch;
    const double alpha = cfg.resolved_alpha();
    const float* ref = x.data();

    Tensor best = x.clone();
    std::vector<double> best_loss(batch, -std::numeric_limits<double>::infinity());
    const bool track_best = cfg.restarts > 1;

    for (int restart = 0; restart < cfg.restarts; ++restart) {
        std::mt19937 rng = make_rng(derive_seed(seed, 0xa77ac4ULL, static_cast<std::uint64_t>(restart)));
        Tensor adv = x.clone();
        float* ap = adv.data();
        if (cfg.random_init) {
            for (int i = 0; i < batch; ++i)
                random_init_span(ap + i * per_sample, ref + i * per_sample, per_sample, cfg.epsilon,
                                 cfg.norm, rng);
            for (int i = 0; i < batch; ++i)
                project_span(ap + i * per_sample, ref + i * per_sample, per_sample, cfg.epsilon,
                             cfg.norm, &cfg.clip);
        }
        if (observer) observer(restart, 0, adv);

        for (int step = 1; step <= cfg.steps; ++step) {
            auto [grad, losses] = fn(adv);
            check_same_shape(grad, adv, "pgd_attack gradient");
            for (double l : losses)
                if (!std::isfinite(l))
                    throw NumericError("pgd_attack: non-finite loss during iteration");
            grad.ensure_finite("pgd_attack gradient");
            float* gp = grad.data();
            for (int i = 0; i < batch; ++i) {
                float* gs = gp + i * per_sample;
                float* as = ap + i * per_sample;
                const float* rs = ref + i * per_sample;
                steepest_dir_span(gs, per_sample, cfg.norm);
                const float a = static_cast<float>(alpha);
                for (std::int64_t j = 0; j < per_sample; ++j) as[j] += a * gs[j];
                project_span(as, rs, per_sample, cfg.epsilon, cfg.norm, &cfg.clip);
            }
            if (observer) observer(restart, step, adv);
        }

        if (track_best) {
            auto [grad, losses] = fn(adv);
            (void)grad;
            float* bp = best.data();
            for (int i = 0; i < batch; ++i) {
                if (losses[static_cast<std::size_t>(i)] > best_loss[static_cast<std::size_t>(i)]) {
                    best_loss[static_cast<std::size_t>(i)] = losses[static_cast<std::size_t>(i)];
                    std::copy_n(ap + i * per_sample, per_sample, bp + i * per_sample);
                }
            }
        } else {
            best = adv;
        }
    }
    return best;
}

LossGradFn model_loss_grad_fn(BlockTappedModel& model, const std::vector<int>& labels,
                              bool bn_train_mode) {
    return [&model, labels, bn_train_mode](const Tensor& x) {
        ParamGradPause pause(model.params);
        Tensor input = x.clone();
        input.set_requires_grad(true);
        Tape tape;
        Tensor logits = model.forward(tape, input, bn_train_mode);
        Tensor loss = cross_entropy(tape, logits, labels);
        tape.backward(loss);
        auto g = input.grad();
        Tensor grad = Tensor::from(input.shape(), std::vector<float>(g.begin(), g.end()));
        return std::make_pair(std::move(grad), per_sample_cross_entropy(logits, labels));
    };
}

Tensor pgd_attack(BlockTappedModel& model, const Tensor& x, const std::vector<int>& labels,
                  const AttackConfig& cfg, std::uint64_t seed, bool bn_train_mode,
                  const IterateObserver& observer) {
    if (static_cast<int>(labels.size()) != x.dim(0))
        throw ShapeError("pgd_attack: label count does not match batch");
    return pgd_attack(model_loss_grad_fn(model, labels, bn_train_mode), x, cfg, seed, observer);
}

}  // namespace atlab
