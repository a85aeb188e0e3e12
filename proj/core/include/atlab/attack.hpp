#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "atlab/model.hpp"
#include "atlab/tensor.hpp"

namespace atlab {

enum class Norm { l2, linf };

const char* norm_name(Norm p);
Norm norm_from_name(const std::string& name);

struct ClipBounds {
    float lo = 0.0f;
    float hi = 1.0f;
};

// Step size is either an absolute value in input-scale units, or a
// paper-style step that resolves to epsilon * alpha / 4 (so the usual
// "step size 1" becomes a quarter of the budget per step). Both the raw
// and the resolved value are persisted in reports.
enum class AlphaUnits { absolute, paper };

struct AttackConfig {
    Norm norm = Norm::l2;
    double epsilon = 0.0;  // perturbation budget, input-scale units
    double alpha = 1.0;    // raw step size, interpreted per alpha_units
    AlphaUnits alpha_units = AlphaUnits::paper;
    int steps = 20;
    int restarts = 1;
    bool random_init = true;
    ClipBounds clip;

    double resolved_alpha() const {
        return alpha_units == AlphaUnits::paper ? epsilon * alpha / 4.0 : alpha;
    }
    void validate() const;
};

// Maximizer of u . grad over the unit p-ball: sign(grad) for p = inf,
// grad / ||grad||_2 for p = 2. The zero vector maps to zero.
Tensor steepest_ascent_dir(const Tensor& grad, Norm p);

// Projects x_adv onto the epsilon-ball around x (coordinate-wise clamp for
// p = inf, radial rescale for p = 2), then onto the clip interval when given.
// Points already inside the ball pass through unchanged.
Tensor project_ball(const Tensor& x_adv, const Tensor& x, double epsilon, Norm p,
                    const ClipBounds* clip = nullptr);

// Loss oracle for the attack: mean-loss gradient w.r.t. the input batch plus
// per-sample losses.
using LossGradFn =
    std::function<std::pair<Tensor, std::vector<double>>(const Tensor& x)>;

// Observes every iterate of every restart (step 0 is the initialization).
using IterateObserver = std::function<void(int restart, int step, const Tensor& x_adv)>;

// PGD against an arbitrary loss oracle. Steps and projections are applied
// per sample; with restarts > 1 the per-sample iterate with maximal final
// loss is returned. epsilon = 0 returns x exactly.
Tensor pgd_attack(const LossGradFn& fn, const Tensor& x, const AttackConfig& cfg,
                  std::uint64_t seed = 0, const IterateObserver& observer = {});

// PGD against a model with cross-entropy loss. bn_train_mode selects
// batch-statistics BN during crafting (default: running statistics).
Tensor pgd_attack(BlockTappedModel& model, const Tensor& x, const std::vector<int>& labels,
                  const AttackConfig& cfg, std::uint64_t seed = 0, bool bn_train_mode = false,
                  const IterateObserver& observer = {});

// The oracle used by the model overload, exposed for evaluation code.
LossGradFn model_loss_grad_fn(BlockTappedModel& model, const std::vector<int>& labels,
                              bool bn_train_mode);

}  // namespace atlab
