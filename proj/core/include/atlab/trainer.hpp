#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "atlab/attack.hpp"
#include "atlab/dataset.hpp"
#include "atlab/model.hpp"

namespace atlab {

enum class TrainMode { natural, adversarial };

struct TrainConfig {
    int epochs = 20;
    int batch_size = 128;
    double lr = 0.1;
    double lr_drop_factor = 10.0;  // lr divides by this every lr_drop_period epochs
    int lr_drop_period = 50;
    double weight_decay = 5e-4;
    double momentum = 0.9;
    TrainMode mode = TrainMode::natural;
    AttackConfig attack;  // training budget eps_tr lives here
    std::uint64_t seed = 1;
    bool attack_bn_train_mode = false;  // BN statistics used while crafting
    int eval_samples_per_epoch = 512;   // cap for the per-epoch accuracy probe

    // strict: natural mode <=> attack.epsilon == 0 (normalization enforced at
    // the config boundary; the library itself accepts either combination).
    void validate(bool strict = true) const;
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double natural_acc = 0.0;
    std::optional<double> robust_acc;
    double lr = 0.0;
    double wall_seconds = 0.0;
};

struct MetricsLog {
    std::vector<EpochMetrics> epochs;
};

// lr(epoch) = lr * factor^(-floor(epoch / period))
double lr_at_epoch(double lr, double factor, int period, int epoch);

// SGD training loop. Adversarial mode crafts PGD examples against the
// current parameters for every optimization step and minimizes the loss on
// them. eval_data (when given) drives the per-epoch natural accuracy column.
MetricsLog train(BlockTappedModel& model, const Dataset& train_data, const TrainConfig& cfg,
                 const Dataset* eval_data = nullptr);

// Head-only variant used by the latent-feature probe: extractor runs in eval
// mode (frozen BN statistics), only head parameters are updated.
MetricsLog train_head_only(BlockTappedModel& model, const Dataset& train_data,
                           const TrainConfig& cfg, const Dataset* eval_data = nullptr);

// Percentage of argmax-correct predictions, eval-mode BN.
double evaluate_natural(BlockTappedModel& model, const Dataset& data, int batch_size = 256);

// Accuracy under PGD examples crafted with cfg. With worst_of_clean a sample
// counts only if clean and adversarial predictions are both correct.
double evaluate_robust(BlockTappedModel& model, const Dataset& data, const AttackConfig& cfg,
                       bool worst_of_clean = false, std::uint64_t seed = 0, int batch_size = 128);

}  // namespace atlab
