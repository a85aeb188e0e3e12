#pragma once

#include <cstdint>

#include "atlab/dataset.hpp"
#include "atlab/model.hpp"
#include "atlab/trainer.hpp"

namespace atlab {

// Short schedule for retraining the linear head on natural examples.
struct HeadRetrainConfig {
    int epochs = 15;
    int batch_size = 128;
    double lr = 0.02;
    double lr_drop_factor = 10.0;
    int lr_drop_period = 10;
    double weight_decay = 5e-4;
    double momentum = 0.9;
    std::uint64_t seed = 7;
};

struct HeadRetrainReport {
    double eps_tr = 0.0;
    double natural_original = 0.0;
    double natural_retrained = 0.0;
    double robust_original = 0.0;
    double robust_retrained = 0.0;
    AttackConfig attack;  // evaluation attack (eps_te = eps_tr protocol)
    HeadRetrainConfig retrain;

    double natural_delta() const { return natural_retrained - natural_original; }
    double robust_delta() const { return robust_retrained - robust_original; }
};

// Returns a copy of the model with the head re-initialized and retrained from
// scratch on natural examples. The extractor (parameters and BN running
// statistics) is bit-identical to the input model's.
BlockTappedModel retrain_head(const BlockTappedModel& model, const Dataset& natural_train,
                              const HeadRetrainConfig& cfg, MetricsLog* log = nullptr,
                              const Dataset* eval_data = nullptr);

// Natural and robust accuracy of both heads under the same attack config.
// The two models must share the extractor bit-for-bit.
HeadRetrainReport compare_heads(BlockTappedModel& original, BlockTappedModel& retrained,
                                const Dataset& eval_data, const AttackConfig& attack,
                                double eps_tr, const HeadRetrainConfig& retrain_cfg,
                                std::uint64_t eval_seed = 0);

}  // namespace atlab
