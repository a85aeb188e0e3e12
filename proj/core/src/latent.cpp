#include "atlab/latent.hpp"

#include "atlab/errors.hpp"

namespace atlab {

BlockTappedModel retrain_head(const BlockTappedModel& model, const Dataset& natural_train,
                              const HeadRetrainConfig& cfg, MetricsLog* log,
                              const Dataset* eval_data) {
    BlockTappedModel retrained = model.clone();
    reinit_head(retrained, cfg.seed);

    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.lr = cfg.lr;
    tc.lr_drop_factor = cfg.lr_drop_factor;
    tc.lr_drop_period = cfg.lr_drop_period;
    tc.weight_decay = cfg.weight_decay;
    tc.momentum = cfg.momentum;
    tc.mode = TrainMode::natural;
    tc.attack.epsilon = 0.0;
    tc.seed = cfg.seed;

    MetricsLog out = train_head_only(retrained, natural_train, tc, eval_data);
    if (log) *log = std::move(out);
    return retrained;
}

HeadRetrainReport compare_heads(BlockTappedModel& original, BlockTappedModel& retrained,
                                const Dataset& eval_data, const AttackConfig& attack,
                                double eps_tr, const HeadRetrainConfig& retrain_cfg,
                                std::uint64_t eval_seed) {
    if (extractor_fingerprint(original) != extractor_fingerprint(retrained))
        throw ConfigError("compare_heads: the two models do not share the same extractor");
    HeadRetrainReport report;
    report.eps_tr = eps_tr;
    report.attack = attack;
    report.retrain = retrain_cfg;
    report.natural_original = evaluate_natural(original, eval_data);
    report.natural_retrained = evaluate_natural(retrained, eval_data);
    report.robust_original = evaluate_robust(original, eval_data, attack, false, eval_seed);
    report.robust_retrained = evaluate_robust(retrained, eval_data, attack, false, eval_seed);
    return report;
}

}  // namespace atlab
