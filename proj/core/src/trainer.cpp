#include "atlab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "atlab/errors.hpp"
#include "atlab/ops.hpp"
#include "atlab/rng.hpp"
#include "atlab/tape.hpp"

namespace atlab {

namespace {

constexpr std::uint64_t kShuffleTag = 0x54affULL;

double accuracy_over(BlockTappedModel& model, const Dataset& data, std::int64_t limit,
                     int batch_size) {
    const std::int64_t n = std::min<std::int64_t>(data.size(), limit);
    if (n == 0) return 0.0;
    std::int64_t correct = 0;
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (std::int64_t start = 0; start < n; start += batch_size) {
        const int count = static_cast<int>(std::min<std::int64_t>(batch_size, n - start));
        std::vector<int> labels;
        Tensor x = gather_batch(data, idx.data() + start, count, &labels);
        Tape tape;
        Tensor logits = model.forward(tape, x, /*train=*/false);
        const auto pred = argmax_rows(logits);
        for (int i = 0; i < count; ++i)
            if (pred[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

MetricsLog train_impl(BlockTappedModel& model, const Dataset& train_data, const TrainConfig& cfg,
                      const Dataset* eval_data, std::optional<ParamGroup> group,
                      bool head_only) {
    cfg.validate(/*strict=*/false);
    if (train_data.size() == 0) throw DataError("train: dataset is empty");
    if (train_data.channels != model.arch.in_channels)
        throw ShapeError("train: dataset channels do not match the architecture");

    MetricsLog log;
    const std::int64_t n = train_data.size();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_at_epoch(cfg.lr, cfg.lr_drop_factor, cfg.lr_drop_period, epoch);

        std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        std::mt19937 shuffle_rng =
            make_rng(derive_seed(cfg.seed, kShuffleTag, static_cast<std::uint64_t>(epoch)));
        std::shuffle(idx.begin(), idx.end(), shuffle_rng);

        double loss_sum = 0.0;
        int batches = 0;
        for (std::int64_t start = 0; start < n; start += cfg.batch_size) {
            const int count = static_cast<int>(std::min<std::int64_t>(cfg.batch_size, n - start));
            std::vector<int> labels;
            Tensor x = gather_batch(train_data, idx.data() + start, count, &labels);

            if (cfg.mode == TrainMode::adversarial) {
                const std::uint64_t attack_seed =
                    derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1,
                                static_cast<std::uint64_t>(batches) + 1);
                x = pgd_attack(model, x, labels, cfg.attack, attack_seed, cfg.attack_bn_train_mode);
            }

            Tape tape;
            Tensor logits = model.forward(tape, x, /*train=*/!head_only);
            Tensor loss = cross_entropy(tape, logits, labels);
            if (!std::isfinite(loss.item()))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batches));
            tape.backward(loss);
            sgd_step(model.params, lr, cfg.momentum, cfg.weight_decay, group);

            loss_sum += loss.item();
            ++batches;
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.train_loss = batches > 0 ? loss_sum / batches : 0.0;
        em.lr = lr;
        const Dataset& acc_set = eval_data ? *eval_data : train_data;
        em.natural_acc = accuracy_over(model, acc_set, cfg.eval_samples_per_epoch, 256);
        em.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.epochs.push_back(em);
    }
    return log;
}

}  // namespace

void TrainConfig::validate(bool strict) const {
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (lr < 0.0) throw ConfigError("train: lr must be >= 0");
    if (lr_drop_factor < 1.0) throw ConfigError("train: lr_drop_factor must be >= 1");
    if (lr_drop_period < 1) throw ConfigError("train: lr_drop_period must be >= 1");
    if (weight_decay < 0.0 || momentum < 0.0)
        throw ConfigError("train: weight_decay and momentum must be >= 0");
    attack.validate();
    if (strict) {
        const bool natural = mode == TrainMode::natural;
        if (natural != (attack.epsilon == 0.0))
            throw ConfigError("train: natural mode <=> attack epsilon == 0 (got mode " +
                              std::string(natural ? "natural" : "adversarial") + " with epsilon " +
                              std::to_string(attack.epsilon) + ")");
    }
}

double lr_at_epoch(double lr, double factor, int period, int epoch) {
    return lr * std::pow(factor, -static_cast<double>(epoch / period));
}

MetricsLog train(BlockTappedModel& model, const Dataset& train_data, const TrainConfig& cfg,
                 const Dataset* eval_data) {
    return train_impl(model, train_data, cfg, eval_data, std::nullopt, /*head_only=*/false);
}

MetricsLog train_head_only(BlockTappedModel& model, const Dataset& train_data,
                           const TrainConfig& cfg, const Dataset* eval_data) {
    // extractor gradients are paused so backward stops at the head; frozen BN
    // statistics (eval-mode forward) keep f's function fixed
    model.params.set_requires_grad(false, ParamGroup::extractor);
    MetricsLog log;
    try {
        log = train_impl(model, train_data, cfg, eval_data, ParamGroup::head, /*head_only=*/true);
    } catch (...) {
        model.params.set_requires_grad(true, ParamGroup::extractor);
        throw;
    }
    model.params.set_requires_grad(true, ParamGroup::extractor);
    return log;
}

double evaluate_natural(BlockTappedModel& model, const Dataset& data, int batch_size) {
    return accuracy_over(model, data, data.size(), batch_size);
}

double evaluate_robust(BlockTappedModel& model, const Dataset& data, const AttackConfig& cfg,
                       bool worst_of_clean, std::uint64_t seed, int batch_size) {
    cfg.validate();
    const std::int64_t n = data.size();
    if (n == 0) return 0.0;
    std::int64_t correct = 0;
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::int64_t batch_index = 0;
    for (std::int64_t start = 0; start < n; start += batch_size) {
        const int count = static_cast<int>(std::min<std::int64_t>(batch_size, n - start));
        std::vector<int> labels;
        Tensor x = gather_batch(data, idx.data() + start, count, &labels);
        Tensor adv = pgd_attack(model, x, labels, cfg,
                                derive_seed(seed, 0xe7a1ULL, static_cast<std::uint64_t>(batch_index)));
        Tape tape;
        Tensor adv_logits = model.forward(tape, adv, /*train=*/false);
        const auto adv_pred = argmax_rows(adv_logits);
        std::vector<int> clean_pred;
        if (worst_of_clean) {
            Tape tape2;
            clean_pred = argmax_rows(model.forward(tape2, x, /*train=*/false));
        }
        for (int i = 0; i < count; ++i) {
            const bool adv_ok = adv_pred[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i)];
            const bool clean_ok =
                !worst_of_clean || clean_pred[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i)];
            if (adv_ok && clean_ok) ++correct;
        }
        ++batch_index;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace atlab
