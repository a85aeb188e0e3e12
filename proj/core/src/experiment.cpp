#include "atlab/experiment.hpp"

#include "atlab/errors.hpp"
#include "atlab/rng.hpp"

namespace atlab {

namespace {

void notify(const StageCallback& cb, const std::string& stage, double eps) {
    if (cb) cb(stage, eps);
}

}  // namespace

GridEntryReport probe_entry(const ExperimentConfig& config, BlockTappedModel& model, double eps_tr,
                            const Dataset& train_data, const Dataset& eval_data) {
    GridEntryReport entry;
    entry.eps_tr = eps_tr;
    entry.arch_hash = arch_hash(model.arch);
    entry.eval_attack = eval_attack_for_eps(config, eps_tr);

    entry.natural_acc = evaluate_natural(model, eval_data);
    entry.robust_acc = evaluate_robust(model, eval_data, entry.eval_attack, false,
                                       derive_seed(config.train.seed, 0xe7a1ULL));

    if (config.probes.activity) {
        ActivityThresholds th{config.probes.tau_act, config.probes.tau_dens};
        entry.activity = aggregate_activity(model, eval_data, th);
    }
    if (config.probes.redundancy) {
        entry.redundancy = aggregate_redundancy(model, eval_data, config.probes.tau_act,
                                                config.probes.tau_sim,
                                                config.probes.redundancy_mode, 128,
                                                config.probes.dump_similarity_max);
    }
    if (config.probes.head_retrain) {
        BlockTappedModel retrained = retrain_head(model, train_data, config.head_retrain);
        entry.head_retrain = compare_heads(model, retrained, eval_data, entry.eval_attack, eps_tr,
                                           config.head_retrain,
                                           derive_seed(config.train.seed, 0xe7a1ULL));
    }
    if (config.probes.bias) {
        BiasProbeOptions opt;
        opt.thicknesses = config.probes.contour_thicknesses;
        opt.include_pixel_average = config.probes.bias_pixel_average;
        opt.include_grid = config.probes.bias_grid;
        opt.grid_policy = config.probes.grid_policy;
        entry.bias = bias_report(model, eval_data, opt);
    }
    return entry;
}

ReportBundle run_experiment(const ExperimentConfig& config, const StageCallback& on_stage) {
    config.validate();
    const std::filesystem::path run_dir(config.output_dir);
    std::filesystem::create_directories(run_dir);

    ReportBundle bundle;
    bundle.config = config;
    bundle.config_hash = config_hash(config);

    const Dataset train_data = load_dataset_split(config.dataset, /*train_split=*/true);
    const Dataset eval_data = load_dataset_split(config.dataset, /*train_split=*/false);

    for (double eps : config.eps_grid) {
        GridEntryReport entry;
        entry.eps_tr = eps;
        entry.checkpoint_file = ("eps_" + format_eps(eps)) + "/checkpoint.atck";
        try {
            const auto ckpt_path = run_dir / entry.checkpoint_file;
            BlockTappedModel model;
            const TrainConfig tc = train_config_for_eps(config, eps);
            if (std::filesystem::exists(ckpt_path)) {
                // resume: a completed entry is never retrained
                notify(on_stage, "load", eps);
                model = load_checkpoint(ckpt_path, config.arch).model;
            } else {
                notify(on_stage, "train", eps);
                model = build_model(config.arch, derive_seed(tc.seed, 0xb01dULL));
                entry.metrics = train(model, train_data, tc, &eval_data);
                save_checkpoint(model, ckpt_path,
                                CheckpointProvenance{eps, tc.epochs, tc.seed});
            }
            notify(on_stage, "probes", eps);
            GridEntryReport probed = probe_entry(config, model, eps, train_data, eval_data);
            probed.metrics = std::move(entry.metrics);
            probed.checkpoint_file = entry.checkpoint_file;
            entry = std::move(probed);
        } catch (const Error& e) {
            entry.error = e.what();
        }
        bundle.entries.push_back(std::move(entry));
    }

    notify(on_stage, "reports", -1.0);
    write_bundle_files(run_dir, bundle);
    return bundle;
}

}  // namespace atlab
