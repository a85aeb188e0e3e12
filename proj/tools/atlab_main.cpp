// atlab CLI: trains block-tapped CNNs naturally or adversarially, evaluates
// PGD robustness, runs the activation/redundancy/latent/color-bias probes,
// and renders the report bundle for a whole eps_tr grid.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "atlab/checkpoint.hpp"
#include "atlab/config.hpp"
#include "atlab/errors.hpp"
#include "atlab/experiment.hpp"
#include "atlab/report.hpp"
#include "atlab/rng.hpp"

using namespace atlab;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    ExperimentConfig config;

    void load() {
        if (!config_path.empty())
            config = load_config(config_path);
        else
            config = ExperimentConfig{};
        if (!overrides.empty()) config = apply_overrides(config, overrides);
    }
};

struct EntryRef {
    fs::path dir;          // where entry files live
    fs::path checkpoint;   // checkpoint file
    double eps = 0.0;
};

EntryRef resolve_entry(const ExperimentConfig& cfg, double eps, const std::string& ckpt_override) {
    EntryRef ref;
    ref.eps = eps;
    if (!ckpt_override.empty()) {
        ref.checkpoint = ckpt_override;
        ref.dir = ref.checkpoint.has_parent_path() ? ref.checkpoint.parent_path() : fs::path(".");
    } else {
        ref.dir = entry_dir(cfg.output_dir, eps);
        ref.checkpoint = ref.dir / "checkpoint.atck";
    }
    return ref;
}

// loads (or creates) the entry.json holding this entry's accumulated reports
GridEntryReport load_or_init_entry(const EntryRef& ref, const ExperimentConfig& cfg) {
    if (entry_json_exists(ref.dir)) return read_entry_json_at(ref.dir);
    GridEntryReport entry;
    entry.eps_tr = ref.eps;
    entry.checkpoint_file = ref.checkpoint.filename().string();
    entry.arch_hash = arch_hash(cfg.arch);
    entry.eval_attack = eval_attack_for_eps(cfg, ref.eps);
    return entry;
}

BlockTappedModel load_model(const EntryRef& ref, const ExperimentConfig& cfg, double* eps_out) {
    LoadedCheckpoint loaded = load_checkpoint(ref.checkpoint, cfg.arch);
    if (eps_out) *eps_out = loaded.provenance.eps_tr;
    return std::move(loaded.model);
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
    if (dynamic_cast<const DataError*>(&e)) return kExitData;
    if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
    if (dynamic_cast<const ShapeError*>(&e)) return kExitConfig;
    return kExitOther;
}

void print_stage(const std::string& stage, double eps) {
    if (eps >= 0.0)
        std::printf("[run] %s eps_tr=%s\n", stage.c_str(), format_eps(eps).c_str());
    else
        std::printf("[run] %s\n", stage.c_str());
    std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"atlab: adversarial-training laboratory for block-tapped CNNs"};
    app.require_subcommand(1);
    app.fallthrough();  // global --config/--set may follow the subcommand

    CommonOpts common;
    app.add_option("--config", common.config_path, "experiment config JSON");
    app.add_option("--set", common.overrides, "override config fields, e.g. --set train.epochs=20");

    // train
    auto* cmd_train = app.add_subcommand("train", "train one model for a given eps_tr");
    double train_eps = -1.0;
    cmd_train->add_option("--eps", train_eps, "training budget eps_tr (default: config value)");

    // attack-eval
    auto* cmd_eval = app.add_subcommand("attack-eval", "natural + robust accuracy of a checkpoint");
    double eval_eps = 0.0;
    std::string eval_ckpt;
    bool worst_of_clean = false;
    cmd_eval->add_option("--eps", eval_eps, "grid entry to evaluate");
    cmd_eval->add_option("--checkpoint", eval_ckpt, "explicit checkpoint path");
    cmd_eval->add_flag("--worst-of-clean", worst_of_clean,
                       "count a sample only if clean and adversarial are both correct");

    // probe activity|redundancy
    auto* cmd_probe = app.add_subcommand("probe", "feature-map statistics of a checkpoint");
    cmd_probe->require_subcommand(1);
    auto* cmd_probe_act = cmd_probe->add_subcommand("activity", "densely-active feature maps");
    auto* cmd_probe_red = cmd_probe->add_subcommand("redundancy", "similarity clusters");
    double probe_eps = 0.0;
    std::string probe_ckpt;
    for (auto* c : {cmd_probe_act, cmd_probe_red}) {
        c->add_option("--eps", probe_eps, "grid entry to probe");
        c->add_option("--checkpoint", probe_ckpt, "explicit checkpoint path");
    }

    // retrain-head
    auto* cmd_head = app.add_subcommand("retrain-head",
                                        "freeze the extractor, retrain the linear head naturally");
    double head_eps = 0.0;
    std::string head_ckpt;
    cmd_head->add_option("--eps", head_eps, "grid entry");
    cmd_head->add_option("--checkpoint", head_ckpt, "explicit checkpoint path");

    // bias-probe
    auto* cmd_bias = app.add_subcommand("bias-probe", "pixel-average / contour / grid transforms");
    double bias_eps = 0.0;
    std::string bias_ckpt, dump_dir;
    cmd_bias->add_option("--eps", bias_eps, "grid entry");
    cmd_bias->add_option("--checkpoint", bias_ckpt, "explicit checkpoint path");
    cmd_bias->add_option("--dump-transformed", dump_dir,
                         "also write transformed datasets (CIFAR-10 binary format)");

    // report
    auto* cmd_report = app.add_subcommand("report", "regenerate plots/tables from a run directory");
    std::string report_dir;
    cmd_report->add_option("--dir", report_dir, "run directory (default: config output_dir)");

    // run
    auto* cmd_run = app.add_subcommand("run", "full eps_tr grid: train + probes + reports");

    // gen-data
    auto* cmd_gen = app.add_subcommand("gen-data", "write the synthetic desk dataset to disk");
    std::string gen_dir = "data/synth10";
    std::int64_t gen_train = 2000, gen_test = 1000;
    std::uint64_t gen_seed = 99;
    cmd_gen->add_option("--out", gen_dir, "output directory");
    cmd_gen->add_option("--train", gen_train, "training samples");
    cmd_gen->add_option("--test", gen_test, "test samples");
    cmd_gen->add_option("--seed", gen_seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        common.load();
        ExperimentConfig& cfg = common.config;

        if (*cmd_gen) {
            fs::create_directories(gen_dir);
            const Dataset train_set = make_synthetic(gen_train, derive_seed(gen_seed, 1));
            const Dataset test_set = make_synthetic(gen_test, derive_seed(gen_seed, 2));
            write_cifar10_bin(train_set, fs::path(gen_dir) / "train.bin");
            write_cifar10_bin(test_set, fs::path(gen_dir) / "test.bin");
            std::printf("wrote %lld train and %lld test samples under %s\n",
                        static_cast<long long>(gen_train), static_cast<long long>(gen_test),
                        gen_dir.c_str());
            return kExitOk;
        }

        if (*cmd_run) {
            const ReportBundle bundle = run_experiment(cfg, print_stage);
            int failed = 0;
            for (const auto& e : bundle.entries) {
                if (e.error.empty()) {
                    std::printf("eps_tr=%s natural=%.2f robust=%.2f\n", format_eps(e.eps_tr).c_str(),
                                e.natural_acc, e.robust_acc.value_or(0.0));
                } else {
                    std::printf("eps_tr=%s FAILED: %s\n", format_eps(e.eps_tr).c_str(), e.error.c_str());
                    ++failed;
                }
            }
            std::printf("reports under %s\n", cfg.output_dir.c_str());
            return failed == 0 ? kExitOk : kExitNumeric;
        }

        if (*cmd_report) {
            const fs::path dir = report_dir.empty() ? fs::path(cfg.output_dir) : fs::path(report_dir);
            const ReportBundle bundle = read_bundle(dir);
            write_bundle_files(dir, bundle);
            std::printf("regenerated reports for %zu entries under %s\n", bundle.entries.size(),
                        dir.string().c_str());
            return kExitOk;
        }

        if (*cmd_train) {
            cfg.validate();
            const double eps = train_eps >= 0.0 ? train_eps : cfg.train.attack.epsilon;
            const TrainConfig tc = train_config_for_eps(cfg, eps);
            const EntryRef ref = resolve_entry(cfg, eps, "");
            const Dataset train_data = load_dataset_split(cfg.dataset, true);
            const Dataset eval_data = load_dataset_split(cfg.dataset, false);

            BlockTappedModel model = build_model(cfg.arch, derive_seed(tc.seed, 0xb01dULL));
            GridEntryReport entry = load_or_init_entry(ref, cfg);
            entry.metrics = train(model, train_data, tc, &eval_data);
            save_checkpoint(model, ref.checkpoint, CheckpointProvenance{eps, tc.epochs, tc.seed});
            entry.natural_acc = evaluate_natural(model, eval_data);
            write_entry_files_at(ref.dir, entry, config_hash(cfg));
            std::printf("trained eps_tr=%s: natural=%.2f, checkpoint %s\n", format_eps(eps).c_str(),
                        entry.natural_acc, ref.checkpoint.string().c_str());
            return kExitOk;
        }

        // the remaining commands operate on an existing checkpoint
        auto run_on_checkpoint = [&](double eps, const std::string& override_path,
                                     auto&& body) -> int {
            const EntryRef pre = resolve_entry(cfg, eps, override_path);
            double actual_eps = eps;
            BlockTappedModel model = load_model(pre, cfg, &actual_eps);
            EntryRef ref = pre;
            ref.eps = actual_eps;
            GridEntryReport entry = load_or_init_entry(ref, cfg);
            entry.eps_tr = actual_eps;
            body(model, ref, entry);
            write_entry_files_at(ref.dir, entry, config_hash(cfg));
            return kExitOk;
        };

        if (*cmd_eval) {
            return run_on_checkpoint(eval_eps, eval_ckpt, [&](BlockTappedModel& model,
                                                              const EntryRef& ref,
                                                              GridEntryReport& entry) {
                const Dataset eval_data = load_dataset_split(cfg.dataset, false);
                const AttackConfig attack = eval_attack_for_eps(cfg, ref.eps);
                entry.eval_attack = attack;
                entry.natural_acc = evaluate_natural(model, eval_data);
                entry.robust_acc = evaluate_robust(model, eval_data, attack, worst_of_clean,
                                                   derive_seed(cfg.train.seed, 0xe7a1ULL));
                std::printf("eps_tr=%s natural=%.2f robust=%.2f (%s, eps_te=%s, %d steps)\n",
                            format_eps(ref.eps).c_str(), entry.natural_acc, *entry.robust_acc,
                            norm_name(attack.norm), format_eps(attack.epsilon).c_str(),
                            attack.steps);
            });
        }

        if (*cmd_probe_act) {
            return run_on_checkpoint(probe_eps, probe_ckpt, [&](BlockTappedModel& model,
                                                                const EntryRef&,
                                                                GridEntryReport& entry) {
                const Dataset eval_data = load_dataset_split(cfg.dataset, false);
                ActivityThresholds th{cfg.probes.tau_act, cfg.probes.tau_dens};
                entry.activity = aggregate_activity(model, eval_data, th);
                for (const auto& b : entry.activity->blocks)
                    std::printf("block %d: C_k=%d N_k=%lld mean_count=%.2f\n", b.block, b.channels,
                                static_cast<long long>(b.always_dense), b.mean_count());
            });
        }

        if (*cmd_probe_red) {
            return run_on_checkpoint(probe_eps, probe_ckpt, [&](BlockTappedModel& model,
                                                                const EntryRef&,
                                                                GridEntryReport& entry) {
                const Dataset eval_data = load_dataset_split(cfg.dataset, false);
                entry.redundancy =
                    aggregate_redundancy(model, eval_data, cfg.probes.tau_act, cfg.probes.tau_sim,
                                         cfg.probes.redundancy_mode);
                for (const auto& b : entry.redundancy->blocks)
                    std::printf("block %d: active=%.1f n_k=%.1f C_k^R=%.1f S=%.4f\n", b.block,
                                b.mean_active, b.mean_clusters, b.mean_redundant,
                                b.mean_similarity.value_or(0.0));
            });
        }

        if (*cmd_head) {
            return run_on_checkpoint(head_eps, head_ckpt, [&](BlockTappedModel& model,
                                                              const EntryRef& ref,
                                                              GridEntryReport& entry) {
                const Dataset train_data = load_dataset_split(cfg.dataset, true);
                const Dataset eval_data = load_dataset_split(cfg.dataset, false);
                BlockTappedModel retrained = retrain_head(model, train_data, cfg.head_retrain);
                const AttackConfig attack = eval_attack_for_eps(cfg, ref.eps);
                entry.head_retrain =
                    compare_heads(model, retrained, eval_data, attack, ref.eps, cfg.head_retrain,
                                  derive_seed(cfg.train.seed, 0xe7a1ULL));
                save_checkpoint(retrained, ref.dir / "checkpoint_retrained_head.atck",
                                CheckpointProvenance{ref.eps, cfg.head_retrain.epochs,
                                                     cfg.head_retrain.seed});
                const auto& r = *entry.head_retrain;
                std::printf("natural %0.2f -> %0.2f (%s)  robust %0.2f -> %0.2f (%s)\n",
                            r.natural_original, r.natural_retrained,
                            format_delta(r.natural_delta()).c_str(), r.robust_original,
                            r.robust_retrained, format_delta(r.robust_delta()).c_str());
            });
        }

        if (*cmd_bias) {
            return run_on_checkpoint(bias_eps, bias_ckpt, [&](BlockTappedModel& model,
                                                              const EntryRef&,
                                                              GridEntryReport& entry) {
                const Dataset eval_data = load_dataset_split(cfg.dataset, false);
                BiasProbeOptions opt;
                opt.thicknesses = cfg.probes.contour_thicknesses;
                opt.include_pixel_average = cfg.probes.bias_pixel_average;
                opt.include_grid = cfg.probes.bias_grid;
                opt.grid_policy = cfg.probes.grid_policy;
                entry.bias = bias_report(model, eval_data, opt);
                const auto& r = *entry.bias;
                std::printf("clean=%.2f pixel_average=%.2f grid=%.2f\n", r.clean_accuracy,
                            r.pixel_average_accuracy.value_or(-1.0), r.grid_accuracy.value_or(-1.0));
                for (const auto& row : r.contours)
                    std::printf("contour t=%d mean_drop=%.2f sd=%.2f\n", row.thickness,
                                row.mean_drop, row.sd_drop);
                if (!dump_dir.empty() && eval_data.channels == 3 && eval_data.height == 32 &&
                    eval_data.width == 32) {
                    fs::create_directories(dump_dir);
                    write_cifar10_bin(pixel_average(eval_data),
                                      fs::path(dump_dir) / "pixel_average.bin");
                    for (int t : opt.thicknesses)
                        write_cifar10_bin(
                            colored_contour(eval_data, ContourColor::white, t),
                            fs::path(dump_dir) / ("contour_white_t" + std::to_string(t) + ".bin"));
                }
            });
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitOther;
    }
    return kExitOther;
}
