#pragma once

// json <-> config/report struct converters shared by config.cpp and
// report.cpp. Internal header; nlohmann/json never appears in public headers.

#include <nlohmann/json.hpp>

#include "atlab/activity.hpp"
#include "atlab/config.hpp"
#include "atlab/errors.hpp"
#include "atlab/latent.hpp"
#include "atlab/redundancy.hpp"
#include "atlab/trainer.hpp"
#include "atlab/transforms.hpp"

namespace atlab::detail {

using json = nlohmann::json;

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

// --- enums ------------------------------------------------------------------

inline std::string mode_name(TrainMode m) {
    return m == TrainMode::natural ? "natural" : "adversarial";
}
inline TrainMode mode_from(const std::string& s) {
    if (s == "natural") return TrainMode::natural;
    if (s == "adversarial") return TrainMode::adversarial;
    throw ConfigError("unknown train mode '" + s + "'");
}

inline std::string alpha_units_name(AlphaUnits u) {
    return u == AlphaUnits::paper ? "paper" : "absolute";
}
inline AlphaUnits alpha_units_from(const std::string& s) {
    if (s == "paper") return AlphaUnits::paper;
    if (s == "absolute") return AlphaUnits::absolute;
    throw ConfigError("unknown alpha_units '" + s + "' (expected paper or absolute)");
}

inline std::string redundancy_mode_name(RedundancyMode m) {
    return m == RedundancyMode::per_sample ? "per_sample" : "dataset_mean";
}
inline RedundancyMode redundancy_mode_from(const std::string& s) {
    if (s == "per_sample") return RedundancyMode::per_sample;
    if (s == "dataset_mean") return RedundancyMode::dataset_mean;
    throw ConfigError("unknown redundancy mode '" + s + "'");
}

inline std::string grid_policy_name(GridPolicy p) {
    return p == GridPolicy::native ? "native" : "resize";
}
inline GridPolicy grid_policy_from(const std::string& s) {
    if (s == "native") return GridPolicy::native;
    if (s == "resize") return GridPolicy::resize;
    throw ConfigError("unknown grid policy '" + s + "'");
}

// --- config sections ---------------------------------------------------------

inline json attack_to_json(const AttackConfig& a) {
    return json{{"norm", norm_name(a.norm)},
                {"epsilon", a.epsilon},
                {"alpha", a.alpha},
                {"alpha_units", alpha_units_name(a.alpha_units)},
                {"alpha_resolved", a.resolved_alpha()},
                {"steps", a.steps},
                {"restarts", a.restarts},
                {"random_init", a.random_init},
                {"clip_min", a.clip.lo},
                {"clip_max", a.clip.hi}};
}

inline AttackConfig attack_from_json(const json& j) {
    AttackConfig a;
    if (j.contains("norm")) a.norm = norm_from_name(j.at("norm").get<std::string>());
    get_if_present(j, "epsilon", a.epsilon);
    get_if_present(j, "alpha", a.alpha);
    if (j.contains("alpha_units"))
        a.alpha_units = alpha_units_from(j.at("alpha_units").get<std::string>());
    get_if_present(j, "steps", a.steps);
    get_if_present(j, "restarts", a.restarts);
    get_if_present(j, "random_init", a.random_init);
    get_if_present(j, "clip_min", a.clip.lo);
    get_if_present(j, "clip_max", a.clip.hi);
    return a;
}

inline json train_to_json(const TrainConfig& t) {
    return json{{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"lr", t.lr},
                {"lr_drop_factor", t.lr_drop_factor},
                {"lr_drop_period", t.lr_drop_period},
                {"weight_decay", t.weight_decay},
                {"momentum", t.momentum},
                {"mode", mode_name(t.mode)},
                {"seed", t.seed},
                {"attack_bn_train_mode", t.attack_bn_train_mode},
                {"eval_samples_per_epoch", t.eval_samples_per_epoch},
                {"attack", attack_to_json(t.attack)}};
}

inline TrainConfig train_from_json(const json& j) {
    TrainConfig t;
    get_if_present(j, "epochs", t.epochs);
    get_if_present(j, "batch_size", t.batch_size);
    get_if_present(j, "lr", t.lr);
    get_if_present(j, "lr_drop_factor", t.lr_drop_factor);
    get_if_present(j, "lr_drop_period", t.lr_drop_period);
    get_if_present(j, "weight_decay", t.weight_decay);
    get_if_present(j, "momentum", t.momentum);
    if (j.contains("mode")) t.mode = mode_from(j.at("mode").get<std::string>());
    get_if_present(j, "seed", t.seed);
    get_if_present(j, "attack_bn_train_mode", t.attack_bn_train_mode);
    get_if_present(j, "eval_samples_per_epoch", t.eval_samples_per_epoch);
    if (j.contains("attack")) t.attack = attack_from_json(j.at("attack"));
    return t;
}

inline json arch_to_json(const ArchSpec& a) {
    return json{{"name", a.name},          {"widths", a.widths}, {"in_channels", a.in_channels},
                {"in_h", a.in_h},          {"in_w", a.in_w},     {"classes", a.classes}};
}

inline ArchSpec arch_from_json(const json& j) {
    ArchSpec a;
    get_if_present(j, "name", a.name);
    get_if_present(j, "widths", a.widths);
    get_if_present(j, "in_channels", a.in_channels);
    get_if_present(j, "in_h", a.in_h);
    get_if_present(j, "in_w", a.in_w);
    get_if_present(j, "classes", a.classes);
    return a;
}

inline json dataset_to_json(const DatasetSpec& d) {
    return json{{"name", d.name},
                {"format", d.format},
                {"dir", d.dir},
                {"train_files", d.train_files},
                {"test_files", d.test_files},
                {"train_images", d.train_images},
                {"train_labels", d.train_labels},
                {"test_images", d.test_images},
                {"test_labels", d.test_labels},
                {"synth_train", d.synth_train},
                {"synth_test", d.synth_test},
                {"synth_seed", d.synth_seed},
                {"train_subset", d.train_subset},
                {"eval_subset", d.eval_subset},
                {"subset_seed", d.subset_seed}};
}

inline DatasetSpec dataset_from_json(const json& j) {
    DatasetSpec d;
    get_if_present(j, "name", d.name);
    get_if_present(j, "format", d.format);
    get_if_present(j, "dir", d.dir);
    get_if_present(j, "train_files", d.train_files);
    get_if_present(j, "test_files", d.test_files);
    get_if_present(j, "train_images", d.train_images);
    get_if_present(j, "train_labels", d.train_labels);
    get_if_present(j, "test_images", d.test_images);
    get_if_present(j, "test_labels", d.test_labels);
    get_if_present(j, "synth_train", d.synth_train);
    get_if_present(j, "synth_test", d.synth_test);
    get_if_present(j, "synth_seed", d.synth_seed);
    get_if_present(j, "train_subset", d.train_subset);
    get_if_present(j, "eval_subset", d.eval_subset);
    get_if_present(j, "subset_seed", d.subset_seed);
    return d;
}

inline json probes_to_json(const ProbeConfig& p) {
    return json{{"tau_act", p.tau_act},
                {"tau_dens", p.tau_dens},
                {"tau_sim", p.tau_sim},
                {"redundancy_mode", redundancy_mode_name(p.redundancy_mode)},
                {"contour_thicknesses", p.contour_thicknesses},
                {"bias_pixel_average", p.bias_pixel_average},
                {"bias_grid", p.bias_grid},
                {"grid_policy", grid_policy_name(p.grid_policy)},
                {"dump_similarity_max", p.dump_similarity_max},
                {"activity", p.activity},
                {"redundancy", p.redundancy},
                {"head_retrain", p.head_retrain},
                {"bias", p.bias}};
}

inline ProbeConfig probes_from_json(const json& j) {
    ProbeConfig p;
    get_if_present(j, "tau_act", p.tau_act);
    get_if_present(j, "tau_dens", p.tau_dens);
    get_if_present(j, "tau_sim", p.tau_sim);
    if (j.contains("redundancy_mode"))
        p.redundancy_mode = redundancy_mode_from(j.at("redundancy_mode").get<std::string>());
    get_if_present(j, "contour_thicknesses", p.contour_thicknesses);
    get_if_present(j, "bias_pixel_average", p.bias_pixel_average);
    get_if_present(j, "bias_grid", p.bias_grid);
    if (j.contains("grid_policy"))
        p.grid_policy = grid_policy_from(j.at("grid_policy").get<std::string>());
    get_if_present(j, "dump_similarity_max", p.dump_similarity_max);
    get_if_present(j, "activity", p.activity);
    get_if_present(j, "redundancy", p.redundancy);
    get_if_present(j, "head_retrain", p.head_retrain);
    get_if_present(j, "bias", p.bias);
    return p;
}

inline json head_retrain_cfg_to_json(const HeadRetrainConfig& h) {
    return json{{"epochs", h.epochs},
                {"batch_size", h.batch_size},
                {"lr", h.lr},
                {"lr_drop_factor", h.lr_drop_factor},
                {"lr_drop_period", h.lr_drop_period},
                {"weight_decay", h.weight_decay},
                {"momentum", h.momentum},
                {"seed", h.seed}};
}

inline HeadRetrainConfig head_retrain_cfg_from_json(const json& j) {
    HeadRetrainConfig h;
    get_if_present(j, "epochs", h.epochs);
    get_if_present(j, "batch_size", h.batch_size);
    get_if_present(j, "lr", h.lr);
    get_if_present(j, "lr_drop_factor", h.lr_drop_factor);
    get_if_present(j, "lr_drop_period", h.lr_drop_period);
    get_if_present(j, "weight_decay", h.weight_decay);
    get_if_present(j, "momentum", h.momentum);
    get_if_present(j, "seed", h.seed);
    return h;
}

inline json config_to_json_obj(const ExperimentConfig& cfg) {
    return json{{"dataset", dataset_to_json(cfg.dataset)},
                {"arch", arch_to_json(cfg.arch)},
                {"train", train_to_json(cfg.train)},
                {"attack_eval", attack_to_json(cfg.attack_eval)},
                {"attack_eval_matches_train", cfg.attack_eval_matches_train},
                {"probes", probes_to_json(cfg.probes)},
                {"head_retrain", head_retrain_cfg_to_json(cfg.head_retrain)},
                {"eps_grid", cfg.eps_grid},
                {"output_dir", cfg.output_dir}};
}

inline ExperimentConfig config_from_json_obj(const json& j) {
    ExperimentConfig cfg;
    if (j.contains("dataset")) cfg.dataset = dataset_from_json(j.at("dataset"));
    if (j.contains("arch")) cfg.arch = arch_from_json(j.at("arch"));
    if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
    if (j.contains("attack_eval")) cfg.attack_eval = attack_from_json(j.at("attack_eval"));
    get_if_present(j, "attack_eval_matches_train", cfg.attack_eval_matches_train);
    if (j.contains("probes")) cfg.probes = probes_from_json(j.at("probes"));
    if (j.contains("head_retrain"))
        cfg.head_retrain = head_retrain_cfg_from_json(j.at("head_retrain"));
    get_if_present(j, "eps_grid", cfg.eps_grid);
    get_if_present(j, "output_dir", cfg.output_dir);
    return cfg;
}

// --- probe summaries ----------------------------------------------------------

inline json activity_to_json(const ActivitySummary& s) {
    json blocks = json::array();
    for (const auto& b : s.blocks) {
        blocks.push_back(json{{"block", b.block},
                              {"channels", b.channels},
                              {"always_dense", b.always_dense},
                              {"mean_count", b.mean_count()},
                              {"sd_count", b.sd_count()},
                              {"dense_hits", b.dense_hits},
                              {"per_sample_counts", b.per_sample_counts}});
    }
    return json{{"tau_act", s.thresholds.tau_act},
                {"tau_dens", s.thresholds.tau_dens},
                {"samples", s.samples},
                {"blocks", blocks}};
}

inline ActivitySummary activity_from_json(const json& j) {
    ActivitySummary s;
    s.thresholds.tau_act = j.at("tau_act").get<double>();
    s.thresholds.tau_dens = j.at("tau_dens").get<double>();
    s.samples = j.at("samples").get<std::int64_t>();
    for (const auto& jb : j.at("blocks")) {
        BlockActivity b;
        b.block = jb.at("block").get<int>();
        b.channels = jb.at("channels").get<int>();
        b.always_dense = jb.at("always_dense").get<std::int64_t>();
        b.dense_hits = jb.at("dense_hits").get<std::vector<std::int64_t>>();
        b.per_sample_counts = jb.at("per_sample_counts").get<std::vector<int>>();
        b.samples = s.samples;
        s.blocks.push_back(std::move(b));
    }
    return s;
}

inline json redundancy_to_json(const RedundancySummary& s) {
    json blocks = json::array();
    for (const auto& b : s.blocks) {
        json jb{{"block", b.block},
                {"channels", b.channels},
                {"samples", b.samples},
                {"mean_active", b.mean_active},
                {"mean_clusters", b.mean_clusters},
                {"mean_redundant", b.mean_redundant},
                {"similarity_defined", b.similarity_defined}};
        if (b.mean_similarity) jb["mean_similarity"] = *b.mean_similarity;
        blocks.push_back(std::move(jb));
    }
    json out{{"tau_act", s.tau_act},
             {"tau_sim", s.tau_sim},
             {"mode", redundancy_mode_name(s.mode)},
             {"blocks", blocks}};
    if (!s.sampled_matrices.empty()) {
        json mats = json::array();
        for (const auto& m : s.sampled_matrices)
            mats.push_back(json{{"block", m.block}, {"n", m.n}, {"s", m.s}});
        out["sampled_matrices"] = mats;
    }
    return out;
}

inline RedundancySummary redundancy_from_json(const json& j) {
    RedundancySummary s;
    s.tau_act = j.at("tau_act").get<double>();
    s.tau_sim = j.at("tau_sim").get<double>();
    s.mode = redundancy_mode_from(j.at("mode").get<std::string>());
    for (const auto& jb : j.at("blocks")) {
        BlockRedundancySummary b;
        b.block = jb.at("block").get<int>();
        b.channels = jb.at("channels").get<int>();
        b.samples = jb.at("samples").get<std::int64_t>();
        b.mean_active = jb.at("mean_active").get<double>();
        b.mean_clusters = jb.at("mean_clusters").get<double>();
        b.mean_redundant = jb.at("mean_redundant").get<double>();
        b.similarity_defined = jb.at("similarity_defined").get<std::int64_t>();
        if (jb.contains("mean_similarity")) b.mean_similarity = jb.at("mean_similarity").get<double>();
        s.blocks.push_back(std::move(b));
    }
    if (j.contains("sampled_matrices")) {
        for (const auto& jm : j.at("sampled_matrices")) {
            SimilarityMatrix m;
            m.block = jm.at("block").get<int>();
            m.n = jm.at("n").get<int>();
            m.s = jm.at("s").get<std::vector<double>>();
            s.sampled_matrices.push_back(std::move(m));
        }
    }
    return s;
}

inline json head_retrain_to_json(const HeadRetrainReport& r) {
    return json{{"eps_tr", r.eps_tr},
                {"natural_original", r.natural_original},
                {"natural_retrained", r.natural_retrained},
                {"robust_original", r.robust_original},
                {"robust_retrained", r.robust_retrained},
                {"attack", attack_to_json(r.attack)},
                {"retrain", head_retrain_cfg_to_json(r.retrain)}};
}

inline HeadRetrainReport head_retrain_from_json(const json& j) {
    HeadRetrainReport r;
    r.eps_tr = j.at("eps_tr").get<double>();
    r.natural_original = j.at("natural_original").get<double>();
    r.natural_retrained = j.at("natural_retrained").get<double>();
    r.robust_original = j.at("robust_original").get<double>();
    r.robust_retrained = j.at("robust_retrained").get<double>();
    r.attack = attack_from_json(j.at("attack"));
    r.retrain = head_retrain_cfg_from_json(j.at("retrain"));
    return r;
}

inline json bias_to_json(const BiasReport& r) {
    json contours = json::array();
    for (const auto& row : r.contours) {
        contours.push_back(json{{"thickness", row.thickness},
                                {"mean_drop", row.mean_drop},
                                {"sd_drop", row.sd_drop},
                                {"per_color_drop", row.per_color_drop},
                                {"per_color_accuracy", row.per_color_accuracy}});
    }
    json out{{"clean_accuracy", r.clean_accuracy},
             {"contours", contours},
             {"grid_policy", grid_policy_name(r.grid_policy)}};
    if (r.pixel_average_accuracy) out["pixel_average_accuracy"] = *r.pixel_average_accuracy;
    if (r.grid_accuracy) out["grid_accuracy"] = *r.grid_accuracy;
    return out;
}

inline BiasReport bias_from_json(const json& j) {
    BiasReport r;
    r.clean_accuracy = j.at("clean_accuracy").get<double>();
    r.grid_policy = grid_policy_from(j.at("grid_policy").get<std::string>());
    if (j.contains("pixel_average_accuracy"))
        r.pixel_average_accuracy = j.at("pixel_average_accuracy").get<double>();
    if (j.contains("grid_accuracy")) r.grid_accuracy = j.at("grid_accuracy").get<double>();
    for (const auto& jr : j.at("contours")) {
        BiasContourRow row;
        row.thickness = jr.at("thickness").get<int>();
        row.mean_drop = jr.at("mean_drop").get<double>();
        row.sd_drop = jr.at("sd_drop").get<double>();
        row.per_color_drop = jr.at("per_color_drop").get<std::array<double, 4>>();
        row.per_color_accuracy = jr.at("per_color_accuracy").get<std::array<double, 4>>();
        r.contours.push_back(row);
    }
    return r;
}

inline json metrics_to_json(const MetricsLog& m) {
    json epochs = json::array();
    for (const auto& e : m.epochs) {
        json je{{"epoch", e.epoch},
                {"train_loss", e.train_loss},
                {"natural_acc", e.natural_acc},
                {"lr", e.lr},
                {"wall_seconds", e.wall_seconds}};
        if (e.robust_acc) je["robust_acc"] = *e.robust_acc;
        epochs.push_back(std::move(je));
    }
    return json{{"epochs", epochs}};
}

inline MetricsLog metrics_from_json(const json& j) {
    MetricsLog m;
    for (const auto& je : j.at("epochs")) {
        EpochMetrics e;
        e.epoch = je.at("epoch").get<int>();
        e.train_loss = je.at("train_loss").get<double>();
        e.natural_acc = je.at("natural_acc").get<double>();
        e.lr = je.at("lr").get<double>();
        e.wall_seconds = je.at("wall_seconds").get<double>();
        if (je.contains("robust_acc")) e.robust_acc = je.at("robust_acc").get<double>();
        m.epochs.push_back(e);
    }
    return m;
}

}  // namespace atlab::detail
