#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "atlab/latent.hpp"
#include "atlab/model.hpp"
#include "atlab/redundancy.hpp"
#include "atlab/trainer.hpp"
#include "atlab/transforms.hpp"

namespace atlab {

struct DatasetSpec {
    std::string name = "synth10";
    std::string format = "synthetic";  // "cifar10" | "idx" | "synthetic"
    std::string dir;                   // resolved against ATLAB_DATA_DIR when relative
    std::vector<std::string> train_files;  // cifar10
    std::vector<std::string> test_files;
    std::string train_images, train_labels;  // idx
    std::string test_images, test_labels;
    std::int64_t synth_train = 2000;  // synthetic
    std::int64_t synth_test = 1000;
    std::uint64_t synth_seed = 99;
    std::int64_t train_subset = 0;  // 0 = use everything
    std::int64_t eval_subset = 0;
    std::uint64_t subset_seed = 7;
};

struct ProbeConfig {
    double tau_act = 0.0;
    double tau_dens = 0.95;
    double tau_sim = 0.95;
    RedundancyMode redundancy_mode = RedundancyMode::per_sample;
    std::vector<int> contour_thicknesses = {1, 2, 3, 4};
    bool bias_pixel_average = true;
    bool bias_grid = true;
    GridPolicy grid_policy = GridPolicy::native;
    int dump_similarity_max = 0;  // dump raw S of the first sample for blocks this small
    bool activity = true;
    bool redundancy = true;
    bool head_retrain = true;
    bool bias = true;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    ArchSpec arch;
    TrainConfig train;        // grid entries override train.attack.epsilon and mode
    AttackConfig attack_eval; // 20-step protocol; epsilon follows eps_tr when matching
    bool attack_eval_matches_train = true;  // eps_te = eps_tr
    ProbeConfig probes;
    HeadRetrainConfig head_retrain;
    std::vector<double> eps_grid = {0.0, 0.5, 1.5};
    std::string output_dir = "runs/exp";

    void validate() const;
};

// JSON document <-> config. The schema is documented in the README.
ExperimentConfig parse_config_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);  // canonical: sorted keys, 2-space indent
std::uint64_t config_hash(const ExperimentConfig& cfg);

// Applies "section.key=value" overrides (CLI --set flags) onto the JSON form.
ExperimentConfig apply_overrides(const ExperimentConfig& cfg,
                                 const std::vector<std::string>& overrides);

// Loads the split named by the spec, applying the subset selection. Relative
// dirs resolve under ATLAB_DATA_DIR when that variable is set.
Dataset load_dataset_split(const DatasetSpec& spec, bool train_split);

// Per-entry training config for one grid value of eps_tr.
TrainConfig train_config_for_eps(const ExperimentConfig& cfg, double eps_tr);
AttackConfig eval_attack_for_eps(const ExperimentConfig& cfg, double eps_tr);

}  // namespace atlab
