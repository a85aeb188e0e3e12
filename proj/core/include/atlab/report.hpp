#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "atlab/activity.hpp"
#include "atlab/config.hpp"
#include "atlab/latent.hpp"
#include "atlab/redundancy.hpp"
#include "atlab/trainer.hpp"
#include "atlab/transforms.hpp"

namespace atlab {

// Everything produced for one eps_tr grid entry.
struct GridEntryReport {
    double eps_tr = 0.0;
    std::string checkpoint_file;  // relative to the run directory
    std::uint64_t arch_hash = 0;
    MetricsLog metrics;
    double natural_acc = 0.0;
    std::optional<double> robust_acc;
    AttackConfig eval_attack;
    std::optional<ActivitySummary> activity;
    std::optional<RedundancySummary> redundancy;
    std::optional<HeadRetrainReport> head_retrain;
    std::optional<BiasReport> bias;
    std::string error;  // nonempty when this grid entry failed
};

struct ReportBundle {
    ExperimentConfig config;
    std::uint64_t config_hash = 0;
    std::vector<GridEntryReport> entries;
};

// Stable numeric formatting for CSV output (identical bytes across runs).
std::string format_fixed(double v, int decimals);
std::string format_delta(double v);  // signed, two decimals: "+0.44", "-3.88"
std::string format_eps(double v);    // shortest form: "0", "0.5", "1.5"
std::string format_general(double v);

// Per-entry artifacts under <run_dir>/eps_<eps>/: entry.json plus the derived
// CSVs (metrics, activity, redundancy, head_retrain, bias).
void write_entry_files(const std::filesystem::path& run_dir, const GridEntryReport& entry,
                       std::uint64_t cfg_hash);
GridEntryReport read_entry_json(const std::filesystem::path& run_dir, double eps_tr);

// Same, against an explicit entry directory (single-model CLI commands).
void write_entry_files_at(const std::filesystem::path& dir, const GridEntryReport& entry,
                          std::uint64_t cfg_hash);
GridEntryReport read_entry_json_at(const std::filesystem::path& dir);
bool entry_json_exists(const std::filesystem::path& dir);

// Run-level artifacts: config.json echo, summary.json, plots/ and tables/
// CSVs keyed by (block, eps_tr). Deterministic function of the bundle.
void write_bundle_files(const std::filesystem::path& run_dir, const ReportBundle& bundle);

// Rebuilds a bundle from config.json + summary.json + entry.json files.
ReportBundle read_bundle(const std::filesystem::path& run_dir);

std::filesystem::path entry_dir(const std::filesystem::path& run_dir, double eps_tr);

}  // namespace atlab
