#pragma once

#include <filesystem>
#include <functional>

#include "atlab/checkpoint.hpp"
#include "atlab/config.hpp"
#include "atlab/report.hpp"

namespace atlab {

// Progress callback: (stage, eps_tr) per started stage ("train", "probes", ...).
using StageCallback = std::function<void(const std::string& stage, double eps_tr)>;

// Trains (or reloads) one model per eps_tr grid entry, runs the enabled
// probes, and writes the full report bundle under config.output_dir.
// Completed entries (existing checkpoints) are not retrained; a failing entry
// records its diagnostic and the remaining entries still run.
ReportBundle run_experiment(const ExperimentConfig& config, const StageCallback& on_stage = {});

// Runs the probes for a single entry against an already-trained model.
GridEntryReport probe_entry(const ExperimentConfig& config, BlockTappedModel& model, double eps_tr,
                            const Dataset& train_data, const Dataset& eval_data);

}  // namespace atlab
