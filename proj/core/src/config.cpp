#include "atlab/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "atlab/errors.hpp"
#include "atlab/rng.hpp"
#include "json_conv.hpp"

namespace atlab {

using json = nlohmann::json;

namespace {

std::filesystem::path resolve_data_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    if (p.is_relative()) {
        if (const char* env = std::getenv("ATLAB_DATA_DIR")) return std::filesystem::path(env) / p;
    }
    return p;
}

}  // namespace

void ExperimentConfig::validate() const {
    train.validate(/*strict=*/false);
    attack_eval.validate();
    if (eps_grid.empty()) throw ConfigError("config: eps_grid must not be empty");
    for (double e : eps_grid)
        if (e < 0.0) throw ConfigError("config: eps_grid entries must be >= 0");
    if (output_dir.empty()) throw ConfigError("config: output_dir must not be empty");
    ActivityThresholds th{probes.tau_act, probes.tau_dens};
    th.validate();
    if (probes.tau_sim < 0.0 || probes.tau_sim > 1.0)
        throw ConfigError("config: tau_sim must be in [0, 1]");
    if (dataset.format != "cifar10" && dataset.format != "idx" && dataset.format != "synthetic")
        throw ConfigError("config: unknown dataset format '" + dataset.format + "'");
    const bool natural = train.mode == TrainMode::natural;
    if (natural != (train.attack.epsilon == 0.0))
        throw ConfigError(
            "config: train.mode must be natural exactly when train.attack.epsilon is 0");
}

ExperimentConfig parse_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    try {
        return detail::config_from_json_obj(j);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad field: ") + e.what());
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_json(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
    return detail::config_to_json_obj(cfg).dump(2) + "\n";
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    const std::string s = config_to_json(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

ExperimentConfig apply_overrides(const ExperimentConfig& cfg,
                                 const std::vector<std::string>& overrides) {
    json j = detail::config_to_json_obj(cfg);
    for (const std::string& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override '" + ov + "' is not of the form section.key=value");
        std::string path = ov.substr(0, eq);
        const std::string value = ov.substr(eq + 1);
        for (char& c : path)
            if (c == '.') c = '/';
        json parsed;
        try {
            parsed = json::parse(value);
        } catch (const json::exception&) {
            parsed = value;  // bare strings stay strings
        }
        try {
            j[json::json_pointer("/" + path)] = parsed;
        } catch (const json::exception& e) {
            throw ConfigError("override '" + ov + "' failed: " + e.what());
        }
    }
    try {
        return detail::config_from_json_obj(j);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad field after overrides: ") + e.what());
    }
}

Dataset load_dataset_split(const DatasetSpec& spec, bool train_split) {
    Dataset full;
    if (spec.format == "synthetic") {
        const std::int64_t n = train_split ? spec.synth_train : spec.synth_test;
        full = make_synthetic(n, derive_seed(spec.synth_seed, train_split ? 1 : 2));
    } else if (spec.format == "cifar10") {
        const auto& names = train_split ? spec.train_files : spec.test_files;
        if (names.empty())
            throw ConfigError(std::string("dataset: no ") + (train_split ? "train" : "test") +
                              " files configured");
        std::vector<std::filesystem::path> files;
        const auto base = resolve_data_dir(spec.dir);
        for (const auto& f : names) files.push_back(base / f);
        full = load_cifar10_bin(files);
    } else if (spec.format == "idx") {
        const auto base = resolve_data_dir(spec.dir);
        full = train_split ? load_idx(base / spec.train_images, base / spec.train_labels)
                           : load_idx(base / spec.test_images, base / spec.test_labels);
    } else {
        throw ConfigError("dataset: unknown format '" + spec.format + "'");
    }

    const std::int64_t want = train_split ? spec.train_subset : spec.eval_subset;
    if (want > 0 && want < full.size()) {
        const auto idx =
            subset_indices(full.size(), want, derive_seed(spec.subset_seed, train_split ? 11 : 22));
        return take_subset(full, idx);
    }
    return full;
}

TrainConfig train_config_for_eps(const ExperimentConfig& cfg, double eps_tr) {
    TrainConfig t = cfg.train;
    t.attack.epsilon = eps_tr;
    t.mode = eps_tr == 0.0 ? TrainMode::natural : TrainMode::adversarial;
    return t;
}

AttackConfig eval_attack_for_eps(const ExperimentConfig& cfg, double eps_tr) {
    AttackConfig a = cfg.attack_eval;
    if (cfg.attack_eval_matches_train) a.epsilon = eps_tr;
    return a;
}

}  // namespace atlab
