#include "atlab/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "atlab/errors.hpp"
#include "json_conv.hpp"

namespace atlab {

using json = nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("report: cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw DataError("report: write failed for '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("report: cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string source_comment(const GridEntryReport& entry, std::uint64_t cfg_hash) {
    return "# source=" + entry.checkpoint_file + " arch=" + hex64(entry.arch_hash) +
           " config=" + hex64(cfg_hash) + "\n";
}

std::string metrics_csv(const GridEntryReport& entry, std::uint64_t cfg_hash) {
    std::string out = source_comment(entry, cfg_hash);
    out += "epoch,train_loss,natural_acc,robust_acc,lr,wall_seconds\n";
    for (const auto& e : entry.metrics.epochs) {
        out += std::to_string(e.epoch) + "," + format_general(e.train_loss) + "," +
               format_fixed(e.natural_acc, 2) + "," +
               (e.robust_acc ? format_fixed(*e.robust_acc, 2) : std::string()) + "," +
               format_general(e.lr) + "," + format_fixed(e.wall_seconds, 3) + "\n";
    }
    return out;
}

std::string activity_csv(const GridEntryReport& entry, std::uint64_t cfg_hash) {
    std::string out = source_comment(entry, cfg_hash);
    out += "block,channels,always_dense,mean_count,sd_count\n";
    for (const auto& b : entry.activity->blocks) {
        out += std::to_string(b.block) + "," + std::to_string(b.channels) + "," +
               std::to_string(b.always_dense) + "," + format_general(b.mean_count()) + "," +
               format_general(b.sd_count()) + "\n";
    }
    return out;
}

std::string redundancy_csv(const GridEntryReport& entry, std::uint64_t cfg_hash) {
    std::string out = source_comment(entry, cfg_hash);
    out += "block,channels,active,clusters,redundant,mean_similarity\n";
    for (const auto& b : entry.redundancy->blocks) {
        out += std::to_string(b.block) + "," + std::to_string(b.channels) + "," +
               format_general(b.mean_active) + "," + format_general(b.mean_clusters) + "," +
               format_general(b.mean_redundant) + "," +
               (b.mean_similarity ? format_general(*b.mean_similarity) : std::string()) + "\n";
    }
    return out;
}

std::string head_retrain_csv(const GridEntryReport& entry, std::uint64_t cfg_hash) {
    const auto& r = *entry.head_retrain;
    std::string out = source_comment(entry, cfg_hash);
    out += "metric,original,retrained,delta\n";
    out += "natural_accuracy," + format_fixed(r.natural_original, 2) + "," +
           format_fixed(r.natural_retrained, 2) + "," + format_delta(r.natural_delta()) + "\n";
    out += "robust_accuracy," + format_fixed(r.robust_original, 2) + "," +
           format_fixed(r.robust_retrained, 2) + "," + format_delta(r.robust_delta()) + "\n";
    return out;
}

std::string bias_csv(const GridEntryReport& entry, std::uint64_t cfg_hash) {
    const auto& r = *entry.bias;
    std::string out = source_comment(entry, cfg_hash);
    out += "transform,thickness,color,accuracy,drop\n";
    out += "clean,,," + format_fixed(r.clean_accuracy, 2) + ",\n";
    if (r.pixel_average_accuracy)
        out += "pixel_average,,," + format_fixed(*r.pixel_average_accuracy, 2) + "," +
               format_fixed(r.pixel_average_drop(), 2) + "\n";
    static constexpr const char* kColors[4] = {"white", "red", "green", "blue"};
    for (const auto& row : r.contours) {
        for (int c = 0; c < 4; ++c) {
            out += "contour," + std::to_string(row.thickness) + "," + kColors[c] + "," +
                   format_fixed(row.per_color_accuracy[static_cast<std::size_t>(c)], 2) + "," +
                   format_fixed(row.per_color_drop[static_cast<std::size_t>(c)], 2) + "\n";
        }
    }
    if (r.grid_accuracy)
        out += std::string("grid_tile,,,") + format_fixed(*r.grid_accuracy, 2) + "," +
               format_fixed(r.grid_drop(), 2) + "\n";
    return out;
}

json entry_to_json(const GridEntryReport& e) {
    json j{{"eps_tr", e.eps_tr},
           {"checkpoint", e.checkpoint_file},
           {"arch_hash", hex64(e.arch_hash)},
           {"natural_acc", e.natural_acc},
           {"eval_attack", detail::attack_to_json(e.eval_attack)},
           {"metrics", detail::metrics_to_json(e.metrics)},
           {"error", e.error}};
    if (e.robust_acc) j["robust_acc"] = *e.robust_acc;
    if (e.activity) j["activity"] = detail::activity_to_json(*e.activity);
    if (e.redundancy) j["redundancy"] = detail::redundancy_to_json(*e.redundancy);
    if (e.head_retrain) j["head_retrain"] = detail::head_retrain_to_json(*e.head_retrain);
    if (e.bias) j["bias"] = detail::bias_to_json(*e.bias);
    return j;
}

GridEntryReport entry_from_json(const json& j) {
    GridEntryReport e;
    e.eps_tr = j.at("eps_tr").get<double>();
    e.checkpoint_file = j.at("checkpoint").get<std::string>();
    e.arch_hash = std::stoull(j.at("arch_hash").get<std::string>(), nullptr, 16);
    e.natural_acc = j.at("natural_acc").get<double>();
    e.eval_attack = detail::attack_from_json(j.at("eval_attack"));
    e.metrics = detail::metrics_from_json(j.at("metrics"));
    e.error = j.at("error").get<std::string>();
    if (j.contains("robust_acc")) e.robust_acc = j.at("robust_acc").get<double>();
    if (j.contains("activity")) e.activity = detail::activity_from_json(j.at("activity"));
    if (j.contains("redundancy")) e.redundancy = detail::redundancy_from_json(j.at("redundancy"));
    if (j.contains("head_retrain"))
        e.head_retrain = detail::head_retrain_from_json(j.at("head_retrain"));
    if (j.contains("bias")) e.bias = detail::bias_from_json(j.at("bias"));
    return e;
}

}  // namespace

std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string format_delta(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%+.2f", v);
    return buf;
}

std::string format_eps(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string format_general(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::filesystem::path entry_dir(const std::filesystem::path& run_dir, double eps_tr) {
    return run_dir / ("eps_" + format_eps(eps_tr));
}

void write_entry_files_at(const std::filesystem::path& dir, const GridEntryReport& entry,
                          std::uint64_t cfg_hash) {
    write_text(dir / "entry.json", entry_to_json(entry).dump(2) + "\n");
    if (!entry.metrics.epochs.empty()) write_text(dir / "metrics.csv", metrics_csv(entry, cfg_hash));
    if (entry.activity) write_text(dir / "activity.csv", activity_csv(entry, cfg_hash));
    if (entry.redundancy) write_text(dir / "redundancy.csv", redundancy_csv(entry, cfg_hash));
    if (entry.redundancy) {
        for (const auto& m : entry.redundancy->sampled_matrices) {
            std::string out = source_comment(entry, cfg_hash);
            for (int i = 0; i < m.n; ++i) {
                for (int j = 0; j < m.n; ++j)
                    out += (j ? "," : "") + format_general(m.at(i, j));
                out += "\n";
            }
            write_text(dir / ("similarity_block" + std::to_string(m.block) + ".csv"), out);
        }
    }
    if (entry.head_retrain)
        write_text(dir / "head_retrain.csv", head_retrain_csv(entry, cfg_hash));
    if (entry.bias) write_text(dir / "bias.csv", bias_csv(entry, cfg_hash));
}

void write_entry_files(const std::filesystem::path& run_dir, const GridEntryReport& entry,
                       std::uint64_t cfg_hash) {
    write_entry_files_at(entry_dir(run_dir, entry.eps_tr), entry, cfg_hash);
}

GridEntryReport read_entry_json_at(const std::filesystem::path& dir) {
    const auto path = dir / "entry.json";
    try {
        return entry_from_json(json::parse(read_text(path)));
    } catch (const json::exception& e) {
        throw DataError("report: malformed '" + path.string() + "': " + e.what());
    }
}

bool entry_json_exists(const std::filesystem::path& dir) {
    return std::filesystem::exists(dir / "entry.json");
}

GridEntryReport read_entry_json(const std::filesystem::path& run_dir, double eps_tr) {
    return read_entry_json_at(entry_dir(run_dir, eps_tr));
}

void write_bundle_files(const std::filesystem::path& run_dir, const ReportBundle& bundle) {
    // run-level provenance
    write_text(run_dir / "config.json", config_to_json(bundle.config));
    json summary{{"config_hash", hex64(bundle.config_hash)}, {"entries", json::array()}};
    for (const auto& e : bundle.entries) {
        summary["entries"].push_back(json{{"eps_tr", e.eps_tr},
                                          {"dir", "eps_" + format_eps(e.eps_tr)},
                                          {"error", e.error}});
    }
    write_text(run_dir / "summary.json", summary.dump(2) + "\n");

    // plot data keyed by (block, eps_tr)
    std::string nk = "eps_tr,block,channels,always_dense\n";
    std::string red = "eps_tr,block,active,clusters,redundant\n";
    std::string sim = "eps_tr,block,mean_similarity\n";
    std::string contour = "eps_tr,thickness,mean_drop,sd_drop\n";
    std::string head = "eps_tr,metric,original,retrained,delta\n";
    std::string pixavg = "eps_tr,clean_accuracy,pixel_average_accuracy,drop\n";
    bool any_nk = false, any_red = false, any_sim = false, any_contour = false, any_head = false,
         any_pixavg = false;

    for (const auto& e : bundle.entries) {
        const std::string eps = format_eps(e.eps_tr);
        if (e.activity) {
            for (const auto& b : e.activity->blocks) {
                nk += eps + "," + std::to_string(b.block) + "," + std::to_string(b.channels) + "," +
                      std::to_string(b.always_dense) + "\n";
                any_nk = true;
            }
        }
        if (e.redundancy) {
            for (const auto& b : e.redundancy->blocks) {
                red += eps + "," + std::to_string(b.block) + "," + format_general(b.mean_active) +
                       "," + format_general(b.mean_clusters) + "," +
                       format_general(b.mean_redundant) + "\n";
                any_red = true;
                if (b.mean_similarity) {
                    sim += eps + "," + std::to_string(b.block) + "," +
                           format_general(*b.mean_similarity) + "\n";
                    any_sim = true;
                }
            }
        }
        if (e.bias) {
            for (const auto& row : e.bias->contours) {
                contour += eps + "," + std::to_string(row.thickness) + "," +
                           format_general(row.mean_drop) + "," + format_general(row.sd_drop) + "\n";
                any_contour = true;
            }
            if (e.bias->pixel_average_accuracy) {
                pixavg += eps + "," + format_fixed(e.bias->clean_accuracy, 2) + "," +
                          format_fixed(*e.bias->pixel_average_accuracy, 2) + "," +
                          format_fixed(e.bias->pixel_average_drop(), 2) + "\n";
                any_pixavg = true;
            }
        }
        if (e.head_retrain) {
            const auto& r = *e.head_retrain;
            head += eps + ",natural_accuracy," + format_fixed(r.natural_original, 2) + "," +
                    format_fixed(r.natural_retrained, 2) + "," + format_delta(r.natural_delta()) +
                    "\n";
            head += eps + ",robust_accuracy," + format_fixed(r.robust_original, 2) + "," +
                    format_fixed(r.robust_retrained, 2) + "," + format_delta(r.robust_delta()) +
                    "\n";
            any_head = true;
        }
    }

    if (any_nk) write_text(run_dir / "plots" / "always_dense.csv", nk);
    if (any_red) write_text(run_dir / "plots" / "redundant_maps.csv", red);
    if (any_sim) write_text(run_dir / "plots" / "avg_similarity.csv", sim);
    if (any_contour) write_text(run_dir / "plots" / "contour_drop.csv", contour);
    if (any_head) write_text(run_dir / "tables" / "head_retrain.csv", head);
    if (any_pixavg) write_text(run_dir / "tables" / "pixel_average.csv", pixavg);

    for (const auto& e : bundle.entries) write_entry_files(run_dir, e, bundle.config_hash);
}

ReportBundle read_bundle(const std::filesystem::path& run_dir) {
    ReportBundle bundle;
    bundle.config = load_config(run_dir / "config.json");
    bundle.config_hash = config_hash(bundle.config);
    json summary;
    try {
        summary = json::parse(read_text(run_dir / "summary.json"));
    } catch (const json::exception& e) {
        throw DataError(std::string("report: malformed summary.json: ") + e.what());
    }
    const std::string stored_hash = summary.at("config_hash").get<std::string>();
    if (stored_hash != hex64(bundle.config_hash))
        throw DataError("report: config.json does not match the hash recorded in summary.json");
    for (const auto& je : summary.at("entries")) {
        const double eps = je.at("eps_tr").get<double>();
        bundle.entries.push_back(read_entry_json(run_dir, eps));
    }
    return bundle;
}

}  // namespace atlab
