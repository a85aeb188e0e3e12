#include "atlab/activity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "atlab/errors.hpp"
#include "atlab/tape.hpp"

namespace atlab {

void ActivityThresholds::validate() const {
    if (tau_act < 0.0) throw ConfigError("tau_act must be >= 0");
    if (tau_dens <= 0.0 || tau_dens > 1.0) throw ConfigError("tau_dens must be in (0, 1]");
}

std::vector<bool> densely_active_mask(const FeatureMapView& maps, const ActivityThresholds& th) {
    th.validate();
    std::vector<bool> mask(static_cast<std::size_t>(maps.channels));
    const double required = th.tau_dens * maps.spatial;
    for (int i = 0; i < maps.channels; ++i) {
        const float* row = maps.row(i);
        int hits = 0;
        for (int j = 0; j < maps.spatial; ++j)
            if (row[j] > th.tau_act) ++hits;
        mask[static_cast<std::size_t>(i)] = static_cast<double>(hits) >= required;
    }
    return mask;
}

ActiveSelection active_indices(const FeatureMapView& maps, double tau_act) {
    if (tau_act < 0.0) throw ConfigError("tau_act must be >= 0");
    ActiveSelection sel;
    sel.spatial = maps.spatial;
    for (int i = 0; i < maps.channels; ++i) {
        const float* row = maps.row(i);
        bool active = false;
        for (int j = 0; j < maps.spatial; ++j) {
            if (row[j] > tau_act) {
                active = true;
                break;
            }
        }
        if (active) sel.indices.push_back(i);
    }
    sel.rows.reserve(sel.indices.size() * static_cast<std::size_t>(maps.spatial));
    for (int i : sel.indices)
        sel.rows.insert(sel.rows.end(), maps.row(i), maps.row(i) + maps.spatial);
    return sel;
}

std::vector<double> BlockActivity::frequencies() const {
    std::vector<double> out(dense_hits.size());
    for (std::size_t i = 0; i < dense_hits.size(); ++i)
        out[i] = samples > 0 ? static_cast<double>(dense_hits[i]) / static_cast<double>(samples) : 0.0;
    return out;
}

double BlockActivity::mean_count() const {
    if (per_sample_counts.empty()) return 0.0;
    double s = 0.0;
    for (int c : per_sample_counts) s += c;
    return s / static_cast<double>(per_sample_counts.size());
}

double BlockActivity::sd_count() const {
    if (per_sample_counts.empty()) return 0.0;
    const double mu = mean_count();
    double sq = 0.0;
    for (int c : per_sample_counts) {
        const double d = c - mu;
        sq += d * d;
    }
    return std::sqrt(sq / static_cast<double>(per_sample_counts.size()));
}

ActivityAccumulator::ActivityAccumulator(int block, int channels, ActivityThresholds thresholds)
    : thresholds_(thresholds) {
    thresholds_.validate();
    acc_.block = block;
    acc_.channels = channels;
    acc_.dense_hits.assign(static_cast<std::size_t>(channels), 0);
}

void ActivityAccumulator::add_sample(const FeatureMapView& maps) {
    if (maps.channels != acc_.channels)
        throw ShapeError("activity accumulator: channel count changed mid-stream");
    const auto mask = densely_active_mask(maps, thresholds_);
    int dense = 0;
    for (int c = 0; c < acc_.channels; ++c) {
        if (mask[static_cast<std::size_t>(c)]) {
            ++dense;
            ++acc_.dense_hits[static_cast<std::size_t>(c)];
        }
    }
    acc_.per_sample_counts.push_back(dense);
    acc_.active_sets.push_back(active_indices(maps, thresholds_.tau_act).indices);
    ++acc_.samples;
}

BlockActivity ActivityAccumulator::finish() const {
    BlockActivity out = acc_;
    out.always_dense = std::count(out.dense_hits.begin(), out.dense_hits.end(), out.samples);
    return out;
}

ActivitySummary aggregate_activity(BlockTappedModel& model, const Dataset& data,
                                   const ActivityThresholds& th, int batch_size) {
    th.validate();
    if (data.size() == 0) throw DataError("aggregate_activity: dataset is empty");

    ActivitySummary summary;
    summary.thresholds = th;

    std::vector<std::int64_t> idx(static_cast<std::size_t>(data.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<ActivityAccumulator> accs;

    for (std::int64_t start = 0; start < data.size(); start += batch_size) {
        const int count = static_cast<int>(std::min<std::int64_t>(batch_size, data.size() - start));
        Tensor x = gather_batch(data, idx.data() + start, count);
        Tape tape;
        std::vector<BlockActivation> taps;
        model.forward_with_taps(tape, x, /*train=*/false, taps);

        if (accs.empty()) {
            for (const auto& tap : taps) accs.emplace_back(tap.block, tap.channels(), th);
        }
        for (std::size_t b = 0; b < taps.size(); ++b) {
            for (int i = 0; i < count; ++i)
                accs[b].add_sample(
                    FeatureMapView{taps[b].channels(), taps[b].spatial(), taps[b].sample_view(i)});
        }
    }

    summary.samples = data.size();
    for (const auto& acc : accs) summary.blocks.push_back(acc.finish());
    return summary;
}

}  // namespace atlab
