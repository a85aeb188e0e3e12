#pragma once

#include <cstdint>
#include <vector>

#include "atlab/dataset.hpp"
#include "atlab/model.hpp"

namespace atlab {

struct ActivityThresholds {
    double tau_act = 0.0;   // activation threshold, >= 0; strict inequality
    double tau_dens = 0.95; // density level in (0, 1]

    void validate() const;
};

// View of one sample's 2-D block activations: rows are feature maps, columns
// are vectorized spatial positions.
struct FeatureMapView {
    int channels = 0;
    int spatial = 0;
    const float* data = nullptr;

    const float* row(int i) const { return data + static_cast<std::int64_t>(i) * spatial; }
};

// mask[i] = true iff at least tau_dens * spatial activations of map i exceed
// tau_act (strictly).
std::vector<bool> densely_active_mask(const FeatureMapView& maps, const ActivityThresholds& th);

// I_+ = indices of maps whose max activation exceeds tau_act, ascending, plus
// the stacked rows of exactly those maps.
struct ActiveSelection {
    std::vector<int> indices;
    std::vector<float> rows;  // |indices| x spatial
    int spatial = 0;

    FeatureMapView view() const {
        return {static_cast<int>(indices.size()), spatial, rows.data()};
    }
};
ActiveSelection active_indices(const FeatureMapView& maps, double tau_act);

struct BlockActivity {
    int block = 0;
    int channels = 0;                      // C_k
    std::vector<int> per_sample_counts;    // densely-active count per sample
    std::vector<std::int64_t> dense_hits;  // per map: #samples where densely active
    std::int64_t samples = 0;
    std::int64_t always_dense = 0;         // N_k = #{maps with dense_hits == samples}
    std::vector<std::vector<int>> active_sets;  // I_+ per sample

    std::vector<double> frequencies() const;  // dense_hits / samples
    double mean_count() const;
    double sd_count() const;  // population sd over samples
};

struct ActivitySummary {
    ActivityThresholds thresholds;
    std::int64_t samples = 0;
    std::vector<BlockActivity> blocks;
};

// Single-pass accumulator for one block: per-map running conjunction and
// dense-hit counts, so the dataset never needs to fit in memory.
class ActivityAccumulator {
public:
    ActivityAccumulator(int block, int channels, ActivityThresholds thresholds);
    void add_sample(const FeatureMapView& maps);
    const BlockActivity& stats() const { return acc_; }
    BlockActivity finish() const;  // fills N_k from the hit counts

private:
    ActivityThresholds thresholds_;
    BlockActivity acc_;
};

// Streams the dataset through the model (eval mode) and accumulates Def. 1-3
// statistics per block: per-sample densely-active counts, always-densely-
// active counts N_k, per-map activation frequencies, and active index sets.
ActivitySummary aggregate_activity(BlockTappedModel& model, const Dataset& data,
                                   const ActivityThresholds& th, int batch_size = 128);

}  // namespace atlab
