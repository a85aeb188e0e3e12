#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "atlab/activity.hpp"
#include "atlab/dataset.hpp"
#include "atlab/model.hpp"

namespace atlab {

// Cosine similarities between active feature maps of one sample's block.
// Symmetric with unit diagonal; entries stay in [0,1] for nonnegative rows.
struct SimilarityMatrix {
    int block = 0;
    int n = 0;
    std::vector<double> s;  // n x n row-major

    double at(int i, int j) const { return s[static_cast<std::size_t>(i) * n + j]; }
};

// Partition of active map indices into similarity clusters.
struct ClusterSet {
    std::vector<std::vector<int>> clusters;  // sorted by smallest member; members ascending
    int count() const { return static_cast<int>(clusters.size()); }
};

struct BlockRedundancy {
    int active = 0;                       // |I_+|
    int clusters = 0;                     // n_k
    int redundant = 0;                    // C_k^R: maps in clusters of size > 1
    std::optional<double> mean_off_diag;  // S̄: absent with < 2 active maps
};

// S(i,j) = <row_i, row_j> / (|row_i| |row_j|); a zero-norm row violates the
// activeness precondition and raises an error.
SimilarityMatrix cosine_matrix(const FeatureMapView& active_maps);

// Connected components of the graph with an edge wherever S(i,j) > tau_sim.
ClusterSet threshold_cluster(const SimilarityMatrix& s, double tau_sim);

// C_k^R, n_k and the off-diagonal mean. The mean is a function of S alone and
// never consults the clustering (hence independent of tau_sim).
BlockRedundancy redundancy_stats(const ClusterSet& clusters, const SimilarityMatrix& s);

enum class RedundancyMode {
    per_sample,    // per-sample stats, averaged over the dataset
    dataset_mean,  // one pass over dataset-averaged activations
};

struct BlockRedundancySummary {
    int block = 0;
    int channels = 0;
    std::int64_t samples = 0;
    double mean_active = 0.0;
    double mean_clusters = 0.0;
    double mean_redundant = 0.0;
    std::optional<double> mean_similarity;  // averaged where defined
    std::int64_t similarity_defined = 0;    // #samples with >= 2 active maps
};

struct RedundancySummary {
    double tau_act = 0.0;
    double tau_sim = 0.95;
    RedundancyMode mode = RedundancyMode::per_sample;
    std::vector<BlockRedundancySummary> blocks;
    // raw S matrices of the first sample, for blocks with at most
    // dump_similarity_max active maps (empty unless the dump was requested)
    std::vector<SimilarityMatrix> sampled_matrices;
};

RedundancySummary aggregate_redundancy(BlockTappedModel& model, const Dataset& data,
                                       double tau_act, double tau_sim,
                                       RedundancyMode mode = RedundancyMode::per_sample,
                                       int batch_size = 128, int dump_similarity_max = 0);

}  // namespace atlab
