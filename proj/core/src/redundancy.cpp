#include "atlab/redundancy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "atlab/errors.hpp"
#include "atlab/tape.hpp"

namespace atlab {

SimilarityMatrix cosine_matrix(const FeatureMapView& active_maps) {
    const int n = active_maps.channels;
    const int d = active_maps.spatial;
    SimilarityMatrix out;
    out.n = n;
    out.s.assign(static_cast<std::size_t>(n) * n, 0.0);

    std::vector<double> norms(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const float* row = active_maps.row(i);
        double sq = 0.0;
        for (int j = 0; j < d; ++j) sq += static_cast<double>(row[j]) * row[j];
        if (sq == 0.0)
            throw NumericError("cosine_matrix: zero-norm row " + std::to_string(i) +
                               " (violated activeness precondition)");
        norms[static_cast<std::size_t>(i)] = std::sqrt(sq);
    }
    for (int i = 0; i < n; ++i) {
        out.s[static_cast<std::size_t>(i) * n + i] = 1.0;
        const float* ri = active_maps.row(i);
        for (int j = i + 1; j < n; ++j) {
            const float* rj = active_maps.row(j);
            double dot = 0.0;
            for (int k = 0; k < d; ++k) dot += static_cast<double>(ri[k]) * rj[k];
            const double v = dot / (norms[static_cast<std::size_t>(i)] * norms[static_cast<std::size_t>(j)]);
            out.s[static_cast<std::size_t>(i) * n + j] = v;
            out.s[static_cast<std::size_t>(j) * n + i] = v;
        }
    }
    return out;
}

ClusterSet threshold_cluster(const SimilarityMatrix& s, double tau_sim) {
    const int n = s.n;
    ClusterSet out;
    std::vector<int> component(static_cast<std::size_t>(n), -1);
    std::vector<int> stack;
    int next = 0;
    for (int start = 0; start < n; ++start) {
        if (component[static_cast<std::size_t>(start)] >= 0) continue;
        component[static_cast<std::size_t>(start)] = next;
        stack.assign(1, start);
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int u = 0; u < n; ++u) {
                if (u == v || component[static_cast<std::size_t>(u)] >= 0) continue;
                if (s.at(v, u) > tau_sim) {
                    component[static_cast<std::size_t>(u)] = next;
                    stack.push_back(u);
                }
            }
        }
        ++next;
    }
    out.clusters.assign(static_cast<std::size_t>(next), {});
    for (int i = 0; i < n; ++i) out.clusters[static_cast<std::size_t>(component[static_cast<std::size_t>(i)])].push_back(i);
    // components are discovered from ascending seeds, so clusters are already
    // ordered by smallest member with ascending members
    return out;
}

BlockRedundancy redundancy_stats(const ClusterSet& clusters, const SimilarityMatrix& s) {
    BlockRedundancy out;
    out.active = s.n;
    out.clusters = clusters.count();
    for (const auto& c : clusters.clusters)
        if (c.size() > 1) out.redundant += static_cast<int>(c.size());
    if (s.n >= 2) {
        double sum = 0.0;
        for (int i = 0; i < s.n; ++i)
            for (int j = 0; j < s.n; ++j)
                if (i != j) sum += s.at(i, j);
        out.mean_off_diag = sum / (static_cast<double>(s.n) * (s.n - 1));
    }
    return out;
}

RedundancySummary aggregate_redundancy(BlockTappedModel& model, const Dataset& data,
                                       double tau_act, double tau_sim, RedundancyMode mode,
                                       int batch_size, int dump_similarity_max) {
    if (data.size() == 0) throw DataError("aggregate_redundancy: dataset is empty");
    RedundancySummary summary;
    summary.tau_act = tau_act;
    summary.tau_sim = tau_sim;
    summary.mode = mode;

    std::vector<std::int64_t> idx(static_cast<std::size_t>(data.size()));
    std::iota(idx.begin(), idx.end(), 0);

    // dataset_mean mode accumulates the mean activation tensor per block
    std::vector<std::vector<double>> mean_acc;

    for (std::int64_t start = 0; start < data.size(); start += batch_size) {
        const int count = static_cast<int>(std::min<std::int64_t>(batch_size, data.size() - start));
        Tensor x = gather_batch(data, idx.data() + start, count);
        Tape tape;
        std::vector<BlockActivation> taps;
        model.forward_with_taps(tape, x, /*train=*/false, taps);

        if (summary.blocks.empty()) {
            summary.blocks.resize(taps.size());
            mean_acc.resize(taps.size());
            for (std::size_t b = 0; b < taps.size(); ++b) {
                summary.blocks[b].block = taps[b].block;
                summary.blocks[b].channels = taps[b].channels();
                mean_acc[b].assign(
                    static_cast<std::size_t>(taps[b].channels()) * taps[b].spatial(), 0.0);
            }
        }

        for (std::size_t b = 0; b < taps.size(); ++b) {
            const int channels = taps[b].channels();
            const int spatial = taps[b].spatial();
            for (int i = 0; i < count; ++i) {
                const FeatureMapView view{channels, spatial, taps[b].sample_view(i)};
                if (mode == RedundancyMode::dataset_mean) {
                    const float* src = view.data;
                    for (std::size_t k = 0; k < mean_acc[b].size(); ++k) mean_acc[b][k] += src[k];
                    continue;
                }
                const ActiveSelection sel = active_indices(view, tau_act);
                BlockRedundancySummary& acc = summary.blocks[b];
                acc.mean_active += static_cast<double>(sel.indices.size());
                if (sel.indices.size() >= 1) {
                    SimilarityMatrix s = cosine_matrix(sel.view());
                    s.block = summary.blocks[b].block;
                    if (dump_similarity_max > 0 && start == 0 && i == 0 &&
                        s.n <= dump_similarity_max)
                        summary.sampled_matrices.push_back(s);
                    const ClusterSet clusters = threshold_cluster(s, tau_sim);
                    const BlockRedundancy st = redundancy_stats(clusters, s);
                    acc.mean_clusters += st.clusters;
                    acc.mean_redundant += st.redundant;
                    if (st.mean_off_diag) {
                        acc.mean_similarity = acc.mean_similarity.value_or(0.0) + *st.mean_off_diag;
                        ++acc.similarity_defined;
                    }
                }
            }
        }
    }

    const double n = static_cast<double>(data.size());
    for (std::size_t b = 0; b < summary.blocks.size(); ++b) {
        BlockRedundancySummary& acc = summary.blocks[b];
        acc.samples = data.size();
        if (mode == RedundancyMode::dataset_mean) {
            std::vector<float> mean(mean_acc[b].size());
            for (std::size_t k = 0; k < mean.size(); ++k)
                mean[k] = static_cast<float>(mean_acc[b][k] / n);
            const int spatial = static_cast<int>(mean.size()) / acc.channels;
            const FeatureMapView view{acc.channels, spatial, mean.data()};
            const ActiveSelection sel = active_indices(view, tau_act);
            acc.mean_active = static_cast<double>(sel.indices.size());
            if (!sel.indices.empty()) {
                const SimilarityMatrix s = cosine_matrix(sel.view());
                const ClusterSet clusters = threshold_cluster(s, tau_sim);
                const BlockRedundancy st = redundancy_stats(clusters, s);
                acc.mean_clusters = st.clusters;
                acc.mean_redundant = st.redundant;
                acc.mean_similarity = st.mean_off_diag;
                acc.similarity_defined = st.mean_off_diag ? 1 : 0;
            }
        } else {
            acc.mean_active /= n;
            acc.mean_clusters /= n;
            acc.mean_redundant /= n;
            if (acc.mean_similarity)
                acc.mean_similarity = *acc.mean_similarity / static_cast<double>(acc.similarity_defined);
        }
    }
    return summary;
}

}  // namespace atlab
