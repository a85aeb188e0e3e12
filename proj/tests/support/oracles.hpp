#pragma once

// Test-only double-precision reference implementations and brute-force
// oracles. Everything here is independent of the library's compute paths:
// plain loops, no tape, no im2col, no streaming accumulators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using dvec = std::vector<double>;

// ---------------------------------------------------------------------------
// reference layers (double precision, naive loops)
// ---------------------------------------------------------------------------

inline dvec relu(const dvec& x) {
    dvec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return out;
}

// x[N,C,H,W] cross-correlated with k[F,C,kh,kw]; quadruple-loop summation
inline dvec conv2d(const dvec& x, int n, int c, int h, int w, const dvec& k, int f, int kh, int kw,
                   int stride, int pad, int& oh, int& ow) {
    oh = (h + 2 * pad - kh) / stride + 1;
    ow = (w + 2 * pad - kw) / stride + 1;
    dvec out(static_cast<std::size_t>(n) * f * oh * ow, 0.0);
    for (int img = 0; img < n; ++img)
        for (int fi = 0; fi < f; ++fi)
            for (int i = 0; i < oh; ++i)
                for (int j = 0; j < ow; ++j) {
                    double acc = 0.0;
                    for (int ci = 0; ci < c; ++ci)
                        for (int ki = 0; ki < kh; ++ki)
                            for (int kj = 0; kj < kw; ++kj) {
                                const int yi = i * stride - pad + ki;
                                const int xj = j * stride - pad + kj;
                                if (yi < 0 || yi >= h || xj < 0 || xj >= w) continue;
                                acc += x[((static_cast<std::size_t>(img) * c + ci) * h + yi) * w + xj] *
                                       k[((static_cast<std::size_t>(fi) * c + ci) * kh + ki) * kw + kj];
                            }
                    out[((static_cast<std::size_t>(img) * f + fi) * oh + i) * ow + j] = acc;
                }
    return out;
}

inline dvec linear(const dvec& x, int n, int d, const dvec& w, int k, const dvec& b) {
    dvec out(static_cast<std::size_t>(n) * k, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) {
            double acc = b[static_cast<std::size_t>(j)];
            for (int p = 0; p < d; ++p)
                acc += x[static_cast<std::size_t>(i) * d + p] * w[static_cast<std::size_t>(j) * d + p];
            out[static_cast<std::size_t>(i) * k + j] = acc;
        }
    return out;
}

// per-window scan; max uses first occurrence in row-major window order
inline dvec pool2d(const dvec& x, int n, int c, int h, int w, bool max_kind, int window, int stride,
                   int pad, int& oh, int& ow) {
    oh = (h + 2 * pad - window) / stride + 1;
    ow = (w + 2 * pad - window) / stride + 1;
    dvec out(static_cast<std::size_t>(n) * c * oh * ow, 0.0);
    for (int pl = 0; pl < n * c; ++pl)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                double best = -std::numeric_limits<double>::infinity();
                double acc = 0.0;
                for (int ki = 0; ki < window; ++ki)
                    for (int kj = 0; kj < window; ++kj) {
                        const int yi = i * stride - pad + ki;
                        const int xj = j * stride - pad + kj;
                        if (yi < 0 || yi >= h || xj < 0 || xj >= w) continue;
                        const double v = x[(static_cast<std::size_t>(pl) * h + yi) * w + xj];
                        best = std::max(best, v);
                        acc += v;
                    }
                out[(static_cast<std::size_t>(pl) * oh + i) * ow + j] =
                    max_kind ? best : acc / (window * window);
            }
    return out;
}

// train-mode batch normalization: per-channel biased batch statistics
inline dvec batchnorm_train(const dvec& x, int n, int c, int h, int w, const dvec& gamma,
                            const dvec& beta, double eps) {
    dvec out(x.size());
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    const double count = static_cast<double>(n) * hw;
    for (int ci = 0; ci < c; ++ci) {
        double mean = 0.0;
        for (int img = 0; img < n; ++img)
            for (std::int64_t s = 0; s < hw; ++s)
                mean += x[(static_cast<std::size_t>(img) * c + ci) * hw + s];
        mean /= count;
        double var = 0.0;
        for (int img = 0; img < n; ++img)
            for (std::int64_t s = 0; s < hw; ++s) {
                const double d = x[(static_cast<std::size_t>(img) * c + ci) * hw + s] - mean;
                var += d * d;
            }
        var /= count;
        const double invstd = 1.0 / std::sqrt(var + eps);
        for (int img = 0; img < n; ++img)
            for (std::int64_t s = 0; s < hw; ++s) {
                const std::size_t at = (static_cast<std::size_t>(img) * c + ci) * hw + s;
                out[at] = gamma[static_cast<std::size_t>(ci)] * (x[at] - mean) * invstd +
                          beta[static_cast<std::size_t>(ci)];
            }
    }
    return out;
}

inline dvec global_avg_pool(const dvec& x, int n, int c, int h, int w) {
    dvec out(static_cast<std::size_t>(n) * c, 0.0);
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    for (int pl = 0; pl < n * c; ++pl) {
        double acc = 0.0;
        for (std::int64_t s = 0; s < hw; ++s) acc += x[static_cast<std::size_t>(pl) * hw + s];
        out[static_cast<std::size_t>(pl)] = acc / static_cast<double>(hw);
    }
    return out;
}

inline double cross_entropy(const dvec& logits, int n, int k, const std::vector<int>& labels) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* row = logits.data() + static_cast<std::size_t>(i) * k;
        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
        total += mx + std::log(denom) - row[labels[static_cast<std::size_t>(i)]];
    }
    return total / n;
}

// ---------------------------------------------------------------------------
// central finite differences
// ---------------------------------------------------------------------------

// d/dx_i of f, via (f(x+h e_i) - f(x-h e_i)) / 2h for every coordinate
inline dvec numeric_grad(const std::function<double(const dvec&)>& f, dvec x, double h) {
    dvec grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double fp = f(x);
        x[i] = saved - h;
        const double fm = f(x);
        x[i] = saved;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// probe oracles (brute force)
// ---------------------------------------------------------------------------

// Def. 2 by direct counting
inline std::vector<bool> densely_active(const std::vector<float>& maps, int channels, int spatial,
                                        double tau_act, double tau_dens) {
    std::vector<bool> out(static_cast<std::size_t>(channels));
    for (int i = 0; i < channels; ++i) {
        int hits = 0;
        for (int j = 0; j < spatial; ++j)
            if (maps[static_cast<std::size_t>(i) * spatial + j] > tau_act) ++hits;
        out[static_cast<std::size_t>(i)] = hits >= tau_dens * spatial;
    }
    return out;
}

// Def. 1 by scanning every entry
inline std::vector<int> active_set(const std::vector<float>& maps, int channels, int spatial,
                                   double tau_act) {
    std::vector<int> out;
    for (int i = 0; i < channels; ++i)
        for (int j = 0; j < spatial; ++j)
            if (maps[static_cast<std::size_t>(i) * spatial + j] > tau_act) {
                out.push_back(i);
                break;
            }
    return out;
}

// dataset-level N_k by the quadratic double loop over samples x maps
inline std::int64_t always_dense_count(const std::vector<std::vector<float>>& samples, int channels,
                                       int spatial, double tau_act, double tau_dens) {
    std::int64_t n = 0;
    for (int c = 0; c < channels; ++c) {
        bool all = true;
        for (const auto& s : samples) {
            int hits = 0;
            for (int j = 0; j < spatial; ++j)
                if (s[static_cast<std::size_t>(c) * spatial + j] > tau_act) ++hits;
            if (hits < tau_dens * spatial) {
                all = false;
                break;
            }
        }
        if (all) ++n;
    }
    return n;
}

// naive double-loop cosine similarity
inline std::vector<double> cosine(const std::vector<float>& rows, int n, int d) {
    std::vector<double> s(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double dot = 0.0, ni = 0.0, nj = 0.0;
            for (int k = 0; k < d; ++k) {
                const double a = rows[static_cast<std::size_t>(i) * d + k];
                const double b = rows[static_cast<std::size_t>(j) * d + k];
                dot += a * b;
                ni += a * a;
                nj += b * b;
            }
            s[static_cast<std::size_t>(i) * n + j] = dot / (std::sqrt(ni) * std::sqrt(nj));
        }
    return s;
}

// union-find clustering over edges s(i,j) > tau
struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int i) {
        while (parent[static_cast<std::size_t>(i)] != i) {
            parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
            i = parent[static_cast<std::size_t>(i)];
        }
        return i;
    }
    void merge(int a, int b) {
        const int ra = find(a), rb = find(b);
        if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
    }
};

inline std::vector<std::vector<int>> cluster_union_find(const std::vector<double>& s, int n,
                                                        double tau) {
    UnionFind uf(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (s[static_cast<std::size_t>(i) * n + j] > tau) uf.merge(i, j);
    std::vector<std::vector<int>> clusters;
    std::vector<int> root_to_cluster(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        const int r = uf.find(i);
        if (root_to_cluster[static_cast<std::size_t>(r)] < 0) {
            root_to_cluster[static_cast<std::size_t>(r)] = static_cast<int>(clusters.size());
            clusters.emplace_back();
        }
        clusters[static_cast<std::size_t>(root_to_cluster[static_cast<std::size_t>(r)])].push_back(i);
    }
    return clusters;
}

inline double mean_off_diag(const std::vector<double>& s, int n) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) sum += s[static_cast<std::size_t>(i) * n + j];
    return sum / (static_cast<double>(n) * (n - 1));
}

}  // namespace oracle
