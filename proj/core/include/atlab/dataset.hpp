#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "atlab/tensor.hpp"

namespace atlab {

// Labeled image set, pixels scaled to [0,1], stored N x C x H x W row-major.
struct Dataset {
    int channels = 3;
    int height = 32;
    int width = 32;
    int num_classes = 10;
    std::vector<float> data;
    std::vector<int> labels;

    std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
    std::int64_t sample_numel() const {
        return static_cast<std::int64_t>(channels) * height * width;
    }
    const float* sample(std::int64_t i) const { return data.data() + i * sample_numel(); }
    float* sample(std::int64_t i) { return data.data() + i * sample_numel(); }
};

// Gathers the given rows into a batch tensor [n, C, H, W] plus their labels.
Tensor gather_batch(const Dataset& ds, const std::int64_t* indices, int count,
                    std::vector<int>* labels_out = nullptr);

// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes
// (32x32 R plane, then G, then B). Rejects files whose length is not a
// multiple of 3073 and labels outside [0, 10).
Dataset load_cifar10_bin(const std::vector<std::filesystem::path>& files);

// IDX (MNIST-style) pair: image file with magic 0x00000803, label file with
// magic 0x00000801, big-endian header fields.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

// Writers emit the same binary formats (pixels quantized to 8 bits with
// round-to-nearest), so transformed sets can be persisted for inspection.
void write_cifar10_bin(const Dataset& ds, const std::filesystem::path& file);
void write_idx(const Dataset& ds, const std::filesystem::path& images,
               const std::filesystem::path& labels);

// First k entries of a seeded shuffle of [0, n); identical across runs.
std::vector<std::int64_t> subset_indices(std::int64_t n, std::int64_t k, std::uint64_t seed);

Dataset take_subset(const Dataset& ds, const std::vector<std::int64_t>& indices);

// Deterministic 10-class, 32x32 RGB synthetic set: 5 base colors x 2 bar
// orientations, with positional jitter and pixel noise. Values are 8-bit
// quantized so a round trip through the CIFAR-10 writer/loader is exact.
Dataset make_synthetic(std::int64_t n, std::uint64_t seed);

}  // namespace atlab
