#include "atlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>

#include "atlab/errors.hpp"
#include "atlab/rng.hpp"

namespace atlab {

namespace {

constexpr std::int64_t kCifarRecord = 3073;  // 1 label byte + 3*32*32 pixels

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

std::uint32_t read_be32(const unsigned char* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                                    static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

unsigned char quantize8(float v) {
    const float scaled = std::round(v * 255.0f);
    return static_cast<unsigned char>(std::min(255.0f, std::max(0.0f, scaled)));
}

}  // namespace

Tensor gather_batch(const Dataset& ds, const std::int64_t* indices, int count,
                    std::vector<int>* labels_out) {
    Tensor batch(Shape{count, ds.channels, ds.height, ds.width});
    float* bp = batch.data();
    const std::int64_t stride = ds.sample_numel();
    if (labels_out) labels_out->resize(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const std::int64_t src = indices[i];
        if (src < 0 || src >= ds.size()) throw DataError("gather_batch: index out of range");
        std::copy_n(ds.sample(src), stride, bp + static_cast<std::int64_t>(i) * stride);
        if (labels_out) (*labels_out)[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(src)];
    }
    return batch;
}

Dataset load_cifar10_bin(const std::vector<std::filesystem::path>& files) {
    if (files.empty()) throw DataError("load_cifar10_bin: no input files");
    Dataset ds;
    ds.channels = 3;
    ds.height = 32;
    ds.width = 32;
    ds.num_classes = 10;
    for (const auto& path : files) {
        const auto bytes = read_file(path);
        if (bytes.empty() || static_cast<std::int64_t>(bytes.size()) % kCifarRecord != 0)
            throw DataError("'" + path.string() + "': length " + std::to_string(bytes.size()) +
                            " is not a multiple of " + std::to_string(kCifarRecord));
        const std::int64_t records = static_cast<std::int64_t>(bytes.size()) / kCifarRecord;
        ds.data.reserve(ds.data.size() + static_cast<std::size_t>(records * 3072));
        for (std::int64_t r = 0; r < records; ++r) {
            const unsigned char* rec = bytes.data() + r * kCifarRecord;
            const int label = rec[0];
            if (label >= 10)
                throw DataError("'" + path.string() + "': label " + std::to_string(label) +
                                " out of range [0,10)");
            ds.labels.push_back(label);
            for (std::int64_t i = 0; i < 3072; ++i)
                ds.data.push_back(static_cast<float>(rec[1 + i]) / 255.0f);
        }
    }
    return ds;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto img_bytes = read_file(images);
    if (img_bytes.size() < 16) throw DataError("'" + images.string() + "': truncated IDX header");
    if (read_be32(img_bytes.data()) != 0x00000803u)
        throw DataError("'" + images.string() + "': bad IDX image magic");
    const std::int64_t n = read_be32(img_bytes.data() + 4);
    const std::int64_t rows = read_be32(img_bytes.data() + 8);
    const std::int64_t cols = read_be32(img_bytes.data() + 12);
    if (static_cast<std::int64_t>(img_bytes.size()) != 16 + n * rows * cols)
        throw DataError("'" + images.string() + "': truncated IDX image payload");

    const auto lbl_bytes = read_file(labels);
    if (lbl_bytes.size() < 8) throw DataError("'" + labels.string() + "': truncated IDX header");
    if (read_be32(lbl_bytes.data()) != 0x00000801u)
        throw DataError("'" + labels.string() + "': bad IDX label magic");
    if (static_cast<std::int64_t>(read_be32(lbl_bytes.data() + 4)) != n)
        throw DataError("IDX image/label counts differ");
    if (static_cast<std::int64_t>(lbl_bytes.size()) != 8 + n)
        throw DataError("'" + labels.string() + "': truncated IDX label payload");

    Dataset ds;
    ds.channels = 1;
    ds.height = static_cast<int>(rows);
    ds.width = static_cast<int>(cols);
    ds.data.resize(static_cast<std::size_t>(n * rows * cols));
    ds.labels.resize(static_cast<std::size_t>(n));
    int max_label = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        ds.labels[static_cast<std::size_t>(i)] = lbl_bytes[8 + i];
        max_label = std::max(max_label, static_cast<int>(lbl_bytes[8 + i]));
    }
    ds.num_classes = max_label + 1;
    for (std::size_t i = 0; i < ds.data.size(); ++i)
        ds.data[i] = static_cast<float>(img_bytes[16 + i]) / 255.0f;
    return ds;
}

void write_cifar10_bin(const Dataset& ds, const std::filesystem::path& file) {
    if (ds.channels != 3 || ds.height != 32 || ds.width != 32)
        throw DataError("write_cifar10_bin: dataset is not 3x32x32");
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + file.string() + "'");
    for (std::int64_t i = 0; i < ds.size(); ++i) {
        const unsigned char label = static_cast<unsigned char>(ds.labels[static_cast<std::size_t>(i)]);
        out.put(static_cast<char>(label));
        const float* px = ds.sample(i);
        for (std::int64_t j = 0; j < 3072; ++j) out.put(static_cast<char>(quantize8(px[j])));
    }
    if (!out) throw DataError("write failed for '" + file.string() + "'");
}

void write_idx(const Dataset& ds, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
    if (ds.channels != 1) throw DataError("write_idx: dataset is not single-channel");
    std::ofstream img(images, std::ios::binary | std::ios::trunc);
    if (!img) throw DataError("cannot write '" + images.string() + "'");
    write_be32(img, 0x00000803u);
    write_be32(img, static_cast<std::uint32_t>(ds.size()));
    write_be32(img, static_cast<std::uint32_t>(ds.height));
    write_be32(img, static_cast<std::uint32_t>(ds.width));
    for (float v : ds.data) img.put(static_cast<char>(quantize8(v)));

    std::ofstream lbl(labels, std::ios::binary | std::ios::trunc);
    if (!lbl) throw DataError("cannot write '" + labels.string() + "'");
    write_be32(lbl, 0x00000801u);
    write_be32(lbl, static_cast<std::uint32_t>(ds.size()));
    for (int l : ds.labels) lbl.put(static_cast<char>(static_cast<unsigned char>(l)));
}

std::vector<std::int64_t> subset_indices(std::int64_t n, std::int64_t k, std::uint64_t seed) {
    if (k > n) throw DataError("subset_indices: requested " + std::to_string(k) + " of " +
                               std::to_string(n) + " samples");
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937 rng = make_rng(derive_seed(seed, 0x50b5e7ULL));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

Dataset take_subset(const Dataset& ds, const std::vector<std::int64_t>& indices) {
    Dataset out;
    out.channels = ds.channels;
    out.height = ds.height;
    out.width = ds.width;
    out.num_classes = ds.num_classes;
    out.data.reserve(indices.size() * static_cast<std::size_t>(ds.sample_numel()));
    out.labels.reserve(indices.size());
    for (std::int64_t i : indices) {
        if (i < 0 || i >= ds.size()) throw DataError("take_subset: index out of range");
        const float* s = ds.sample(i);
        out.data.insert(out.data.end(), s, s + ds.sample_numel());
        out.labels.push_back(ds.labels[static_cast<std::size_t>(i)]);
    }
    return out;
}

Dataset make_synthetic(std::int64_t n, std::uint64_t seed) {
    // class = 2*color_group + bar orientation. The palette is deliberately
    // tight so color evidence is contested at desk attack budgets, and a
    // class-independent brightness jitter gives every image shared global
    // structure.
    static constexpr int kBase[5][3] = {
        {140, 100, 100}, {100, 140, 100}, {100, 100, 140}, {135, 135, 95}, {115, 100, 138}};
    constexpr int kSide = 32;
    constexpr int kBarDelta = 60;
    constexpr float kNoiseSd = 18.0f;

    Dataset ds;
    ds.channels = 3;
    ds.height = kSide;
    ds.width = kSide;
    ds.num_classes = 10;
    ds.data.resize(static_cast<std::size_t>(n) * 3 * kSide * kSide);
    ds.labels.resize(static_cast<std::size_t>(n));

    std::mt19937 rng = make_rng(derive_seed(seed, 0x5d47a5e7ULL));
    std::uniform_int_distribution<int> class_dist(0, 9);
    std::uniform_int_distribution<int> jitter(-3, 3);
    std::uniform_int_distribution<int> brightness(-12, 12);
    std::normal_distribution<float> noise(0.0f, kNoiseSd);

    for (std::int64_t i = 0; i < n; ++i) {
        const int cls = class_dist(rng);
        const int group = cls / 2;
        const int vertical = cls % 2;
        ds.labels[static_cast<std::size_t>(i)] = cls;

        const int bar1 = 8 + jitter(rng);
        const int bar2 = 22 + jitter(rng);
        const int bright = brightness(rng);
        float* img = ds.sample(i);
        for (int ch = 0; ch < 3; ++ch) {
            for (int y = 0; y < kSide; ++y) {
                for (int x = 0; x < kSide; ++x) {
                    const int pos = vertical ? x : y;
                    const bool on_bar = (pos == bar1 || pos == bar1 + 1 || pos == bar2 || pos == bar2 + 1);
                    float v = static_cast<float>(kBase[group][ch]) + (on_bar ? kBarDelta : 0) +
                              static_cast<float>(bright) + noise(rng);
                    v = std::min(255.0f, std::max(0.0f, std::round(v)));
                    img[(ch * kSide + y) * kSide + x] = v / 255.0f;
                }
            }
        }
    }
    return ds;
}

}  // namespace atlab
