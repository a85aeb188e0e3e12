#include "atlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "atlab/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace atlab {

namespace {

constexpr char kMagic[4] = {'A', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError(std::string("checkpoint: truncated while reading ") + what);
    return v;
}

void write_string(std::ofstream& out, const std::string& s) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in, const char* what) {
    const auto len = read_pod<std::uint32_t>(in, what);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw DataError(std::string("checkpoint: truncated while reading ") + what);
    return s;
}

ArchSpec parse_arch_canonical(const std::string& canonical) {
    // name|w1,w2,...|CxHxW|classes
    std::vector<std::string> parts;
    std::stringstream ss(canonical);
    std::string item;
    while (std::getline(ss, item, '|')) parts.push_back(item);
    if (parts.size() != 4) throw DataError("checkpoint: malformed architecture spec");
    ArchSpec spec;
    spec.name = parts[0];
    spec.widths.clear();
    {
        std::stringstream ws(parts[1]);
        std::string tok;
        while (std::getline(ws, tok, ',')) spec.widths.push_back(std::stoi(tok));
    }
    {
        std::stringstream ds(parts[2]);
        std::string tok;
        std::vector<int> dims;
        while (std::getline(ds, tok, 'x')) dims.push_back(std::stoi(tok));
        if (dims.size() != 3) throw DataError("checkpoint: malformed input dims");
        spec.in_channels = dims[0];
        spec.in_h = dims[1];
        spec.in_w = dims[2];
    }
    spec.classes = std::stoi(parts[3]);
    return spec;
}

}  // namespace

std::uint64_t arch_hash(const ArchSpec& spec) { return fnv1a(spec.canonical()); }

void save_checkpoint(const BlockTappedModel& model, const std::filesystem::path& path,
                     const CheckpointProvenance& provenance) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("checkpoint: cannot write '" + path.string() + "'");

    out.write(kMagic, 4);
    write_pod(out, kVersion);
    const std::string canonical = model.arch.canonical();
    write_pod(out, fnv1a(canonical));
    write_string(out, canonical);
    write_pod(out, provenance.eps_tr);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(provenance.epochs));
    write_pod(out, provenance.seed);
    write_pod<std::uint8_t>(out, model.bn_stats_ready() ? 1 : 0);

    const auto tensors = model.state_tensors();
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        write_string(out, name);
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
        for (int d : tensor.shape()) write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        const auto vals = tensor.values();
        out.write(reinterpret_cast<const char*>(vals.data()),
                  static_cast<std::streamsize>(vals.size() * sizeof(float)));
    }
    if (!out) throw DataError("checkpoint: write failed for '" + path.string() + "'");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const std::optional<ArchSpec>& expect) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open '" + path.string() + "'");

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("checkpoint: '" + path.string() + "' is not a checkpoint file");
    const auto version = read_pod<std::uint32_t>(in, "version");
    if (version != kVersion)
        throw DataError("checkpoint: version " + std::to_string(version) + " unsupported (expected " +
                        std::to_string(kVersion) + ")");
    const auto stored_hash = read_pod<std::uint64_t>(in, "architecture hash");
    const std::string canonical = read_string(in, "architecture spec");
    if (stored_hash != fnv1a(canonical))
        throw DataError("checkpoint: architecture hash mismatch (corrupt or tampered file)");
    const ArchSpec spec = parse_arch_canonical(canonical);
    if (expect && arch_hash(*expect) != stored_hash)
        throw DataError("checkpoint: architecture '" + canonical + "' does not match expected '" +
                        expect->canonical() + "'");

    LoadedCheckpoint loaded;
    loaded.provenance.eps_tr = read_pod<double>(in, "eps_tr");
    loaded.provenance.epochs = static_cast<int>(read_pod<std::uint32_t>(in, "epochs"));
    loaded.provenance.seed = read_pod<std::uint64_t>(in, "seed");
    const bool stats_ready = read_pod<std::uint8_t>(in, "bn flag") != 0;

    loaded.model = build_model(spec, /*seed=*/0);
    loaded.model.set_bn_stats_ready(stats_ready);

    auto tensors = loaded.model.state_tensors();
    const auto count = read_pod<std::uint32_t>(in, "tensor count");
    if (count != tensors.size())
        throw DataError("checkpoint: expected " + std::to_string(tensors.size()) +
                        " tensors, file has " + std::to_string(count));
    for (auto& [name, tensor] : tensors) {
        const std::string stored_name = read_string(in, "tensor name");
        if (stored_name != name)
            throw DataError("checkpoint: tensor '" + stored_name + "' where '" + name +
                            "' was expected");
        const auto rank = read_pod<std::uint32_t>(in, "tensor rank");
        if (rank != tensor.rank()) throw DataError("checkpoint: rank mismatch for '" + name + "'");
        for (std::size_t d = 0; d < rank; ++d) {
            const auto extent = read_pod<std::uint32_t>(in, "tensor extent");
            if (static_cast<int>(extent) != tensor.shape()[d])
                throw DataError("checkpoint: shape mismatch for '" + name + "'");
        }
        auto vals = tensor.values();
        in.read(reinterpret_cast<char*>(vals.data()),
                static_cast<std::streamsize>(vals.size() * sizeof(float)));
        if (!in) throw DataError("checkpoint: truncated tensor data for '" + name + "'");
    }
    char extra;
    if (in.read(&extra, 1)) throw DataError("checkpoint: trailing bytes after tensor data");
    return loaded;
}

}  // namespace atlab
