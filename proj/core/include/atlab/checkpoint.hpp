#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "atlab/model.hpp"

namespace atlab {

struct CheckpointProvenance {
    double eps_tr = 0.0;
    int epochs = 0;
    std::uint64_t seed = 0;
};

// FNV-1a of the canonical architecture string; stored in checkpoints and
// verified on load.
std::uint64_t arch_hash(const ArchSpec& spec);

// Binary format, little-endian: magic "ATCK", version, architecture hash and
// canonical string, provenance, then named float32 tensors (parameters and
// BN running statistics). save(load(save(m))) is byte-identical.
void save_checkpoint(const BlockTappedModel& model, const std::filesystem::path& path,
                     const CheckpointProvenance& provenance);

struct LoadedCheckpoint {
    BlockTappedModel model;
    CheckpointProvenance provenance;
};

// Rejects version mismatches, architecture-hash mismatches (including a
// stored hash that disagrees with the stored spec), and truncated files.
// When expect is given, the checkpoint must match that architecture.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const std::optional<ArchSpec>& expect = std::nullopt);

}  // namespace atlab
