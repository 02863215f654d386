#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "microtrip/diffusion.hpp"
#include "microtrip/network.hpp"
#include "microtrip/train.hpp"

namespace microtrip {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    ArchConfig arch;
    ParamStore params;
    TrainConfig train;
    std::string config_digest;
};

/// "MTCK", uint32 LE manifest length, JSON manifest (arch, train config,
/// version, config digest, tensors with offsets), then float32 LE values.
void write_checkpoint(const Checkpoint& ck, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
/// Throws CheckpointNotFound for a missing file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace microtrip
