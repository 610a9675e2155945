#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "odsd/mlp.hpp"

namespace odsd::cli {

std::uint64_t fnv1a(std::string_view bytes);

struct CheckpointMeta {
    std::string role = "model";  // teacher | student | state
    std::size_t epoch = 0;       // epochs completed
    bool completed = true;
    std::uint64_t config_fingerprint = 0;
};

/// Writes a checkpoint directory: manifest.json plus one ODST tensor per
/// parameter (and per optimizer slot when opt is given). Deterministic bytes
/// for identical inputs.
void save_checkpoint(const std::filesystem::path& dir, const nets::Mlp& model,
                     const CheckpointMeta& meta, const nets::SgdState* opt = nullptr);

struct LoadedCheckpoint {
    nets::Mlp model;
    CheckpointMeta meta;
    bool has_optimizer = false;
    std::vector<Matrix> vw;
    std::vector<std::vector<double>> vb;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace odsd::cli
