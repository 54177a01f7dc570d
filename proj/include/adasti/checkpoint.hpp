#pragma once

// Single-file binary checkpoint: header (magic, format version, config
// fingerprint) followed by the experiment config, normalization record, graph,
// parameters and optimizer state. Numbers are stored little-endian.

#include <filesystem>

#include "adasti/config.hpp"
#include "adasti/model.hpp"

namespace adasti {

struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::uint32_t version = kVersion;
    std::uint64_t fingerprint = 0;
    std::string config_text;
    Index epoch = 0;
    std::string rng_state;

    std::vector<std::string> node_ids;
    data::Matrix adjacency;
    data::NormStats stats;

    std::vector<std::string> names;
    std::vector<Tensor> params;
    Index adam_steps = 0;
    std::vector<Tensor> adam_m, adam_v;  // empty when no optimizer state is stored

    ExperimentConfig config() const;
};

Checkpoint make_checkpoint(const ExperimentConfig& cfg, const AdaSti& model, const Adam* optimizer, Index epoch,
                           const Rng& rng, const data::NormStats& stats, const std::vector<std::string>& node_ids);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Rejects foreign files, versions newer than this build and fingerprint mismatches.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model and overwrites every parameter with the stored values.
AdaSti restore_model(const Checkpoint& ckpt);

}  // namespace adasti
