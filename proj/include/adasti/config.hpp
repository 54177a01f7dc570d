#pragma once

// Experiment configuration as a flat "key = value" document. Lines starting
// with '#' are comments; unknown or repeated keys are parse errors.

#include <cstdint>
#include <filesystem>
#include <string>

#include "adasti/diffusion.hpp"
#include "adasti/model_config.hpp"

namespace adasti {

enum class MissingPattern { random, block, native };

MissingPattern parse_missing_pattern(const std::string& s);
std::string to_string(MissingPattern p);

struct ExperimentConfig {
    // data
    std::string data;           // series CSV (timestamps x nodes)
    std::string missing_token = "NA";
    std::string adjacency;      // precomputed adjacency CSV, or
    std::string distances;      // distance CSV turned into a thresholded Gaussian kernel
    double threshold = 0.1;
    std::string mask;           // optional 0/1 CSV of injected missingness (1 = kept)
    Index window = 24;
    Index stride = 0;           // 0: equal to window
    double train_fraction = 0.7;
    double val_fraction = 0.1;

    // evaluation missingness
    MissingPattern pattern = MissingPattern::random;
    double rate = 0.25;
    Index block_nodes = 2;
    Index block_steps = 4;

    // model
    Index channels = 64;
    Index mlp_hidden = 2048;
    Index heads = 8;
    Index layers = 4;
    Index step_embedding = 128;
    Index state_dim = 64;
    Index feature_width = 64;
    Index feature_heads = 8;
    Index stc_kernel = 1;
    bool positional_encoding = true;
    bool share_directions = false;
    AuxPlacement aux_placement = AuxPlacement::none;

    // diffusion
    Index diffusion_steps = 50;
    double beta_min = 1e-4;
    double beta_max = 0.2;
    ScheduleKind schedule = ScheduleKind::quadratic;

    // objective and optimisation
    double lambda = 1.0;
    double target_fraction = 0.1;
    double learning_rate = 1e-3;
    Index epochs = 200;
    Index batch_size = 16;
    Index validate_every = 5;
    Index val_k = 1;
    Index k = 100;
    std::uint64_t seed = 0;

    // ablations and literal-reading switches
    bool no_bis4pi = false;
    bool no_gated_attention = false;
    bool literal_reverse_coeffs = false;
    bool literal_reconstruction = false;

    // outputs
    std::string checkpoint = "adasti.ckpt";
    std::string report;
    std::string trace;

    Index effective_stride() const { return stride > 0 ? stride : window; }
    ModelConfig model(Index nodes) const;
    NoiseSchedule noise_schedule() const;

    /// Range checks; with `check_files`, referenced input files must exist.
    void validate(bool check_files = true) const;
};

/// Relative paths are resolved against `base_dir` when it is non-empty.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text of every field; parse_config(to_text(c)) == c.
std::string to_text(const ExperimentConfig& cfg);

/// FNV-1a over the canonical text of the fields that define the experiment
/// (output paths excluded).
std::uint64_t fingerprint(const ExperimentConfig& cfg);
std::string fingerprint_hex(std::uint64_t fp);

}  // namespace adasti
