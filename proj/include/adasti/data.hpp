#pragma once

// Dataset ingestion, graph construction, windowing/normalization and MCAR
// mask generation. Matrices handed to the model are node-major (N x L); CSV
// files are timestamp-major (one row per timestamp, one column per node).

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adasti/common.hpp"

namespace adasti::data {

using Matrix = Eigen::MatrixXd;
/// 1 = observed, 0 = missing.
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

struct RawSeriesTable {
    Matrix values;  // timestamps x nodes; native-missing cells hold 0
    Mask observed;  // timestamps x nodes
    std::vector<std::string> node_ids;
    std::vector<double> timestamps;

    Index num_timestamps() const { return values.rows(); }
    Index num_nodes() const { return values.cols(); }
    Index native_missing() const;
};

struct GraphSpec {
    Matrix adjacency;
    std::vector<std::string> node_ids;

    Index num_nodes() const { return adjacency.rows(); }
};

struct NormStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
};

struct MaskedSample {
    Matrix X;  // N x L normalized; 0 where M = 0
    Mask M;    // N x L
    NormStats stats;
    Index start = 0;  // first timestamp of the window
};

struct MaskPair {
    Mask target;
    Mask condition;
};

// ------------------------------------------------------------------ IO

/// Header row of node ids, one row per timestamp. A leading column named
/// "timestamp" (or "time") carries numeric time indices. Cells equal to
/// `missing_token` (or empty) become native-missing entries.
RawSeriesTable load_series_csv(const std::filesystem::path& path, const std::string& missing_token = "NA");

/// Square numeric matrix with an optional header row of node ids.
Matrix load_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* header = nullptr);

void write_series_csv(const std::filesystem::path& path, const std::vector<std::string>& node_ids,
                      const Matrix& values_time_major);

/// 0/1 mask CSV in data orientation (timestamps x nodes) with a header row.
void write_mask_csv(const std::filesystem::path& path, const std::vector<std::string>& node_ids,
                    const Mask& mask_time_major);
Mask load_mask_csv(const std::filesystem::path& path);

// ------------------------------------------------------------------ graph

/// Thresholded Gaussian kernel exp(-d^2 / sigma^2), sigma = std of off-diagonal distances.
GraphSpec build_adjacency(const Matrix& distances, double threshold = 0.1);

/// Validates a precomputed adjacency (symmetric, zero diagonal, weights in [0,1]).
GraphSpec adjacency_from_matrix(Matrix adjacency, std::vector<std::string> node_ids = {});

/// D^{-1/2} (A + I) D^{-1/2}.
Matrix normalized_adjacency(const GraphSpec& graph);

// ------------------------------------------------------------------ windows

/// Per-node mean/std over entries with observed=1 in rows [0, train_end).
/// A node with no such entries is an error; zero std falls back to 1.
NormStats compute_norm_stats(const Matrix& values_time_major, const Mask& observed_time_major, Index train_end,
                             const std::vector<std::string>& node_ids = {});

/// Windows of length L every `stride` timestamps, normalized with `stats`.
std::vector<MaskedSample> window_and_normalize(const Matrix& values_time_major, const Mask& observed_time_major,
                                               Index L, Index stride, const NormStats& stats);

/// Statistics from the first `train_fraction` of the timestamps, then windowing.
std::vector<MaskedSample> window_and_normalize(const RawSeriesTable& table, Index L, Index stride,
                                               double train_fraction = 0.7);

Index window_count(Index timestamps, Index L, Index stride);

Matrix normalize(const Matrix& values_node_major, const NormStats& stats);
/// Inverse of the per-node affine normalization; `values` is N x L.
Matrix denormalize(const MaskedSample& sample, const Matrix& values);
Matrix denormalize(const NormStats& stats, const Matrix& values);

// ------------------------------------------------------------------ masks

/// Each entry missing independently with probability `rate`.
Mask generate_random_mask(Index N, Index L, double rate, std::uint64_t seed);

/// The seed node followed by its N_v-1 strongest-adjacency neighbours (ties by index).
std::vector<Index> block_nodes(const GraphSpec& graph, Index seed_node, Index nodes_per_block);

/// Blocks of N_v graph-adjacent nodes x N_t consecutive timestamps until the
/// missing fraction reaches `rate`.
Mask generate_block_mask(Index N, Index L, double rate, Index nodes_per_block, Index steps_per_block,
                         const GraphSpec& graph, std::uint64_t seed);

/// Samples ceil(fraction * |M=1|) observed entries as targets; condition = M - target.
MaskPair split_target_condition(const Mask& M, double target_fraction, std::uint64_t seed);

/// Evaluation split: every missing entry is a target, every observed entry a condition.
MaskPair evaluation_pair(const Mask& M);

inline Matrix as_real(const Mask& m) { return m.cast<double>(); }
inline Index count(const Mask& m) { return m.cast<Index>().sum(); }

}  // namespace adasti::data
