#pragma once

// Generated benchmark: nodes on a ring, each carrying a phase-shifted sinusoid
// plus a field that is smooth over the graph and autocorrelated in time, plus
// white observation noise.

#include "adasti/config.hpp"
#include "adasti/data.hpp"

namespace adasti {

struct SyntheticSpec {
    Index nodes = 8;
    Index windows = 400;
    Index length = 24;
    double period = 12.0;
    double noise = 0.1;
    double field_scale = 0.5;
    double field_correlation = 0.9;  // AR(1) coefficient of the latent field
    std::uint64_t seed = 0;
};

struct SyntheticDataset {
    data::RawSeriesTable table;
    data::GraphSpec graph;
};

/// Unit-weight ring adjacency (node i linked to i-1 and i+1 mod n).
data::GraphSpec ring_graph(Index nodes);

SyntheticDataset make_synthetic(const SyntheticSpec& spec);

/// Desk-scale experiment settings for the generated data: 25% random missingness,
/// 30 epochs, k=5 and a reduced architecture. Paths are relative: series.csv,
/// adjacency.csv, adasti.ckpt and report.txt.
ExperimentConfig benchmark_config(const SyntheticSpec& spec);

}  // namespace adasti
