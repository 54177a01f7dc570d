#pragma once

// Dataset preparation, training, evaluation and ablation runs driven by an
// ExperimentConfig.

#include <iosfwd>
#include <optional>

#include "adasti/checkpoint.hpp"
#include "adasti/config.hpp"
#include "adasti/metrics.hpp"

namespace adasti {

/// Windows of the dataset with ground truth and the masks the model may see.
struct PreparedData {
    std::vector<std::string> node_ids;
    data::GraphSpec graph;
    data::NormStats stats;
    std::vector<data::MaskedSample> truth;  // M = natively observed entries
    std::vector<data::Mask> observed;       // after injected missingness; a subset of truth[w].M
    std::vector<Index> train, val, test;    // window indices, in time order

    /// Natively observed but hidden from the model: the evaluation targets of window w.
    data::Mask targets(Index w) const;
    /// Normalized values with hidden entries zeroed.
    data::Matrix visible(Index w) const;
};

/// Injected missingness over the whole table, timestamps x nodes (1 = kept).
data::Mask injected_mask(const ExperimentConfig& cfg, const data::GraphSpec& graph, Index timestamps);

data::GraphSpec load_graph(const ExperimentConfig& cfg);
PreparedData prepare_data(const ExperimentConfig& cfg);
PreparedData prepare_data(const ExperimentConfig& cfg, const data::RawSeriesTable& table, const data::GraphSpec& graph);

struct EpochStats {
    Index epoch = 0;
    double lr = 0.0;
    double loss = 0.0, diffusion = 0.0, rec_f = 0.0, rec_b = 0.0, cons = 0.0;
    double grad_norm = 0.0;
    std::optional<double> val_mae;
};

struct TrainResult {
    AdaSti model;  // best-validation weights
    Checkpoint checkpoint;
    std::vector<EpochStats> history;
    Index best_epoch = -1;
    double best_val_mae = 0.0;
};

/// Learning rate at 0-based `epoch`: x0.1 from 75% and again from 90% of the run.
double learning_rate_at(const ExperimentConfig& cfg, Index epoch);

TrainResult train(const ExperimentConfig& cfg, const PreparedData& data, std::ostream* log = nullptr);

/// Median-of-k imputation of every listed window; metrics in sensor units over the
/// hidden natively-observed entries. Denormalized imputations are appended to
/// `imputed` when given.
MetricsReport evaluate_model(const AdaSti& model, const ExperimentConfig& cfg, const PreparedData& data,
                             const std::vector<Index>& windows, Index k, std::uint64_t seed,
                             std::vector<data::Matrix>* imputed = nullptr);

enum class Baseline { mean, tli };
MetricsReport evaluate_baseline(Baseline b, const PreparedData& data, const std::vector<Index>& windows,
                                std::vector<data::Matrix>* imputed = nullptr);

/// Imputed-vs-true rows for the listed windows: window,node,time,truth,imputed,target.
void write_trace_csv(const std::filesystem::path& path, const PreparedData& data, const std::vector<Index>& windows,
                     const std::vector<data::Matrix>& imputed);

struct ExperimentResult {
    TrainResult training;
    MetricsReport report;  // test split, with baseline scores under `extra`
};

/// Train, evaluate on the test split with cfg.k samples, score both baselines.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const PreparedData& data, std::ostream* log = nullptr);

/// Imputes every entry of a whole table that is natively missing or has keep=0
/// (timestamps x nodes). Windows of the model length tile the table, the last one
/// aligned to the end. Observed entries are returned unchanged.
data::Matrix impute_table(const AdaSti& model, const ExperimentConfig& cfg, const data::NormStats& stats,
                          const data::RawSeriesTable& table, const data::Mask& keep, Index k, std::uint64_t seed);

enum class AblationVariant { no_bis4pi, no_gated_attention };
AblationVariant parse_ablation(const std::string& s);
std::string to_string(AblationVariant v);
ExperimentConfig ablated(ExperimentConfig cfg, AblationVariant v);
ExperimentResult run_ablation(const ExperimentConfig& cfg, AblationVariant v, const PreparedData& data,
                              std::ostream* log = nullptr);

}  // namespace adasti
