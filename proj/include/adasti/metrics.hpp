#pragma once

// Error metrics over evaluation targets and the key-value metrics report.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "adasti/data.hpp"

namespace adasti {

/// Running sums for MAE/RMSE over masked entries.
struct ErrorAccumulator {
    double abs_sum = 0.0, sq_sum = 0.0;
    Index count = 0;

    void add(double prediction, double truth);
    double mae() const;
    double rmse() const;
};

struct Metrics {
    double mae = 0.0, rmse = 0.0;
    Index count = 0;
};

/// MAE and RMSE of `prediction` against `truth` over entries with targets != 0.
Metrics masked_metrics(const data::Matrix& prediction, const data::Matrix& truth, const data::Mask& targets);

struct NodeMetrics {
    std::string node;
    double mae = 0.0, rmse = 0.0;
    Index count = 0;
};

struct MetricsReport {
    std::string method = "adasti";
    double mae = 0.0;
    double rmse = 0.0;
    Index targets = 0;
    std::vector<NodeMetrics> per_node;
    std::string config_fingerprint;
    std::uint64_t seed = 0;
    Index k = 0;
    double wall_clock_seconds = 0.0;
    /// Additional named scalars (baseline scores, training summaries).
    std::map<std::string, double> extra;

    /// Every field except wall-clock time.
    bool same_results(const MetricsReport& o) const;
};

std::string to_text(const MetricsReport& r);
MetricsReport parse_report(const std::string& text);
void write_report(const std::filesystem::path& path, const MetricsReport& r);
MetricsReport read_report(const std::filesystem::path& path);

}  // namespace adasti
