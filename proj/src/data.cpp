#include "adasti/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "adasti/rng.hpp"

namespace adasti::data {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return cells;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (*b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && ptr == e;
}

struct CsvRows {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<Index> line_numbers;
};

CsvRows read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open '" + path.string() + "'");
    CsvRows out;
    std::string line;
    Index lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split_row(line);
        if (out.header.empty() && out.rows.empty() && lineno == 1) {
            out.header = std::move(cells);
            continue;
        }
        out.rows.push_back(std::move(cells));
        out.line_numbers.push_back(lineno);
    }
    return out;
}

bool is_time_column(const std::string& name) {
    std::string l = name;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return l == "timestamp" || l == "time" || l.empty();
}

void check_symmetric(const Matrix& m, const char* what) {
    require(m.rows() == m.cols(), std::string(what) + ": matrix must be square");
    for (Index i = 0; i < m.rows(); ++i) {
        require(m(i, i) == 0.0, std::string(what) + ": diagonal must be zero");
        for (Index j = 0; j < i; ++j)
            require(m(i, j) == m(j, i), std::string(what) + ": matrix must be symmetric");
    }
}

}  // namespace

Index RawSeriesTable::native_missing() const { return observed.size() - count(observed); }

RawSeriesTable load_series_csv(const std::filesystem::path& path, const std::string& missing_token) {
    auto csv = read_csv(path);
    if (csv.header.empty()) throw ParseError("'" + path.string() + "': missing header row", 1);
    const bool has_time = is_time_column(csv.header.front());
    RawSeriesTable t;
    t.node_ids.assign(csv.header.begin() + (has_time ? 1 : 0), csv.header.end());
    require(!t.node_ids.empty(), "load_series_csv: no node columns");
    std::set<std::string> uniq(t.node_ids.begin(), t.node_ids.end());
    if (uniq.size() != t.node_ids.size()) throw ParseError("duplicate node id in header", 1);

    const auto T = static_cast<Index>(csv.rows.size());
    const auto N = static_cast<Index>(t.node_ids.size());
    const auto width = static_cast<std::size_t>(N + (has_time ? 1 : 0));
    t.values = Matrix::Zero(T, N);
    t.observed = Mask::Ones(T, N);
    t.timestamps.resize(static_cast<std::size_t>(T));
    for (Index r = 0; r < T; ++r) {
        const auto& row = csv.rows[static_cast<std::size_t>(r)];
        const Index line = csv.line_numbers[static_cast<std::size_t>(r)];
        if (row.size() != width)
            throw ParseError("row has " + std::to_string(row.size()) + " cells, expected " + std::to_string(width), line);
        if (has_time) {
            double ts;
            if (!parse_double(row[0], ts)) throw ParseError("non-numeric timestamp '" + row[0] + "'", line);
            t.timestamps[static_cast<std::size_t>(r)] = ts;
            if (r > 0 && !(ts > t.timestamps[static_cast<std::size_t>(r - 1)]))
                throw ParseError("timestamps must be strictly increasing", line);
        } else {
            t.timestamps[static_cast<std::size_t>(r)] = static_cast<double>(r);
        }
        for (Index n = 0; n < N; ++n) {
            const auto& cell = row[static_cast<std::size_t>(n + (has_time ? 1 : 0))];
            if (cell == missing_token || cell.empty()) {
                t.observed(r, n) = 0;
                continue;
            }
            double v;
            if (!parse_double(cell, v) || !std::isfinite(v))
                throw ParseError("non-numeric cell '" + cell + "' in column '" + t.node_ids[static_cast<std::size_t>(n)] + "'", line);
            t.values(r, n) = v;
        }
    }
    return t;
}

Matrix load_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* header) {
    auto csv = read_csv(path);
    // The first line is a header only if it is not numeric.
    bool numeric_first = !csv.header.empty();
    for (const auto& c : csv.header) {
        double v;
        numeric_first = numeric_first && parse_double(c, v);
    }
    if (numeric_first) {
        csv.rows.insert(csv.rows.begin(), csv.header);
        csv.line_numbers.insert(csv.line_numbers.begin(), 1);
        csv.header.clear();
    } else if (header) {
        *header = csv.header;
    }
    const auto R = static_cast<Index>(csv.rows.size());
    if (R == 0) throw ParseError("'" + path.string() + "': no data rows", 1);
    const auto C = static_cast<Index>(csv.rows[0].size());
    Matrix m(R, C);
    for (Index r = 0; r < R; ++r) {
        const auto& row = csv.rows[static_cast<std::size_t>(r)];
        const Index line = csv.line_numbers[static_cast<std::size_t>(r)];
        if (static_cast<Index>(row.size()) != C)
            throw ParseError("row has " + std::to_string(row.size()) + " cells, expected " + std::to_string(C), line);
        for (Index c = 0; c < C; ++c) {
            double v;
            if (!parse_double(row[static_cast<std::size_t>(c)], v))
                throw ParseError("non-numeric cell '" + row[static_cast<std::size_t>(c)] + "'", line);
            m(r, c) = v;
        }
    }
    return m;
}

void write_series_csv(const std::filesystem::path& path, const std::vector<std::string>& node_ids,
                      const Matrix& values) {
    require(static_cast<Index>(node_ids.size()) == values.cols(), "write_series_csv: header/column mismatch");
    std::ofstream out(path);
    if (!out) throw ContractError("cannot write '" + path.string() + "'");
    out.precision(17);
    for (std::size_t i = 0; i < node_ids.size(); ++i) out << (i ? "," : "") << node_ids[i];
    out << '\n';
    for (Index r = 0; r < values.rows(); ++r) {
        for (Index c = 0; c < values.cols(); ++c) out << (c ? "," : "") << values(r, c);
        out << '\n';
    }
}

void write_mask_csv(const std::filesystem::path& path, const std::vector<std::string>& node_ids, const Mask& mask) {
    require(static_cast<Index>(node_ids.size()) == mask.cols(), "write_mask_csv: header/column mismatch");
    std::ofstream out(path);
    if (!out) throw ContractError("cannot write '" + path.string() + "'");
    for (std::size_t i = 0; i < node_ids.size(); ++i) out << (i ? "," : "") << node_ids[i];
    out << '\n';
    for (Index r = 0; r < mask.rows(); ++r) {
        for (Index c = 0; c < mask.cols(); ++c) out << (c ? "," : "") << int(mask(r, c));
        out << '\n';
    }
}

Mask load_mask_csv(const std::filesystem::path& path) {
    const Matrix m = load_matrix_csv(path);
    Mask out(m.rows(), m.cols());
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) {
            if (m(r, c) != 0.0 && m(r, c) != 1.0)
                throw ParseError("mask entries must be 0 or 1", r + 2);
            out(r, c) = static_cast<std::uint8_t>(m(r, c));
        }
    return out;
}

GraphSpec build_adjacency(const Matrix& distances, double threshold) {
    check_symmetric(distances, "build_adjacency");
    require(threshold >= 0.0 && threshold < 1.0, "build_adjacency: threshold must be in [0,1)");
    require((distances.array() >= 0.0).all(), "build_adjacency: distances must be nonnegative");
    const Index N = distances.rows();
    require(N >= 2, "build_adjacency: need at least two nodes");
    double mean = 0.0;
    const double cnt = static_cast<double>(N * (N - 1));
    for (Index i = 0; i < N; ++i)
        for (Index j = 0; j < N; ++j)
            if (i != j) mean += distances(i, j);
    mean /= cnt;
    double var = 0.0;
    for (Index i = 0; i < N; ++i)
        for (Index j = 0; j < N; ++j)
            if (i != j) var += (distances(i, j) - mean) * (distances(i, j) - mean);
    const double sigma = std::sqrt(var / cnt);
    if (!(sigma > 0.0))
        throw NumericalError("build_adjacency: degenerate geometry (all off-diagonal distances identical)");
    GraphSpec g;
    g.adjacency = Matrix::Zero(N, N);
    for (Index i = 0; i < N; ++i)
        for (Index j = 0; j < N; ++j) {
            if (i == j) continue;
            const double d = distances(i, j);
            const double w = std::exp(-(d * d) / (sigma * sigma));
            g.adjacency(i, j) = w < threshold ? 0.0 : w;
        }
    for (Index i = 0; i < N; ++i) g.node_ids.push_back(std::to_string(i));
    return g;
}

GraphSpec adjacency_from_matrix(Matrix adjacency, std::vector<std::string> node_ids) {
    check_symmetric(adjacency, "adjacency");
    require((adjacency.array() >= 0.0).all() && (adjacency.array() <= 1.0).all(),
            "adjacency: weights must lie in [0,1]");
    GraphSpec g{std::move(adjacency), std::move(node_ids)};
    if (g.node_ids.empty())
        for (Index i = 0; i < g.num_nodes(); ++i) g.node_ids.push_back(std::to_string(i));
    return g;
}

Matrix normalized_adjacency(const GraphSpec& graph) {
    const Index N = graph.num_nodes();
    Matrix a = graph.adjacency + Matrix::Identity(N, N);
    const Eigen::VectorXd dinv = a.rowwise().sum().array().rsqrt();
    return dinv.asDiagonal() * a * dinv.asDiagonal();
}

NormStats compute_norm_stats(const Matrix& values, const Mask& observed, Index train_end,
                             const std::vector<std::string>& node_ids) {
    require(values.rows() == observed.rows() && values.cols() == observed.cols(), "compute_norm_stats: shape mismatch");
    require(train_end >= 1 && train_end <= values.rows(), "compute_norm_stats: bad training range");
    const Index N = values.cols();
    NormStats s{Eigen::VectorXd(N), Eigen::VectorXd(N)};
    for (Index n = 0; n < N; ++n) {
        double sum = 0.0, sq = 0.0;
        Index cnt = 0;
        for (Index t = 0; t < train_end; ++t)
            if (observed(t, n)) {
                sum += values(t, n);
                ++cnt;
            }
        if (cnt == 0) {
            const std::string name = n < static_cast<Index>(node_ids.size()) ? node_ids[static_cast<std::size_t>(n)]
                                                                            : std::to_string(n);
            throw NumericalError("normalization: node '" + name + "' has no observed training entries");
        }
        const double mu = sum / static_cast<double>(cnt);
        for (Index t = 0; t < train_end; ++t)
            if (observed(t, n)) sq += (values(t, n) - mu) * (values(t, n) - mu);
        const double sd = std::sqrt(sq / static_cast<double>(cnt));
        s.mean(n) = mu;
        s.std(n) = sd > 1e-12 ? sd : 1.0;
    }
    return s;
}

Index window_count(Index timestamps, Index L, Index stride) {
    require(L >= 1 && stride >= 1, "window_count: L and stride must be positive");
    if (L > timestamps) return 0;
    return (timestamps - L) / stride + 1;
}

Matrix normalize(const Matrix& values, const NormStats& stats) {
    require(values.rows() == stats.mean.size(), "normalize: node count mismatch");
    return (values.colwise() - stats.mean).array().colwise() / stats.std.array();
}

std::vector<MaskedSample> window_and_normalize(const Matrix& values, const Mask& observed, Index L, Index stride,
                                               const NormStats& stats) {
    require(L <= values.rows(), "window_and_normalize: L exceeds the number of timestamps");
    require(stats.mean.size() == values.cols(), "window_and_normalize: stats/node mismatch");
    const Index W = window_count(values.rows(), L, stride);
    std::vector<MaskedSample> out;
    out.reserve(static_cast<std::size_t>(W));
    for (Index w = 0; w < W; ++w) {
        const Index s = w * stride;
        MaskedSample ms;
        ms.start = s;
        ms.stats = stats;
        ms.M = observed.middleRows(s, L).transpose();
        ms.X = normalize(values.middleRows(s, L).transpose(), stats);
        for (Index i = 0; i < ms.X.size(); ++i)
            if (!ms.M.data()[i]) ms.X.data()[i] = 0.0;
        out.push_back(std::move(ms));
    }
    return out;
}

std::vector<MaskedSample> window_and_normalize(const RawSeriesTable& table, Index L, Index stride,
                                               double train_fraction) {
    require(train_fraction > 0.0 && train_fraction <= 1.0, "window_and_normalize: train_fraction in (0,1]");
    const auto train_end = std::max<Index>(1, static_cast<Index>(std::floor(train_fraction * static_cast<double>(table.num_timestamps()))));
    const auto stats = compute_norm_stats(table.values, table.observed, train_end, table.node_ids);
    return window_and_normalize(table.values, table.observed, L, stride, stats);
}

Matrix denormalize(const NormStats& stats, const Matrix& values) {
    require(values.rows() == stats.mean.size(), "denormalize: shape mismatch (" + std::to_string(values.rows()) +
                                                    " rows vs " + std::to_string(stats.mean.size()) + " nodes)");
    return (values.array().colwise() * stats.std.array()).matrix().colwise() + stats.mean;
}

Matrix denormalize(const MaskedSample& sample, const Matrix& values) {
    require(values.rows() == sample.X.rows() && values.cols() == sample.X.cols(), "denormalize: shape mismatch");
    return denormalize(sample.stats, values);
}

Mask generate_random_mask(Index N, Index L, double rate, std::uint64_t seed) {
    require(rate > 0.0 && rate < 1.0, "generate_random_mask: rate must lie in (0,1)");
    require(N >= 1 && L >= 1, "generate_random_mask: empty shape");
    Rng rng = Rng::stream(seed, {0x52414e44});
    Mask m(N, L);
    for (Index n = 0; n < N; ++n)
        for (Index t = 0; t < L; ++t) m(n, t) = rng.uniform() < rate ? 0 : 1;
    return m;
}

std::vector<Index> block_nodes(const GraphSpec& graph, Index seed_node, Index nodes_per_block) {
    const Index N = graph.num_nodes();
    require(seed_node >= 0 && seed_node < N, "block_nodes: seed node out of range");
    require(nodes_per_block >= 1 && nodes_per_block <= N, "block_nodes: N_v must lie in [1, N]");
    std::vector<Index> others;
    for (Index j = 0; j < N; ++j)
        if (j != seed_node) others.push_back(j);
    std::stable_sort(others.begin(), others.end(), [&](Index a, Index b) {
        return graph.adjacency(seed_node, a) > graph.adjacency(seed_node, b);
    });
    std::vector<Index> nodes{seed_node};
    nodes.insert(nodes.end(), others.begin(), others.begin() + (nodes_per_block - 1));
    return nodes;
}

Mask generate_block_mask(Index N, Index L, double rate, Index nodes_per_block, Index steps_per_block,
                         const GraphSpec& graph, std::uint64_t seed) {
    require(rate > 0.0 && rate < 1.0, "generate_block_mask: rate must lie in (0,1)");
    require(graph.num_nodes() == N, "generate_block_mask: graph has " + std::to_string(graph.num_nodes()) +
                                        " nodes, mask has " + std::to_string(N));
    require(nodes_per_block >= 1 && nodes_per_block <= N, "generate_block_mask: N_v must lie in [1, N]");
    require(steps_per_block >= 1 && steps_per_block <= L, "generate_block_mask: N_t must lie in [1, L]");
    Rng rng = Rng::stream(seed, {0x424c4b});
    Mask m = Mask::Ones(N, L);
    const double total = static_cast<double>(N * L);
    Index missing = 0;
    while (static_cast<double>(missing) / total < rate) {
        const auto seed_node = static_cast<Index>(rng.below(static_cast<std::uint64_t>(N)));
        const auto t0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(L - steps_per_block + 1)));
        for (Index n : block_nodes(graph, seed_node, nodes_per_block))
            for (Index t = t0; t < t0 + steps_per_block; ++t)
                if (m(n, t)) {
                    m(n, t) = 0;
                    ++missing;
                }
    }
    return m;
}

MaskPair split_target_condition(const Mask& M, double target_fraction, std::uint64_t seed) {
    require(target_fraction > 0.0 && target_fraction < 1.0, "split_target_condition: fraction must lie in (0,1)");
    std::vector<Index> obs;
    for (Index i = 0; i < M.size(); ++i)
        if (M.data()[i]) obs.push_back(i);
    require(!obs.empty(), "split_target_condition: no observed entries");
    const auto k = static_cast<std::size_t>(std::ceil(target_fraction * static_cast<double>(obs.size())));
    Rng rng = Rng::stream(seed, {0x5350});
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(obs.size() - i));
        std::swap(obs[i], obs[j]);
    }
    MaskPair p{Mask::Zero(M.rows(), M.cols()), M};
    for (std::size_t i = 0; i < k; ++i) {
        p.target.data()[obs[i]] = 1;
        p.condition.data()[obs[i]] = 0;
    }
    return p;
}

MaskPair evaluation_pair(const Mask& M) {
    Mask target = M.unaryExpr([](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 0 : 1); });
    return {std::move(target), M};
}

}  // namespace adasti::data
