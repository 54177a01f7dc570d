#include "adasti/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "adasti/baselines.hpp"

namespace adasti {

using data::Mask;
using data::Matrix;

Mask PreparedData::targets(Index w) const {
    const auto& t = truth.at(static_cast<std::size_t>(w));
    const Mask& o = observed.at(static_cast<std::size_t>(w));
    Mask out(t.M.rows(), t.M.cols());
    for (Index i = 0; i < out.size(); ++i) out(i) = (t.M(i) && !o(i)) ? 1 : 0;
    return out;
}

Matrix PreparedData::visible(Index w) const {
    Matrix x = truth.at(static_cast<std::size_t>(w)).X;
    const Mask& o = observed.at(static_cast<std::size_t>(w));
    for (Index i = 0; i < x.size(); ++i)
        if (!o(i)) x(i) = 0.0;
    return x;
}

data::GraphSpec load_graph(const ExperimentConfig& cfg) {
    std::vector<std::string> ids;
    if (!cfg.adjacency.empty()) return data::adjacency_from_matrix(data::load_matrix_csv(cfg.adjacency, &ids), ids);
    data::GraphSpec g = data::build_adjacency(data::load_matrix_csv(cfg.distances, &ids), cfg.threshold);
    g.node_ids = ids;
    return g;
}

Mask injected_mask(const ExperimentConfig& cfg, const data::GraphSpec& graph, Index timestamps) {
    const Index N = graph.num_nodes();
    if (!cfg.mask.empty()) {
        Mask m = data::load_mask_csv(cfg.mask);
        require(m.rows() == timestamps && m.cols() == N,
                "mask file is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", data is " +
                    std::to_string(timestamps) + "x" + std::to_string(N));
        return m;
    }
    const std::uint64_t seed = derive_seed(cfg.seed, {0x4d41534b});
    switch (cfg.pattern) {
        case MissingPattern::random: return data::generate_random_mask(N, timestamps, cfg.rate, seed).transpose();
        case MissingPattern::block:
            return data::generate_block_mask(N, timestamps, cfg.rate, cfg.block_nodes, cfg.block_steps, graph, seed)
                .transpose();
        case MissingPattern::native: break;
    }
    return Mask::Ones(timestamps, N);
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
    cfg.validate();
    return prepare_data(cfg, data::load_series_csv(cfg.data, cfg.missing_token), load_graph(cfg));
}

PreparedData prepare_data(const ExperimentConfig& cfg, const data::RawSeriesTable& table, const data::GraphSpec& graph) {
    const Index T = table.num_timestamps(), N = table.num_nodes(), L = cfg.window, S = cfg.effective_stride();
    require(graph.num_nodes() == N, "graph has " + std::to_string(graph.num_nodes()) + " nodes, data has " +
                                        std::to_string(N));
    const Index W = data::window_count(T, L, S);
    const auto n_train = static_cast<Index>(std::floor(cfg.train_fraction * static_cast<double>(W)));
    const auto n_val = static_cast<Index>(std::floor(cfg.val_fraction * static_cast<double>(W)));
    require(n_train >= 1 && W - n_train - n_val >= 1,
            "dataset yields " + std::to_string(W) + " windows, too few for a train/test split");

    PreparedData d;
    d.node_ids = table.node_ids;
    d.graph = graph;
    const Mask injected = injected_mask(cfg, graph, T);
    Mask visible_tm(T, N);
    for (Index i = 0; i < visible_tm.size(); ++i) visible_tm(i) = (table.observed(i) && injected(i)) ? 1 : 0;

    const Index train_end = (n_train - 1) * S + L;
    d.stats = data::compute_norm_stats(table.values, visible_tm, train_end, table.node_ids);
    d.truth = data::window_and_normalize(table.values, table.observed, L, S, d.stats);
    for (const auto& w : d.truth) d.observed.push_back(visible_tm.middleRows(w.start, L).transpose());
    for (Index w = 0; w < W; ++w) (w < n_train ? d.train : w < n_train + n_val ? d.val : d.test).push_back(w);
    return d;
}

double learning_rate_at(const ExperimentConfig& cfg, Index epoch) {
    const double e = static_cast<double>(epoch), E = static_cast<double>(cfg.epochs);
    double lr = cfg.learning_rate;
    if (e >= std::floor(0.75 * E)) lr *= 0.1;
    if (e >= std::floor(0.9 * E)) lr *= 0.1;
    return lr;
}

namespace {

bool all_finite(const std::vector<Tensor>& grads) {
    for (const auto& g : grads)
        if (!g.all_finite()) return false;
    return true;
}

std::string diagnostics(Index step, Index epoch, double lr, double gnorm) {
    std::ostringstream os;
    os << "step " << step << ", epoch " << epoch << ", learning rate " << lr << ", grad norm " << gnorm;
    return os.str();
}

}  // namespace

TrainResult train(const ExperimentConfig& cfg, const PreparedData& data, std::ostream* log) {
    const NoiseSchedule sched = cfg.noise_schedule();
    AdaSti model = AdaSti::create(cfg.model(static_cast<Index>(data.node_ids.size())), data.graph, cfg.seed);
    Adam adam(model.params());
    Rng shuffle_rng = Rng::stream(cfg.seed, {0x5348});

    TrainResult result{model, {}, {}, -1, 0.0};
    Index step = 0;
    bool have_best = false;
    for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = learning_rate_at(cfg, epoch);
        std::vector<Index> order = data.train;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        EpochStats st;
        st.epoch = epoch;
        st.lr = lr;
        Index seen = 0;
        double gsum = 0.0;
        Index batches = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Tensor> grads;
            Index used = 0;
            for (std::size_t i = b0; i < b1; ++i) {
                const Index w = order[i];
                const Mask& M = data.observed[static_cast<std::size_t>(w)];
                if (data::count(M) < 2) continue;
                const data::MaskPair pair = data::split_target_condition(
                    M, cfg.target_fraction,
                    derive_seed(cfg.seed, {0x5350, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(w)}));
                if (data::count(pair.condition) == 0) continue;
                Rng rng = Rng::stream(cfg.seed, {0x4e4f, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(w)});
                Context ctx(model.params(), true);
                const LossTerms terms = total_loss(ctx, model, data.visible(w), pair, sched, cfg.lambda, rng);
                const double loss = terms.total.item();
                if (!std::isfinite(loss))
                    throw NumericalError("non-finite training loss at " + diagnostics(step, epoch, lr, std::nan("")));
                terms.total.backward();
                const auto g = ctx.gradients();
                if (grads.empty())
                    grads = g;
                else
                    accumulate_grads(grads, g);
                st.loss += loss;
                st.diffusion += terms.diffusion;
                st.rec_f += terms.rec_f;
                st.rec_b += terms.rec_b;
                st.cons += terms.cons;
                ++used;
            }
            if (used == 0) continue;
            for (auto& g : grads) g.scale_(1.0 / static_cast<double>(used));
            const double gnorm = grad_norm(grads);
            if (!std::isfinite(gnorm) || !all_finite(grads))
                throw NumericalError("non-finite gradient at " + diagnostics(step, epoch, lr, gnorm));
            adam.step(model.params(), grads, lr);
            ++step;
            seen += used;
            gsum += gnorm;
            ++batches;
        }
        require(seen > 0, "training: no usable training windows");
        const double inv = 1.0 / static_cast<double>(seen);
        st.loss *= inv;
        st.diffusion *= inv;
        st.rec_f *= inv;
        st.rec_b *= inv;
        st.cons *= inv;
        st.grad_norm = batches > 0 ? gsum / static_cast<double>(batches) : 0.0;

        const bool last = epoch + 1 == cfg.epochs;
        if (!data.val.empty() && ((epoch + 1) % cfg.validate_every == 0 || last)) {
            st.val_mae = evaluate_model(model, cfg, data, data.val, cfg.val_k, derive_seed(cfg.seed, {0x56414c})).mae;
            if (!have_best || *st.val_mae < result.best_val_mae) {
                have_best = true;
                result.best_val_mae = *st.val_mae;
                result.best_epoch = epoch;
                result.model = model;
                result.checkpoint =
                    make_checkpoint(cfg, model, &adam, epoch + 1, shuffle_rng, data.stats, data.node_ids);
            }
        } else if (data.val.empty() && last) {
            result.best_epoch = epoch;
            result.model = model;
            result.checkpoint = make_checkpoint(cfg, model, &adam, epoch + 1, shuffle_rng, data.stats, data.node_ids);
        }
        if (log) {
            *log << "epoch " << epoch + 1 << "/" << cfg.epochs << " lr " << lr << " loss " << st.loss << " (diffusion "
                 << st.diffusion << ", rec " << st.rec_f + st.rec_b << ", cons " << st.cons << ") grad "
                 << st.grad_norm;
            if (st.val_mae) *log << " val_mae " << *st.val_mae;
            *log << std::endl;
        }
        result.history.push_back(st);
    }
    return result;
}

namespace {

struct NodeAccumulators {
    std::vector<ErrorAccumulator> node;
    ErrorAccumulator all;
};

void score_window(NodeAccumulators& acc, const Matrix& pred_sensor, const Matrix& truth_sensor, const Mask& targets) {
    for (Index n = 0; n < truth_sensor.rows(); ++n)
        for (Index l = 0; l < truth_sensor.cols(); ++l)
            if (targets(n, l)) {
                acc.node[static_cast<std::size_t>(n)].add(pred_sensor(n, l), truth_sensor(n, l));
                acc.all.add(pred_sensor(n, l), truth_sensor(n, l));
            }
}

MetricsReport finish_report(const NodeAccumulators& acc, const PreparedData& data, const std::string& method) {
    require(acc.all.count > 0, "evaluation: no target entries");
    MetricsReport r;
    r.method = method;
    r.mae = acc.all.mae();
    r.rmse = acc.all.rmse();
    r.targets = acc.all.count;
    for (std::size_t n = 0; n < acc.node.size(); ++n) {
        NodeMetrics m;
        m.node = n < data.node_ids.size() ? data.node_ids[n] : std::to_string(n);
        m.count = acc.node[n].count;
        if (m.count > 0) {
            m.mae = acc.node[n].mae();
            m.rmse = acc.node[n].rmse();
        }
        r.per_node.push_back(m);
    }
    return r;
}

}  // namespace

MetricsReport evaluate_model(const AdaSti& model, const ExperimentConfig& cfg, const PreparedData& data,
                             const std::vector<Index>& windows, Index k, std::uint64_t seed,
                             std::vector<Matrix>* imputed) {
    const NoiseSchedule sched = cfg.noise_schedule();
    NodeAccumulators acc;
    acc.node.resize(data.node_ids.size());
    for (const Index w : windows) {
        const auto& truth = data.truth[static_cast<std::size_t>(w)];
        const Mask& M = data.observed[static_cast<std::size_t>(w)];
        const auto res = impute(model, data.visible(w), M, sched, k, derive_seed(seed, {static_cast<std::uint64_t>(w)}),
                                cfg.literal_reverse_coeffs);
        const Matrix pred = data::denormalize(truth, res.median);
        score_window(acc, pred, data::denormalize(truth, truth.X), data.targets(w));
        if (imputed) imputed->push_back(pred);
    }
    MetricsReport r = finish_report(acc, data, "adasti");
    r.k = k;
    r.seed = seed;
    r.config_fingerprint = fingerprint_hex(fingerprint(cfg));
    return r;
}

MetricsReport evaluate_baseline(Baseline b, const PreparedData& data, const std::vector<Index>& windows,
                                std::vector<Matrix>* imputed) {
    NodeAccumulators acc;
    acc.node.resize(data.node_ids.size());
    for (const Index w : windows) {
        const auto& truth = data.truth[static_cast<std::size_t>(w)];
        const Mask& M = data.observed[static_cast<std::size_t>(w)];
        const Matrix x = data.visible(w);
        const Matrix filled = b == Baseline::mean ? baseline_mean(x, M) : baseline_tli(x, M);
        const Matrix pred = data::denormalize(truth, filled);
        score_window(acc, pred, data::denormalize(truth, truth.X), data.targets(w));
        if (imputed) imputed->push_back(pred);
    }
    return finish_report(acc, data, b == Baseline::mean ? "mean" : "tli");
}

void write_trace_csv(const std::filesystem::path& path, const PreparedData& data, const std::vector<Index>& windows,
                     const std::vector<Matrix>& imputed) {
    require(windows.size() == imputed.size(), "trace: one imputation per window required");
    std::ofstream out(path);
    if (!out) throw ContractError("cannot write trace " + path.string());
    out << "window,node,time,truth,imputed,target\n" << std::setprecision(10);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const Index w = windows[i];
        const auto& truth = data.truth[static_cast<std::size_t>(w)];
        const Matrix t = data::denormalize(truth, truth.X);
        const Mask targets = data.targets(w);
        for (Index n = 0; n < t.rows(); ++n)
            for (Index l = 0; l < t.cols(); ++l) {
                out << w << ',' << data.node_ids[static_cast<std::size_t>(n)] << ',' << truth.start + l << ',';
                if (truth.M(n, l))
                    out << t(n, l);
                out << ',' << imputed[i](n, l) << ',' << int(targets(n, l)) << '\n';
            }
    }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const PreparedData& data, std::ostream* log) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentResult out{train(cfg, data, log), {}};
    std::vector<Matrix> imputed;
    out.report = evaluate_model(out.training.model, cfg, data, data.test, cfg.k, derive_seed(cfg.seed, {0x54455354}),
                                cfg.trace.empty() ? nullptr : &imputed);
    if (!cfg.trace.empty()) write_trace_csv(cfg.trace, data, data.test, imputed);
    const MetricsReport mean = evaluate_baseline(Baseline::mean, data, data.test);
    const MetricsReport tli = evaluate_baseline(Baseline::tli, data, data.test);
    auto& x = out.report.extra;
    x["baseline_mean.mae"] = mean.mae;
    x["baseline_mean.rmse"] = mean.rmse;
    x["baseline_tli.mae"] = tli.mae;
    x["baseline_tli.rmse"] = tli.rmse;
    x["train.best_epoch"] = static_cast<double>(out.training.best_epoch + 1);
    x["train.first_loss"] = out.training.history.front().loss;
    x["train.last_loss"] = out.training.history.back().loss;
    if (out.training.best_epoch >= 0 && !data.val.empty()) x["train.best_val_mae"] = out.training.best_val_mae;
    out.report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

Matrix impute_table(const AdaSti& model, const ExperimentConfig& cfg, const data::NormStats& stats,
                    const data::RawSeriesTable& table, const Mask& keep, Index k, std::uint64_t seed) {
    const Index T = table.num_timestamps(), N = table.num_nodes(), L = model.config().length;
    require(N == model.config().nodes, "impute: data has " + std::to_string(N) + " nodes, model expects " +
                                           std::to_string(model.config().nodes));
    require(keep.rows() == T && keep.cols() == N, "impute: mask shape does not match the data");
    require(T >= L, "impute: data has fewer timestamps than the window length " + std::to_string(L));
    require(stats.mean.size() == N, "impute: normalization record does not match the data");
    const NoiseSchedule sched = cfg.noise_schedule();
    Mask M_tm(T, N);
    for (Index i = 0; i < M_tm.size(); ++i) M_tm(i) = (table.observed(i) && keep(i)) ? 1 : 0;

    Matrix out = table.values;
    std::vector<Index> starts;
    for (Index s = 0; s + L <= T; s += L) starts.push_back(s);
    if (starts.back() + L < T) starts.push_back(T - L);
    Index done = 0;  // timestamps already written
    for (std::size_t i = 0; i < starts.size(); ++i) {
        const Index s = starts[i];
        const Mask M = M_tm.middleRows(s, L).transpose();
        Matrix x = data::normalize(table.values.middleRows(s, L).transpose(), stats);
        for (Index j = 0; j < x.size(); ++j)
            if (!M(j)) x(j) = 0.0;
        const auto res = impute(model, x, M, sched, k, derive_seed(seed, {static_cast<std::uint64_t>(i)}),
                                cfg.literal_reverse_coeffs);
        const Matrix pred = data::denormalize(stats, res.median);
        for (Index l = std::max<Index>(0, done - s); l < L; ++l)
            for (Index n = 0; n < N; ++n)
                if (!M(n, l)) out(s + l, n) = pred(n, l);
        done = s + L;
    }
    for (Index i = 0; i < out.size(); ++i)
        if (M_tm(i)) out(i) = table.values(i);
    return out;
}

AblationVariant parse_ablation(const std::string& s) {
    if (s == "no_bis4pi") return AblationVariant::no_bis4pi;
    if (s == "no_gated_attention") return AblationVariant::no_gated_attention;
    throw ContractError("unknown ablation variant '" + s + "' (expected no_bis4pi or no_gated_attention)");
}

std::string to_string(AblationVariant v) {
    return v == AblationVariant::no_bis4pi ? "no_bis4pi" : "no_gated_attention";
}

ExperimentConfig ablated(ExperimentConfig cfg, AblationVariant v) {
    if (v == AblationVariant::no_bis4pi)
        cfg.no_bis4pi = true;
    else
        cfg.no_gated_attention = true;
    return cfg;
}

ExperimentResult run_ablation(const ExperimentConfig& cfg, AblationVariant v, const PreparedData& data,
                              std::ostream* log) {
    ExperimentResult r = run_experiment(ablated(cfg, v), data, log);
    r.report.method = "adasti_" + to_string(v);
    return r;
}

}  // namespace adasti
