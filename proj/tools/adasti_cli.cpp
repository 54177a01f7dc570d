// Command-line front end: training, imputation, evaluation, mask generation,
// ablation runs and the synthetic benchmark generator.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "adasti/experiment.hpp"
#include "adasti/synthetic.hpp"

namespace fs = std::filesystem;
using namespace adasti;

namespace {

void print_report(const MetricsReport& r) {
    std::cout << r.method << ": mae " << r.mae << " rmse " << r.rmse << " over " << r.targets << " targets\n";
    for (const auto& [k, v] : r.extra) std::cout << "  " << k << " " << v << "\n";
}

int cmd_train(const std::string& config_path, const std::string& out, bool quiet) {
    ExperimentConfig cfg = load_config(config_path);
    if (!out.empty()) cfg.checkpoint = out;
    const PreparedData data = prepare_data(cfg);
    std::cout << "windows: " << data.train.size() << " train, " << data.val.size() << " val, " << data.test.size()
              << " test\n";
    const TrainResult r = train(cfg, data, quiet ? nullptr : &std::cout);
    save_checkpoint(cfg.checkpoint, r.checkpoint);
    std::cout << "saved checkpoint " << cfg.checkpoint << " (epoch " << r.checkpoint.epoch << ")\n";
    return 0;
}

int cmd_impute(const std::string& ckpt_path, const std::string& data_path, const std::string& mask_path,
               const std::string& out, Index k, std::uint64_t seed) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const ExperimentConfig cfg = ckpt.config();
    const AdaSti model = restore_model(ckpt);
    const data::RawSeriesTable table = data::load_series_csv(data_path, cfg.missing_token);
    const data::Mask keep = mask_path.empty() ? data::Mask::Ones(table.num_timestamps(), table.num_nodes())
                                              : data::load_mask_csv(mask_path);
    const data::Matrix imputed = impute_table(model, cfg, ckpt.stats, table, keep, k, seed);
    data::write_series_csv(out, table.node_ids, imputed);
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& config_path, const std::string& report,
                 const std::string& trace, Index k) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    ExperimentConfig cfg = config_path.empty() ? ckpt.config() : load_config(config_path);
    if (k > 0) cfg.k = k;
    const AdaSti model = restore_model(ckpt);
    const PreparedData data = prepare_data(cfg);
    std::vector<data::Matrix> imputed;
    MetricsReport r = evaluate_model(model, cfg, data, data.test, cfg.k, derive_seed(cfg.seed, {0x54455354}),
                                     trace.empty() ? nullptr : &imputed);
    if (!trace.empty()) write_trace_csv(trace, data, data.test, imputed);
    const MetricsReport mean = evaluate_baseline(Baseline::mean, data, data.test);
    const MetricsReport tli = evaluate_baseline(Baseline::tli, data, data.test);
    r.extra["baseline_mean.mae"] = mean.mae;
    r.extra["baseline_mean.rmse"] = mean.rmse;
    r.extra["baseline_tli.mae"] = tli.mae;
    r.extra["baseline_tli.rmse"] = tli.rmse;
    write_report(report, r);
    print_report(r);
    return 0;
}

int cmd_make_masks(const std::string& pattern, double rate, Index nv, Index nt, std::uint64_t seed,
                   const std::string& out, const std::string& data_path, Index nodes, Index timestamps,
                   const std::string& adjacency, const std::string& distances, double threshold) {
    std::vector<std::string> ids;
    if (!data_path.empty()) {
        const auto table = data::load_series_csv(data_path);
        nodes = table.num_nodes();
        timestamps = table.num_timestamps();
        ids = table.node_ids;
    }
    require(nodes >= 1 && timestamps >= 1, "make-masks: give --data or both --nodes and --timestamps");
    if (ids.empty())
        for (Index i = 0; i < nodes; ++i) ids.push_back("n" + std::to_string(i));
    data::Mask m;
    if (pattern == "random") {
        m = data::generate_random_mask(nodes, timestamps, rate, seed);
    } else if (pattern == "block") {
        data::GraphSpec g;
        std::vector<std::string> header;
        if (!adjacency.empty())
            g = data::adjacency_from_matrix(data::load_matrix_csv(adjacency, &header));
        else if (!distances.empty())
            g = data::build_adjacency(data::load_matrix_csv(distances, &header), threshold);
        else
            throw ContractError("make-masks: block pattern needs --adjacency or --distances");
        m = data::generate_block_mask(nodes, timestamps, rate, nv, nt, g, seed);
    } else {
        throw ContractError("make-masks: unknown pattern '" + pattern + "'");
    }
    data::write_mask_csv(out, ids, m.transpose());
    std::cout << "wrote " << out << " (" << timestamps << "x" << nodes << ", missing fraction "
              << 1.0 - static_cast<double>(data::count(m)) / static_cast<double>(m.size()) << ")\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& variant, const std::string& report, bool quiet) {
    const ExperimentConfig cfg = load_config(config_path);
    const PreparedData data = prepare_data(cfg);
    const ExperimentResult r = run_ablation(cfg, parse_ablation(variant), data, quiet ? nullptr : &std::cout);
    const std::string path = report.empty() ? cfg.report : report;
    if (!path.empty()) write_report(path, r.report);
    print_report(r.report);
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& report, bool quiet) {
    const ExperimentConfig cfg = load_config(config_path);
    const PreparedData data = prepare_data(cfg);
    const ExperimentResult r = run_experiment(cfg, data, quiet ? nullptr : &std::cout);
    save_checkpoint(cfg.checkpoint, r.training.checkpoint);
    const std::string path = report.empty() ? cfg.report : report;
    if (!path.empty()) write_report(path, r.report);
    print_report(r.report);
    return 0;
}

int cmd_make_synthetic(const std::string& dir, const SyntheticSpec& spec) {
    fs::create_directories(dir);
    const SyntheticDataset ds = make_synthetic(spec);
    data::write_series_csv(fs::path(dir) / "series.csv", ds.table.node_ids, ds.table.values);
    data::write_series_csv(fs::path(dir) / "adjacency.csv", ds.graph.node_ids, ds.graph.adjacency);
    std::ofstream(fs::path(dir) / "experiment.cfg") << "# synthetic ring benchmark\n" << to_text(benchmark_config(spec));
    std::cout << "wrote " << dir << "/{series.csv,adjacency.csv,experiment.cfg}\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AdaSTI spatio-temporal imputation"};
    app.require_subcommand(1);

    std::string config, out, checkpoint, data_path, mask, report, trace, variant, pattern = "random";
    std::string adjacency, distances;
    Index k = 0, nv = 2, nt = 4, nodes = 0, timestamps = 0;
    double rate = 0.25, threshold = 0.1;
    std::uint64_t seed = 0;
    bool quiet = false;
    SyntheticSpec spec;

    auto* train = app.add_subcommand("train", "train a model and save the best-validation checkpoint");
    train->add_option("--config", config, "experiment config file")->required()->check(CLI::ExistingFile);
    train->add_option("--out", out, "checkpoint path (overrides the config)");
    train->add_flag("--quiet", quiet, "suppress per-epoch logging");

    auto* imp = app.add_subcommand("impute", "fill missing entries of a series CSV");
    imp->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
    imp->add_option("--data", data_path, "series CSV")->required()->check(CLI::ExistingFile);
    imp->add_option("--mask", mask, "0/1 CSV, 0 marks entries to impute")->check(CLI::ExistingFile);
    imp->add_option("--out", out, "output CSV")->required();
    imp->add_option("--k", k, "samples per entry")->default_val(100)->check(CLI::PositiveNumber);
    imp->add_option("--seed", seed, "sampling seed");

    auto* ev = app.add_subcommand("evaluate", "score a checkpoint on the test windows");
    ev->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
    ev->add_option("--config", config, "config overriding the one stored in the checkpoint")
        ->check(CLI::ExistingFile);
    ev->add_option("--report", report, "metrics report path")->required();
    ev->add_option("--trace", trace, "imputed-vs-true CSV");
    ev->add_option("--k", k, "samples per entry (default: config value)");

    auto* mm = app.add_subcommand("make-masks", "generate an observation mask CSV (1 = kept)");
    mm->add_option("--pattern", pattern)->check(CLI::IsMember({"random", "block"}));
    mm->add_option("--rate", rate)->required();
    mm->add_option("--nv", nv, "nodes per block");
    mm->add_option("--nt", nt, "timestamps per block");
    mm->add_option("--seed", seed);
    mm->add_option("--out", out)->required();
    mm->add_option("--data", data_path, "series CSV giving the shape and node ids")->check(CLI::ExistingFile);
    mm->add_option("--nodes", nodes);
    mm->add_option("--timestamps", timestamps);
    mm->add_option("--adjacency", adjacency, "adjacency CSV (block pattern)")->check(CLI::ExistingFile);
    mm->add_option("--distances", distances, "distance CSV (block pattern)")->check(CLI::ExistingFile);
    mm->add_option("--threshold", threshold);

    auto* ab = app.add_subcommand("ablate", "train and evaluate an ablated variant");
    ab->add_option("--config", config)->required()->check(CLI::ExistingFile);
    ab->add_option("--variant", variant)->required()->check(CLI::IsMember({"no_bis4pi", "no_gated_attention"}));
    ab->add_option("--report", report);
    ab->add_flag("--quiet", quiet);

    auto* run = app.add_subcommand("run", "train, evaluate and score the baselines");
    run->add_option("--config", config)->required()->check(CLI::ExistingFile);
    run->add_option("--report", report);
    run->add_flag("--quiet", quiet);

    auto* syn = app.add_subcommand("make-synthetic", "write the synthetic ring benchmark");
    syn->add_option("--out-dir", out)->required();
    syn->add_option("--nodes", spec.nodes);
    syn->add_option("--windows", spec.windows);
    syn->add_option("--length", spec.length);
    syn->add_option("--noise", spec.noise);
    syn->add_option("--seed", spec.seed);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*train) return cmd_train(config, out, quiet);
        if (*imp) return cmd_impute(checkpoint, data_path, mask, out, k, seed);
        if (*ev) return cmd_evaluate(checkpoint, config, report, trace, k);
        if (*mm) return cmd_make_masks(pattern, rate, nv, nt, seed, out, data_path, nodes, timestamps, adjacency,
                                       distances, threshold);
        if (*ab) return cmd_ablate(config, variant, report, quiet);
        if (*run) return cmd_run(config, report, quiet);
        if (*syn) return cmd_make_synthetic(out, spec);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
