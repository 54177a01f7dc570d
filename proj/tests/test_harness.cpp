#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "adasti/baselines.hpp"
#include "adasti/experiment.hpp"
#include "adasti/synthetic.hpp"
#include "test_support.hpp"

using namespace adasti;
using data::Mask;
using data::Matrix;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("adasti_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ExperimentConfig tiny_experiment() {
    ExperimentConfig c;
    c.window = 8;
    c.channels = 8;
    c.mlp_hidden = 16;
    c.heads = 2;
    c.layers = 1;
    c.step_embedding = 8;
    c.state_dim = 4;
    c.feature_width = 8;
    c.feature_heads = 2;
    c.diffusion_steps = 4;
    c.epochs = 4;
    c.batch_size = 4;
    c.validate_every = 2;
    c.k = 3;
    c.seed = 5;
    c.lambda = 0.5;
    c.learning_rate = 3e-3;
    return c;
}

struct TinyData {
    SyntheticDataset ds;
    ExperimentConfig cfg = tiny_experiment();
    PreparedData data;

    TinyData() {
        SyntheticSpec spec;
        spec.nodes = 4;
        spec.windows = 12;
        spec.length = 8;
        spec.seed = 3;
        ds = make_synthetic(spec);
        data = prepare_data(cfg, ds.table, ds.graph);
    }
};

const char* kConfigText = R"(# comment
data = series.csv
adjacency = adj.csv
window = 12
pattern = block
rate = 0.3
channels = 16
schedule = linear
positional_encoding = false
seed = 77
report = out/report.txt
)";

}  // namespace

TEST(Config, ParsesAndResolvesPaths) {
    const auto c = parse_config(kConfigText, "/base");
    EXPECT_EQ(c.data, "/base/series.csv");
    EXPECT_EQ(c.report, "/base/out/report.txt");
    EXPECT_EQ(c.window, 12);
    EXPECT_EQ(c.pattern, MissingPattern::block);
    EXPECT_DOUBLE_EQ(c.rate, 0.3);
    EXPECT_EQ(c.channels, 16);
    EXPECT_EQ(c.schedule, ScheduleKind::linear);
    EXPECT_FALSE(c.positional_encoding);
    EXPECT_EQ(c.seed, 77u);
    EXPECT_EQ(c.heads, ExperimentConfig{}.heads);
}

TEST(Config, RoundTrip) {
    const auto c = parse_config(kConfigText, "/base");
    const auto again = parse_config(to_text(c));
    EXPECT_EQ(to_text(again), to_text(c));
    EXPECT_EQ(fingerprint(again), fingerprint(c));
}

TEST(Config, RejectsUnknownDuplicateAndBadValues) {
    try {
        parse_config("window = 4\nwindoww = 5\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("windoww"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_config("seed = 1\nseed = 2\n"), ParseError);
    EXPECT_THROW(parse_config("window = twelve\n"), ParseError);
    EXPECT_THROW(parse_config("no_bis4pi = maybe\n"), ParseError);
    EXPECT_THROW(parse_config("just a line\n"), ParseError);
    EXPECT_THROW(parse_config("pattern = diagonal\n"), ParseError);
}

TEST(Config, ValidateRanges) {
    ExperimentConfig c = tiny_experiment();
    EXPECT_THROW(c.validate(false), ContractError);  // no data file
    c.data = "series.csv";
    c.adjacency = "adj.csv";
    EXPECT_NO_THROW(c.validate(false));
    ExperimentConfig bad = c;
    bad.rate = 1.0;
    EXPECT_THROW(bad.validate(false), ContractError);
    bad = c;
    bad.channels = 7;  // not divisible by heads
    EXPECT_THROW(bad.validate(false), ContractError);
    c.data = "/nonexistent/series.csv";
    EXPECT_THROW(c.validate(true), ContractError);
}

TEST(Config, FingerprintTracksIdentityFieldsOnly) {
    const ExperimentConfig a = tiny_experiment();
    ExperimentConfig b = a;
    b.report = "elsewhere.txt";
    b.checkpoint = "other.ckpt";
    EXPECT_EQ(fingerprint(a), fingerprint(b));
    b.seed = 6;
    EXPECT_NE(fingerprint(a), fingerprint(b));
    EXPECT_EQ(fingerprint_hex(0x1f).size(), 16u);
}

TEST(Metrics, HandCase) {
    const Matrix pred = (Matrix(1, 3) << 2, 4, 100).finished();
    const Matrix truth = (Matrix(1, 3) << 3, 6, 0).finished();
    const Mask t = (Mask(1, 3) << 1, 1, 0).finished();
    const auto m = masked_metrics(pred, truth, t);
    EXPECT_DOUBLE_EQ(m.mae, 1.5);
    EXPECT_DOUBLE_EQ(m.rmse, std::sqrt(2.5));
    EXPECT_EQ(m.count, 2);
    EXPECT_THROW(masked_metrics(pred, truth, Mask::Zero(1, 3)), ContractError);
}

TEST(Metrics, ReportRoundTrip) {
    MetricsReport r;
    r.method = "adasti";
    r.mae = 0.123456789012345;
    r.rmse = 1.0 / 3.0;
    r.targets = 99;
    r.per_node = {{"a", 0.1, 0.2, 40}, {"b c", 0.3, 0.4, 59}};
    r.config_fingerprint = "00000000deadbeef";
    r.seed = 12345678901234ULL;
    r.k = 100;
    r.wall_clock_seconds = 1.5;
    r.extra["baseline_tli.mae"] = 0.25;
    const auto back = parse_report(to_text(r));
    EXPECT_TRUE(back.same_results(r));
    EXPECT_EQ(back.mae, r.mae);
    EXPECT_EQ(back.per_node[1].node, "b c");
    MetricsReport slower = r;
    slower.wall_clock_seconds = 99.0;
    EXPECT_TRUE(slower.same_results(r));
    slower.mae += 1e-15;
    EXPECT_FALSE(slower.same_results(r));
    EXPECT_THROW(parse_report("mae = 1\nbogus = 2\n"), ParseError);
}

TEST(Baselines, MeanAndInterpolation) {
    const Matrix X = (Matrix(2, 5) << 1, 0, 0, 4, 0,
                                      0, 0, 0, 0, 0).finished();
    const Mask M = (Mask(2, 5) << 1, 0, 0, 1, 0,
                                  0, 0, 0, 0, 0).finished();
    const Matrix mean = baseline_mean(X, M);
    EXPECT_DOUBLE_EQ(mean(0, 1), 2.5);
    EXPECT_DOUBLE_EQ(mean(1, 3), 2.5);  // no observations: global mean
    EXPECT_EQ(mean(0, 0), 1.0);
    const Matrix tli = baseline_tli(X, M);
    EXPECT_DOUBLE_EQ(tli(0, 1), 2.0);
    EXPECT_DOUBLE_EQ(tli(0, 2), 3.0);
    EXPECT_DOUBLE_EQ(tli(0, 4), 4.0);
    EXPECT_DOUBLE_EQ(tli(1, 2), 2.5);
    const Mask lead = (Mask(1, 3) << 0, 0, 1).finished();
    EXPECT_DOUBLE_EQ(baseline_tli((Matrix(1, 3) << 0, 0, 7).finished(), lead)(0, 0), 7.0);
}

TEST(Checkpoint, RoundTripReproducesForward) {
    TinyData t;
    const AdaSti model = AdaSti::create(t.cfg.model(4), t.data.graph, 9);
    Adam adam(model.params());
    Rng rng(4);
    const auto ckpt = make_checkpoint(t.cfg, model, &adam, 3, rng, t.data.stats, t.data.node_ids);
    const fs::path dir = scratch("ckpt");
    save_checkpoint(dir / "a.ckpt", ckpt);
    const Checkpoint back = load_checkpoint(dir / "a.ckpt");
    EXPECT_EQ(back.epoch, 3);
    EXPECT_EQ(back.node_ids, t.data.node_ids);
    EXPECT_EQ(back.fingerprint, fingerprint(t.cfg));
    EXPECT_EQ(back.stats.mean, t.data.stats.mean);
    const AdaSti restored = restore_model(back);
    const auto sched = t.cfg.noise_schedule();
    const Index w = t.data.test.front();
    const auto a = impute(model, t.data.visible(w), t.data.observed[static_cast<std::size_t>(w)], sched, 2, 1);
    const auto b = impute(restored, t.data.visible(w), t.data.observed[static_cast<std::size_t>(w)], sched, 2, 1);
    EXPECT_EQ(a.median, b.median);
}

TEST(Checkpoint, RejectsForeignNewerAndTruncatedFiles) {
    TinyData t;
    const AdaSti model = AdaSti::create(t.cfg.model(4), t.data.graph, 9);
    const auto ckpt = make_checkpoint(t.cfg, model, nullptr, 0, Rng(1), t.data.stats, t.data.node_ids);
    const fs::path dir = scratch("ckpt_bad");
    save_checkpoint(dir / "a.ckpt", ckpt);
    std::ifstream in(dir / "a.ckpt", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream(dir / name, std::ios::binary) << content;
        return dir / name;
    };
    std::string newer = bytes;
    newer[8] = 2;
    try {
        load_checkpoint(write("newer.ckpt", newer));
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("newer"), std::string::npos) << e.what();
    }
    EXPECT_THROW(load_checkpoint(write("magic.ckpt", "NOTACKPT" + bytes.substr(8))), FormatError);
    EXPECT_THROW(load_checkpoint(write("short.ckpt", bytes.substr(0, bytes.size() / 2))), FormatError);
    EXPECT_THROW(load_checkpoint(write("long.ckpt", bytes + "x")), FormatError);
    EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), std::exception);
}

TEST(Experiment, SplitsAndTargets) {
    TinyData t;
    EXPECT_EQ(t.data.train.size(), 8u);
    EXPECT_EQ(t.data.val.size(), 1u);
    EXPECT_EQ(t.data.test.size(), 3u);
    for (std::size_t w = 0; w < t.data.truth.size(); ++w) {
        const Mask tg = t.data.targets(static_cast<Index>(w));
        const Mask& obs = t.data.observed[w];
        for (Index i = 0; i < tg.size(); ++i) {
            EXPECT_FALSE(tg(i) && obs(i));
            EXPECT_LE(obs(i), t.data.truth[w].M(i));
        }
    }
    double rate = 0.0;
    for (const auto& o : t.data.observed) rate += 1.0 - o.cast<double>().mean();
    EXPECT_NEAR(rate / static_cast<double>(t.data.observed.size()), t.cfg.rate, 0.05);
}

TEST(Experiment, LearningRateSchedule) {
    ExperimentConfig c;
    c.epochs = 20;
    c.learning_rate = 1.0;
    EXPECT_EQ(learning_rate_at(c, 14), 1.0);
    EXPECT_NEAR(learning_rate_at(c, 15), 0.1, 1e-15);
    EXPECT_NEAR(learning_rate_at(c, 18), 0.01, 1e-15);
}

TEST(Experiment, TrainingIsDeterministic) {
    TinyData t;
    const auto a = train(t.cfg, t.data), b = train(t.cfg, t.data);
    ASSERT_EQ(a.history.size(), 4u);
    for (std::size_t e = 0; e < a.history.size(); ++e) EXPECT_EQ(a.history[e].loss, b.history[e].loss);
    EXPECT_EQ(a.model.params().values(), b.model.params().values());
    EXPECT_TRUE(a.history[1].val_mae.has_value());
    EXPECT_TRUE(a.history[3].val_mae.has_value());
    EXPECT_FALSE(a.history[0].val_mae.has_value());
}

TEST(Experiment, LossDecreasesOnTinyProblem) {
    TinyData t;
    t.cfg.epochs = 12;
    t.cfg.validate_every = 12;
    const auto r = train(t.cfg, t.data);
    EXPECT_LT(r.history.back().loss, r.history.front().loss);
}

TEST(Experiment, TwoEpochsOnBenchmarkDataDescend) {
    const SyntheticSpec spec;
    const auto ds = make_synthetic(spec);
    ExperimentConfig cfg = benchmark_config(spec);
    cfg.epochs = 2;
    const auto data = prepare_data(cfg, ds.table, ds.graph);
    const auto r = train(cfg, data);
    ASSERT_EQ(r.history.size(), 2u);
    EXPECT_LT(r.history[1].loss, r.history[0].loss);
}

TEST(Experiment, LargeLambdaReconstructionDescends) {
    TinyData t;
    t.cfg.lambda = 100.0;
    t.cfg.epochs = 5;
    t.cfg.validate_every = 5;
    const auto r = train(t.cfg, t.data);
    for (std::size_t e = 1; e < r.history.size(); ++e) {
        const double prev = r.history[e - 1].rec_f + r.history[e - 1].rec_b;
        const double cur = r.history[e].rec_f + r.history[e].rec_b;
        EXPECT_LT(cur, prev) << "epoch " << e;
        EXPECT_GT(r.history[e].rec_f, 0.0);
    }
}

TEST(Experiment, AblationsRemoveModules) {
    TinyData t;
    const AdaSti no_pre = AdaSti::create(ablated(t.cfg, AblationVariant::no_bis4pi).model(4), t.data.graph, 1);
    EXPECT_TRUE(no_pre.params().group("bis4pi.").empty());
    const AdaSti no_gate = AdaSti::create(ablated(t.cfg, AblationVariant::no_gated_attention).model(4), t.data.graph, 1);
    for (const auto& n : no_gate.params().names()) {
        EXPECT_EQ(n.find("gate_"), std::string::npos) << n;
        EXPECT_EQ(n.find(".self."), std::string::npos) << n;
    }
    const AdaSti full = AdaSti::create(t.cfg.model(4), t.data.graph, 1);
    EXPECT_FALSE(full.params().group("bis4pi.").empty());
    EXPECT_EQ(parse_ablation(to_string(AblationVariant::no_gated_attention)), AblationVariant::no_gated_attention);
    EXPECT_THROW(parse_ablation("no_stc"), ContractError);
}

TEST(Experiment, ImputeTableKeepsObservedValues) {
    TinyData t;
    const AdaSti model = AdaSti::create(t.cfg.model(4), t.data.graph, 2);
    data::RawSeriesTable table = t.ds.table;
    const Index rows = 30;  // not a multiple of the window length
    table.values = table.values.topRows(rows).eval();
    table.observed = table.observed.topRows(rows).eval();
    Rng rng(3);
    const Mask keep = test::random_mask(rows, 4, 0.7, rng);
    const Matrix out = impute_table(model, t.cfg, t.data.stats, table, keep, 2, 4);
    ASSERT_EQ(out.rows(), rows);
    for (Index i = 0; i < out.size(); ++i) {
        if (keep(i) && table.observed(i)) {
            EXPECT_EQ(out(i), table.values(i));
        }
        EXPECT_TRUE(std::isfinite(out(i)));
    }
}

TEST(Cli, EndToEnd) {
    const fs::path dir = scratch("cli");
    const std::string cli = ADASTI_CLI_PATH;
    auto run = [&](const std::string& args) {
        return std::system((cli + " " + args + " > " + (dir / "log.txt").string() + " 2>&1").c_str());
    };
    ASSERT_EQ(run("make-synthetic --out-dir " + dir.string() + " --nodes 4 --windows 12 --length 8 --seed 2"), 0);
    ASSERT_TRUE(fs::exists(dir / "series.csv"));
    std::ofstream(dir / "tiny.cfg") << "data = series.csv\nadjacency = adjacency.csv\nwindow = 8\nchannels = 8\n"
                                       "mlp_hidden = 16\nheads = 2\nlayers = 1\nstep_embedding = 8\nstate_dim = 4\n"
                                       "feature_width = 8\nfeature_heads = 2\ndiffusion_steps = 3\nepochs = 2\n"
                                       "batch_size = 4\nk = 2\nseed = 1\ncheckpoint = tiny.ckpt\n";
    ASSERT_EQ(run("train --config " + (dir / "tiny.cfg").string() + " --quiet"), 0);
    ASSERT_TRUE(fs::exists(dir / "tiny.ckpt"));
    ASSERT_EQ(run("evaluate --checkpoint " + (dir / "tiny.ckpt").string() + " --report " +
                  (dir / "report.txt").string() + " --k 2"),
              0);
    const auto rep = read_report(dir / "report.txt");
    EXPECT_GT(rep.targets, 0);
    EXPECT_TRUE(std::isfinite(rep.mae));
    ASSERT_EQ(run("make-masks --pattern block --rate 0.2 --nv 2 --nt 3 --seed 4 --data " +
                  (dir / "series.csv").string() + " --adjacency " + (dir / "adjacency.csv").string() + " --out " +
                  (dir / "mask.csv").string()),
              0);
    ASSERT_EQ(run("impute --checkpoint " + (dir / "tiny.ckpt").string() + " --data " + (dir / "series.csv").string() +
                  " --mask " + (dir / "mask.csv").string() + " --out " + (dir / "imputed.csv").string() + " --k 2"),
              0);
    const auto imputed = data::load_series_csv((dir / "imputed.csv").string(), "NA");
    EXPECT_EQ(data::count(imputed.observed), imputed.observed.size());
    EXPECT_NE(run("train --config " + (dir / "missing.cfg").string()), 0);
    EXPECT_NE(run("make-masks --pattern diagonal --rate 0.2 --seed 1 --nodes 3 --timestamps 5 --out x.csv"), 0);
}
