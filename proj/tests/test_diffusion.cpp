#include <gtest/gtest.h>

#include <cmath>

#include "adasti/diffusion.hpp"
#include "test_support.hpp"

using namespace adasti;
using data::Mask;
using data::Matrix;

namespace {

AdaSti tiny_model(Index T = 5, std::uint64_t seed = 1) {
    ModelConfig cfg = test::tiny_config();
    cfg.diffusion_steps = T;
    return AdaSti::create(cfg, test::path_graph(cfg.nodes), seed);
}

void zero_output(AdaSti& m) {
    for (Index id : m.params().group("denoiser.output")) m.params().value(id).fill(0.0);
}

struct Window {
    Matrix X;
    Mask M;
    explicit Window(std::uint64_t seed = 2, double keep = 0.7) {
        Rng rng(seed);
        X = test::random_matrix(3, 8, rng);
        M = test::random_mask(3, 8, keep, rng);
        M(0, 0) = 1;
        M(0, 1) = 0;
        M(2, 7) = 1;
        for (Index i = 0; i < X.size(); ++i)
            if (!M(i)) X(i) = 0.0;
    }
};

}  // namespace

TEST(Schedule, ProductOracleAndMonotone) {
    for (auto kind : {ScheduleKind::linear, ScheduleKind::quadratic}) {
        const auto s = make_schedule(50, 1e-4, 0.5, kind);
        double prod = 1.0;
        for (std::size_t i = 0; i < 50; ++i) {
            prod *= 1.0 - s.beta[i];
            EXPECT_NEAR(s.alpha_bar[i], prod, 1e-15);
            EXPECT_EQ(s.alpha[i], 1.0 - s.beta[i]);
            EXPECT_LE(s.beta_hat[i], s.beta[i]);
            if (i > 0) {
                EXPECT_GT(s.beta[i], s.beta[i - 1]);
                EXPECT_LT(s.alpha_bar[i], s.alpha_bar[i - 1]);
            }
        }
        EXPECT_DOUBLE_EQ(s.beta.front(), 1e-4);
        EXPECT_DOUBLE_EQ(s.beta.back(), 0.5);
        EXPECT_EQ(s.beta_hat[0], 0.0);
    }
    const auto q = make_schedule(3, 0.01, 0.09, ScheduleKind::quadratic);
    EXPECT_NEAR(q.beta[1], 0.04, 1e-15);
}

TEST(Schedule, SingleStepAndInvalidBounds) {
    const auto s = make_schedule(1, 0.1, 0.2, ScheduleKind::linear);
    EXPECT_EQ(s.T, 1);
    EXPECT_DOUBLE_EQ(s.beta[0], 0.1);
    EXPECT_DOUBLE_EQ(s.alpha_bar[0], 0.9);
    EXPECT_EQ(s.alpha_bar_prev(1), 1.0);
    EXPECT_THROW(make_schedule(0, 0.1, 0.2, ScheduleKind::linear), ContractError);
    EXPECT_THROW(make_schedule(5, 0.0, 0.2, ScheduleKind::linear), ContractError);
    EXPECT_THROW(make_schedule(5, 0.3, 0.2, ScheduleKind::linear), ContractError);
    EXPECT_THROW(make_schedule(5, 0.1, 1.0, ScheduleKind::linear), ContractError);
    EXPECT_THROW(parse_schedule_kind("cosine"), ContractError);
    EXPECT_EQ(parse_schedule_kind(to_string(ScheduleKind::quadratic)), ScheduleKind::quadratic);
}

TEST(QSample, ZeroNoiseScalesTargetsOnly) {
    const auto s = make_schedule(10, 1e-3, 0.2, ScheduleKind::linear);
    Window w;
    const Matrix out = q_sample(w.X, w.M, 4, Matrix::Zero(3, 8), s);
    for (Index i = 0; i < w.X.size(); ++i)
        EXPECT_DOUBLE_EQ(out(i), w.M(i) ? std::sqrt(s.alpha_bar[3]) * w.X(i) : 0.0);
    EXPECT_THROW(q_sample(w.X, w.M, 11, Matrix::Zero(3, 8), s), ContractError);
    EXPECT_THROW(q_sample(w.X, w.M, 0, Matrix::Zero(3, 8), s), ContractError);
}

TEST(QSample, MonteCarloMoments) {
    const auto s = make_schedule(10, 1e-3, 0.2, ScheduleKind::linear);
    const Matrix x0 = Matrix::Constant(1, 1, 1.5);
    const Mask m = Mask::Ones(1, 1);
    Rng rng(7);
    const int draws = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double v = q_sample(x0, m, 6, Matrix::Constant(1, 1, rng.normal()), s)(0);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / draws, var = sq / draws - mean * mean;
    const double ab = s.alpha_bar[5];
    EXPECT_NEAR(mean, std::sqrt(ab) * 1.5, 5.0 * std::sqrt((1 - ab) / draws));
    EXPECT_NEAR(var, 1.0 - ab, 0.01);
}

TEST(ReverseStep, PosteriorMeanFormula) {
    const auto s = make_schedule(6, 1e-3, 0.3, ScheduleKind::linear);
    Rng rng(3);
    Window w;
    const Matrix xt = test::random_matrix(3, 8, rng), eh = test::random_matrix(3, 8, rng),
                 z = test::random_matrix(3, 8, rng);
    const Index t = 4;
    const auto i = static_cast<std::size_t>(t - 1);
    const Matrix out = reverse_step(xt, w.M, eh, t, z, s);
    const Matrix lit = reverse_step(xt, w.M, eh, t, z, s, true);
    for (Index k = 0; k < xt.size(); ++k) {
        if (!w.M(k)) {
            EXPECT_EQ(out(k), 0.0);
            continue;
        }
        const double mean = (xt(k) - s.beta[i] / std::sqrt(1 - s.alpha_bar[i]) * eh(k)) / std::sqrt(s.alpha[i]);
        EXPECT_NEAR(out(k), mean + std::sqrt(s.beta_hat[i]) * z(k), 1e-13);
        const double lmean = (xt(k) - s.beta[i] / std::sqrt(1 - s.alpha[i]) * eh(k)) / s.alpha[i];
        const double lsig = std::sqrt((1 - s.alpha[i - 1]) / (1 - s.alpha[i]) * s.beta[i]);
        EXPECT_NEAR(lit(k), lmean + lsig * z(k), 1e-13);
    }
}

TEST(ReverseStep, FinalStepIgnoresNoise) {
    const auto s = make_schedule(6, 1e-3, 0.3, ScheduleKind::linear);
    Rng rng(4);
    const Matrix xt = test::random_matrix(2, 3, rng), eh = test::random_matrix(2, 3, rng);
    const Mask m = Mask::Ones(2, 3);
    EXPECT_EQ(reverse_step(xt, m, eh, 1, test::random_matrix(2, 3, rng), s),
              reverse_step(xt, m, eh, 1, Matrix::Zero(2, 3), s));
}

TEST(ReverseStep, InvertsSingleStepForwardWithTrueNoise) {
    const auto s = make_schedule(1, 0.3, 0.4, ScheduleKind::linear);
    Rng rng(5);
    const Matrix x0 = test::random_matrix(3, 4, rng), eps = test::random_matrix(3, 4, rng);
    const Mask m = Mask::Ones(3, 4);
    const Matrix back = reverse_step(q_sample(x0, m, 1, eps, s), m, eps, 1, Matrix(), s);
    EXPECT_LT((back - x0).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Median, OddEvenAndSingle) {
    auto c = [](double v) { return Matrix::Constant(1, 1, v); };
    EXPECT_EQ(entrywise_median({c(3), c(1), c(2)})(0), 2.0);
    EXPECT_EQ(entrywise_median({c(4), c(1), c(3), c(2)})(0), 2.5);
    EXPECT_EQ(entrywise_median({c(-7)})(0), -7.0);
    EXPECT_THROW(entrywise_median({}), ContractError);
}

TEST(Noise, DrawOrderIsStepThenRowMajor) {
    const auto s = make_schedule(7, 1e-3, 0.3, ScheduleKind::linear);
    Rng a(9), b(9);
    const auto d = draw_diffusion_noise(2, 3, s, a);
    EXPECT_EQ(d.t, 1 + static_cast<Index>(b.below(7)));
    for (Index n = 0; n < 2; ++n)
        for (Index l = 0; l < 3; ++l) EXPECT_EQ(d.eps(n, l), b.normal());
}

TEST(Loss, ZeroEstimatorGivesMeanSquaredNoise) {
    AdaSti m = tiny_model();
    zero_output(m);
    const auto s = make_schedule(5, 1e-3, 0.3, ScheduleKind::linear);
    Window w;
    const auto pair = data::split_target_condition(w.M, 0.3, 11);
    Rng rng(6);
    const auto draw = draw_diffusion_noise(3, 8, s, rng);
    Context ctx(m.params(), false);
    const double loss = diffusion_training_loss(ctx, m, w.X, pair, s, draw).item();
    double expect = 0.0;
    for (Index i = 0; i < w.X.size(); ++i)
        if (pair.target(i)) expect += draw.eps(i) * draw.eps(i);
    EXPECT_NEAR(loss, expect / static_cast<double>(data::count(pair.target)), 1e-13);
}

TEST(Loss, EmptyTargetsRejected) {
    AdaSti m = tiny_model();
    const auto s = make_schedule(5, 1e-3, 0.3, ScheduleKind::linear);
    Window w;
    Context ctx(m.params(), false);
    Rng rng(1);
    EXPECT_THROW(diffusion_training_loss(ctx, m, w.X, {Mask::Zero(3, 8), w.M}, s, rng), ContractError);
}

TEST(Loss, LambdaZeroIsDiffusionLoss) {
    AdaSti m = tiny_model();
    const auto s = make_schedule(5, 1e-3, 0.3, ScheduleKind::linear);
    Window w;
    const auto pair = data::split_target_condition(w.M, 0.3, 11);
    Rng rng(6);
    const auto draw = draw_diffusion_noise(3, 8, s, rng);
    Context c1(m.params(), false), c2(m.params(), false), c3(m.params(), false);
    const double diff = diffusion_training_loss(c1, m, w.X, pair, s, draw).item();
    EXPECT_EQ(total_loss(c2, m, w.X, pair, s, 0.0, draw).total.item(), diff);
    const auto full = total_loss(c3, m, w.X, pair, s, 0.5, draw);
    EXPECT_NEAR(full.total.item(), diff + 0.5 * (full.rec_f + full.rec_b + full.cons), 1e-12);
    Context c4(m.params(), false);
    EXPECT_THROW(total_loss(c4, m, w.X, pair, s, -1.0, draw), ContractError);
}

TEST(Impute, SingleStepOracle) {
    AdaSti m = tiny_model(1);
    zero_output(m);
    const auto s = make_schedule(1, 0.2, 0.3, ScheduleKind::linear);
    Window w;
    const auto r = impute(m, w.X, w.M, s, 1, 42);
    Rng rng = Rng::stream(42, {0});
    for (Index n = 0; n < 3; ++n)
        for (Index l = 0; l < 8; ++l) {
            const double v = rng.normal();
            EXPECT_NEAR(r.median(n, l), w.M(n, l) ? w.X(n, l) : v / std::sqrt(0.8), 1e-14);
        }
}

TEST(Impute, ObservedPreservedAndDeterministic) {
    const AdaSti m = tiny_model();
    const auto s = make_schedule(5, 1e-3, 0.3, ScheduleKind::linear);
    Window w;
    const auto a = impute(m, w.X, w.M, s, 3, 7), b = impute(m, w.X, w.M, s, 3, 7), c = impute(m, w.X, w.M, s, 3, 8);
    ASSERT_EQ(a.samples.size(), 3u);
    EXPECT_EQ(a.median, b.median);
    EXPECT_NE(a.median, c.median);
    EXPECT_EQ(a.median, entrywise_median(a.samples));
    for (Index i = 0; i < w.X.size(); ++i) {
        EXPECT_EQ(a.M_ta(i), w.M(i) ? 0 : 1);
        if (w.M(i)) {
            for (const auto& smp : a.samples) EXPECT_EQ(smp(i), w.X(i));
        }
        EXPECT_TRUE(std::isfinite(a.median(i)));
    }
    // The first repetitions do not depend on how many follow.
    const auto d = impute(m, w.X, w.M, s, 1, 7);
    EXPECT_EQ(d.samples[0], a.samples[0]);
}

TEST(Impute, ContractErrors) {
    const AdaSti m = tiny_model();
    Window w;
    EXPECT_THROW(impute(m, w.X, w.M, make_schedule(6, 1e-3, 0.3, ScheduleKind::linear), 1, 1), ContractError);
    EXPECT_THROW(impute(m, w.X, w.M, make_schedule(5, 1e-3, 0.3, ScheduleKind::linear), 0, 1), ContractError);
}
