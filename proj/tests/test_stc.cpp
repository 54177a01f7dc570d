#include <gtest/gtest.h>

#include "adasti/bis4pi.hpp"
#include "adasti/stc.hpp"
#include "test_support.hpp"

using namespace adasti;

namespace {

struct Tiny {
    ModelConfig cfg = test::tiny_config();
    ParamStore store;
    Stc stc;
    Tensor a_hat, pe;
    Tensor X;

    explicit Tiny(Index nodes = 3, bool with_pe = true) {
        cfg.nodes = nodes;
        Rng rng(1);
        stc = Stc::create(store, cfg, rng);
        a_hat = to_tensor(data::normalized_adjacency(test::path_graph(nodes)));
        if (with_pe) pe = nn::positional_encoding(cfg.length, cfg.channels);
        X = test::random_tensor({nodes, cfg.length}, rng);
    }
    StcIntermediates run() {
        Context ctx(store, false);
        return stc.forward(ctx, ad::Var::constant(X), a_hat, pe);
    }
};

}  // namespace

TEST(Gcn, SingleNodeIdentity) {
    ParamStore store;
    Rng rng(1);
    const auto gcn = nn::Gcn::create(store, "g", 3, rng);
    Tensor& W = store.value(gcn.weight.w);
    W.fill(0.0);
    for (Index i = 0; i < 3; ++i) W.at(i, i) = 1.0;
    const Tensor H = test::random_tensor({1, 4, 3}, rng);
    data::Matrix a(1, 1);
    a << 0.0;
    Context ctx(store, false);
    const auto out = gcn(ctx, ad::Var::constant(H), to_tensor(data::normalized_adjacency(data::adjacency_from_matrix(a))));
    EXPECT_EQ(out.value(), H);
}

TEST(Gcn, ComponentsAreIndependent) {
    data::Matrix a = data::Matrix::Zero(4, 4);
    a(0, 1) = a(1, 0) = 0.7;
    a(2, 3) = a(3, 2) = 0.4;
    const Tensor a_hat = to_tensor(data::normalized_adjacency(data::adjacency_from_matrix(a)));
    ParamStore store;
    Rng rng(2);
    const auto gcn = nn::Gcn::create(store, "g", 3, rng);
    Tensor H = test::random_tensor({4, 5, 3}, rng);
    Context c1(store, false);
    const Tensor y1 = gcn(c1, ad::Var::constant(H), a_hat).value();
    for (Index l = 0; l < 5; ++l)
        for (Index c = 0; c < 3; ++c) H.at(0, l, c) += 3.0;
    Context c2(store, false);
    const Tensor y2 = gcn(c2, ad::Var::constant(H), a_hat).value();
    for (Index n = 2; n < 4; ++n)
        for (Index l = 0; l < 5; ++l)
            for (Index c = 0; c < 3; ++c) EXPECT_EQ(y1.at(n, l, c), y2.at(n, l, c));
    EXPECT_NE(y1.at(1, 0, 0), y2.at(1, 0, 0));
}

TEST(Gcn, ConstantSignalOnRegularGraph) {
    // On a regular graph the normalized propagation averages, so a per-timestamp
    // constant is reproduced exactly.
    data::Matrix a = data::Matrix::Zero(4, 4);
    for (Index i = 0; i < 4; ++i) a(i, (i + 1) % 4) = a((i + 1) % 4, i) = 0.5;
    const Tensor a_hat = to_tensor(data::normalized_adjacency(data::adjacency_from_matrix(a)));
    ParamStore store;
    Rng rng(3);
    const auto gcn = nn::Gcn::create(store, "g", 2, rng);
    Tensor& W = store.value(gcn.weight.w);
    W.fill(0.0);
    W.at(0, 0) = W.at(1, 1) = 1.0;
    Tensor H({4, 3, 2});
    for (Index n = 0; n < 4; ++n)
        for (Index l = 0; l < 3; ++l)
            for (Index c = 0; c < 2; ++c) H.at(n, l, c) = 1.5 * (l + 1) - c;
    Context ctx(store, false);
    const Tensor y = gcn(ctx, ad::Var::constant(H), a_hat).value();
    for (Index i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], H[i], 1e-14);
}

TEST(Stc, ShapeAndDeterminism) {
    Tiny t;
    const auto a = t.run();
    EXPECT_EQ(a.U.shape(), Shape({3, 8, 8}));
    EXPECT_TRUE(a.U.value().all_finite());
    EXPECT_EQ(a.U.value(), t.run().U.value());
    for (const auto* v : {&a.U_in, &a.Y_tem, &a.Y_gcn, &a.Y_spa, &a.Y_sum}) {
        EXPECT_EQ(v->shape(), Shape({3, 8, 8}));
        EXPECT_TRUE(v->value().all_finite());
    }
}

TEST(Stc, SpatialAttentionWiring) {
    Tiny t;
    t.store.value(t.stc.attn_spa.v.w).fill(0.0);
    const auto r = t.run();
    Context ctx(t.store, false);
    const Tensor expect = t.stc.norm_spa(ctx, r.U_in).value();
    for (Index i = 0; i < expect.size(); ++i) EXPECT_NEAR(r.Y_spa.value()[i], expect[i], 1e-14);
}

TEST(Stc, GcnWiring) {
    Tiny t;
    t.store.value(t.stc.gcn.weight.w).fill(0.0);
    const auto r = t.run();
    Context ctx(t.store, false);
    const Tensor expect = t.stc.norm_gcn(ctx, r.U_in).value();
    for (Index i = 0; i < expect.size(); ++i) EXPECT_NEAR(r.Y_gcn.value()[i], expect[i], 1e-14);
}

TEST(Stc, TemporalShiftEquivariance) {
    // Without positional encoding, temporal self-attention commutes with a
    // cyclic shift of the time axis; the pointwise lift does too.
    Tiny t(3, false);
    const Index L = t.cfg.length, s = 3;
    const Tensor y = t.run().Y_tem.value();
    Tensor shifted(t.X.shape());
    for (Index n = 0; n < 3; ++n)
        for (Index l = 0; l < L; ++l) shifted.at(n, (l + s) % L) = t.X.at(n, l);
    t.X = shifted;
    const Tensor ys = t.run().Y_tem.value();
    for (Index n = 0; n < 3; ++n)
        for (Index l = 0; l < L; ++l)
            for (Index c = 0; c < t.cfg.channels; ++c) EXPECT_NEAR(ys.at(n, (l + s) % L, c), y.at(n, l, c), 1e-12);
}

TEST(Stc, EveryBranchReceivesGradient) {
    Tiny t;
    Context ctx(t.store, true);
    const auto r = t.stc.forward(ctx, ad::Var::constant(t.X), t.a_hat, t.pe);
    Rng rng(4);
    ad::sum(ad::mul_const(r.U, test::random_tensor(r.U.shape(), rng))).backward();
    const auto g = ctx.gradients();
    for (const std::string prefix : {"stc.conv", "stc.attn_tem", "stc.gcn", "stc.attn_spa", "stc.mlp"}) {
        double norm = 0.0;
        for (Index id : t.store.group(prefix)) norm += g[static_cast<std::size_t>(id)].norm();
        EXPECT_GT(norm, 0.0) << prefix;
    }
}

TEST(Stc, WideConvolutionKernel) {
    ModelConfig cfg = test::tiny_config();
    cfg.stc_kernel = 3;
    ParamStore store;
    Rng rng(5);
    const Stc stc = Stc::create(store, cfg, rng);
    Context ctx(store, false);
    const auto r = stc.forward(ctx, ad::Var::constant(test::random_tensor({3, 8}, rng)),
                               to_tensor(data::normalized_adjacency(test::path_graph(3))), {});
    EXPECT_EQ(r.U.shape(), Shape({3, 8, 8}));
}

TEST(Gradients, StcMatchesFiniteDifferences) {
    Tiny t;
    Rng rng(6);
    const Tensor W = test::random_tensor({3, 8, 8}, rng);
    const auto errs = test::gradient_check(t.store, [&](Context& ctx) {
        return ad::sum(ad::mul_const(t.stc.forward(ctx, ad::Var::constant(t.X), t.a_hat, t.pe).U, W));
    });
    for (const auto& [name, e] : errs) EXPECT_LT(e.relative(), 1e-3) << name;
}
