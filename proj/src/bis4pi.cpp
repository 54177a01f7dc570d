#include "adasti/bis4pi.hpp"

#include <cmath>

namespace adasti {

using ad::Var;

Tensor to_tensor(const data::Matrix& m) {
    Tensor t({m.rows(), m.cols()});
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) t.at(i, j) = m(i, j);
    return t;
}

Tensor to_tensor(const data::Mask& m) { return to_tensor(data::as_real(m)); }

data::Matrix to_matrix(const Tensor& t) {
    require(t.rank() == 2, "to_matrix: expected a 2-D tensor");
    data::Matrix m(t.dim(0), t.dim(1));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = t.at(i, j);
    return m;
}

data::Matrix masked_replace(const data::Matrix& X, const data::Mask& M, const data::Matrix& H) {
    require(X.rows() == M.rows() && X.cols() == M.cols() && X.rows() == H.rows() && X.cols() == H.cols(),
            "masked_replace: shape mismatch");
    data::Matrix out = H;
    for (Index i = 0; i < out.size(); ++i)
        if (M.data()[i]) out.data()[i] = X.data()[i];
    return out;
}

Var masked_replace(const Tensor& X, const Tensor& M, const Var& H) {
    require(X.shape() == H.shape() && M.shape() == X.shape(), "masked_replace: shape mismatch");
    return ad::blend_const(X, M, H);
}

// ------------------------------------------------------------------ feature attention

FeatureAttention FeatureAttention::create(ParamStore& store, const std::string& name, Index nodes, Index width,
                                          Index heads, Rng& rng) {
    FeatureAttention f;
    f.lift = nn::Linear::create(store, name + ".lift", 1, width, rng);
    Tensor emb({nodes, 1, width});
    for (auto& v : emb.vec()) v = 0.1 * rng.normal();
    f.node_embedding = store.add(name + ".node_embedding", std::move(emb));
    f.attn = nn::Attention::create(store, name + ".attn", width, heads, rng);
    f.norm1 = nn::LayerNorm::create(store, name + ".norm1", width);
    f.ffn = nn::Mlp::create(store, name + ".ffn", width, width, rng);
    f.norm2 = nn::LayerNorm::create(store, name + ".norm2", width);
    f.proj = nn::Linear::create(store, name + ".proj", width, 1, rng);
    return f;
}

Var FeatureAttention::operator()(Context& ctx, const Var& x) const {
    const Index N = x.dim(0), L = x.dim(1);
    Var h = lift(ctx, ad::reshape(x, {N, L, 1}));
    h = ad::add(h, ctx.param(node_embedding));
    h = ad::permute(h, {1, 0, 2});  // [L, N, w]: tokens are nodes
    h = norm1(ctx, ad::add(attn(ctx, h, h), h));
    h = norm2(ctx, ad::add(ffn(ctx, h), h));
    return ad::reshape(ad::permute(proj(ctx, h), {1, 0, 2}), {N, L});
}

// ------------------------------------------------------------------ linear fill

LinearFill LinearFill::create(ParamStore& store, const std::string& name, Index nodes, Rng& rng) {
    Tensor w({nodes, nodes});
    for (Index i = 0; i < nodes; ++i)
        for (Index j = 0; j < nodes; ++j) w.at(i, j) = (i == j ? 1.0 : 0.0) + 0.01 * rng.normal();
    LinearFill f;
    f.weight = store.add(name + ".weight", std::move(w));
    f.bias = store.add(name + ".bias", Tensor({nodes, 1}));
    return f;
}

Var LinearFill::operator()(Context& ctx, const Var& x) const {
    return ad::add(ad::matmul(ctx.param(weight), x), ctx.param(bias));
}

// ------------------------------------------------------------------ directional network

DirectionalNet DirectionalNet::create(ParamStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng) {
    DirectionalNet d;
    d.fill = LinearFill::create(store, name + ".fill", cfg.nodes, rng);
    d.s4_first = nn::S4Layer::create(store, name + ".s4_first", cfg.nodes, cfg.state_dim, rng);
    d.feature = FeatureAttention::create(store, name + ".feature", cfg.nodes, cfg.feature_width, cfg.feature_heads, rng);
    d.s4_second = nn::S4Layer::create(store, name + ".s4_second", cfg.nodes, cfg.state_dim, rng);
    return d;
}

DirectionalVars DirectionalNet::operator()(Context& ctx, const Tensor& X, const Tensor& M) const {
    const Index N = X.dim(0), L = X.dim(1);
    auto s4 = [&](const nn::S4Layer& layer, const Var& v) {
        return ad::reshape(layer(ctx, ad::reshape(v, {1, N, L})), {N, L});
    };
    DirectionalVars t;
    t.Y_c = fill(ctx, Var::constant(X));
    t.H = s4(s4_first, t.Y_c);
    t.H_c = masked_replace(X, M, t.H);
    t.C = feature(ctx, t.H_c);
    t.C_c = masked_replace(X, M, t.C);
    t.X_hat = s4(s4_second, t.C_c);
    t.X_c = masked_replace(X, M, t.X_hat);
    return t;
}

// ------------------------------------------------------------------ bidirectional wrapper

Bis4pi Bis4pi::create(ParamStore& store, const ModelConfig& cfg, Rng& rng) {
    Bis4pi b;
    b.fwd_ = DirectionalNet::create(store, "bis4pi.fwd", cfg, rng);
    b.bwd_ = cfg.share_directions ? b.fwd_ : DirectionalNet::create(store, "bis4pi.bwd", cfg, rng);
    return b;
}

namespace {

Tensor flip_time(const Tensor& t) {
    Tensor out(t.shape());
    const Index N = t.dim(0), L = t.dim(1);
    for (Index n = 0; n < N; ++n)
        for (Index l = 0; l < L; ++l) out.at(n, l) = t.at(n, L - 1 - l);
    return out;
}

DirectionalTrace snapshot(const DirectionalVars& v) {
    return {to_matrix(v.Y_c.value()), to_matrix(v.H.value()),     to_matrix(v.H_c.value()), to_matrix(v.C.value()),
            to_matrix(v.C_c.value()), to_matrix(v.X_hat.value()), to_matrix(v.X_c.value())};
}

}  // namespace

DirectionalVars Bis4pi::directional(Context& ctx, const Tensor& X, const Tensor& M, Direction dir) const {
    if (dir == Direction::forward) return fwd_(ctx, X, M);
    auto r = bwd_(ctx, flip_time(X), flip_time(M));
    for (Var* v : {&r.Y_c, &r.H, &r.H_c, &r.C, &r.C_c, &r.X_hat, &r.X_c}) *v = ad::flip(*v, 1);
    return r;
}

PreImputationVars Bis4pi::forward(Context& ctx, const Tensor& X, const Tensor& M) const {
    PreImputationVars p;
    p.fwd = directional(ctx, X, M, Direction::forward);
    p.bwd = directional(ctx, X, M, Direction::backward);
    p.X_c = masked_replace(X, M, ad::scale(ad::add(p.fwd.X_c, p.bwd.X_c), 0.5));
    return p;
}

DirectionalTrace Bis4pi::directional_trace(const ParamStore& store, const data::Matrix& X, const data::Mask& M,
                                           Direction dir) const {
    Context ctx(store, false);
    return snapshot(directional(ctx, to_tensor(X), to_tensor(M), dir));
}

PreImputation Bis4pi::run(const ParamStore& store, const data::Matrix& X, const data::Mask& M) const {
    Context ctx(store, false);
    const auto p = forward(ctx, to_tensor(X), to_tensor(M));
    return {to_matrix(p.X_c.value()), snapshot(p.fwd), snapshot(p.bwd)};
}

// ------------------------------------------------------------------ losses

Var masked_mae(const Var& a, const Tensor& x, const Tensor& mask) {
    const double n = mask.sum();
    require(n > 0.0, "masked_mae: empty mask");
    return ad::scale(ad::sum(ad::abs(ad::mul_const(ad::sub(a, Var::constant(x)), mask))), 1.0 / n);
}

Var reconstruction_loss(const Tensor& X, const Tensor& M, const DirectionalVars& t, bool literal) {
    if (!(M.sum() > 0.0)) throw NumericalError("reconstruction_loss: undefined without observed entries");
    const Var& first = literal ? t.H_c : t.H;
    const Var& second = literal ? t.C_c : t.C;
    return ad::add(ad::add(masked_mae(first, X, M), masked_mae(second, X, M)), masked_mae(t.X_hat, X, M));
}

double reconstruction_loss(const data::Matrix& X, const data::Mask& M, const DirectionalTrace& t, bool literal) {
    const Index n = data::count(M);
    if (n == 0) throw NumericalError("reconstruction_loss: undefined without observed entries");
    auto mae = [&](const data::Matrix& a) {
        double acc = 0.0;
        for (Index i = 0; i < X.size(); ++i)
            if (M.data()[i]) acc += std::abs(X.data()[i] - a.data()[i]);
        return acc / static_cast<double>(n);
    };
    return mae(literal ? t.H_c : t.H) + mae(literal ? t.C_c : t.C) + mae(t.X_hat);
}

Var consistency_loss(const PreImputationVars& pre, const Tensor& M) {
    Tensor missing(M.shape());
    for (Index i = 0; i < M.size(); ++i) missing[i] = M[i] != 0.0 ? 0.0 : 1.0;
    const double n = missing.sum();
    if (n == 0.0) return ad::scale(ad::sum(ad::mul_const(pre.fwd.X_c, missing)), 0.0);
    return ad::scale(ad::sum(ad::abs(ad::mul_const(ad::sub(pre.fwd.X_c, pre.bwd.X_c), missing))), 1.0 / n);
}

double consistency_loss(const PreImputation& pre, const data::Mask& M) {
    double acc = 0.0;
    Index n = 0;
    for (Index i = 0; i < M.size(); ++i)
        if (!M.data()[i]) {
            acc += std::abs(pre.trace_f.X_c_dir.data()[i] - pre.trace_b.X_c_dir.data()[i]);
            ++n;
        }
    return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

}  // namespace adasti
