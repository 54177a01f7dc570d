#include "adasti/nast.hpp"

#include <cmath>

namespace adasti {

using ad::Var;

namespace {

Var along(Axis axis, const Var& x, const auto& fn) {
    return axis == Axis::temporal ? fn(x) : ad::permute(fn(ad::permute(x, {1, 0, 2})), {1, 0, 2});
}

}  // namespace

// ------------------------------------------------------------------ gated attention

GatedAttention GatedAttention::create(ParamStore& store, const std::string& name, Index width, Index heads,
                                      bool gated, Rng& rng) {
    GatedAttention g;
    g.cross = nn::Attention::create(store, name + ".cross", width, heads, rng);
    if (gated) {
        g.self = nn::Attention::create(store, name + ".self", width, heads, rng);
        g.gate_self = nn::Linear::create(store, name + ".gate_self", width, width, rng, false);
        g.gate_cross = nn::Linear::create(store, name + ".gate_cross", width, width, rng, false);
        g.gate_bias = store.add(name + ".gate_bias", Tensor({width}));
    }
    return g;
}

Var cross_attention(Context& ctx, const nn::Attention& attn, const Var& X, const Var& U, Axis axis) {
    if (axis == Axis::temporal) return attn(ctx, U, X);
    return ad::permute(attn(ctx, ad::permute(U, {1, 0, 2}), ad::permute(X, {1, 0, 2})), {1, 0, 2});
}

GatedAttention::Parts GatedAttention::parts(Context& ctx, const Var& X, const Var& U, Axis axis,
                                            const Tensor& pe) const {
    require(X.shape() == U.shape(), "gated attention: X " + shape_str(X.shape()) + " vs U " + shape_str(U.shape()));
    Parts p;
    p.R_cross = cross_attention(ctx, cross, X, U, axis);
    if (!gated()) {
        p.R = p.R_cross;
        return p;
    }
    p.R_self = along(axis, X, [&](const Var& x) {
        const Var qk = (axis == Axis::temporal && !pe.empty()) ? ad::add(x, Var::constant(pe)) : x;
        return (*self)(ctx, qk, x);
    });
    const Var pre = ad::add(ad::add((*gate_self)(ctx, p.R_self), (*gate_cross)(ctx, p.R_cross)), ctx.param(gate_bias));
    p.G = ad::sigmoid(pre);
    p.R = ad::gate_blend(p.G, p.R_self, p.R_cross);
    return p;
}

Var GatedAttention::operator()(Context& ctx, const Var& X, const Var& U, Axis axis, const Tensor& pe) const {
    return parts(ctx, X, U, axis, pe).R;
}

// ------------------------------------------------------------------ NAST block

Nast Nast::create(ParamStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng) {
    const Index C = cfg.channels;
    Nast n;
    n.tem = GatedAttention::create(store, name + ".tem", C, cfg.heads, cfg.gated_attention, rng);
    n.gcn = nn::Gcn::create(store, name + ".gcn", C, rng);
    n.norm_gcn = nn::LayerNorm::create(store, name + ".norm_gcn", C);
    n.spa = GatedAttention::create(store, name + ".spa", C, cfg.heads, cfg.gated_attention, rng);
    n.norm_spa = nn::LayerNorm::create(store, name + ".norm_spa", C);
    n.mlp = nn::Mlp::create(store, name + ".mlp", C, cfg.mlp_hidden, rng);
    n.norm_out = nn::LayerNorm::create(store, name + ".norm_out", C);
    if (cfg.aux == AuxPlacement::nast) n.aux = AuxS4Gcgru::create(store, name + ".aux", C, cfg.state_dim, rng);
    return n;
}

Var Nast::operator()(Context& ctx, const Var& X_in, const Var& U, const Tensor& a_hat, const Tensor& pe) const {
    const Var x_tem = tem(ctx, X_in, U, Axis::temporal, pe);
    const Var x_gcn = norm_gcn(ctx, ad::add(gcn(ctx, x_tem, a_hat), x_tem));
    const Var x_spa = norm_spa(ctx, ad::add(spa(ctx, x_tem, U, Axis::spatial), x_tem));
    Var out = norm_out(ctx, mlp(ctx, ad::add(x_gcn, x_spa)));
    if (aux) out = (*aux)(ctx, out, a_hat);
    return out;
}

// ------------------------------------------------------------------ step embedding

StepEmbedding StepEmbedding::create(ParamStore& store, const std::string& name, Index dim, Index steps, Rng& rng) {
    StepEmbedding e;
    e.proj1 = nn::Linear::create(store, name + ".proj1", dim, dim, rng);
    e.proj2 = nn::Linear::create(store, name + ".proj2", dim, dim, rng);
    e.dim = dim;
    e.steps = steps;
    return e;
}

Tensor StepEmbedding::sinusoidal(Index t, Index dim) {
    const Index half = dim / 2;
    Tensor e({dim});
    for (Index j = 0; j < half; ++j) {
        const double freq =
            half > 1 ? std::pow(10.0, 4.0 * static_cast<double>(j) / static_cast<double>(half - 1)) : 1.0;
        const double arg = static_cast<double>(t) * freq;
        e[j] = std::sin(arg);
        e[half + j] = std::cos(arg);
    }
    return e;
}

Var StepEmbedding::operator()(Context& ctx, Index t) const {
    require(t >= 1 && t <= steps, "step embedding: t=" + std::to_string(t) + " outside [1, " + std::to_string(steps) + "]");
    const Var s = Var::constant(sinusoidal(t, dim));
    return ad::silu(proj2(ctx, ad::silu(proj1(ctx, s))));
}

// ------------------------------------------------------------------ residual stack

Denoiser Denoiser::create(ParamStore& store, const ModelConfig& cfg, Rng& rng) {
    const Index C = cfg.channels;
    Denoiser d;
    d.input = nn::Linear::create(store, "denoiser.input", 4, C, rng);
    d.embedding = StepEmbedding::create(store, "denoiser.step_embedding", cfg.step_embedding, cfg.diffusion_steps, rng);
    for (Index r = 0; r < cfg.layers; ++r) {
        const std::string name = "denoiser.layer" + std::to_string(r);
        ResidualLayer layer;
        layer.step_proj = nn::Linear::create(store, name + ".step_proj", cfg.step_embedding, C, rng);
        layer.nast = Nast::create(store, name + ".nast", cfg, rng);
        layer.mid = nn::Linear::create(store, name + ".mid", C, 2 * C, rng);
        layer.out = nn::Linear::create(store, name + ".out", C, 2 * C, rng);
        d.layers.push_back(std::move(layer));
    }
    d.skip_proj = nn::Linear::create(store, "denoiser.skip_proj", C, C, rng);
    d.output = nn::Linear::create(store, "denoiser.output", C, 1, rng);
    return d;
}

Var Denoiser::operator()(Context& ctx, const DenoiserInput& in, const Tensor& a_hat, const Tensor& pe) const {
    const Index N = in.X_ta_t.dim(0), L = in.X_ta_t.dim(1);
    require(in.X_c.shape() == Shape({N, L}) && in.M_ta.shape() == in.X_ta_t.shape() &&
                in.M_co.shape() == in.X_ta_t.shape(),
            "denoiser: input shape mismatch");
    auto chan = [&](const Var& v) { return ad::reshape(v, {N, L, 1}); };
    const Var stacked = ad::concat({chan(Var::constant(in.X_ta_t)), chan(in.X_c), chan(Var::constant(in.M_ta)),
                                    chan(Var::constant(in.M_co))},
                                   2);
    const Index C = input.out;
    Var x = ad::silu(input(ctx, stacked));
    const Var emb = embedding(ctx, in.t);
    Var skip;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (const auto& layer : layers) {
        Var y = ad::add(x, layer.step_proj(ctx, emb));
        y = layer.nast(ctx, y, in.U, a_hat, pe);
        y = layer.mid(ctx, y);
        y = ad::mul(ad::sigmoid(ad::slice(y, 2, 0, C)), ad::tanh(ad::slice(y, 2, C, 2 * C)));
        y = layer.out(ctx, y);
        x = ad::scale(ad::add(x, ad::slice(y, 2, 0, C)), inv_sqrt2);
        const Var s = ad::slice(y, 2, C, 2 * C);
        skip = skip.defined() ? ad::add(skip, s) : s;
    }
    skip = ad::scale(skip, 1.0 / std::sqrt(static_cast<double>(layers.size())));
    const Var h = ad::silu(skip_proj(ctx, skip));
    return ad::reshape(output(ctx, h), {N, L});
}

}  // namespace adasti
