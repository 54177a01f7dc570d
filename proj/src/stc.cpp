#include "adasti/stc.hpp"

namespace adasti {

using ad::Var;

Stc Stc::create(ParamStore& store, const ModelConfig& cfg, Rng& rng) {
    const Index C = cfg.channels;
    Stc s;
    s.kernel = cfg.stc_kernel;
    s.lift = nn::Linear::create(store, "stc.conv", cfg.stc_kernel, C, rng);
    s.attn_tem = nn::Attention::create(store, "stc.attn_tem", C, cfg.heads, rng);
    s.norm_tem = nn::LayerNorm::create(store, "stc.norm_tem", C);
    s.gcn = nn::Gcn::create(store, "stc.gcn", C, rng);
    s.norm_gcn = nn::LayerNorm::create(store, "stc.norm_gcn", C);
    s.attn_spa = nn::Attention::create(store, "stc.attn_spa", C, cfg.heads, rng);
    s.norm_spa = nn::LayerNorm::create(store, "stc.norm_spa", C);
    s.mlp = nn::Mlp::create(store, "stc.mlp", C, cfg.mlp_hidden, rng);
    s.norm_out = nn::LayerNorm::create(store, "stc.norm_out", C);
    if (cfg.aux == AuxPlacement::stc) s.aux = AuxS4Gcgru::create(store, "stc.aux", C, cfg.state_dim, rng);
    return s;
}

StcIntermediates Stc::forward(Context& ctx, const Var& X_c, const Tensor& a_hat, const Tensor& pe) const {
    const Index N = X_c.dim(0), L = X_c.dim(1);
    StcIntermediates r;
    r.U_in = lift(ctx, ad::temporal_unfold(ad::reshape(X_c, {N, L, 1}), kernel));
    const Var qk = pe.empty() ? r.U_in : ad::add(r.U_in, Var::constant(pe));
    r.Y_tem = norm_tem(ctx, ad::add(attn_tem(ctx, qk, r.U_in), r.U_in));
    r.Y_gcn = norm_gcn(ctx, ad::add(gcn(ctx, r.Y_tem, a_hat), r.U_in));
    const Var spa = nn::along_nodes(r.Y_tem, [&](const Var& y) { return attn_spa(ctx, y, y); });
    r.Y_spa = norm_spa(ctx, ad::add(spa, r.U_in));
    r.Y_sum = ad::add(ad::add(r.U_in, r.Y_tem), ad::add(r.Y_gcn, r.Y_spa));
    r.U = norm_out(ctx, ad::add(mlp(ctx, r.Y_sum), r.Y_sum));
    if (aux) r.U = (*aux)(ctx, r.U, a_hat);
    return r;
}

ConditionInfo Stc::run(const ParamStore& store, const Tensor& X_c, const Tensor& a_hat, const Tensor& pe) const {
    Context ctx(store, false);
    return {forward(ctx, Var::constant(X_c), a_hat, pe).U.value()};
}

}  // namespace adasti
