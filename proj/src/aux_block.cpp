#include "adasti/aux_block.hpp"

namespace adasti {

using ad::Var;

Gcgru Gcgru::create(ParamStore& store, const std::string& name, Index width, Rng& rng) {
    return {nn::Linear::create(store, name + ".gates", 2 * width, 2 * width, rng),
            nn::Linear::create(store, name + ".candidate", 2 * width, width, rng)};
}

Var Gcgru::operator()(Context& ctx, const Var& x, const Tensor& a_hat) const {
    const Index N = x.dim(0), L = x.dim(1), C = x.dim(2);
    Var h = Var::constant(Tensor({N, C}));
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(L));
    for (Index t = 0; t < L; ++t) {
        const Var xt = ad::reshape(ad::slice(x, 1, t, t + 1), {N, C});
        const Var zr = ad::sigmoid(gates(ctx, ad::node_mix(a_hat, ad::concat({xt, h}, 1))));
        const Var z = ad::slice(zr, 1, 0, C);
        const Var r = ad::slice(zr, 1, C, 2 * C);
        const Var c = ad::tanh(candidate(ctx, ad::node_mix(a_hat, ad::concat({xt, ad::mul(r, h)}, 1))));
        h = ad::gate_blend(z, h, c);
        outs.push_back(ad::reshape(h, {N, 1, C}));
    }
    return ad::concat(outs, 1);
}

AuxS4Gcgru AuxS4Gcgru::create(ParamStore& store, const std::string& name, Index width, Index state, Rng& rng) {
    return {nn::S4Layer::create(store, name + ".s4", width, state, rng), Gcgru::create(store, name + ".gcgru", width, rng),
            nn::LayerNorm::create(store, name + ".norm", width)};
}

Var AuxS4Gcgru::operator()(Context& ctx, const Var& x, const Tensor& a_hat) const {
    const Var s = ad::permute(s4(ctx, ad::permute(x, {0, 2, 1})), {0, 2, 1});
    return norm(ctx, ad::add(x, gru(ctx, s, a_hat)));
}

}  // namespace adasti
