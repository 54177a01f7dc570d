#include "adasti/layers.hpp"

#include <cmath>

#include "adasti/s4.hpp"

namespace adasti::nn {

namespace {

Tensor uniform_tensor(Shape s, double bound, Rng& rng) {
    Tensor t(std::move(s));
    for (auto& v : t.vec()) v = (2.0 * rng.uniform() - 1.0) * bound;
    return t;
}

}  // namespace

Linear Linear::create(ParamStore& store, const std::string& name, Index in, Index out, Rng& rng, bool bias) {
    Linear l;
    l.in = in;
    l.out = out;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    l.w = store.add(name + ".weight", uniform_tensor({in, out}, bound, rng));
    if (bias) l.b = store.add(name + ".bias", uniform_tensor({out}, bound, rng));
    return l;
}

Var Linear::operator()(Context& ctx, const Var& x) const {
    if (b < 0) return ad::linear(x, ctx.param(w));
    const Var bias = ctx.param(b);
    return ad::linear(x, ctx.param(w), &bias);
}

LayerNorm LayerNorm::create(ParamStore& store, const std::string& name, Index width) {
    return {store.add(name + ".gamma", Tensor({width}, 1.0)), store.add(name + ".beta", Tensor({width}, 0.0))};
}

Var LayerNorm::operator()(Context& ctx, const Var& x) const {
    return ad::layer_norm(x, ctx.param(gamma), ctx.param(beta));
}

Mlp Mlp::create(ParamStore& store, const std::string& name, Index width, Index hidden, Rng& rng) {
    return {Linear::create(store, name + ".fc1", width, hidden, rng),
            Linear::create(store, name + ".fc2", hidden, width, rng)};
}

Var Mlp::operator()(Context& ctx, const Var& x) const { return fc2(ctx, ad::silu(fc1(ctx, x))); }

Gcn Gcn::create(ParamStore& store, const std::string& name, Index width, Rng& rng) {
    return {Linear::create(store, name, width, width, rng, false)};
}

Var Gcn::operator()(Context& ctx, const Var& x, const Tensor& a_hat) const {
    return weight(ctx, ad::node_mix(a_hat, x));
}

Attention Attention::create(ParamStore& store, const std::string& name, Index width, Index heads, Rng& rng) {
    require(width % heads == 0, "Attention: width " + std::to_string(width) + " not divisible by " +
                                    std::to_string(heads) + " heads");
    Attention a;
    a.q = Linear::create(store, name + ".q", width, width, rng, false);
    a.k = Linear::create(store, name + ".k", width, width, rng, false);
    a.v = Linear::create(store, name + ".v", width, width, rng, false);
    a.heads = heads;
    return a;
}

Var Attention::operator()(Context& ctx, const Var& qk_src, const Var& v_src) const {
    return ad::attention(q(ctx, qk_src), k(ctx, qk_src), v(ctx, v_src), heads);
}

S4Layer S4Layer::create(ParamStore& store, const std::string& name, Index channels, Index state, Rng& rng) {
    S4Layer l;
    l.channels = channels;
    l.state = state;
    Tensor a({channels, state, state}), b({channels, state}), c({channels, state}), ls({channels});
    const auto steps = s4::init_steps(channels);
    for (Index h = 0; h < channels; ++h) {
        const auto p = s4::default_params(state, steps[static_cast<std::size_t>(h)], rng);
        for (Index i = 0; i < state; ++i) {
            for (Index j = 0; j < state; ++j) a.at(h, i, j) = p.A(i, j);
            b.at(h, i) = p.B(i);
            c.at(h, i) = p.C(i);
        }
        ls[h] = std::log(p.step);
    }
    l.A = store.add(name + ".A", std::move(a));
    l.B = store.add(name + ".B", std::move(b));
    l.C = store.add(name + ".C", std::move(c));
    l.log_step = store.add(name + ".log_step", std::move(ls));
    return l;
}

Var S4Layer::kernel(Context& ctx, Index length) const {
    return s4::kernel_op(ctx.param(A), ctx.param(B), ctx.param(C), ctx.param(log_step), length);
}

Var S4Layer::operator()(Context& ctx, const Var& u) const {
    require(u.value().rank() == 3 && u.dim(1) == channels, "S4Layer: expected [B," + std::to_string(channels) + ",L]");
    return ad::causal_conv(u, kernel(ctx, u.dim(2)));
}

Tensor positional_encoding(Index length, Index width) {
    Tensor pe({length, width});
    for (Index t = 0; t < length; ++t)
        for (Index i = 0; i < width; ++i) {
            const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
            pe.at(t, i) = i % 2 == 0 ? std::sin(static_cast<double>(t) * freq) : std::cos(static_cast<double>(t) * freq);
        }
    return pe;
}

}  // namespace adasti::nn
