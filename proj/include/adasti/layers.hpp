#pragma once

// Trainable building blocks shared by the pre-imputation, conditioning and
// denoising networks. Activations are laid out [N, L, C] (node, time, channel)
// unless stated otherwise.

#include <string>

#include "adasti/params.hpp"
#include "adasti/rng.hpp"

namespace adasti::nn {

using ad::Var;

struct Linear {
    Index w = -1;
    Index b = -1;  // -1 when bias-free
    Index in = 0, out = 0;

    static Linear create(ParamStore& store, const std::string& name, Index in, Index out, Rng& rng,
                         bool bias = true);
    Var operator()(Context& ctx, const Var& x) const;
};

struct LayerNorm {
    Index gamma = -1, beta = -1;

    static LayerNorm create(ParamStore& store, const std::string& name, Index width);
    Var operator()(Context& ctx, const Var& x) const;
};

/// Two-layer perceptron with SiLU between the layers.
struct Mlp {
    Linear fc1, fc2;

    static Mlp create(ParamStore& store, const std::string& name, Index width, Index hidden, Rng& rng);
    Var operator()(Context& ctx, const Var& x) const;
};

/// Graph convolution A_hat X W over the node axis (bias-free so that a zero
/// weight map yields an exactly-zero output).
struct Gcn {
    Linear weight;

    static Gcn create(ParamStore& store, const std::string& name, Index width, Rng& rng);
    Var operator()(Context& ctx, const Var& x, const Tensor& a_hat) const;
};

/// Query/key/value projections followed by multi-head softmax(QK^T/sqrt(d))V.
/// Projections are bias-free so that zeroing W^V zeroes the output.
struct Attention {
    Linear q, k, v;
    Index heads = 1;

    static Attention create(ParamStore& store, const std::string& name, Index width, Index heads, Rng& rng);
    /// Attends over axis 1 of [B, S, C] inputs; queries/keys from `qk_src`, values from `v_src`.
    Var operator()(Context& ctx, const Var& qk_src, const Var& v_src) const;
};

/// Bank of independent SSMs, one per channel, applied along the time axis of [B, H, L].
struct S4Layer {
    Index A = -1, B = -1, C = -1, log_step = -1;
    Index channels = 0, state = 0;

    static S4Layer create(ParamStore& store, const std::string& name, Index channels, Index state, Rng& rng);
    Var kernel(Context& ctx, Index length) const;
    Var operator()(Context& ctx, const Var& u) const;
};

/// Sinusoidal position table [L, C].
Tensor positional_encoding(Index length, Index width);

/// Applies `fn` over the node axis: permutes [N,L,C] to [L,N,C] and back.
template <class F>
Var along_nodes(const Var& x, F&& fn) {
    return ad::permute(fn(ad::permute(x, {1, 0, 2})), {1, 0, 2});
}

}  // namespace adasti::nn
