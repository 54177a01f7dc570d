#pragma once

#include "adasti/layers.hpp"

namespace adasti {

/// Graph-convolutional GRU over the time axis of [N, L, C].
struct Gcgru {
    nn::Linear gates;      // [x, h] -> [z, r]
    nn::Linear candidate;  // [x, r*h] -> c

    static Gcgru create(ParamStore& store, const std::string& name, Index width, Rng& rng);
    ad::Var operator()(Context& ctx, const ad::Var& x, const Tensor& a_hat) const;
};

/// Per-channel S4 along time followed by a GCGRU, with residual + normalization.
struct AuxS4Gcgru {
    nn::S4Layer s4;
    Gcgru gru;
    nn::LayerNorm norm;

    static AuxS4Gcgru create(ParamStore& store, const std::string& name, Index width, Index state, Rng& rng);
    ad::Var operator()(Context& ctx, const ad::Var& x, const Tensor& a_hat) const;
};

}  // namespace adasti
