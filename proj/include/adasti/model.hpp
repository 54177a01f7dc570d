#pragma once

// The assembled imputer: pre-imputation (or its interpolation substitute),
// conditionalizer and noise estimator over one shared parameter store.

#include <optional>

#include "adasti/bis4pi.hpp"
#include "adasti/nast.hpp"
#include "adasti/stc.hpp"

namespace adasti {

struct PreImputationOutput {
    ad::Var X_c;                             // [N, L]
    std::optional<PreImputationVars> vars;   // absent for the interpolation substitute
};

class AdaSti {
public:
    /// Builds all sub-networks with weights drawn from streams of `seed`.
    static AdaSti create(const ModelConfig& cfg, const data::GraphSpec& graph, std::uint64_t seed);

    /// X is zero-filled where M=0.
    PreImputationOutput pre_impute(Context& ctx, const Tensor& X, const Tensor& M) const;
    ad::Var condition(Context& ctx, const ad::Var& X_c) const;
    ad::Var epsilon(Context& ctx, const DenoiserInput& in) const;

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const data::Matrix& adjacency() const { return adjacency_; }
    const Tensor& a_hat() const { return a_hat_; }
    const Tensor& pe() const { return pe_; }

private:
    ModelConfig cfg_;
    ParamStore store_;
    data::Matrix adjacency_;
    Tensor a_hat_, pe_;
    std::optional<Bis4pi> bis4pi_;
    Stc stc_;
    Denoiser denoiser_;
};

}  // namespace adasti
