#include "adasti/model.hpp"

#include "adasti/baselines.hpp"

namespace adasti {

AdaSti AdaSti::create(const ModelConfig& cfg, const data::GraphSpec& graph, std::uint64_t seed) {
    cfg.validate();
    require(graph.adjacency.rows() == cfg.nodes && graph.adjacency.cols() == cfg.nodes,
            "model: adjacency is " + std::to_string(graph.adjacency.rows()) + "x" +
                std::to_string(graph.adjacency.cols()) + " but nodes=" + std::to_string(cfg.nodes));
    AdaSti m;
    m.cfg_ = cfg;
    m.adjacency_ = graph.adjacency;
    m.a_hat_ = to_tensor(data::normalized_adjacency(graph));
    if (cfg.positional_encoding) m.pe_ = nn::positional_encoding(cfg.length, cfg.channels);
    if (cfg.use_bis4pi) {
        Rng rng = Rng::stream(seed, {1});
        m.bis4pi_ = Bis4pi::create(m.store_, cfg, rng);
    }
    Rng rng_stc = Rng::stream(seed, {2});
    m.stc_ = Stc::create(m.store_, cfg, rng_stc);
    Rng rng_den = Rng::stream(seed, {3});
    m.denoiser_ = Denoiser::create(m.store_, cfg, rng_den);
    return m;
}

PreImputationOutput AdaSti::pre_impute(Context& ctx, const Tensor& X, const Tensor& M) const {
    require(X.shape() == Shape({cfg_.nodes, cfg_.length}) && M.shape() == X.shape(),
            "model: sample " + shape_str(X.shape()) + " does not match configured " +
                shape_str({cfg_.nodes, cfg_.length}));
    if (bis4pi_) {
        PreImputationOutput out;
        out.vars = bis4pi_->forward(ctx, X, M);
        out.X_c = out.vars->X_c;
        return out;
    }
    data::Mask mask = to_matrix(M).unaryExpr([](double v) { return v != 0.0; }).cast<std::uint8_t>();
    return {ad::Var::constant(to_tensor(baseline_tli(to_matrix(X), mask))), std::nullopt};
}

ad::Var AdaSti::condition(Context& ctx, const ad::Var& X_c) const { return stc_.forward(ctx, X_c, a_hat_, pe_).U; }

ad::Var AdaSti::epsilon(Context& ctx, const DenoiserInput& in) const { return denoiser_(ctx, in, a_hat_, pe_); }

}  // namespace adasti
