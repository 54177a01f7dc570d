#include "adasti/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace adasti {

using ad::Var;
using data::Mask;
using data::Matrix;

ScheduleKind parse_schedule_kind(const std::string& s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "quadratic") return ScheduleKind::quadratic;
    throw ContractError("unknown schedule kind '" + s + "' (expected linear or quadratic)");
}

std::string to_string(ScheduleKind k) { return k == ScheduleKind::linear ? "linear" : "quadratic"; }

NoiseSchedule make_schedule(Index T, double beta_min, double beta_max, ScheduleKind kind) {
    require(T >= 1, "schedule: T must be >= 1");
    require(beta_min > 0.0 && beta_min < beta_max && beta_max < 1.0,
            "schedule: need 0 < beta_min < beta_max < 1");
    NoiseSchedule s;
    s.T = T;
    const auto n = static_cast<std::size_t>(T);
    s.beta.resize(n);
    s.alpha.resize(n);
    s.alpha_bar.resize(n);
    s.beta_hat.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = T == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(T - 1);
        if (kind == ScheduleKind::linear) {
            s.beta[i] = beta_min + w * (beta_max - beta_min);
        } else {
            const double r = std::sqrt(beta_min) + w * (std::sqrt(beta_max) - std::sqrt(beta_min));
            s.beta[i] = r * r;
        }
        s.alpha[i] = 1.0 - s.beta[i];
        s.alpha_bar[i] = (i == 0 ? 1.0 : s.alpha_bar[i - 1]) * s.alpha[i];
        const double prev = i == 0 ? 1.0 : s.alpha_bar[i - 1];
        s.beta_hat[i] = (1.0 - prev) / (1.0 - s.alpha_bar[i]) * s.beta[i];
    }
    return s;
}

namespace {

void check_step(Index t, const NoiseSchedule& sched) {
    require(t >= 1 && t <= sched.T, "diffusion step " + std::to_string(t) + " outside [1, " + std::to_string(sched.T) + "]");
}

void check_same(const Matrix& a, const Mask& m, const char* what) {
    require(a.rows() == m.rows() && a.cols() == m.cols(), std::string(what) + ": shape mismatch");
}

Tensor mask_tensor(const Mask& m) { return to_tensor(m); }

}  // namespace

Matrix q_sample(const Matrix& X0, const Mask& M_ta, Index t, const Matrix& eps, const NoiseSchedule& sched) {
    check_step(t, sched);
    check_same(X0, M_ta, "q_sample");
    require(eps.rows() == X0.rows() && eps.cols() == X0.cols(), "q_sample: noise shape mismatch");
    const double ab = sched.alpha_bar[static_cast<std::size_t>(t - 1)];
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    Matrix out = Matrix::Zero(X0.rows(), X0.cols());
    for (Index i = 0; i < X0.size(); ++i)
        if (M_ta(i)) out(i) = a * X0(i) + b * eps(i);
    return out;
}

Matrix reverse_step(const Matrix& X_t, const Mask& M_ta, const Matrix& eps_hat, Index t, const Matrix& z,
                    const NoiseSchedule& sched, bool literal) {
    check_step(t, sched);
    check_same(X_t, M_ta, "reverse_step");
    require(eps_hat.rows() == X_t.rows() && eps_hat.cols() == X_t.cols(), "reverse_step: estimate shape mismatch");
    const auto i = static_cast<std::size_t>(t - 1);
    const double alpha = sched.alpha[i], beta = sched.beta[i];
    double c_x, c_eps, sigma;
    if (literal) {
        const double alpha_prev = t <= 1 ? 1.0 : sched.alpha[i - 1];
        c_x = 1.0 / alpha;
        c_eps = beta / std::sqrt(1.0 - alpha);
        sigma = std::sqrt((1.0 - alpha_prev) / (1.0 - alpha) * beta);
    } else {
        c_x = 1.0 / std::sqrt(alpha);
        c_eps = beta / std::sqrt(1.0 - sched.alpha_bar[i]);
        sigma = std::sqrt(sched.beta_hat[i]);
    }
    const bool noisy = t > 1;
    if (noisy) require(z.rows() == X_t.rows() && z.cols() == X_t.cols(), "reverse_step: noise shape mismatch");
    Matrix out = Matrix::Zero(X_t.rows(), X_t.cols());
    for (Index k = 0; k < X_t.size(); ++k) {
        if (!M_ta(k)) continue;
        out(k) = c_x * (X_t(k) - c_eps * eps_hat(k));
        if (noisy) out(k) += sigma * z(k);
    }
    return out;
}

DiffusionDraw draw_diffusion_noise(Index N, Index L, const NoiseSchedule& sched, Rng& rng) {
    DiffusionDraw d;
    d.t = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(sched.T)));
    d.eps.resize(N, L);
    // Row-major draw order so that the stream does not depend on Eigen's storage order.
    for (Index n = 0; n < N; ++n)
        for (Index l = 0; l < L; ++l) d.eps(n, l) = rng.normal();
    return d;
}

Var diffusion_training_loss(Context& ctx, const AdaSti& model, const Matrix& X, const data::MaskPair& pair,
                            const NoiseSchedule& sched, const DiffusionDraw& draw, PreImputationOutput* pre_out) {
    check_same(X, pair.target, "diffusion loss");
    check_same(X, pair.condition, "diffusion loss");
    const double n_ta = static_cast<double>(data::count(pair.target));
    require(n_ta > 0.0, "diffusion loss: empty target mask");
    const Tensor M_ta = mask_tensor(pair.target), M_co = mask_tensor(pair.condition);

    Matrix X_co = X;
    for (Index i = 0; i < X.size(); ++i)
        if (!pair.condition(i)) X_co(i) = 0.0;
    PreImputationOutput pre = model.pre_impute(ctx, to_tensor(X_co), M_co);
    const Var U = model.condition(ctx, pre.X_c);

    DenoiserInput in;
    in.X_ta_t = to_tensor(q_sample(X, pair.target, draw.t, draw.eps, sched));
    in.X_c = pre.X_c;
    in.M_ta = M_ta;
    in.M_co = M_co;
    in.t = draw.t;
    in.U = U;
    const Var eps_hat = model.epsilon(ctx, in);
    const Var r = ad::mul_const(ad::sub(eps_hat, Var::constant(to_tensor(draw.eps))), M_ta);
    const Var loss = ad::scale(ad::sum(ad::square(r)), 1.0 / n_ta);
    if (pre_out) *pre_out = std::move(pre);
    return loss;
}

Var diffusion_training_loss(Context& ctx, const AdaSti& model, const Matrix& X, const data::MaskPair& pair,
                            const NoiseSchedule& sched, Rng& rng) {
    const auto draw = draw_diffusion_noise(X.rows(), X.cols(), sched, rng);
    return diffusion_training_loss(ctx, model, X, pair, sched, draw);
}

LossTerms total_loss(Context& ctx, const AdaSti& model, const Matrix& X, const data::MaskPair& pair,
                     const NoiseSchedule& sched, double lambda, const DiffusionDraw& draw) {
    require(lambda >= 0.0, "total loss: lambda must be >= 0");
    PreImputationOutput pre;
    LossTerms out;
    out.total = diffusion_training_loss(ctx, model, X, pair, sched, draw, &pre);
    out.diffusion = out.total.item();
    if (!pre.vars || lambda == 0.0) return out;

    Tensor X_co = to_tensor(X), M_co = mask_tensor(pair.condition);
    for (Index i = 0; i < X_co.size(); ++i)
        if (M_co[i] == 0.0) X_co[i] = 0.0;
    const bool literal = model.config().literal_reconstruction;
    const Var rf = reconstruction_loss(X_co, M_co, pre.vars->fwd, literal);
    const Var rb = reconstruction_loss(X_co, M_co, pre.vars->bwd, literal);
    const Var cons = consistency_loss(*pre.vars, M_co);
    out.rec_f = rf.item();
    out.rec_b = rb.item();
    out.cons = cons.item();
    out.total = ad::add(out.total, ad::scale(ad::add(ad::add(rf, rb), cons), lambda));
    return out;
}

LossTerms total_loss(Context& ctx, const AdaSti& model, const Matrix& X, const data::MaskPair& pair,
                     const NoiseSchedule& sched, double lambda, Rng& rng) {
    const auto draw = draw_diffusion_noise(X.rows(), X.cols(), sched, rng);
    return total_loss(ctx, model, X, pair, sched, lambda, draw);
}

Matrix entrywise_median(const std::vector<Matrix>& samples) {
    require(!samples.empty(), "median: no samples");
    const Index rows = samples[0].rows(), cols = samples[0].cols();
    Matrix out(rows, cols);
    std::vector<double> v(samples.size());
    for (Index i = 0; i < rows * cols; ++i) {
        for (std::size_t s = 0; s < samples.size(); ++s) v[s] = samples[s](i);
        std::sort(v.begin(), v.end());
        const std::size_t h = v.size() / 2;
        out(i) = v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
    }
    return out;
}

ImputationResult impute(const AdaSti& model, const Matrix& X, const Mask& M, const NoiseSchedule& sched, Index k,
                        std::uint64_t seed, bool literal) {
    require(k >= 1, "impute: k must be >= 1");
    check_same(X, M, "impute");
    require(model.config().diffusion_steps == sched.T, "impute: schedule has T=" + std::to_string(sched.T) +
                                                           " but the model was built for T=" +
                                                           std::to_string(model.config().diffusion_steps));
    const data::MaskPair pair = data::evaluation_pair(M);
    const Index N = X.rows(), L = X.cols();
    Matrix X_obs = X;
    for (Index i = 0; i < X.size(); ++i)
        if (!M(i)) X_obs(i) = 0.0;

    Context ctx(model.params(), false);
    const Tensor M_co = mask_tensor(pair.condition);
    const PreImputationOutput pre = model.pre_impute(ctx, to_tensor(X_obs), M_co);
    const Var U = model.condition(ctx, pre.X_c);

    DenoiserInput in;
    in.X_c = pre.X_c;
    in.M_ta = mask_tensor(pair.target);
    in.M_co = M_co;
    in.U = U;

    ImputationResult result;
    result.M_ta = pair.target;
    for (Index r = 0; r < k; ++r) {
        Rng rng = Rng::stream(seed, {static_cast<std::uint64_t>(r)});
        Matrix x = Matrix::Zero(N, L);
        for (Index n = 0; n < N; ++n)
            for (Index l = 0; l < L; ++l) {
                const double v = rng.normal();
                if (pair.target(n, l)) x(n, l) = v;
            }
        Matrix z = Matrix::Zero(N, L);
        for (Index t = sched.T; t >= 1; --t) {
            in.X_ta_t = to_tensor(x);
            in.t = t;
            const Matrix eps_hat = to_matrix(model.epsilon(ctx, in).value());
            if (t > 1)
                for (Index n = 0; n < N; ++n)
                    for (Index l = 0; l < L; ++l) z(n, l) = rng.normal();
            x = reverse_step(x, pair.target, eps_hat, t, z, sched, literal);
        }
        for (Index i = 0; i < x.size(); ++i)
            if (M(i)) x(i) = X(i);
        result.samples.push_back(std::move(x));
    }
    result.median = entrywise_median(result.samples);
    for (Index i = 0; i < X.size(); ++i)
        if (M(i)) result.median(i) = X(i);
    return result;
}

}  // namespace adasti
