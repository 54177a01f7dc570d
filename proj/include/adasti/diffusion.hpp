#pragma once

// Conditional DDPM machinery: schedules, target-restricted forward noising,
// the training objective, ancestral sampling and median-of-k imputation.

#include <vector>

#include "adasti/model.hpp"

namespace adasti {

enum class ScheduleKind { linear, quadratic };

ScheduleKind parse_schedule_kind(const std::string& s);
std::string to_string(ScheduleKind k);

/// Tables are indexed by step t = 1..T at position t-1.
struct NoiseSchedule {
    Index T = 0;
    std::vector<double> beta, alpha, alpha_bar, beta_hat;

    double alpha_bar_prev(Index t) const { return t <= 1 ? 1.0 : alpha_bar[static_cast<std::size_t>(t - 2)]; }
};

/// beta interpolated linearly, or linearly in sqrt(beta) for `quadratic`.
NoiseSchedule make_schedule(Index T, double beta_min, double beta_max, ScheduleKind kind);

/// sqrt(abar_t) X0 + sqrt(1 - abar_t) eps on target entries, 0 elsewhere.
data::Matrix q_sample(const data::Matrix& X0, const data::Mask& M_ta, Index t, const data::Matrix& eps,
                      const NoiseSchedule& sched);

/// One ancestral step on target entries (0 elsewhere). The default uses the DDPM
/// posterior mean (1/sqrt(a_t))(X_t - b_t/sqrt(1-abar_t) eps_hat) and sqrt(beta_hat_t) z.
/// `literal` uses 1/a_t, sqrt(1-a_t) and beta_hat_t = (1-a_{t-1})/(1-a_t) b_t instead.
/// z is ignored at t = 1.
data::Matrix reverse_step(const data::Matrix& X_t, const data::Mask& M_ta, const data::Matrix& eps_hat, Index t,
                          const data::Matrix& z, const NoiseSchedule& sched, bool literal = false);

/// Noise draw for one training example: t uniform on [1, T], then eps over the full window.
struct DiffusionDraw {
    Index t = 1;
    data::Matrix eps;
};
DiffusionDraw draw_diffusion_noise(Index N, Index L, const NoiseSchedule& sched, Rng& rng);

struct LossTerms {
    ad::Var total;
    double diffusion = 0.0, rec_f = 0.0, rec_b = 0.0, cons = 0.0;
};

/// Mean of (eps - eps_theta)^2 over M_ta, with the pre-imputation computed from the
/// condition entries only. `pre` carries the pre-imputation graph for reuse.
ad::Var diffusion_training_loss(Context& ctx, const AdaSti& model, const data::Matrix& X, const data::MaskPair& pair,
                                const NoiseSchedule& sched, const DiffusionDraw& draw,
                                PreImputationOutput* pre = nullptr);
ad::Var diffusion_training_loss(Context& ctx, const AdaSti& model, const data::Matrix& X, const data::MaskPair& pair,
                                const NoiseSchedule& sched, Rng& rng);

/// Diffusion loss + lambda (l_rec^f + l_rec^b + l_cons). Reconstruction terms are
/// measured on the condition entries that the pre-imputation sees.
LossTerms total_loss(Context& ctx, const AdaSti& model, const data::Matrix& X, const data::MaskPair& pair,
                     const NoiseSchedule& sched, double lambda, const DiffusionDraw& draw);
LossTerms total_loss(Context& ctx, const AdaSti& model, const data::Matrix& X, const data::MaskPair& pair,
                     const NoiseSchedule& sched, double lambda, Rng& rng);

struct ImputationResult {
    std::vector<data::Matrix> samples;
    data::Matrix median;
    data::Mask M_ta;
};

/// Entrywise median; the mean of the two middle values for even counts.
data::Matrix entrywise_median(const std::vector<data::Matrix>& samples);

/// Imputes the entries with M=0. Repetition r draws its noise from stream (seed, r).
ImputationResult impute(const AdaSti& model, const data::Matrix& X, const data::Mask& M, const NoiseSchedule& sched,
                        Index k, std::uint64_t seed, bool literal = false);

}  // namespace adasti
