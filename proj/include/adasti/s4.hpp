#pragma once

// Structured state-space kernel: HiPPO-LegS initialization, bilinear
// discretization, convolution taps and the two equivalent ways of applying
// a discrete SSM to a sequence.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "adasti/autograd.hpp"
#include "adasti/rng.hpp"

namespace adasti::s4 {

/// Continuous-time single-input single-output system x' = A x + B u, y = C x.
struct SSMParams {
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    Eigen::RowVectorXd C;
    double step = 0.01;
};

struct DiscreteSSM {
    Eigen::MatrixXd A_bar;
    Eigen::VectorXd B_bar;
    Eigen::RowVectorXd C_bar;
};

/// Taps K[i] = C_bar * A_bar^i * B_bar.
struct ConvKernel {
    Eigen::VectorXd taps;
    Index length() const { return taps.size(); }
};

/// HiPPO-LegS matrix: -sqrt(2n+1) sqrt(2k+1) below the diagonal, -(n+1) on it, 0 above.
Eigen::MatrixXd hippo_init(Index d);

/// Bilinear (Tustin) transform. Throws NumericalError if I - (step/2) A is singular.
DiscreteSSM discretize(const SSMParams& params);

/// Taps by iterated state propagation. Throws NumericalError on overflow.
ConvKernel compute_kernel(const DiscreteSSM& ssm, Index length);

/// Causal convolution y[t] = sum_{i<=t} K[i] u[t-i].
std::vector<double> apply_conv(std::span<const double> u, const ConvKernel& kernel);

/// Unrolled recursion x_t = A_bar x_{t-1} + B_bar u_t, y_t = C_bar x_t, x_{-1} = 0.
std::vector<double> apply_recurrent(std::span<const double> u, const DiscreteSSM& ssm);

/// Default initialization: HiPPO A, B = 1/sqrt(d), C ~ N(0, 1/d).
SSMParams default_params(Index d, double step, Rng& rng);

/// Geometric spacing of initial steps over [step_min, step_max] for `channels` SSMs.
std::vector<double> init_steps(Index channels, double step_min = 1e-3, double step_max = 1e-1);

/// Differentiable multi-channel kernel construction. A is [H,d,d], B and C are [H,d],
/// log_step is [H]; returns taps [H, length]. Gradients flow to all four inputs.
ad::Var kernel_op(const ad::Var& A, const ad::Var& B, const ad::Var& C, const ad::Var& log_step, Index length);

}  // namespace adasti::s4
