#include <gtest/gtest.h>

#include <cmath>

#include "adasti/s4.hpp"
#include "test_support.hpp"

using namespace adasti;
using namespace adasti::s4;

namespace {

// Closed form of the LegS matrix written independently of the library loop.
double legs_entry(Index n, Index k) {
    if (n > k) return -std::sqrt(2.0 * n + 1.0) * std::sqrt(2.0 * k + 1.0);
    if (n == k) return -(n + 1.0);
    return 0.0;
}

DiscreteSSM random_system(Index d, Rng& rng) {
    SSMParams p = default_params(d, 0.001 * std::pow(100.0, rng.uniform()), rng);
    return discretize(p);
}

std::vector<double> random_sequence(Index L, Rng& rng) {
    std::vector<double> u(static_cast<std::size_t>(L));
    for (auto& x : u) x = rng.normal();
    return u;
}

}  // namespace

TEST(Hippo, MatchesClosedForm) {
    for (Index d : {1, 2, 5, 16}) {
        const auto A = hippo_init(d);
        for (Index n = 0; n < d; ++n)
            for (Index k = 0; k < d; ++k) EXPECT_DOUBLE_EQ(A(n, k), legs_entry(n, k)) << n << "," << k;
    }
    const auto A = hippo_init(3);
    EXPECT_EQ(A(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(A(1, 0), -std::sqrt(3.0));
    EXPECT_EQ(A(0, 2), 0.0);
}

TEST(Hippo, RejectsEmptyState) {
    EXPECT_THROW(hippo_init(0), ContractError);
    EXPECT_THROW(hippo_init(-2), ContractError);
}

TEST(Discretize, ZeroDynamics) {
    SSMParams p;
    p.A = Eigen::MatrixXd::Zero(3, 3);
    p.B = Eigen::VectorXd::Constant(3, 2.0);
    p.C = Eigen::RowVectorXd::Ones(3);
    p.step = 0.3;
    const auto d = discretize(p);
    EXPECT_TRUE(d.A_bar.isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-15));
    EXPECT_TRUE(d.B_bar.isApprox(0.3 * p.B, 1e-15));
    EXPECT_EQ(d.C_bar, p.C);
}

TEST(Discretize, SmallStepApproachesIdentity) {
    Rng rng(3);
    SSMParams p = default_params(6, 1e-9, rng);
    const auto d = discretize(p);
    EXPECT_LT((d.A_bar - Eigen::MatrixXd::Identity(6, 6)).norm(), 1e-7);
}

TEST(Discretize, BilinearResidual) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        SSMParams p;
        Eigen::MatrixXd R(4, 4);
        for (Index i = 0; i < 16; ++i) R(i) = rng.normal();
        p.A = R - 5.0 * Eigen::MatrixXd::Identity(4, 4);
        p.B = Eigen::VectorXd::Ones(4);
        p.C = Eigen::RowVectorXd::Ones(4);
        p.step = 0.05 + rng.uniform();
        const auto d = discretize(p);
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
        const Eigen::MatrixXd lhs = d.A_bar * (I - 0.5 * p.step * p.A);
        EXPECT_LT((lhs - (I + 0.5 * p.step * p.A)).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT(((I - 0.5 * p.step * p.A) * d.B_bar - p.step * p.B).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Discretize, SingularSystemReportsCondition) {
    SSMParams p;
    p.A = 2.0 * Eigen::MatrixXd::Identity(2, 2);
    p.B = Eigen::VectorXd::Ones(2);
    p.C = Eigen::RowVectorXd::Ones(2);
    p.step = 1.0;  // I - (step/2) A = 0
    try {
        discretize(p);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("condition"), std::string::npos) << e.what();
    }
}

TEST(Kernel, FirstTapAndScalarSystem) {
    DiscreteSSM s{Eigen::MatrixXd::Constant(1, 1, 0.7), Eigen::VectorXd::Constant(1, 2.0),
                  Eigen::RowVectorXd::Constant(1, -1.5)};
    const auto k = compute_kernel(s, 10);
    ASSERT_EQ(k.length(), 10);
    for (Index i = 0; i < 10; ++i) EXPECT_NEAR(k.taps(i), -1.5 * std::pow(0.7, i) * 2.0, 1e-14);
    EXPECT_DOUBLE_EQ(k.taps(0), (s.C_bar * s.B_bar)(0));
}

TEST(Kernel, MatchesMatrixPowers) {
    Rng rng(5);
    const auto s = random_system(4, rng);
    const auto k = compute_kernel(s, 16);
    for (Index i = 0; i < 16; ++i) {
        Eigen::MatrixXd P = Eigen::MatrixXd::Identity(4, 4);
        for (Index j = 0; j < i; ++j) P = P * s.A_bar;
        EXPECT_NEAR(k.taps(i), (s.C_bar * P * s.B_bar)(0), 1e-8);
    }
}

TEST(Apply, ImpulseAndIdentityKernel) {
    Rng rng(2);
    const auto s = random_system(3, rng);
    const auto k = compute_kernel(s, 12);
    std::vector<double> impulse(12, 0.0);
    impulse[0] = 1.0;
    const auto y = apply_conv(impulse, k);
    for (Index i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(y[static_cast<std::size_t>(i)], k.taps(i));

    ConvKernel id{Eigen::VectorXd::Zero(12)};
    id.taps(0) = 1.0;
    const auto u = random_sequence(12, rng);
    EXPECT_EQ(apply_conv(u, id), u);
    EXPECT_THROW(apply_conv(random_sequence(5, rng), k), ContractError);
}

TEST(Apply, RecurrentTrivialCases) {
    Rng rng(8);
    const auto s = random_system(5, rng);
    const auto y0 = apply_recurrent(std::vector<double>(9, 0.0), s);
    for (double v : y0) EXPECT_EQ(v, 0.0);
    const auto y1 = apply_recurrent(std::vector<double>{2.5}, s);
    EXPECT_NEAR(y1[0], (s.C_bar * s.B_bar)(0) * 2.5, 1e-15);
}

TEST(Apply, ConvolutionEqualsRecurrence) {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const Index d = 1 + static_cast<Index>(rng.below(16));
        const Index L = 1 + static_cast<Index>(rng.below(256));
        const auto s = random_system(d, rng);
        const auto u = random_sequence(L, rng);
        const auto yc = apply_conv(u, compute_kernel(s, L));
        const auto yr = apply_recurrent(u, s);
        double num = 0.0, den = 0.0;
        for (Index t = 0; t < L; ++t) {
            num = std::max(num, std::abs(yc[static_cast<std::size_t>(t)] - yr[static_cast<std::size_t>(t)]));
            den = std::max(den, std::abs(yr[static_cast<std::size_t>(t)]));
        }
        EXPECT_LE(num, 1e-6 * std::max(den, 1e-12)) << "d=" << d << " L=" << L;
    }
}

TEST(Apply, LinearityAndCausality) {
    Rng rng(31);
    const auto s = random_system(8, rng);
    const auto k = compute_kernel(s, 40);
    const auto u = random_sequence(40, rng), v = random_sequence(40, rng);
    std::vector<double> w(40);
    for (std::size_t i = 0; i < 40; ++i) w[i] = 1.7 * u[i] - 0.4 * v[i];
    const auto yu = apply_conv(u, k), yv = apply_conv(v, k), yw = apply_conv(w, k);
    for (std::size_t i = 0; i < 40; ++i) EXPECT_NEAR(yw[i], 1.7 * yu[i] - 0.4 * yv[i], 1e-8);

    auto up = u;
    for (std::size_t i = 25; i < 40; ++i) up[i] += 10.0;
    const auto yp = apply_conv(up, k);
    for (std::size_t i = 0; i < 25; ++i) EXPECT_EQ(yp[i], yu[i]);
}

TEST(Stability, HippoSpectralRadius) {
    for (Index d : {1, 2, 4, 8, 16})
        for (double step : {1e-3, 0.01, 0.1, 0.5, 1.0}) {
            Rng rng(1);
            const auto s = discretize(default_params(d, step, rng));
            const Eigen::VectorXcd ev = s.A_bar.eigenvalues();
            EXPECT_LE(ev.cwiseAbs().maxCoeff(), 1.0 + 1e-12) << "d=" << d << " step=" << step;
        }
}

TEST(Init, StepsAreGeometric) {
    const auto s = init_steps(5, 1e-3, 1e-1);
    ASSERT_EQ(s.size(), 5u);
    EXPECT_NEAR(s.front(), 1e-3, 1e-15);
    EXPECT_NEAR(s.back(), 1e-1, 1e-15);
    for (std::size_t i = 1; i + 1 < s.size(); ++i) EXPECT_NEAR(s[i] * s[i], s[i - 1] * s[i + 1], 1e-15);
}

TEST(KernelOp, MatchesScalarKernelPerChannel) {
    Rng rng(4);
    const Index H = 3, d = 4, L = 10;
    Tensor A({H, d, d}), B({H, d}), C({H, d}), ls({H});
    std::vector<DiscreteSSM> ref;
    for (Index h = 0; h < H; ++h) {
        SSMParams p = default_params(d, 0.02 * (h + 1), rng);
        for (Index i = 0; i < d; ++i) {
            B.at(h, i) = p.B(i);
            C.at(h, i) = p.C(i);
            for (Index j = 0; j < d; ++j) A.at(h, i, j) = p.A(i, j);
        }
        ls[h] = std::log(p.step);
        ref.push_back(discretize(p));
    }
    const auto K = kernel_op(ad::Var::constant(A), ad::Var::constant(B), ad::Var::constant(C),
                             ad::Var::constant(ls), L);
    for (Index h = 0; h < H; ++h) {
        const auto k = compute_kernel(ref[static_cast<std::size_t>(h)], L);
        for (Index i = 0; i < L; ++i) EXPECT_NEAR(K.value().at(h, i), k.taps(i), 1e-12);
    }
}

TEST(KernelOp, GradientMatchesFiniteDifferences) {
    Rng rng(9);
    const Index H = 2, d = 3, L = 7;
    Tensor A = test::random_tensor({H, d, d}, rng, 0.3), B = test::random_tensor({H, d}, rng),
           C = test::random_tensor({H, d}, rng), ls({H}, std::log(0.1));
    for (Index h = 0; h < H; ++h)
        for (Index i = 0; i < d; ++i) A.at(h, i, i) -= 1.0;
    const Tensor W = test::random_tensor({H, L}, rng);
    auto f = [&](const Tensor& a, const Tensor& b, const Tensor& c, const Tensor& l) {
        return ad::sum(ad::mul_const(kernel_op(ad::Var::leaf(a), ad::Var::leaf(b), ad::Var::leaf(c),
                                               ad::Var::leaf(l), L),
                                     W));
    };
    const auto a = ad::Var::leaf(A), b = ad::Var::leaf(B), c = ad::Var::leaf(C), l = ad::Var::leaf(ls);
    ad::sum(ad::mul_const(kernel_op(a, b, c, l, L), W)).backward();
    const double eps = 1e-6;
    auto check = [&](Tensor& x, const Tensor& g) {
        for (Index i = 0; i < x.size(); ++i) {
            const double o = x[i];
            x[i] = o + eps;
            const double fp = f(A, B, C, ls).item();
            x[i] = o - eps;
            const double fm = f(A, B, C, ls).item();
            x[i] = o;
            EXPECT_NEAR(g[i], (fp - fm) / (2 * eps), 1e-6 * std::max(1.0, std::abs(g[i])));
        }
    };
    check(A, a.grad());
    check(B, b.grad());
    check(C, c.grad());
    check(ls, l.grad());
}
