#include "adasti/s4.hpp"

#include <cmath>
#include <sstream>

namespace adasti::s4 {

Eigen::MatrixXd hippo_init(Index d) {
    require(d >= 1, "hippo_init: state dimension must be >= 1, got " + std::to_string(d));
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
    for (Index n = 0; n < d; ++n) {
        for (Index k = 0; k < n; ++k)
            A(n, k) = -std::sqrt(2.0 * static_cast<double>(n) + 1.0) * std::sqrt(2.0 * static_cast<double>(k) + 1.0);
        A(n, n) = -(static_cast<double>(n) + 1.0);
    }
    return A;
}

namespace {

struct Bilinear {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;  // of I - (step/2) A
    Eigen::MatrixXd A_bar;
    Eigen::VectorXd B_bar;
};

Bilinear bilinear(const Eigen::MatrixXd& A, const Eigen::VectorXd& B, double step) {
    const Index d = A.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    Bilinear r;
    r.lu.compute(I - 0.5 * step * A);
    const double rc = r.lu.rcond();
    if (!(rc > 1e-14)) {
        std::ostringstream os;
        os << "discretize: I - (step/2)A is singular (reciprocal condition estimate " << rc << ")";
        throw NumericalError(os.str());
    }
    r.A_bar = r.lu.solve(I + 0.5 * step * A);
    r.B_bar = r.lu.solve(step * B);
    return r;
}

}  // namespace

DiscreteSSM discretize(const SSMParams& p) {
    require(p.A.rows() >= 1 && p.A.rows() == p.A.cols(), "discretize: A must be square and non-empty");
    require(p.B.size() == p.A.rows() && p.C.size() == p.A.rows(), "discretize: B/C size mismatch");
    require(p.step > 0.0, "discretize: step must be positive");
    auto b = bilinear(p.A, p.B, p.step);
    return {std::move(b.A_bar), std::move(b.B_bar), p.C};
}

ConvKernel compute_kernel(const DiscreteSSM& ssm, Index length) {
    require(length >= 1, "compute_kernel: length must be >= 1");
    ConvKernel k{Eigen::VectorXd(length)};
    Eigen::VectorXd s = ssm.B_bar;
    for (Index i = 0; i < length; ++i) {
        k.taps(i) = ssm.C_bar.dot(s);
        if (!std::isfinite(k.taps(i)))
            throw NumericalError("compute_kernel: tap " + std::to_string(i) + " overflowed");
        s = ssm.A_bar * s;
    }
    return k;
}

std::vector<double> apply_conv(std::span<const double> u, const ConvKernel& kernel) {
    const auto L = static_cast<Index>(u.size());
    require(L == kernel.length(), "apply_conv: sequence length " + std::to_string(L) + " != kernel length " +
                                      std::to_string(kernel.length()));
    std::vector<double> y(u.size(), 0.0);
    for (Index t = 0; t < L; ++t) {
        double acc = 0.0;
        for (Index i = 0; i <= t; ++i) acc += kernel.taps(i) * u[static_cast<std::size_t>(t - i)];
        y[static_cast<std::size_t>(t)] = acc;
    }
    return y;
}

std::vector<double> apply_recurrent(std::span<const double> u, const DiscreteSSM& ssm) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(ssm.A_bar.rows());
    std::vector<double> y(u.size());
    for (std::size_t t = 0; t < u.size(); ++t) {
        x = ssm.A_bar * x + ssm.B_bar * u[t];
        y[t] = ssm.C_bar.dot(x);
    }
    return y;
}

SSMParams default_params(Index d, double step, Rng& rng) {
    SSMParams p;
    p.A = hippo_init(d);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    p.B = Eigen::VectorXd::Constant(d, s);
    p.C = Eigen::RowVectorXd(d);
    for (Index i = 0; i < d; ++i) p.C(i) = rng.normal() * s;
    p.step = step;
    return p;
}

std::vector<double> init_steps(Index channels, double step_min, double step_max) {
    std::vector<double> out(static_cast<std::size_t>(channels));
    for (Index h = 0; h < channels; ++h) {
        const double frac = channels > 1 ? static_cast<double>(h) / static_cast<double>(channels - 1) : 0.5;
        out[static_cast<std::size_t>(h)] = std::exp(std::log(step_min) + frac * (std::log(step_max) - std::log(step_min)));
    }
    return out;
}

ad::Var kernel_op(const ad::Var& A, const ad::Var& B, const ad::Var& C, const ad::Var& log_step, Index length) {
    require(A.value().rank() == 3 && A.dim(1) == A.dim(2), "s4 kernel: A must be [H,d,d]");
    const Index H = A.dim(0), d = A.dim(1);
    require(B.shape() == Shape{H, d} && C.shape() == Shape{H, d} && log_step.value().size() == H,
            "s4 kernel: B/C must be [H,d] and log_step [H]");
    require(length >= 1, "s4 kernel: length must be >= 1");

    using Mat = Eigen::MatrixXd;
    using Vec = Eigen::VectorXd;
    using RowMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

    struct Channel {
        Mat A, A_bar;
        Vec B, C, B_bar;
        double step;
        Eigen::PartialPivLU<Mat> lu;
        Mat states;  // d x length, column i = A_bar^i B_bar
    };
    auto channels = std::make_shared<std::vector<Channel>>(static_cast<std::size_t>(H));
    Tensor out(Shape{H, length});
    for (Index h = 0; h < H; ++h) {
        auto& ch = (*channels)[static_cast<std::size_t>(h)];
        ch.A = RowMap(A.value().data() + h * d * d, d, d);
        ch.B = Eigen::Map<const Vec>(B.value().data() + h * d, d);
        ch.C = Eigen::Map<const Vec>(C.value().data() + h * d, d);
        ch.step = std::exp(log_step.value()[h]);
        auto bl = bilinear(ch.A, ch.B, ch.step);
        ch.lu = std::move(bl.lu);
        ch.A_bar = std::move(bl.A_bar);
        ch.B_bar = std::move(bl.B_bar);
        ch.states.resize(d, length);
        ch.states.col(0) = ch.B_bar;
        for (Index i = 1; i < length; ++i) ch.states.col(i) = ch.A_bar * ch.states.col(i - 1);
        Eigen::Map<Eigen::RowVectorXd>(out.data() + h * length, length) = ch.C.transpose() * ch.states;
    }
    if (!out.all_finite()) throw NumericalError("s4 kernel: non-finite taps");

    ad::Node* pA = A.node().get();
    ad::Node* pB = B.node().get();
    ad::Node* pC = C.node().get();
    ad::Node* pS = log_step.node().get();
    return ad::make_result(std::move(out), {A, B, C, log_step}, [=](const Tensor& g) {
        Tensor gA(pA->value.shape()), gB(pB->value.shape()), gC(pC->value.shape()), gS(pS->value.shape());
        for (Index h = 0; h < H; ++h) {
            const auto& ch = (*channels)[static_cast<std::size_t>(h)];
            Eigen::Map<const Eigen::RowVectorXd> gk(g.data() + h * length, length);
            // dK/dC
            Eigen::Map<Vec>(gC.data() + h * d, d) = ch.states * gk.transpose();
            // Adjoint of the state recursion s_{i+1} = A_bar s_i.
            Vec lam = gk(length - 1) * ch.C;
            Mat gAbar = Mat::Zero(d, d);
            for (Index i = length - 2; i >= 0; --i) {
                gAbar.noalias() += lam * ch.states.col(i).transpose();
                lam = gk(i) * ch.C + ch.A_bar.transpose() * lam;
            }
            const Vec& gBbar = lam;
            // Back through A_bar = M^{-1} P, B_bar = M^{-1} step B with M = I - step/2 A, P = I + step/2 A.
            const Mat Z = ch.lu.transpose().solve(gAbar);
            const Vec z = ch.lu.transpose().solve(gBbar);
            const double st = ch.step;
            Mat dA = 0.5 * st * (Z + Z * ch.A_bar.transpose()) + 0.5 * st * z * ch.B_bar.transpose();
            const double dstep = 0.5 * (Z.cwiseProduct(ch.A + ch.A * ch.A_bar)).sum() + z.dot(ch.B) +
                                 0.5 * z.dot(ch.A * ch.B_bar);
            Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(gA.data() + h * d * d, d, d) = dA;
            Eigen::Map<Vec>(gB.data() + h * d, d) = st * z;
            gS[h] = st * dstep;
        }
        if (pA->requires_grad) pA->accumulate(gA);
        if (pB->requires_grad) pB->accumulate(gB);
        if (pC->requires_grad) pC->accumulate(gC);
        if (pS->requires_grad) pS->accumulate(gS);
    });
}

}  // namespace adasti::s4
