#include "adasti/baselines.hpp"

namespace adasti {

using data::Mask;
using data::Matrix;

Matrix baseline_mean(const Matrix& X, const Mask& M) {
    require(X.rows() == M.rows() && X.cols() == M.cols(), "baseline_mean: shape mismatch");
    double total = 0.0;
    Index seen = 0;
    for (Index i = 0; i < X.size(); ++i)
        if (M(i)) {
            total += X(i);
            ++seen;
        }
    const double global = seen > 0 ? total / static_cast<double>(seen) : 0.0;
    Matrix out = X;
    for (Index n = 0; n < X.rows(); ++n) {
        double s = 0.0;
        Index c = 0;
        for (Index l = 0; l < X.cols(); ++l)
            if (M(n, l)) {
                s += X(n, l);
                ++c;
            }
        const double fill = c > 0 ? s / static_cast<double>(c) : global;
        for (Index l = 0; l < X.cols(); ++l)
            if (!M(n, l)) out(n, l) = fill;
    }
    return out;
}

Matrix baseline_tli(const Matrix& X, const Mask& M) {
    require(X.rows() == M.rows() && X.cols() == M.cols(), "baseline_tli: shape mismatch");
    const Matrix fallback = baseline_mean(X, M);
    Matrix out = X;
    const Index L = X.cols();
    for (Index n = 0; n < X.rows(); ++n) {
        Index prev = -1;
        for (Index l = 0; l <= L; ++l) {
            if (l < L && !M(n, l)) continue;
            // Fill the gap (prev, l).
            for (Index j = prev + 1; j < l; ++j) {
                if (prev < 0 && l == L)
                    out(n, j) = fallback(n, j);
                else if (prev < 0)
                    out(n, j) = X(n, l);
                else if (l == L)
                    out(n, j) = X(n, prev);
                else {
                    const double w = static_cast<double>(j - prev) / static_cast<double>(l - prev);
                    out(n, j) = (1.0 - w) * X(n, prev) + w * X(n, l);
                }
            }
            prev = l;
        }
    }
    return out;
}

}  // namespace adasti
