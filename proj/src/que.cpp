#include "spectre/que.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

#include "spectre/errors.hpp"
#include "spectre/linalg.hpp"

namespace spectre {

QueScoreVector que_scores(const Matrix& whitened, double alpha) {
    check_rep_matrix(whitened, "que_scores");
    if (alpha < 0.0)
        throw ParameterError("que_scores: alpha must be non-negative");
    const Index n = whitened.rows(), k = whitened.cols();

    Matrix second = whitened.transpose() * whitened / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> es(second);
    if (es.info() != Eigen::Success)
        throw NumericError("que_scores: eigendecomposition failed");
    const Vector& lam = es.eigenvalues();  // ascending
    const double lam_max = lam[k - 1];
    const double denom = lam_max - 1.0;

    // Q = exp(alpha (S - I) / (||S||_2 - 1)). Weights are shifted by the
    // largest eigenvalue so exp never overflows at large alpha; the common
    // factor cancels in the score ratio.
    Vector w(k);
    if (denom <= 1e-8) {
        w.setOnes();  // degenerate exponent: Q = I
    } else {
        for (Index j = 0; j < k; ++j)
            w[j] = std::exp(alpha * (lam[j] - lam_max) / denom);
    }

    Matrix p = whitened * es.eigenvectors();
    QueScoreVector out;
    out.alpha = alpha;
    out.scores = (p.array().square().matrix() * w) / w.sum();
    return out;
}

Vector top_direction_scores(const Matrix& whitened) {
    check_rep_matrix(whitened, "top_direction_scores");
    const Index n = whitened.rows();
    Matrix second = whitened.transpose() * whitened / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> es(second);
    if (es.info() != Eigen::Success)
        throw NumericError("top_direction_scores: eigendecomposition failed");
    Vector v = es.eigenvectors().col(whitened.cols() - 1);
    fix_sign(v);
    return (whitened * v).array().square();
}

}  // namespace spectre
