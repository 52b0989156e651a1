#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "spectre/errors.hpp"
#include "spectre/que.hpp"

using namespace spectre;

namespace {

Matrix gaussian_rows(Index n, Index d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) m(i, j) = g(rng);
    return m;
}

Matrix taylor_expm(const Matrix& a) {
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int s = 0;
    while ((norm / std::pow(2.0, s)) > 0.5) ++s;
    Matrix b = a / std::pow(2.0, s);
    Matrix term = Matrix::Identity(a.rows(), a.cols());
    Matrix sum = term;
    for (int j = 1; j <= 40; ++j) {
        term = term * b / static_cast<double>(j);
        sum += term;
    }
    for (int i = 0; i < s; ++i) sum = sum * sum;
    return sum;
}

// Scores computed exactly as defined, via a dense matrix exponential.
Vector oracle_scores(const Matrix& h, double alpha) {
    const Index n = h.rows(), k = h.cols();
    Matrix second = h.transpose() * h / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> es(second);
    const double denom = es.eigenvalues()[k - 1] - 1.0;
    Matrix q = denom <= 1e-8
                   ? Matrix::Identity(k, k)
                   : taylor_expm(alpha * (second - Matrix::Identity(k, k)) / denom);
    Vector out(n);
    for (Index i = 0; i < n; ++i) out[i] = h.row(i) * q * h.row(i).transpose();
    return out / q.trace();
}

}  // namespace

TEST_SUITE_BEGIN("que");

TEST_CASE("alpha = 0 reduces to the scaled squared norm") {
    Matrix h = gaussian_rows(200, 6, 1);
    auto r = que_scores(h, 0.0);
    Vector expect = h.rowwise().squaredNorm() / 6.0;
    CHECK((r.scores - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.alpha == 0.0);
}

TEST_CASE("scores match a dense matrix-exponential oracle at alpha = 4") {
    Matrix h = gaussian_rows(50, 2, 3);
    h.col(0) *= 2.0;  // anisotropy so the exponent is non-degenerate
    auto r = que_scores(h, 4.0);
    Vector expect = oracle_scores(h, 4.0);
    CHECK((r.scores - expect).cwiseAbs().maxCoeff() <
          1e-10 * expect.cwiseAbs().maxCoeff());
}

TEST_CASE("huge alpha concentrates on the top eigendirection") {
    Matrix h = gaussian_rows(300, 5, 5);
    h.col(0) *= 2.0;  // top eigenvalue ~4, runner-up ~1: gap above 0.5
    auto r = que_scores(h, 1e4);
    Vector expect = top_direction_scores(h);
    for (Index i = 0; i < h.rows(); ++i) {
        if (expect[i] < 1e-6) continue;  // ratio is meaningless at zero
        CHECK(r.scores[i] / expect[i] == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("an exactly isotropic second moment falls back to Q = I") {
    const Index k = 4;
    // Rows sqrt(k) e_j give a second moment of exactly I.
    Matrix h = std::sqrt(static_cast<double>(k)) *
               Matrix::Identity(k, k);
    auto r = que_scores(h, 7.0);
    for (Index i = 0; i < k; ++i)
        CHECK(r.scores[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("alpha interpolates monotonically between norm and projection") {
    Matrix h = gaussian_rows(2000, 3, 9);
    h.col(0) *= 3.0;
    // Probe rows: one along the top-variance axis, one orthogonal to it.
    h.row(0) << 4.0, 0.0, 0.0;
    h.row(1) << 0.0, 0.0, 4.0;
    double prev_aligned = -1.0, prev_ortho = 1e300;
    for (double alpha : {0.0, 1.0, 4.0, 16.0, 256.0}) {
        auto r = que_scores(h, alpha);
        CHECK(r.scores[0] >= prev_aligned - 1e-9);
        CHECK(r.scores[1] <= prev_ortho + 1e-9);
        prev_aligned = r.scores[0];
        prev_ortho = r.scores[1];
        CHECK(r.scores.minCoeff() >= 0.0);
    }
}

TEST_CASE("score sum matches the trace identity") {
    Matrix h = gaussian_rows(400, 4, 11);
    h.col(1) *= 1.7;
    auto r = que_scores(h, 4.0);

    Matrix second = h.transpose() * h / 400.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(second);
    const double denom = es.eigenvalues()[3] - 1.0;
    Matrix q = taylor_expm(4.0 * (second - Matrix::Identity(4, 4)) / denom);
    const double expect = 400.0 * (q * second).trace() / q.trace();
    CHECK(r.scores.sum() == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("negative alpha is rejected") {
    Matrix h = gaussian_rows(10, 2, 13);
    CHECK_THROWS_AS(que_scores(h, -1.0), ParameterError);
}

TEST_SUITE_END();
