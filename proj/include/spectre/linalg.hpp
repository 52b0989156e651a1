#pragma once

#include <cstdint>
#include <optional>

#include "spectre/types.hpp"

namespace spectre {

// Deterministic sign convention: scale v by -1 if its largest-magnitude
// entry (ties broken by lowest index) is negative.
void fix_sign(Vector& v);

// --- truncated SVD ------------------------------------------------------

struct SvdResult {
    Matrix basis;            // d x k, orthonormal columns, descending order
    Vector singular_values;  // k, non-negative, descending
};

// Top-k right-singular directions of an n x d matrix (rows are samples).
// Exact via a Gram-matrix eigendecomposition when min(n, d) <= 512,
// randomized subspace iteration beyond that. Deterministic.
SvdResult top_k_svd(const Matrix& m, Index k);

// --- extreme eigenpairs of symmetric operators --------------------------

struct EigPair {
    double value = 0.0;
    Vector vector;
    int iterations = 0;
};

enum class EigWhich {
    LargestAbs,  // extreme in magnitude
    LargestAlg,  // extreme toward +infinity
};

// Anything that can multiply a vector by a fixed symmetric matrix.
class SymLinearOp {
  public:
    virtual ~SymLinearOp() = default;
    virtual Index dim() const = 0;
    virtual void apply(const Vector& x, Vector& y) const = 0;
};

class DenseSymOp final : public SymLinearOp {
  public:
    explicit DenseSymOp(Matrix a) : a_(std::move(a)) {}
    Index dim() const override { return a_.rows(); }
    void apply(const Vector& x, Vector& y) const override { y.noalias() = a_ * x; }

  private:
    Matrix a_;
};

struct EigOptions {
    double tol = 1e-8;
    int max_iter = 1000;
    std::uint64_t seed = 0;
    EigWhich which = EigWhich::LargestAbs;
    // Optional starting vector (e.g. the eigenvector from a nearby problem).
    // Falls back to a seeded random start when absent or degenerate.
    const Vector* warm_start = nullptr;
};

// Extreme eigenpair of a symmetric operator by Lanczos iteration with full
// reorthogonalization. Satisfies ||A v - lambda v|| <= tol * max(|lambda|, 1)
// on return; throws ConvergenceError (carrying the best iterate) otherwise.
EigPair top_eig_sym(const SymLinearOp& a, const EigOptions& opts = {});

// --- symmetric matrix functions ------------------------------------------

// f applied to the spectrum: V f(D) V^T for symmetric input.
Matrix sym_func(const Matrix& a, double (*f)(double));

// Sigma^{-1/2} with a relative positive-definiteness floor of
// 1e-10 * trace/k on the eigenvalues; throws IllConditionedError below it.
Matrix sym_inverse_sqrt(const Matrix& sigma);

// Rows of x mapped through Sigma^{-1/2} (x_i - mu).
Matrix whiten(const Matrix& x, const Vector& mu, const Matrix& sigma);

// --- implicit fourth-moment operator --------------------------------------

// The operator T = -flat(I) flat(I)^T + (1/m) sum_i z_i z_i^T acting on
// flattened k x k matrices, where z_i = flat(y_i y_i^T) for whitened columns
// y_i. Stored as the k x m matrix Y only; applies cost O(m k^2) instead of
// the O(k^4) a dense T would need.
class ImplicitTMatrix final : public SymLinearOp {
  public:
    // y: k x m, one whitened sample per column.
    explicit ImplicitTMatrix(Matrix y);

    Index dim() const override { return k_ * k_; }
    void apply(const Vector& v, Vector& out) const override;

    Index k() const { return k_; }
    Index m() const { return m_; }
    const Matrix& y() const { return y_; }

  private:
    Matrix y_;
    Index k_ = 0;
    Index m_ = 0;
};

// Free-function form of ImplicitTMatrix::apply.
Vector apply_implicit_T(const ImplicitTMatrix& t, const Vector& v);

}  // namespace spectre
