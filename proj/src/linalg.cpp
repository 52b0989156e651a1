#include "spectre/linalg.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "spectre/errors.hpp"

namespace spectre {

void check_rep_matrix(const Matrix& s, const char* what) {
    if (s.rows() < 1 || s.cols() < 1)
        throw ParameterError(std::string(what) + ": matrix must be non-empty");
    if (!s.allFinite())
        throw DataError(std::string(what) + ": matrix contains non-finite values");
}

void fix_sign(Vector& v) {
    Index at = 0;
    double best = -1.0;
    for (Index i = 0; i < v.size(); ++i) {
        const double mag = std::abs(v[i]);
        if (mag > best) {
            best = mag;
            at = i;
        }
    }
    if (v.size() > 0 && v[at] < 0.0) v = -v;
}

namespace {

Vector seeded_gaussian(Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = gauss(rng);
    return v;
}

Matrix seeded_gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = gauss(rng);
    return m;
}

// Fill columns [have, want) of basis with vectors orthonormal to the ones
// already there, preferring standard basis directions. Deterministic.
void complete_orthonormal(Matrix& basis, Index have, Index want) {
    const Index d = basis.rows();
    Index next_axis = 0;
    for (Index c = have; c < want; ++c) {
        Vector cand;
        bool ok = false;
        while (next_axis < d && !ok) {
            cand = Vector::Unit(d, next_axis++);
            for (int pass = 0; pass < 2; ++pass)
                cand -= basis.leftCols(c) * (basis.leftCols(c).transpose() * cand);
            if (cand.norm() > 1e-8) ok = true;
        }
        if (!ok)
            throw NumericError("top_k_svd: unable to complete orthonormal basis");
        cand.normalize();
        basis.col(c) = cand;
    }
}

constexpr std::uint64_t kSvdSeed = 0x5bec7e5bdull;   // fixed: keeps the sketch deterministic
constexpr Index kDenseSvdLimit = 512;

}  // namespace

SvdResult top_k_svd(const Matrix& m, Index k) {
    check_rep_matrix(m, "top_k_svd");
    const Index n = m.rows(), d = m.cols();
    if (k < 1 || k > std::min(n, d))
        throw ParameterError("top_k_svd: k must be in [1, min(n, d)]");

    SvdResult out;
    out.basis.resize(d, k);
    out.singular_values.resize(k);

    if (std::min(n, d) <= kDenseSvdLimit) {
        if (d <= n) {
            // Gram matrix in feature space: eigenvectors are the right
            // singular vectors directly.
            Matrix gram = m.transpose() * m;
            Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
            if (es.info() != Eigen::Success)
                throw NumericError("top_k_svd: eigendecomposition failed");
            for (Index j = 0; j < k; ++j) {
                const Index src = d - 1 - j;  // ascending -> descending
                out.basis.col(j) = es.eigenvectors().col(src);
                out.singular_values[j] =
                    std::sqrt(std::max(0.0, es.eigenvalues()[src]));
            }
        } else {
            // Sample-space Gram; map left vectors u to right vectors
            // M^T u / sigma. Zero modes get a deterministic completion.
            Matrix gram = m * m.transpose();
            Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
            if (es.info() != Eigen::Success)
                throw NumericError("top_k_svd: eigendecomposition failed");
            const double top = std::sqrt(std::max(0.0, es.eigenvalues()[n - 1]));
            Index filled = 0;
            for (Index j = 0; j < k; ++j) {
                const Index src = n - 1 - j;
                const double sigma = std::sqrt(std::max(0.0, es.eigenvalues()[src]));
                out.singular_values[j] = sigma;
                if (sigma > 1e-12 * std::max(top, 1.0)) {
                    out.basis.col(j) = m.transpose() * es.eigenvectors().col(src) / sigma;
                    out.basis.col(j).normalize();
                    ++filled;
                } else {
                    break;
                }
            }
            for (Index j = filled; j < k; ++j) out.singular_values[j] = 0.0;
            complete_orthonormal(out.basis, filled, k);
        }
    } else {
        // Randomized subspace iteration: two power passes, oversampling 10.
        const Index p = std::min(d, k + 10);
        Matrix omega = seeded_gaussian_matrix(d, p, kSvdSeed);
        Matrix z = m * omega;                       // n x p
        Matrix q = Eigen::HouseholderQR<Matrix>(m.transpose() * z)
                       .householderQ() * Matrix::Identity(d, p);
        for (int pass = 0; pass < 2; ++pass) {
            z.noalias() = m * q;
            q = Eigen::HouseholderQR<Matrix>(m.transpose() * z)
                    .householderQ() * Matrix::Identity(d, p);
        }
        z.noalias() = m * q;                        // n x p, small width
        Eigen::JacobiSVD<Matrix> svd(z, Eigen::ComputeThinV);
        Matrix v = q * svd.matrixV();
        for (Index j = 0; j < k; ++j) {
            out.basis.col(j) = v.col(j);
            out.singular_values[j] = svd.singularValues()[j];
        }
    }

    for (Index j = 0; j < k; ++j) {
        Vector col = out.basis.col(j);
        fix_sign(col);
        out.basis.col(j) = col;
    }
    return out;
}

namespace {

struct RitzSelection {
    double value = 0.0;
    Index index = 0;
};

RitzSelection select_ritz(const Vector& eigenvalues, EigWhich which) {
    RitzSelection sel;
    const Index n = eigenvalues.size();
    sel.index = n - 1;
    sel.value = eigenvalues[n - 1];
    if (which == EigWhich::LargestAbs && n > 1) {
        // eigenvalues ascending: extreme magnitude is at one of the ends;
        // prefer the algebraically larger one on exact ties.
        if (std::abs(eigenvalues[0]) > std::abs(eigenvalues[n - 1])) {
            sel.index = 0;
            sel.value = eigenvalues[0];
        }
    }
    return sel;
}

}  // namespace

EigPair top_eig_sym(const SymLinearOp& a, const EigOptions& opts) {
    const Index n = a.dim();
    if (n < 1) throw ParameterError("top_eig_sym: empty operator");
    if (opts.tol <= 0.0) throw ParameterError("top_eig_sym: tol must be positive");
    if (opts.max_iter < 1) throw ParameterError("top_eig_sym: max_iter must be >= 1");

    double best_value = 0.0;
    Vector best_vector = Vector::Zero(n);
    double best_residual = std::numeric_limits<double>::infinity();
    int used = 0;

    Vector av(n);
    auto true_residual = [&](double theta, const Vector& x) {
        a.apply(x, av);
        return (av - theta * x).norm();
    };

    for (int restart = 0; restart < 4 && used < opts.max_iter; ++restart) {
        Vector v0;
        if (restart == 0 && opts.warm_start != nullptr &&
            opts.warm_start->size() == n && opts.warm_start->allFinite() &&
            opts.warm_start->norm() > 1e-12) {
            v0 = *opts.warm_start;
        } else {
            v0 = seeded_gaussian(n, opts.seed + 0x9e3779b97f4a7c15ull * (restart + 1));
        }
        v0.normalize();

        std::vector<Vector> basis;
        basis.push_back(v0);
        std::vector<double> alphas, betas;
        Vector w(n);

        while (used < opts.max_iter) {
            const Vector& vj = basis.back();
            a.apply(vj, w);
            ++used;
            const double alpha = vj.dot(w);
            alphas.push_back(alpha);
            w -= alpha * vj;
            if (basis.size() > 1) w -= betas.back() * basis[basis.size() - 2];
            // Full reorthogonalization, two passes.
            for (int pass = 0; pass < 2; ++pass)
                for (const Vector& b : basis) w -= b.dot(w) * b;
            const double beta = w.norm();

            const Index j = static_cast<Index>(alphas.size());
            Vector diag = Eigen::Map<const Vector>(alphas.data(), j);
            Vector sub = betas.empty()
                             ? Vector()
                             : Eigen::Map<const Vector>(betas.data(), j - 1);
            Eigen::SelfAdjointEigenSolver<Matrix> tri;
            tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
            if (tri.info() != Eigen::Success)
                throw NumericError("top_eig_sym: tridiagonal eigensolver failed");
            const RitzSelection sel = select_ritz(tri.eigenvalues(), opts.which);
            const Vector s = tri.eigenvectors().col(sel.index);
            const double est_residual = beta * std::abs(s[j - 1]);
            const double scale = std::max(std::abs(sel.value), 1.0);

            const bool krylov_done = beta <= 1e-13 * scale || j == n;
            if (est_residual <= opts.tol * scale || krylov_done) {
                Vector x = Vector::Zero(n);
                for (Index i = 0; i < j; ++i) x += s[i] * basis[i];
                x.normalize();
                const double res = true_residual(sel.value, x);
                ++used;
                if (res < best_residual) {
                    best_residual = res;
                    best_value = sel.value;
                    best_vector = x;
                }
                if (res <= opts.tol * scale) {
                    fix_sign(best_vector);
                    return {sel.value, best_vector, used};
                }
                if (krylov_done) break;  // restart with a fresh direction
            }
            if (beta <= 1e-13 * scale || j == n) break;
            basis.push_back(w / beta);
            betas.push_back(beta);
        }
    }

    fix_sign(best_vector);
    throw ConvergenceError(
        "top_eig_sym: no convergence within iteration budget", best_value,
        std::vector<double>(best_vector.data(), best_vector.data() + best_vector.size()),
        best_residual);
}

Matrix sym_func(const Matrix& a, double (*f)(double)) {
    if (a.rows() != a.cols())
        throw ParameterError("sym_func: matrix must be square");
    if (!a.allFinite())
        throw DataError("sym_func: matrix contains non-finite values");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw ParameterError("sym_func: matrix must be symmetric");
    Matrix sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    if (es.info() != Eigen::Success)
        throw NumericError("sym_func: eigendecomposition failed");
    Vector mapped = es.eigenvalues().unaryExpr(f);
    if (!mapped.allFinite())
        throw NumericError("sym_func: f produced non-finite values on the spectrum");
    return es.eigenvectors() * mapped.asDiagonal() * es.eigenvectors().transpose();
}

Matrix sym_inverse_sqrt(const Matrix& sigma) {
    if (sigma.rows() != sigma.cols())
        throw ParameterError("sym_inverse_sqrt: matrix must be square");
    if (!sigma.allFinite())
        throw DataError("sym_inverse_sqrt: matrix contains non-finite values");
    const Index k = sigma.rows();
    Matrix sym = 0.5 * (sigma + sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    if (es.info() != Eigen::Success)
        throw NumericError("sym_inverse_sqrt: eigendecomposition failed");
    const double floor = 1e-10 * sym.trace() / static_cast<double>(k);
    const double min_eig = es.eigenvalues().minCoeff();
    if (!(floor > 0.0) || min_eig <= floor)
        throw IllConditionedError(
            "sym_inverse_sqrt: matrix is not positive definite (min eigenvalue " +
            std::to_string(min_eig) + ")");
    Vector inv_sqrt = es.eigenvalues().array().rsqrt();
    return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
}

Matrix whiten(const Matrix& x, const Vector& mu, const Matrix& sigma) {
    check_rep_matrix(x, "whiten");
    if (mu.size() != x.cols())
        throw ParameterError("whiten: mean dimension does not match data");
    if (sigma.rows() != x.cols() || sigma.cols() != x.cols())
        throw ParameterError("whiten: covariance dimension does not match data");
    Matrix w = sym_inverse_sqrt(sigma);
    return (x.rowwise() - mu.transpose()) * w;
}

ImplicitTMatrix::ImplicitTMatrix(Matrix y) : y_(std::move(y)) {
    k_ = y_.rows();
    m_ = y_.cols();
    if (k_ < 1 || m_ < 1)
        throw ParameterError("ImplicitTMatrix: Y must be non-empty");
    if (!y_.allFinite())
        throw DataError("ImplicitTMatrix: Y contains non-finite values");
}

void ImplicitTMatrix::apply(const Vector& v, Vector& out) const {
    if (v.size() != k_ * k_)
        throw ParameterError("ImplicitTMatrix: vector length must be k^2");
    Eigen::Map<const Matrix> vmat(v.data(), k_, k_);
    out.resize(k_ * k_);
    Eigen::Map<Matrix> omat(out.data(), k_, k_);

    // z_i^T v = y_i^T V y_i, batched as column dot products of Y and V Y.
    Matrix a = vmat * y_;                                   // k x m
    Vector s = (y_.array() * a.array()).colwise().sum();    // m

    // (1/m) sum_i s_i * flat(y_i y_i^T) = flat(Y diag(s) Y^T / m)
    omat.noalias() = y_ * s.asDiagonal() * y_.transpose() / static_cast<double>(m_);
    const double tr = vmat.trace();
    omat.diagonal().array() -= tr;
}

Vector apply_implicit_T(const ImplicitTMatrix& t, const Vector& v) {
    Vector out;
    t.apply(v, out);
    return out;
}

}  // namespace spectre
