#include "spectre/robust.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "spectre/errors.hpp"
#include "spectre/linalg.hpp"

namespace spectre {

namespace {

void check_eps(double eps, bool allow_zero) {
    if (eps < 0.0 || eps >= 1.0 / 3.0 || (!allow_zero && eps == 0.0))
        throw ParameterError("eps must lie in (0, 1/3)" +
                             std::string(allow_zero ? " or be exactly 0" : ""));
}

double lower_median(std::vector<double> v) {
    const auto mid = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    return v[mid];
}

// Largest entry wins; ties go to the lowest index.
Index argmax_tie_low(const Vector& v) {
    Index at = 0;
    for (Index i = 1; i < v.size(); ++i)
        if (v[i] > v[at]) at = i;
    return at;
}

Matrix take_rows(const Matrix& s, const IndexList& rows) {
    Matrix out(static_cast<Index>(rows.size()), s.cols());
    for (Index i = 0; i < out.rows(); ++i) out.row(i) = s.row(rows[i]);
    return out;
}

// Candidate thresholds: distinct empirical magnitudes, smallest first. The
// smallest threshold whose tail the bound certifies removes the most mass in
// one round; scanning from the top instead would accept near the maximum and
// shave a single point per round, stalling the filter on clustered outliers.
std::vector<double> ascending_distinct(const Vector& a) {
    std::vector<double> c(a.data(), a.data() + a.size());
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    return c;
}

struct MaxPolyCore {
    Matrix m;
    double lambda_star;
    Vector eigvec;  // flattened, for warm-starting the next round
};

// y: k x m whitened columns. warm: eigenvector of a previous, nearby round.
MaxPolyCore max_poly_from_whitened(const Matrix& y, const FilterConfig& cfg,
                                   const Vector* warm) {
    ImplicitTMatrix t(y);
    EigOptions opts;
    opts.tol = cfg.eig_tol;
    opts.max_iter = cfg.eig_max_iter;
    opts.seed = cfg.seed;
    opts.which = EigWhich::LargestAlg;
    opts.warm_start = warm;
    EigPair eig = top_eig_sym(t, opts);

    const Index k = y.rows();
    Eigen::Map<const Matrix> vmat(eig.vector.data(), k, k);
    Matrix m = 0.5 * (vmat + vmat.transpose());
    const double fro = m.norm();
    if (fro <= 0.0)
        throw NumericError("find_max_poly: eigenvector symmetrized to zero");
    m /= fro;
    Vector flat = Eigen::Map<Vector>(m.data(), k * k);
    fix_sign(flat);
    m = Eigen::Map<Matrix>(flat.data(), k, k);
    return {m, eig.value, eig.vector};
}

// p*(y) for already-whitened rows.
Vector poly_values(const Matrix& y_rows, const Matrix& m) {
    Vector w = (y_rows * m).cwiseProduct(y_rows).rowwise().sum();
    return (w.array() - m.trace()) / std::sqrt(2.0);
}

// The certificate is only meaningful when the polynomial space is properly
// sampled; below this the maximizer is pure overfit for any input.
bool poly_space_starved(Index m, Index k) {
    return m < k * (k + 1) / 2;
}

// Finite-sample clean value of max_p Q(p): the empirical maximum on
// standard-normal draws of the same shape, averaged over a few seeds.
double clean_q_reference(Index m, Index k, const FilterConfig& cfg) {
    double acc = 0.0;
    for (int rep = 0; rep < std::max(1, cfg.calibration_reps); ++rep) {
        const std::uint64_t mix =
            static_cast<std::uint64_t>(k) * 0x9e3779b97f4a7c15ull +
            static_cast<std::uint64_t>(m) * 0xbf58476d1ce4e5b9ull +
            static_cast<std::uint64_t>(rep + 1);
        std::mt19937_64 rng(cfg.seed ^ mix);
        std::normal_distribution<double> g(0.0, 1.0);
        Matrix s(m, k);
        for (Index i = 0; i < m; ++i)
            for (Index j = 0; j < k; ++j) s(i, j) = g(rng);
        Matrix sigma = s.transpose() * s / static_cast<double>(m);
        Matrix y = s * sym_inverse_sqrt(sigma);
        MaxPolyCore core = max_poly_from_whitened(y.transpose(), cfg, nullptr);
        Vector p = poly_values(y, core.m);
        acc += p.squaredNorm() / static_cast<double>(m);
    }
    return acc / std::max(1, cfg.calibration_reps);
}

struct CovRound {
    bool is_estimate = false;
    Matrix cov;
    IndexList survivors;
    Vector warm;  // eigenvector to seed the next round with
};

CovRound cov_round(const Matrix& s, double eps, const FilterConfig& cfg,
                   double q_ref, const Vector* warm) {
    const Index m = s.rows(), k = s.cols();
    Matrix sigma_p = s.transpose() * s / static_cast<double>(m);
    Matrix w = sym_inverse_sqrt(sigma_p);
    Matrix y_rows = s * w;

    // Hard cutoff on the whitened quadratic form.
    const double quad_cut =
        cfg.c_quad * static_cast<double>(k) * std::log(10.0 * static_cast<double>(m));
    Vector quad = y_rows.rowwise().squaredNorm();
    if ((quad.array() >= quad_cut).any()) {
        CovRound out;
        for (Index i = 0; i < m; ++i)
            if (quad[i] < quad_cut) out.survivors.push_back(i);
        return out;
    }

    // Sample-starved polynomial space: the maximizer is noise regardless of
    // the data, so the second-moment estimate is the best available answer.
    if (poly_space_starved(m, k)) {
        CovRound out;
        out.is_estimate = true;
        out.cov = std::move(sigma_p);
        return out;
    }

    MaxPolyCore core = max_poly_from_whitened(y_rows.transpose(), cfg, warm);
    Vector p = poly_values(y_rows, core.m);
    const double q_emp = p.squaredNorm() / static_cast<double>(m);
    const double log_inv = std::log(1.0 / eps);
    if (q_emp <= q_ref * (1.0 + cfg.c_poly * eps * log_inv * log_inv)) {
        CovRound out;
        out.is_estimate = true;
        out.cov = std::move(sigma_p);
        out.warm = std::move(core.eigvec);
        return out;
    }

    // Tail thresholds live in units of the clean deviation of p*; without the
    // rescaling the collateral clean mass beyond T grows with dimension and
    // the filter sheds biased clean tails.
    const double p_scale = std::sqrt(q_ref);
    const double med = lower_median({p.data(), p.data() + p.size()});
    Vector a = (p.array() - med).abs();
    double chosen = -1.0;
    for (double t : ascending_distinct(a)) {
        const double ts = t / p_scale;
        if (ts <= cfg.c_prime) continue;
        const double frac =
            (a.array() >= t).count() / static_cast<double>(m);
        const double tail = 3.0 * eps / (ts * ts * std::pow(std::log(ts), 2));
        if (frac >= tail && (a.array() > t).any()) {
            chosen = t;
            break;
        }
    }

    CovRound out;
    out.warm = std::move(core.eigvec);
    if (chosen >= 0.0) {
        for (Index i = 0; i < m; ++i)
            if (a[i] <= chosen) out.survivors.push_back(i);
    } else {
        // No threshold certifies a tail: shave the single worst point.
        const Index worst = argmax_tie_low(a);
        for (Index i = 0; i < m; ++i)
            if (i != worst) out.survivors.push_back(i);
    }
    return out;
}

FilterOutcome round_to_outcome(CovRound&& r) {
    FilterOutcome out;
    out.is_estimate = r.is_estimate;
    out.cov = std::move(r.cov);
    out.survivors = std::move(r.survivors);
    return out;
}

}  // namespace

Vector evaluate_max_poly(const MaxPoly& p, const Matrix& x) {
    check_rep_matrix(x, "evaluate_max_poly");
    if (x.cols() != p.m.rows())
        throw ParameterError("evaluate_max_poly: dimension mismatch");
    return poly_values(x * p.w, p.m);
}

FilterOutcome mean_filter_step(const Matrix& s, double eps, const FilterConfig& cfg) {
    check_rep_matrix(s, "mean_filter_step");
    check_eps(eps, false);
    const Index m = s.rows(), k = s.cols();

    Vector mu = s.colwise().mean();
    Matrix centered = s.rowwise() - mu.transpose();
    Matrix cov = centered.transpose() * centered / static_cast<double>(m);

    EigOptions opts;
    opts.tol = cfg.eig_tol;
    opts.max_iter = cfg.eig_max_iter;
    opts.seed = cfg.seed;
    EigPair eig =
        top_eig_sym(DenseSymOp(cov - Matrix::Identity(k, k)), opts);
    const double lam = std::abs(eig.value);

    const double log_inv = std::log(1.0 / eps);
    if (lam <= cfg.c_mean * eps * log_inv) {
        FilterOutcome out;
        out.is_estimate = true;
        out.mean = std::move(mu);
        return out;
    }

    const double delta = 3.0 * std::sqrt(eps * lam);
    Vector a = (centered * eig.vector).cwiseAbs();
    // Tail reference: sub-gaussian plus the adversarial budget.
    const double dim = static_cast<double>(k);
    const double log_term =
        std::log(dim * std::log(dim / (eps * cfg.tau)));
    double chosen = -1.0;
    for (double t : ascending_distinct(a)) {
        if (t <= 0.0) continue;
        const double frac =
            (a.array() > t + delta).count() / static_cast<double>(m);
        const double bound = 8.0 * std::exp(-t * t / (2.0 * cfg.nu)) +
                             8.0 * eps / (t * t * log_term);
        if (frac > bound) {
            chosen = t;
            break;
        }
    }

    FilterOutcome out;
    if (chosen >= 0.0) {
        for (Index i = 0; i < m; ++i)
            if (a[i] <= chosen + delta) out.survivors.push_back(i);
    } else {
        const Index worst = argmax_tie_low(a);
        for (Index i = 0; i < m; ++i)
            if (i != worst) out.survivors.push_back(i);
    }
    return out;
}

FilterOutcome cov_filter_step(const Matrix& s, double eps, const FilterConfig& cfg) {
    check_rep_matrix(s, "cov_filter_step");
    check_eps(eps, false);
    if (s.rows() < s.cols() + 1)
        throw InsufficientDataError("cov_filter_step: need at least dim+1 rows");
    const double q_ref =
        cfg.calibrate && !poly_space_starved(s.rows(), s.cols())
            ? clean_q_reference(s.rows(), s.cols(), cfg)
            : 1.0;
    return round_to_outcome(cov_round(s, eps, cfg, q_ref, nullptr));
}

MaxPoly find_max_poly(const Matrix& s, const Matrix& sigma_prime,
                      const FilterConfig& cfg) {
    check_rep_matrix(s, "find_max_poly");
    if (sigma_prime.rows() != s.cols() || sigma_prime.cols() != s.cols())
        throw ParameterError("find_max_poly: covariance dimension mismatch");
    Matrix w = sym_inverse_sqrt(sigma_prime);
    MaxPolyCore core = max_poly_from_whitened((s * w).transpose(), cfg, nullptr);
    return {std::move(core.m), core.lambda_star, std::move(w)};
}

MeanResult robust_mean(const Matrix& s, double eps, const FilterConfig& cfg) {
    check_rep_matrix(s, "robust_mean");
    check_eps(eps, true);
    const Index n = s.rows(), k = s.cols();
    if (eps == 0.0) return {s.colwise().mean(), 1, 0};

    IndexList live(n);
    std::iota(live.begin(), live.end(), Index{0});
    Matrix cur = s;
    for (int it = 1; it <= cfg.max_filter_iterations; ++it) {
        FilterOutcome out = mean_filter_step(cur, eps, cfg);
        if (out.is_estimate)
            return {std::move(out.mean), it, n - static_cast<Index>(live.size())};
        if (static_cast<Index>(out.survivors.size()) < k + 1)
            throw InsufficientDataError(
                "robust_mean: filter would leave fewer than dim+1 samples");
        IndexList next(out.survivors.size());
        for (size_t i = 0; i < out.survivors.size(); ++i)
            next[i] = live[out.survivors[i]];
        live = std::move(next);
        cur = take_rows(s, live);
    }
    // Iteration cap: fall back to the surviving rows' sample mean.
    return {cur.colwise().mean(), cfg.max_filter_iterations,
            n - static_cast<Index>(live.size())};
}

CovResult robust_cov(const Matrix& s, double eps, const FilterConfig& cfg) {
    check_rep_matrix(s, "robust_cov");
    check_eps(eps, true);
    const Index n = s.rows(), k = s.cols();
    if (n < k + 1)
        throw InsufficientDataError("robust_cov: need at least dim+1 rows");
    IndexList live(n);
    std::iota(live.begin(), live.end(), Index{0});
    if (eps == 0.0)
        return {s.transpose() * s / static_cast<double>(n), 1, 0, std::move(live)};

    Matrix cur = s;
    Vector warm;
    // One reference for the whole loop: the survivor count shrinks by at
    // most ~2 eps, which moves the clean maximum by far less than the slack.
    const double q_ref = cfg.calibrate && !poly_space_starved(n, k)
                             ? clean_q_reference(n, k, cfg)
                             : 1.0;
    for (int it = 1; it <= cfg.max_filter_iterations; ++it) {
        CovRound round =
            cov_round(cur, eps, cfg, q_ref, warm.size() > 0 ? &warm : nullptr);
        if (round.is_estimate)
            return {std::move(round.cov), it, n - static_cast<Index>(live.size()),
                    std::move(live)};
        if (round.warm.size() > 0) warm = std::move(round.warm);
        if (static_cast<Index>(round.survivors.size()) < k + 1)
            throw InsufficientDataError(
                "robust_cov: filter would leave fewer than dim+1 samples");
        IndexList next(round.survivors.size());
        for (size_t i = 0; i < round.survivors.size(); ++i)
            next[i] = live[round.survivors[i]];
        live = std::move(next);
        cur = take_rows(s, live);
    }
    return {cur.transpose() * cur / static_cast<double>(cur.rows()),
            cfg.max_filter_iterations, n - static_cast<Index>(live.size()),
            std::move(live)};
}

RobustEstimate robust_gaussian(const Matrix& s, double eps, const FilterConfig& cfg) {
    check_rep_matrix(s, "robust_gaussian");
    check_eps(eps, true);
    const Index n = s.rows(), k = s.cols();
    if (n < 2 * (k + 1))
        throw ParameterError("robust_gaussian: need at least 2(dim+1) rows");

    // Pairwise differences cancel the unknown mean and stay eps-corrupted
    // (each difference touches at most two bad rows).
    const Index h = n / 2;
    Matrix pairs(h, k);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (Index i = 0; i < h; ++i)
        pairs.row(i) = (s.row(i) - s.row(h + i)) * inv_sqrt2;

    CovResult cov = robust_cov(pairs, eps, cfg);
    Matrix w = sym_inverse_sqrt(cov.cov);
    MeanResult mean_w = robust_mean(s * w, eps, cfg);

    RobustEstimate out;
    out.cov = std::move(cov.cov);
    out.mean = sym_func(out.cov, [](double x) {
                   return std::sqrt(std::max(0.0, x));
               }) * mean_w.mean;
    out.iterations_cov = cov.iterations;
    out.iterations_mean = mean_w.iterations;
    out.removed_by_filter = cov.removed + mean_w.removed;
    out.cov_survivor_rows.reserve(2 * cov.survivors.size() + (n % 2));
    for (Index i : cov.survivors) {
        out.cov_survivor_rows.push_back(i);
        out.cov_survivor_rows.push_back(h + i);
    }
    if (n % 2 == 1) out.cov_survivor_rows.push_back(n - 1);
    std::sort(out.cov_survivor_rows.begin(), out.cov_survivor_rows.end());
    return out;
}

}  // namespace spectre
