#include "spectre/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "spectre/errors.hpp"
#include "spectre/linalg.hpp"

namespace spectre {

namespace {

void validate_config(const SpectreConfig& cfg, Index n) {
    if (cfg.eps <= 0.0 || cfg.eps >= 1.0 / 3.0)
        throw ParameterError("spectre: eps must lie in (0, 1/3)");
    if (cfg.eps * static_cast<double>(n) < 1.0)
        throw ParameterError("spectre: eps * n must be at least 1");
    if (cfg.alpha < 0.0)
        throw ParameterError("spectre: alpha must be non-negative");
    if (cfg.mult <= 0.0)
        throw ParameterError("spectre: mult must be positive");
    if (cfg.threads < 1)
        throw ParameterError("spectre: threads must be >= 1");
}

Index removal_budget(const SpectreConfig& cfg, Index n) {
    const double raw = cfg.mult * cfg.eps * static_cast<double>(n);
    return std::min<Index>(static_cast<Index>(std::floor(raw + 1e-9)), n);
}

// Highest scores win the removal budget; ties go to the lower index.
IndexList top_scores(const Vector& scores, Index budget) {
    IndexList order(scores.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return scores[a] > scores[b];
    });
    order.resize(static_cast<size_t>(std::min<Index>(budget, scores.size())));
    std::sort(order.begin(), order.end());
    return order;
}

struct DetectionCore {
    IndexList removed;
    QueScoreVector scores;
    IndexList filter_survivors;  // rows whose pair the covariance filter kept
};

// The fixed-rank pipeline on already-projected (centered) data.
DetectionCore run_at_k(const Matrix& projected, const SpectreConfig& cfg) {
    FilterConfig fcfg = cfg.filter;
    fcfg.seed = cfg.seed;
    RobustEstimate est = robust_gaussian(projected, cfg.eps, fcfg);
    Matrix whitened = whiten(projected, est.mean, est.cov);
    DetectionCore core;
    core.scores = que_scores(whitened, cfg.alpha);
    core.removed = top_scores(core.scores.scores, removal_budget(cfg, projected.rows()));
    core.filter_survivors = std::move(est.cov_survivor_rows);
    return core;
}

struct Projection {
    Vector mu;
    Matrix basis;      // d x k
    Matrix projected;  // n x k, centered
};

Projection project(const Matrix& s, Index k) {
    Projection p;
    p.mu = s.colwise().mean();
    Matrix centered = s.rowwise() - p.mu.transpose();
    p.basis = top_k_svd(centered, k).basis;
    p.projected = centered * p.basis;
    return p;
}

std::vector<int> sweep_ranks(int k_max) {
    const int stride = std::max(1, k_max / 64);
    std::vector<int> ks;
    for (int k = 1; k <= k_max; k += stride) ks.push_back(k);
    if (ks.back() != k_max) ks.push_back(k_max);
    return ks;
}

}  // namespace

DetectionReport spectre_detect(const Matrix& s, int k, const SpectreConfig& cfg) {
    check_rep_matrix(s, "spectre_detect");
    validate_config(cfg, s.rows());
    if (k < 1 || k > std::min(s.rows(), s.cols()))
        throw ParameterError("spectre_detect: k must be in [1, min(n, d)]");

    Projection p = project(s, k);
    DetectionCore core = run_at_k(p.projected, cfg);
    DetectionReport report;
    report.k_used = k;
    report.mean_que = core.scores.scores.mean();
    report.removed = std::move(core.removed);
    report.scores = std::move(core.scores);
    report.per_k = {{k, report.mean_que}};
    return report;
}

KIdentifierResult k_identifier(const Matrix& s, const SpectreConfig& cfg) {
    check_rep_matrix(s, "k_identifier");
    validate_config(cfg, s.rows());
    if (cfg.k_max < 1 || cfg.k_max > std::min(s.rows(), s.cols()))
        throw ParameterError("k_identifier: k_max must be in [1, min(n, d)]");

    Projection p = project(s, cfg.k_max);
    KIdentifierResult result;
    result.q = -std::numeric_limits<double>::infinity();

    for (int k : sweep_ranks(cfg.k_max)) {
        DetectionCore core = run_at_k(p.projected.leftCols(k), cfg);

        // Judge this k by how suspicious the full k_max-dim cloud looks when
        // whitened by the rows the covariance filter kept. The filter's
        // survivor set carries none of the removal budget's selection bias:
        // when nothing fires it is the whole sample and q(k) is exactly 1,
        // and each way the filter catches adds an amplified direction.
        const Index n_surv = static_cast<Index>(core.filter_survivors.size());
        if (n_surv < cfg.k_max + 1)
            throw InsufficientDataError(
                "k_identifier: not enough survivors to whiten at k_max");
        Vector mu_s = Vector::Zero(cfg.k_max);
        for (Index i : core.filter_survivors) mu_s += p.projected.row(i);
        mu_s /= static_cast<double>(n_surv);
        Matrix sig_s = Matrix::Zero(cfg.k_max, cfg.k_max);
        for (Index i : core.filter_survivors) {
            Vector c = p.projected.row(i).transpose() - mu_s;
            sig_s.noalias() += c * c.transpose();
        }
        sig_s /= static_cast<double>(n_surv);

        Matrix whitened = whiten(p.projected, mu_s, sig_s);
        const double q = que_scores(whitened, cfg.alpha).scores.mean();
        result.sweep.push_back({k, q, std::move(core.removed)});
        if (q > result.q) {
            result.q = q;
            result.k = k;
        }
    }
    return result;
}

DetectionReport spectre_detect_adaptive(const Matrix& s, const SpectreConfig& cfg) {
    KIdentifierResult kid = k_identifier(s, cfg);

    // Re-run the chosen rank through the same projection path for the full
    // score vector; the removal set matches the sweep entry.
    Projection p = project(s, cfg.k_max);
    DetectionCore core = run_at_k(p.projected.leftCols(kid.k), cfg);

    DetectionReport report;
    report.k_used = kid.k;
    report.mean_que = kid.q;
    report.removed = std::move(core.removed);
    report.scores = std::move(core.scores);
    report.per_k.reserve(kid.sweep.size());
    for (const auto& entry : kid.sweep)
        report.per_k.emplace_back(entry.k, entry.q);
    return report;
}

TargetResult target_identifier(const std::vector<Matrix>& labels,
                               const SpectreConfig& cfg) {
    if (labels.empty())
        throw ParameterError("target_identifier: need at least one label");
    const int n_labels = static_cast<int>(labels.size());

    std::vector<KIdentifierResult> results(labels.size());
    std::exception_ptr failure;
    std::mutex failure_mu;
    const int threads = std::min<int>(cfg.threads, n_labels);
    if (threads <= 1) {
        for (int l = 0; l < n_labels; ++l) results[l] = k_identifier(labels[l], cfg);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (int l = t; l < n_labels; l += threads) {
                    try {
                        results[l] = k_identifier(labels[l], cfg);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(failure_mu);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }

    TargetResult out;
    out.label = 0;
    out.q = results[0].q;
    for (int l = 1; l < n_labels; ++l) {
        if (results[l].q > out.q) {
            out.q = results[l].q;
            out.label = l;
        }
    }
    out.per_label = std::move(results);
    return out;
}

}  // namespace spectre
