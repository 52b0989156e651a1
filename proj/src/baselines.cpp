#include "spectre/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "spectre/errors.hpp"
#include "spectre/linalg.hpp"

namespace spectre {

namespace {

void check_eps(double eps) {
    if (eps <= 0.0 || eps >= 1.0 / 3.0)
        throw ParameterError("baselines: eps must lie in (0, 1/3)");
}

Index budget_of(double eps, Index n) {
    return std::min<Index>(
        static_cast<Index>(std::floor(1.5 * eps * static_cast<double>(n) + 1e-9)), n);
}

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

}  // namespace

IndexList pca_defense(const Matrix& s, double eps) {
    check_rep_matrix(s, "pca_defense");
    const Index n = s.rows();
    if (n < 2) throw ParameterError("pca_defense: need at least two rows");
    check_eps(eps);

    Vector mu = s.colwise().mean();
    Matrix centered = s.rowwise() - mu.transpose();
    const double spread = centered.cwiseAbs().maxCoeff();
    if (spread <= 1e-12 * std::max(1.0, mu.cwiseAbs().maxCoeff()))
        throw DegenerateDataError("pca_defense: all rows are identical");

    Vector v = top_k_svd(centered, 1).basis.col(0);
    Vector scores = (centered * v).cwiseAbs();
    return top_scores(scores, budget_of(eps, n));
}

ClusterPair activation_clustering(const Matrix& s, int k_dims, std::uint64_t seed) {
    check_rep_matrix(s, "activation_clustering");
    const Index n = s.rows();
    if (n < 2) throw ParameterError("activation_clustering: need at least two rows");
    if (k_dims < 1 || k_dims > std::min(s.rows(), s.cols()))
        throw ParameterError("activation_clustering: k_dims must be in [1, min(n, d)]");

    Vector mu = s.colwise().mean();
    Matrix centered = s.rowwise() - mu.transpose();
    Matrix basis = top_k_svd(centered, k_dims).basis;
    Matrix p = centered * basis;

    // Seeded two-point init: a uniform row, then a uniform row with a
    // different projected value.
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    const Index first = pick(rng);
    Index second = -1;
    for (int attempt = 0; attempt < 64 && second < 0; ++attempt) {
        const Index cand = pick(rng);
        if ((p.row(cand) - p.row(first)).cwiseAbs().maxCoeff() > 0.0) second = cand;
    }
    for (Index i = 0; second < 0 && i < n; ++i)
        if ((p.row(i) - p.row(first)).cwiseAbs().maxCoeff() > 0.0) second = i;
    if (second < 0)
        throw DegenerateDataError(
            "activation_clustering: all projected rows are identical");

    Matrix centroids(2, k_dims);
    centroids.row(0) = p.row(first);
    centroids.row(1) = p.row(second);

    ClusterPair out;
    out.assignment.assign(static_cast<size_t>(n), 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        std::array<Index, 2> sizes = {0, 0};
        for (Index i = 0; i < n; ++i) {
            const double d0 = (p.row(i) - centroids.row(0)).squaredNorm();
            const double d1 = (p.row(i) - centroids.row(1)).squaredNorm();
            const int c = d1 < d0 ? 1 : 0;
            if (c != out.assignment[static_cast<size_t>(i)]) {
                out.assignment[static_cast<size_t>(i)] = c;
                changed = true;
            }
            ++sizes[static_cast<size_t>(c)];
        }
        // Empty-cluster repair: hand it the row farthest from the full
        // cluster's centroid (lowest index on ties).
        for (int c = 0; c < 2; ++c) {
            if (sizes[static_cast<size_t>(c)] > 0) continue;
            const int other = 1 - c;
            Index far = 0;
            double best = -1.0;
            for (Index i = 0; i < n; ++i) {
                const double dist = (p.row(i) - centroids.row(other)).squaredNorm();
                if (dist > best) {
                    best = dist;
                    far = i;
                }
            }
            out.assignment[static_cast<size_t>(far)] = c;
            sizes[static_cast<size_t>(c)] = 1;
            sizes[static_cast<size_t>(other)] -= 1;
            changed = true;
        }
        Matrix sums = Matrix::Zero(2, k_dims);
        for (Index i = 0; i < n; ++i)
            sums.row(out.assignment[static_cast<size_t>(i)]) += p.row(i);
        for (int c = 0; c < 2; ++c)
            centroids.row(c) = sums.row(c) / static_cast<double>(sizes[static_cast<size_t>(c)]);
        if (!changed) break;
    }
    out.centroids = std::move(centroids);
    return out;
}

OracleRemoval clustering_with_oracle(const Matrix& s, int k_dims, double eps,
                                     const Mask& mask, std::uint64_t seed) {
    check_rep_matrix(s, "clustering_with_oracle");
    const Index n = s.rows();
    if (static_cast<Index>(mask.size()) != n)
        throw ParameterError("clustering_with_oracle: mask length must match rows");
    for (auto b : mask)
        if (b > 1) throw DataError("clustering_with_oracle: mask bytes must be 0 or 1");
    check_eps(eps);

    const Index budget = budget_of(eps, n);
    std::vector<bool> taken(static_cast<size_t>(n), false);
    Index collected = 0;
    std::mt19937_64 sampler(seed);

    constexpr int kMaxRounds = 10000;
    for (int round = 0; round < kMaxRounds && collected < budget; ++round) {
        const std::uint64_t round_seed =
            seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(round + 1);
        ClusterPair clusters = activation_clustering(s, k_dims, round_seed);

        std::array<Index, 2> size = {0, 0}, poison = {0, 0};
        for (Index i = 0; i < n; ++i) {
            const auto c = static_cast<size_t>(clusters.assignment[static_cast<size_t>(i)]);
            ++size[c];
            poison[c] += mask[static_cast<size_t>(i)];
        }
        // The oracle names the cluster with the higher poison fraction
        // (ties to cluster 0); empty clusters cannot win.
        auto frac = [&](int c) {
            return size[static_cast<size_t>(c)] == 0
                       ? -1.0
                       : static_cast<double>(poison[static_cast<size_t>(c)]) /
                             static_cast<double>(size[static_cast<size_t>(c)]);
        };
        const int dirty = frac(1) > frac(0) ? 1 : 0;

        IndexList members;
        for (Index i = 0; i < n; ++i)
            if (clusters.assignment[static_cast<size_t>(i)] == dirty)
                members.push_back(i);
        std::uniform_int_distribution<size_t> pick(0, members.size() - 1);
        const Index chosen = members[pick(sampler)];
        if (!taken[static_cast<size_t>(chosen)]) {
            taken[static_cast<size_t>(chosen)] = true;
            ++collected;
        }
    }

    OracleRemoval out;
    out.completed = collected == budget;
    for (Index i = 0; i < n; ++i)
        if (taken[static_cast<size_t>(i)]) out.indices.push_back(i);
    return out;
}

}  // namespace spectre
