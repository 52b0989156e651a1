#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "spectre/que.hpp"
#include "spectre/robust.hpp"
#include "spectre/types.hpp"

namespace spectre {

struct SpectreConfig {
    double eps = 0.05;          // upper bound on the poisoned fraction, (0, 1/3)
    double alpha = 4.0;         // QUE interpolation strength, >= 0
    std::optional<int> k = {};  // fixed projection rank; unset = adaptive
    int k_max = 64;             // sweep ceiling for the adaptive mode
    double mult = 1.5;          // removal budget = floor(mult * eps * n)
    std::uint64_t seed = 0;
    int threads = 1;            // label-level parallelism in target_identifier
    FilterConfig filter = {};
};

struct DetectionReport {
    IndexList removed;       // ascending row indices, size min(budget, n)
    int k_used = 0;
    double mean_que = 0.0;   // mean QUE score at the chosen k
    QueScoreVector scores;   // per-row scores at the chosen k
    // (k, q) pairs examined by the adaptive sweep; single entry in fixed mode.
    std::vector<std::pair<int, double>> per_k;
};

// One sweep point: detection at rank k plus the survivor-based QUE level q
// used to compare ranks against each other.
struct KSweepEntry {
    int k = 0;
    double q = 0.0;
    IndexList removed;
};

struct KIdentifierResult {
    int k = 0;
    double q = 0.0;
    std::vector<KSweepEntry> sweep;
};

struct TargetResult {
    int label = 0;
    double q = 0.0;
    std::vector<KIdentifierResult> per_label;
};

// Fixed-rank detection: project to the top-k right-singular subspace,
// robustly estimate the Gaussian bulk, whiten, score with QUE, and remove
// the floor(mult * eps * n) highest scores (ties to the lower index).
DetectionReport spectre_detect(const Matrix& s, int k, const SpectreConfig& cfg);

// Rank selection: run detection for each k in the sweep, whiten everything
// by the survivors' covariance in the fixed k_max-dim projection, and pick
// the k with the highest mean QUE score (ties to the smaller k).
KIdentifierResult k_identifier(const Matrix& s, const SpectreConfig& cfg);

// Detection with the rank chosen by k_identifier.
DetectionReport spectre_detect_adaptive(const Matrix& s, const SpectreConfig& cfg);

// Scan per-label representation matrices and return the label whose best
// sweep point scores highest (ties to the lowest label id).
TargetResult target_identifier(const std::vector<Matrix>& labels,
                               const SpectreConfig& cfg);

}  // namespace spectre
