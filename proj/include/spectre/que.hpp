#pragma once

#include "spectre/types.hpp"

namespace spectre {

struct QueScoreVector {
    Vector scores;  // one non-negative score per row
    double alpha;
};

// Quantum-entropy outlier scores for whitened rows h:
//   tau_i = h_i^T Q h_i / tr(Q),  Q = exp(alpha (S - I) / (||S||_2 - 1)),
// with S the second moment of the rows. alpha = 0 reduces to the scaled
// norm ||h||^2 / k; alpha -> infinity concentrates on the top eigenvector.
// When ||S||_2 - 1 <= 1e-8 the exponent is degenerate and Q = I is used.
QueScoreVector que_scores(const Matrix& whitened, double alpha);

// The alpha -> infinity limit (v^T h)^2 along the top eigenvector of the
// second moment; used for comparisons against the interpolated scores.
Vector top_direction_scores(const Matrix& whitened);

}  // namespace spectre
