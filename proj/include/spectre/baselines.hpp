#pragma once

#include <cstdint>

#include "spectre/types.hpp"

namespace spectre {

// Spectral-signature defense: remove the floor(1.5 eps n) rows with the
// largest |<h_i - mu, v>| along the top principal direction v. Returns
// ascending indices. Throws DegenerateDataError when all rows are equal.
IndexList pca_defense(const Matrix& s, double eps);

struct ClusterPair {
    std::vector<int> assignment;  // 0/1 per row
    Matrix centroids;             // 2 x k_dims, in the projected space
};

// Activation clustering: project the centered rows onto the top k_dims
// principal directions, then 2-means (Lloyd, seeded two-point init, at most
// 100 iterations).
ClusterPair activation_clustering(const Matrix& s, int k_dims, std::uint64_t seed);

struct OracleRemoval {
    IndexList indices;      // ascending
    bool completed = true;  // false if the round guard tripped first
};

// Repeatedly cluster with fresh seeds and ask the mask which cluster is the
// dirtier one; sample one of its rows per round until floor(1.5 eps n) rows
// are collected (or the 10^4-round guard trips).
OracleRemoval clustering_with_oracle(const Matrix& s, int k_dims, double eps,
                                     const Mask& mask, std::uint64_t seed);

}  // namespace spectre
