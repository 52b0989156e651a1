#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace spectre {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Representation matrices are plain dense matrices with one sample per row.
// check_rep_matrix enforces the shared preconditions (non-empty, all finite).
void check_rep_matrix(const Matrix& s, const char* what);

// Indices into the rows of a representation matrix.
using IndexList = std::vector<Index>;

// Per-row poison labels: 1 = poisoned, 0 = clean.
using Mask = std::vector<std::uint8_t>;

}  // namespace spectre
