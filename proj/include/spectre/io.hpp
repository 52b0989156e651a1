#pragma once

#include <string>

#include "spectre/types.hpp"

namespace spectre {

// Binary representation-matrix format: magic "RMX1", then u32 rows, u32
// cols (little-endian), then rows*cols float64 values row-major. Readers
// validate the magic, the exact file length and value finiteness, and report
// the offending byte offset on failure.
void write_rmx(const std::string& path, const Matrix& m);
Matrix read_rmx(const std::string& path);

// Headerless CSV: one row per line, comma-separated binary64 decimals.
Matrix read_csv(const std::string& path);

// Poison masks: one byte per row, 0 = clean, 1 = poisoned.
void write_mask(const std::string& path, const Mask& mask);
Mask read_mask(const std::string& path);

// Dispatch on extension: ".rmx" binary, ".csv" text.
Matrix read_matrix_auto(const std::string& path);

}  // namespace spectre
