#pragma once

#include <cstdint>
#include <vector>

#include "spectre/types.hpp"

namespace spectre {

// How the poison displacement directions are chosen.
enum class SignatureMode {
    Auto,     // the m smallest-variance eigendirections of the clean covariance
    Top,      // the m largest-variance eigendirections
    Indices,  // explicit indices into the eigenbasis (0 = largest variance)
    Vectors,  // explicit unit vectors in data coordinates
};

struct SynthSpec {
    int n_clean = 1000;       // clean rows per label
    int d = 32;
    double eps = 0.05;        // poisons = floor(eps * n_clean), appended to the target
    int m = 1;                // number of poison ways (sub-populations)
    Vector clean_spectrum;    // d positive reals, descending
    SignatureMode mode = SignatureMode::Auto;
    std::vector<int> signature_indices;  // Indices mode
    Matrix signature_vectors;            // Vectors mode, d x m unit columns
    double displacement = 6.0;           // in units of the clean std along the direction
    double poison_spread = 0.1;          // absolute isotropic std of each way
    int num_labels = 1;
    int target_label = 0;
    std::uint64_t seed = 0;
};

struct LabeledDataset {
    std::vector<Matrix> labels;  // one representation matrix per label
    std::vector<Mask> masks;     // parallel poison masks
    SynthSpec spec;
};

// Deterministic synthetic penultimate-layer features: per-label Gaussians
// sharing one random orthogonal eigenbasis, with the target label's matrix
// carrying displaced poison ways (rows shuffled).
LabeledDataset generate(const SynthSpec& spec);

struct RemovalMetrics {
    Index p_rm = 0;          // poisons removed
    double recall = 0.0;     // p_rm / total poisons
    Index clean_removed = 0;
};

// Score a removal set against the ground-truth mask.
RemovalMetrics eval_removal(const Mask& mask, const IndexList& removed);

}  // namespace spectre
