#pragma once

#include <cstdint>
#include <optional>

#include "spectre/types.hpp"

namespace spectre {

// Shared knobs for the outlier filters. The constants are the theory
// thresholds; the iteration/eigensolver settings bound the numerics.
struct FilterConfig {
    double c_mean = 10.0;   // certificate slack of the mean filter
    double c_poly = 0.45;   // certificate slack of the covariance filter
    double c_quad = 3.0;    // hard quadratic-form cutoff multiplier
    double c_prime = 3.0;   // lower bound for covariance tail thresholds
    double nu = 1.0;        // sub-gaussian scale in the mean tail bound
    double tau = 0.1;       // failure-probability knob in the mean tail bound
    // The covariance certificate compares the empirical Q against its clean
    // finite-sample reference. At n >> dim^2 that reference is 1 and the
    // comparison matches the asymptotic threshold; at practical sizes the
    // clean maximum is noticeably above 1 and an uncalibrated test either
    // never fires (large slack) or fires on noise (small slack). Calibration
    // re-measures the reference on synthetic Gaussians of the same shape.
    bool calibrate = true;
    int calibration_reps = 3;
    double eig_tol = 1e-8;
    int eig_max_iter = 1000;
    // Out-of-theory inputs (e.g. dimension^2 >> samples) may never reach a
    // certificate; cap the loops and return the current estimate instead of
    // spinning sample-by-sample.
    int max_filter_iterations = 500;
    std::uint64_t seed = 0;
};

// One filter round either certifies an estimate or shrinks the sample set.
struct FilterOutcome {
    bool is_estimate = false;
    Vector mean;           // mean filter estimate (when is_estimate)
    Matrix cov;            // covariance filter estimate (when is_estimate)
    IndexList survivors;   // indices into the input rows (when !is_estimate)
};

struct MeanResult {
    Vector mean;
    int iterations = 0;
    Index removed = 0;
};

struct CovResult {
    Matrix cov;
    int iterations = 0;
    Index removed = 0;
    IndexList survivors;  // input rows the filter kept
};

// Joint estimate for data that is Gaussian up to an eps-fraction of
// adversarial rows.
struct RobustEstimate {
    Vector mean;
    Matrix cov;
    int iterations_mean = 0;
    int iterations_cov = 0;
    Index removed_by_filter = 0;
    // Rows whose difference-pair survived the covariance filter (both members
    // of each surviving pair; the odd row out, if any, counts as surviving).
    IndexList cov_survivor_rows;
};

// The degree-2 polynomial p*(x) = (y^T M y - tr M) / sqrt(2), y = W x,
// whose empirical variance certifies (or refutes) the covariance estimate.
struct MaxPoly {
    Matrix m;             // symmetric, unit Frobenius norm, k x k
    double lambda_star;   // eigenvalue of the fourth-moment operator (-> 2 on clean data)
    Matrix w;             // the whitening transform used to form y
};

// Evaluate p* on raw rows (one value per row of x).
Vector evaluate_max_poly(const MaxPoly& p, const Matrix& x);

// One round of the spectral mean filter: certify the sample mean or drop the
// tail along the most deviating direction.
FilterOutcome mean_filter_step(const Matrix& s, double eps, const FilterConfig& cfg = {});

// One round of the covariance filter on zero-mean data: certify the sample
// second moment or drop rows flagged by the quadratic form / p* tail.
FilterOutcome cov_filter_step(const Matrix& s, double eps, const FilterConfig& cfg = {});

// Direction of maximum excess fourth moment after whitening by sigma_prime.
MaxPoly find_max_poly(const Matrix& s, const Matrix& sigma_prime,
                      const FilterConfig& cfg = {});

// Iterate mean_filter_step until it certifies. eps = 0 short-circuits to the
// sample mean.
MeanResult robust_mean(const Matrix& s, double eps, const FilterConfig& cfg = {});

// Iterate cov_filter_step until it certifies. Input rows are assumed
// zero-mean; the estimate is the (uncentered) second moment of the
// surviving rows. eps = 0 short-circuits to the sample second moment.
CovResult robust_cov(const Matrix& s, double eps, const FilterConfig& cfg = {});

// Mean and covariance of eps-corrupted Gaussian rows: covariance from
// pairwise differences, mean from the whitened samples.
RobustEstimate robust_gaussian(const Matrix& s, double eps, const FilterConfig& cfg = {});

}  // namespace spectre
