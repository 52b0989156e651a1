#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "spectre/errors.hpp"
#include "spectre/synth.hpp"

using namespace spectre;

namespace {

Vector geometric_spectrum(Index d, double hi, double lo) {
    Vector s(d);
    for (Index j = 0; j < d; ++j)
        s[j] = hi * std::pow(lo / hi, d > 1 ? static_cast<double>(j) / (d - 1) : 0.0);
    return s;
}

SynthSpec base_spec() {
    SynthSpec spec;
    spec.n_clean = 500;
    spec.d = 8;
    spec.eps = 0.05;
    spec.m = 1;
    spec.clean_spectrum = geometric_spectrum(8, 16.0, 1.0);
    spec.displacement = 6.0;
    spec.poison_spread = 0.0;
    spec.seed = 42;
    return spec;
}

}  // namespace

TEST_SUITE_BEGIN("synth");

TEST_CASE("zero spread puts every poison exactly at the displaced center") {
    auto spec = base_spec();
    auto data = generate(spec);
    REQUIRE(data.labels.size() == 1);
    const Matrix& s = data.labels[0];
    const Mask& mask = data.masks[0];
    REQUIRE(s.rows() == 525);  // 500 clean + floor(0.05 * 500)

    std::vector<Index> poison_rows;
    for (Index i = 0; i < s.rows(); ++i)
        if (mask[i]) poison_rows.push_back(i);
    REQUIRE(poison_rows.size() == 25);
    for (Index i : poison_rows)
        CHECK((s.row(i) - s.row(poison_rows[0])).norm() < 1e-12);

    // Offset from the label mean has length displacement * std(dir).
    Vector mu = Vector::Zero(8);
    mu[0] = 10.0;
    const double sigma_min = std::sqrt(spec.clean_spectrum[7]);
    const double offset = (s.row(poison_rows[0]).transpose() - mu).norm();
    CHECK(offset == doctest::Approx(6.0 * sigma_min).epsilon(1e-10));
}

TEST_CASE("multiple ways split the budget with the remainder up front") {
    auto spec = base_spec();
    spec.n_clean = 100;  // floor(0.05 * 100) = 5 poisons over 2 ways: 3 + 2
    spec.m = 2;
    auto data = generate(spec);
    const Matrix& s = data.labels[0];
    const Mask& mask = data.masks[0];

    std::vector<Vector> centers;
    std::vector<int> counts;
    for (Index i = 0; i < s.rows(); ++i) {
        if (!mask[i]) continue;
        bool found = false;
        for (size_t c = 0; c < centers.size(); ++c) {
            if ((s.row(i).transpose() - centers[c]).norm() < 1e-9) {
                ++counts[c];
                found = true;
            }
        }
        if (!found) {
            centers.push_back(s.row(i));
            counts.push_back(1);
        }
    }
    REQUIRE(centers.size() == 2);
    std::sort(counts.begin(), counts.end());
    CHECK(counts[0] == 2);
    CHECK(counts[1] == 3);
    // The two ways sit along orthogonal directions.
    Vector mu = Vector::Zero(8);
    mu[0] = 10.0;
    Vector d0 = (centers[0] - mu).normalized();
    Vector d1 = (centers[1] - mu).normalized();
    CHECK(std::abs(d0.dot(d1)) < 1e-9);
}

TEST_CASE("clean covariance spectrum matches the requested one") {
    SynthSpec spec;
    spec.n_clean = 5000;
    spec.d = 32;
    spec.eps = 0.0;
    spec.clean_spectrum = geometric_spectrum(32, 100.0, 1.0);
    spec.seed = 7;
    auto data = generate(spec);
    const Matrix& s = data.labels[0];

    Vector mu = s.colwise().mean();
    Matrix centered = s.rowwise() - mu.transpose();
    Matrix cov = centered.transpose() * centered / static_cast<double>(s.rows());
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    for (Index j = 0; j < 32; ++j) {
        const double got = es.eigenvalues()[31 - j];
        CHECK(got == doctest::Approx(spec.clean_spectrum[j]).epsilon(0.10));
    }
}

TEST_CASE("generation is deterministic in the seed") {
    auto spec = base_spec();
    spec.num_labels = 3;
    spec.target_label = 1;
    auto a = generate(spec);
    auto b = generate(spec);
    for (int l = 0; l < 3; ++l) {
        CHECK((a.labels[l] - b.labels[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK(a.masks[l] == b.masks[l]);
    }
    spec.seed = 43;
    auto c = generate(spec);
    CHECK((a.labels[0] - c.labels[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("only the target label carries poisons") {
    auto spec = base_spec();
    spec.num_labels = 4;
    spec.target_label = 2;
    auto data = generate(spec);
    for (int l = 0; l < 4; ++l) {
        const auto& mask = data.masks[l];
        const Index total = std::accumulate(mask.begin(), mask.end(), Index{0});
        if (l == 2) {
            CHECK(total == 25);
            CHECK(data.labels[l].rows() == 525);
        } else {
            CHECK(total == 0);
            CHECK(data.labels[l].rows() == 500);
        }
    }
}

TEST_CASE("auto signatures use the smallest-variance eigendirections") {
    auto spec = base_spec();
    spec.eps = 0.0;  // first generate clean data to estimate the eigenbasis
    auto clean = generate(spec);
    Vector mu_clean = clean.labels[0].colwise().mean();
    Matrix centered = clean.labels[0].rowwise() - mu_clean.transpose();
    Matrix cov = centered.transpose() * centered / 500.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    Vector smallest = es.eigenvectors().col(0);  // ascending order

    spec.eps = 0.05;
    auto data = generate(spec);
    const Matrix& s = data.labels[0];
    Vector mu = Vector::Zero(8);
    mu[0] = 10.0;
    for (Index i = 0; i < s.rows(); ++i) {
        if (!data.masks[0][i]) continue;
        Vector dir = (s.row(i).transpose() - mu).normalized();
        CHECK(std::abs(dir.dot(smallest)) > 0.99);
        break;
    }
}

TEST_CASE("explicit signature vectors are honored") {
    auto spec = base_spec();
    spec.mode = SignatureMode::Vectors;
    spec.signature_vectors = Matrix::Zero(8, 1);
    spec.signature_vectors(3, 0) = 1.0;
    auto data = generate(spec);
    const Matrix& s = data.labels[0];
    Vector mu = Vector::Zero(8);
    mu[0] = 10.0;
    for (Index i = 0; i < s.rows(); ++i) {
        if (!data.masks[0][i]) continue;
        Vector offset = s.row(i).transpose() - mu;
        CHECK(std::abs(offset.normalized()[3]) == doctest::Approx(1.0).epsilon(1e-10));
        break;
    }
}

TEST_CASE("invalid specs are rejected") {
    auto spec = base_spec();
    spec.eps = 0.001;  // floor(0.001 * 500) = 0 < m
    CHECK_THROWS_AS(generate(spec), ParameterError);

    spec = base_spec();
    spec.clean_spectrum.reverseInPlace();  // ascending
    CHECK_THROWS_AS(generate(spec), ParameterError);

    spec = base_spec();
    spec.mode = SignatureMode::Vectors;
    spec.signature_vectors = Matrix::Constant(8, 1, 0.5);  // not unit
    CHECK_THROWS_AS(generate(spec), ParameterError);

    spec = base_spec();
    spec.target_label = 5;
    CHECK_THROWS_AS(generate(spec), ParameterError);
}

TEST_CASE("eval_removal counts hits, misses and collateral") {
    Mask mask = {0, 1, 1, 0};
    auto m = eval_removal(mask, {1, 3});
    CHECK(m.p_rm == 1);
    CHECK(m.recall == doctest::Approx(0.5));
    CHECK(m.clean_removed == 1);

    CHECK_THROWS_AS(eval_removal(mask, {9}), ParameterError);
    CHECK_THROWS_AS(eval_removal(mask, {1, 1}), ParameterError);
}

TEST_SUITE_END();
