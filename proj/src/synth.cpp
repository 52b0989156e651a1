#include "spectre/synth.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "spectre/errors.hpp"

namespace spectre {

namespace {

Matrix random_orthogonal(Index d, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix a(d, d);
    for (Index j = 0; j < d; ++j)
        for (Index i = 0; i < d; ++i) a(i, j) = g(rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ();
    Matrix r = qr.matrixQR();
    for (Index j = 0; j < d; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

void validate(const SynthSpec& spec) {
    if (spec.n_clean < 1) throw ParameterError("synth: n_clean must be >= 1");
    if (spec.d < 1) throw ParameterError("synth: d must be >= 1");
    if (spec.num_labels < 1) throw ParameterError("synth: num_labels must be >= 1");
    if (spec.target_label < 0 || spec.target_label >= spec.num_labels)
        throw ParameterError("synth: target_label out of range");
    if (spec.eps < 0.0 || spec.eps >= 1.0 / 3.0)
        throw ParameterError("synth: eps must lie in [0, 1/3)");
    if (spec.m < 1) throw ParameterError("synth: m must be >= 1");
    if (spec.displacement < 0.0 || spec.poison_spread < 0.0)
        throw ParameterError("synth: displacement and poison_spread must be >= 0");
    if (spec.clean_spectrum.size() != spec.d)
        throw ParameterError("synth: clean_spectrum must have d entries");
    for (Index j = 0; j < spec.d; ++j) {
        if (spec.clean_spectrum[j] <= 0.0)
            throw ParameterError("synth: clean_spectrum entries must be positive");
        if (j > 0 && spec.clean_spectrum[j] > spec.clean_spectrum[j - 1])
            throw ParameterError("synth: clean_spectrum must be non-increasing");
    }
    const int poisons = static_cast<int>(spec.eps * spec.n_clean);
    if (spec.eps > 0.0 && poisons < spec.m)
        throw ParameterError("synth: floor(eps * n_clean) must cover every way");
    if (spec.mode == SignatureMode::Indices) {
        if (static_cast<int>(spec.signature_indices.size()) != spec.m)
            throw ParameterError("synth: need one signature index per way");
        for (int idx : spec.signature_indices)
            if (idx < 0 || idx >= spec.d)
                throw ParameterError("synth: signature index out of range");
    }
    if (spec.mode == SignatureMode::Vectors) {
        if (spec.signature_vectors.rows() != spec.d ||
            spec.signature_vectors.cols() != spec.m)
            throw ParameterError("synth: signature_vectors must be d x m");
        for (Index j = 0; j < spec.m; ++j)
            if (std::abs(spec.signature_vectors.col(j).norm() - 1.0) > 1e-8)
                throw ParameterError("synth: signature vectors must be unit length");
    }
}

}  // namespace

LabeledDataset generate(const SynthSpec& spec) {
    validate(spec);
    const Index d = spec.d, n = spec.n_clean;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> g(0.0, 1.0);

    Matrix v = random_orthogonal(d, rng);
    Vector stds = spec.clean_spectrum.array().sqrt();

    auto label_mean = [&](int l) {
        Vector mu = Vector::Zero(d);
        mu[l % d] = 10.0 * (1.0 + l / static_cast<int>(d));
        return mu;
    };
    auto draw_clean = [&](const Vector& mu, Index rows) {
        Matrix z(rows, d);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < d; ++j) z(i, j) = g(rng);
        Matrix out = z * stds.asDiagonal() * v.transpose();
        out.rowwise() += mu.transpose();
        return out;
    };

    LabeledDataset out;
    out.spec = spec;
    out.labels.resize(spec.num_labels);
    out.masks.resize(spec.num_labels);
    for (int l = 0; l < spec.num_labels; ++l) {
        out.labels[l] = draw_clean(label_mean(l), n);
        out.masks[l].assign(static_cast<size_t>(n), 0);
    }

    const Index poisons = static_cast<Index>(spec.eps * spec.n_clean);
    if (poisons > 0) {
        const Vector mu_t = label_mean(spec.target_label);
        Matrix poison_rows(poisons, d);
        Index row = 0;
        for (int w = 0; w < spec.m; ++w) {
            Vector dir;
            double var_along;
            switch (spec.mode) {
                case SignatureMode::Auto:
                    dir = v.col(d - 1 - w);
                    var_along = spec.clean_spectrum[d - 1 - w];
                    break;
                case SignatureMode::Top:
                    dir = v.col(w);
                    var_along = spec.clean_spectrum[w];
                    break;
                case SignatureMode::Indices:
                    dir = v.col(spec.signature_indices[w]);
                    var_along = spec.clean_spectrum[spec.signature_indices[w]];
                    break;
                case SignatureMode::Vectors:
                default:
                    dir = spec.signature_vectors.col(w);
                    var_along =
                        (stds.asDiagonal() * v.transpose() * dir).squaredNorm();
                    break;
            }
            Vector center =
                mu_t + spec.displacement * std::sqrt(var_along) * dir;
            // Even split; the first (poisons mod m) ways get one extra row.
            Index count = poisons / spec.m + (w < poisons % spec.m ? 1 : 0);
            for (Index i = 0; i < count; ++i, ++row) {
                for (Index j = 0; j < d; ++j)
                    poison_rows(row, j) = center[j] + spec.poison_spread * g(rng);
            }
        }

        Matrix& target = out.labels[spec.target_label];
        Mask& mask = out.masks[spec.target_label];
        Matrix stacked(n + poisons, d);
        stacked.topRows(n) = target;
        stacked.bottomRows(poisons) = poison_rows;
        mask.resize(static_cast<size_t>(n + poisons));
        std::fill(mask.begin(), mask.end(), 0);
        std::fill(mask.begin() + n, mask.end(), 1);

        // Seeded in-place shuffle so poisons are not positionally encoded.
        for (Index i = n + poisons - 1; i > 0; --i) {
            std::uniform_int_distribution<Index> pick(0, i);
            const Index j = pick(rng);
            stacked.row(i).swap(stacked.row(j));
            std::swap(mask[i], mask[j]);
        }
        target = std::move(stacked);
    }
    return out;
}

RemovalMetrics eval_removal(const Mask& mask, const IndexList& removed) {
    const Index n = static_cast<Index>(mask.size());
    RemovalMetrics out;
    Index total_poison = 0;
    for (auto b : mask) {
        if (b > 1) throw DataError("eval_removal: mask bytes must be 0 or 1");
        total_poison += b;
    }
    std::vector<bool> seen(mask.size(), false);
    for (Index i : removed) {
        if (i < 0 || i >= n)
            throw ParameterError("eval_removal: removed index out of range");
        if (seen[static_cast<size_t>(i)])
            throw ParameterError("eval_removal: duplicate removed index");
        seen[static_cast<size_t>(i)] = true;
        if (mask[static_cast<size_t>(i)]) ++out.p_rm;
    }
    out.clean_removed = static_cast<Index>(removed.size()) - out.p_rm;
    out.recall = total_poison > 0
                     ? static_cast<double>(out.p_rm) / static_cast<double>(total_poison)
                     : 1.0;  // nothing to find
    return out;
}

}  // namespace spectre
