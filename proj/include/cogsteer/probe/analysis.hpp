#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cogsteer/core/parallel.hpp"
#include "cogsteer/core/rng.hpp"
#include "cogsteer/core/stats.hpp"
#include "cogsteer/probe/dataset.hpp"
#include "cogsteer/probe/probes.hpp"

namespace cogsteer {

struct SweepRow {
    int layer = 0;
    bool ok = false;
    std::string error;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double cv_mean = 0.0;
    double cv_std = 0.0;
    bool converged = false;
};

// Linear probe plus k-fold CV at every requested layer, reported in layer
// order. A failing layer is marked and the sweep moves on.
inline std::vector<SweepRow> layer_sweep(const std::vector<CaptureRecord> & captures, std::vector<int> layers,
                                         const ProbeConfig & cfg, const ConditionLabels & labels = {},
                                         unsigned threads = 1) {
    std::sort(layers.begin(), layers.end());
    layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
    std::vector<SweepRow> rows(layers.size());
    parallel_for(layers.size(), threads, [&](std::size_t i) {
        SweepRow & row = rows[i];
        row.layer = layers[i];
        try {
            const auto set = assemble_set(captures, row.layer, labels);
            const auto probe = train_linear_probe(set, cfg);
            const auto cv = cross_validate(set, cfg, ProbeKind::linear);
            row.train_accuracy = probe.eval.train_accuracy;
            row.test_accuracy = probe.eval.test_accuracy;
            row.converged = probe.eval.converged;
            row.cv_mean = cv.mean;
            row.cv_std = cv.std;
            row.ok = true;
        } catch (const Error & e) {
            row.error = e.what();
        }
    });
    return rows;
}

struct StatResult {
    double statistic = 0.0;
    double null_mean = 0.0;
    double null_std = 0.0;
    std::optional<double> z_score; // unset when the null has zero variance
    double p_value = 1.0;
    int n_iterations = 0;
    std::vector<double> null_values;
};

// Swaps the two labels of each pair with probability 1/2.
inline LabeledActivationSet pair_consistent_shuffle(const LabeledActivationSet & set, std::uint64_t seed) {
    Rng rng(seed);
    LabeledActivationSet out = set;
    std::size_t i = 0;
    while (i < out.items.size()) {
        std::size_t j = i;
        while (j < out.items.size() && out.items[j].pair_id == out.items[i].pair_id) {
            ++j;
        }
        if (rng.coin()) {
            for (std::size_t k = i; k < j; ++k) {
                out.items[k].label = 1 - out.items[k].label;
            }
        }
        i = j;
    }
    return out;
}

// Observed = held-out accuracy of the linear probe on the true labels. Each
// null draw refits on pair-consistently shuffled labels with the same split
// and scores against the shuffled test labels. p = (1 + #{null >= obs}) /
// (1 + iterations); the null std is the population std of the draws.
inline StatResult permutation_test(const LabeledActivationSet & set, const ProbeConfig & cfg, int iterations = 50,
                                   std::uint64_t seed = 0, unsigned threads = 1) {
    require(iterations >= 2, "permutation test needs at least 2 iterations");
    const auto probe = train_linear_probe(set, cfg);
    StatResult r;
    r.statistic = probe.eval.test_accuracy;
    r.n_iterations = iterations;
    r.null_values.assign(static_cast<std::size_t>(iterations), 0.0);
    parallel_for(static_cast<std::size_t>(iterations), threads, [&](std::size_t i) {
        const auto shuffled = pair_consistent_shuffle(set, derive_seed(seed, 0x9e4d0ULL, i));
        const auto m = detail::fit_linear_on(shuffled, probe.split.train, cfg);
        r.null_values[i] = probe_accuracy(m, shuffled, probe.split.test);
    });
    r.null_mean = stats::mean(r.null_values);
    r.null_std = stats::stddev(r.null_values, 0);
    if (r.null_std > 0.0) {
        r.z_score = (r.statistic - r.null_mean) / r.null_std;
    }
    const auto exceed = std::count_if(r.null_values.begin(), r.null_values.end(),
                                      [&](double v) { return v >= r.statistic; });
    r.p_value = (1.0 + static_cast<double>(exceed)) / (1.0 + iterations);
    return r;
}

inline std::vector<std::vector<double>> direction_cosine_matrix(const std::vector<BiasDirection> & dirs) {
    require(!dirs.empty(), "cosine matrix needs at least one direction");
    const std::size_t d = dirs.front().vector.size();
    std::vector<double> norms;
    for (const auto & v : dirs) {
        require(v.vector.size() == d, "directions have different dimensionality");
        const double n = v.norm();
        if (!(n > 0.0)) {
            throw NumericError("zero-norm direction in cosine matrix");
        }
        norms.push_back(n);
    }
    const std::size_t k = dirs.size();
    std::vector<std::vector<double>> m(k, std::vector<double>(k, 1.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                dot += static_cast<double>(dirs[i].vector[c]) * dirs[j].vector[c];
            }
            const double cs = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
            m[i][j] = cs;
            m[j][i] = cs;
        }
    }
    return m;
}

// Linear CKA on column-centred X and Y (rows are examples):
//   |X^T Y|_F^2 / (|X^T X|_F |Y^T Y|_F)
inline double linear_cka(const Eigen::MatrixXd & x, const Eigen::MatrixXd & y) {
    require(x.rows() == y.rows(), "CKA inputs need the same number of rows");
    require(x.rows() >= 2, "CKA needs at least 2 rows");
    const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd yc = y.rowwise() - y.colwise().mean();
    const double nx = (xc.transpose() * xc).norm();
    const double ny = (yc.transpose() * yc).norm();
    if (!(nx > 0.0) || !(ny > 0.0)) {
        throw NumericError("CKA input has zero variance");
    }
    const double num = (xc.transpose() * yc).squaredNorm();
    return std::clamp(num / (nx * ny), 0.0, 1.0);
}

inline Eigen::MatrixXd activation_matrix(const LabeledActivationSet & set) { return design(set).x; }

} // namespace cogsteer
