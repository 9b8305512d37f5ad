#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cogsteer/bench/types.hpp"
#include "cogsteer/core/error.hpp"
#include "cogsteer/core/rng.hpp"
#include "cogsteer/model/transformer.hpp"

namespace cogsteer {

struct LabeledItem {
    std::string pair_id;
    std::string condition;
    std::vector<float> vector;
    int label = 0; // 1 = bias-salient / biased, 0 = debias / control
};

struct LabeledActivationSet {
    int layer = 0;
    int d_model = 0;
    std::vector<LabeledItem> items; // sorted by (pair_id, condition)

    std::vector<std::string> pair_ids() const {
        std::vector<std::string> ids;
        for (const auto & it : items) {
            if (ids.empty() || ids.back() != it.pair_id) {
                ids.push_back(it.pair_id);
            }
        }
        return ids;
    }

    std::size_t size() const { return items.size(); }
};

struct ConditionLabels {
    std::string positive = condition::bias_salient;
    std::string negative = condition::debias;
};

// One labeled item per (pair, condition) at `layer`; captures for other
// layers or conditions are ignored.
inline LabeledActivationSet assemble_set(const std::vector<CaptureRecord> & captures, int layer,
                                         const ConditionLabels & labels = {}) {
    std::map<std::string, std::map<std::string, const CaptureRecord *>> by_pair;
    int d = -1;
    for (const auto & c : captures) {
        if (c.layer != layer || (c.condition != labels.positive && c.condition != labels.negative)) {
            continue;
        }
        if (d < 0) {
            d = static_cast<int>(c.vector.size());
        }
        require(static_cast<int>(c.vector.size()) == d, "capture vectors have inconsistent lengths");
        auto & slot = by_pair[c.pair_id][c.condition];
        require(slot == nullptr, "duplicate capture for pair '" + c.pair_id + "' condition '" + c.condition + "'");
        slot = &c;
    }
    require(!by_pair.empty(), "no captures at layer " + std::to_string(layer));
    LabeledActivationSet set;
    set.layer = layer;
    set.d_model = d;
    for (const auto & [pair, conds] : by_pair) {
        for (const auto * cond : {&labels.positive, &labels.negative}) {
            if (!conds.contains(*cond)) {
                throw ValidationError("pair '" + pair + "' is missing condition '" + *cond + "' at layer " +
                                      std::to_string(layer));
            }
        }
        for (const auto & [cond, rec] : conds) {
            set.items.push_back({pair, cond, rec->vector, cond == labels.positive ? 1 : 0});
        }
    }
    return set;
}

enum class DirectionMethod { mean_diff, linear_probe };

inline std::string method_name(DirectionMethod m) {
    return m == DirectionMethod::mean_diff ? "mean_diff" : "linear_probe";
}

struct BiasDirection {
    std::vector<float> vector;
    DirectionMethod method = DirectionMethod::mean_diff;
    int layer = 0;
    std::string family;
    std::string source_model;

    double norm() const {
        double s = 0.0;
        for (float v : vector) {
            s += static_cast<double>(v) * v;
        }
        return std::sqrt(s);
    }
};

// v = mean(biased) - mean(control), accumulated in double.
inline BiasDirection mean_diff_direction(const LabeledActivationSet & set) {
    require(!set.items.empty(), "mean difference needs a nonempty set");
    const auto d = static_cast<std::size_t>(set.d_model);
    std::vector<double> pos(d, 0.0);
    std::vector<double> neg(d, 0.0);
    int np = 0;
    int nn = 0;
    for (const auto & it : set.items) {
        auto & acc = it.label == 1 ? pos : neg;
        for (std::size_t i = 0; i < d; ++i) {
            acc[i] += it.vector[i];
        }
        (it.label == 1 ? np : nn) += 1;
    }
    require(np > 0 && nn > 0, "mean difference needs both conditions");
    BiasDirection dir;
    dir.method = DirectionMethod::mean_diff;
    dir.layer = set.layer;
    dir.vector.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        dir.vector[i] = static_cast<float>(pos[i] / np - neg[i] / nn);
    }
    if (!(dir.norm() > 0.0)) {
        throw NumericError("mean difference direction has zero norm");
    }
    return dir;
}

struct PairSplit {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

// 80/20 style split over pair ids. The sorted ids are shuffled with `seed`;
// the first round(test_fraction * n) (at least 1) form the test side.
inline PairSplit split_pairs(std::vector<std::string> ids, std::uint64_t seed, double test_fraction = 0.2) {
    std::sort(ids.begin(), ids.end());
    require(ids.size() >= 2, "split needs at least 2 pairs");
    Rng rng(seed);
    rng.shuffle(ids);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ids.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, ids.size() - 1);
    PairSplit s;
    s.test.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

// k folds partitioning the pair ids (round-robin over a seeded shuffle).
inline std::vector<std::vector<std::string>> cv_folds(std::vector<std::string> ids, int k, std::uint64_t seed) {
    require(k >= 2, "cross-validation needs k >= 2");
    std::sort(ids.begin(), ids.end());
    require(static_cast<int>(ids.size()) >= k, "fewer pairs than folds");
    Rng rng(seed);
    rng.shuffle(ids);
    std::vector<std::vector<std::string>> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        folds[i % static_cast<std::size_t>(k)].push_back(ids[i]);
    }
    for (auto & f : folds) {
        std::sort(f.begin(), f.end());
    }
    return folds;
}

// Design matrix (rows = items) and labels for the items whose pair is in
// `pairs`; an empty filter selects everything.
struct DesignData {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<std::string> pair_ids;
};

inline DesignData design(const LabeledActivationSet & set, const std::vector<std::string> & pairs = {}) {
    std::set<std::string> keep(pairs.begin(), pairs.end());
    std::vector<const LabeledItem *> rows;
    for (const auto & it : set.items) {
        if (keep.empty() || keep.contains(it.pair_id)) {
            rows.push_back(&it);
        }
    }
    DesignData d;
    d.x.resize(static_cast<Eigen::Index>(rows.size()), set.d_model);
    d.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int c = 0; c < set.d_model; ++c) {
            d.x(static_cast<Eigen::Index>(r), c) = rows[r]->vector[static_cast<std::size_t>(c)];
        }
        d.y(static_cast<Eigen::Index>(r)) = rows[r]->label;
        d.pair_ids.push_back(rows[r]->pair_id);
    }
    return d;
}

} // namespace cogsteer
