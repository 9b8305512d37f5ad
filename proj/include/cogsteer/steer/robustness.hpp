#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cogsteer/core/hash.hpp"
#include "cogsteer/core/rng.hpp"
#include "cogsteer/core/stats.hpp"
#include "cogsteer/io/tensor_container.hpp"
#include "cogsteer/probe/dataset.hpp"
#include "cogsteer/steer/evaluate.hpp"

namespace cogsteer {

struct EffectStats {
    double cohens_d = 0.0;
    double t_statistic = 0.0;
    double df = 0.0;
    double p_value = 1.0;
    double mean_a = 0.0;
    double mean_b = 0.0;
    double pooled_std = 0.0;
    int bonferroni_m = 1;
};

// Pooled-std Cohen's d with a Welch t-test; p is two-sided and multiplied by
// `bonferroni_m` (capped at 1).
inline EffectStats effect_stats(std::span<const double> a, std::span<const double> b, int bonferroni_m = 1) {
    require(a.size() >= 2 && b.size() >= 2, "effect stats need at least 2 values per sample");
    EffectStats e;
    e.mean_a = stats::mean(a);
    e.mean_b = stats::mean(b);
    e.pooled_std = stats::pooled_std(a, b);
    if (!(e.pooled_std > 0.0)) {
        throw NumericError("Cohen's d undefined: pooled std is zero");
    }
    e.cohens_d = (e.mean_a - e.mean_b) / e.pooled_std;
    const auto t = stats::welch_t(a, b);
    e.t_statistic = t.t;
    e.df = t.df;
    e.bonferroni_m = bonferroni_m;
    e.p_value = stats::bonferroni(t.p_two_sided, bonferroni_m);
    return e;
}

// SHA-256 over the little-endian float bytes.
inline std::string direction_hash(const std::vector<float> & v) {
    std::string bytes(v.size() * 4, '\0');
    detail::floats_to_le(v, bytes.data());
    return sha256_hex(bytes);
}

namespace detail {

inline double norm_of(const std::vector<double> & v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

inline std::vector<float> scaled(const std::vector<double> & v, double target) {
    const double n = norm_of(v);
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<float>(v[i] / n * target);
    }
    return out;
}

} // namespace detail

// n isotropic Gaussian directions rescaled to `norm`.
inline std::vector<std::vector<float>> random_directions(int d_model, int n, double norm, std::uint64_t seed) {
    require(d_model >= 1 && n >= 1, "random directions need d_model >= 1 and n >= 1");
    require(norm > 0.0, "direction norm must be positive");
    std::vector<std::vector<float>> out;
    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, 0x7a9d0ULL, static_cast<std::uint64_t>(i)));
        std::vector<double> v(static_cast<std::size_t>(d_model));
        do {
            for (auto & x : v) {
                x = rng.normal();
            }
        } while (!(detail::norm_of(v) > 0.0));
        out.push_back(detail::scaled(v, norm));
    }
    return out;
}

// n directions orthogonal to `learned` and to each other (Gram-Schmidt on
// Gaussian draws), each with the learned direction's norm.
inline std::vector<std::vector<float>> orthogonal_directions(const std::vector<float> & learned, int n,
                                                             std::uint64_t seed) {
    const int d = static_cast<int>(learned.size());
    require(n >= 1, "orthogonal baseline needs n >= 1");
    if (n >= d) {
        throw ValidationError("cannot build " + std::to_string(n) + " orthogonal directions in dimension " +
                              std::to_string(d));
    }
    std::vector<double> l(learned.begin(), learned.end());
    const double target = detail::norm_of(l);
    if (!(target > 0.0)) {
        throw NumericError("learned direction has zero norm");
    }
    std::vector<std::vector<double>> basis = {l};
    for (auto & x : basis[0]) {
        x /= target;
    }
    Rng rng(derive_seed(seed, 0x0b7a9ULL, 0));
    std::vector<std::vector<float>> out;
    while (static_cast<int>(out.size()) < n) {
        std::vector<double> v(static_cast<std::size_t>(d));
        for (auto & x : v) {
            x = rng.normal();
        }
        // two passes keep the residual dot products near machine precision
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto & b : basis) {
                double dot = 0.0;
                for (int i = 0; i < d; ++i) {
                    dot += v[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
                }
                for (int i = 0; i < d; ++i) {
                    v[static_cast<std::size_t>(i)] -= dot * b[static_cast<std::size_t>(i)];
                }
            }
        }
        const double nv = detail::norm_of(v);
        if (nv < 1e-8) {
            continue;
        }
        for (auto & x : v) {
            x /= nv;
        }
        basis.push_back(v);
        out.push_back(detail::scaled(v, target));
    }
    return out;
}

struct BaselineResult {
    double baseline_bias = 0.0;
    double learned_effect = 0.0;              // bias(steered) - bias(unsteered)
    std::vector<double> learned_deltas;       // per instance, flag(steered) - flag(unsteered)
    std::vector<double> control_effects;      // per control direction
    EffectStats stats;                        // learned_deltas vs control_effects
    double p_learned_stronger = 1.0;          // one-sided, H1: learned lowers bias more
    std::vector<std::string> control_hashes;
    std::string learned_hash;
    int layer = 0;
    double alpha = 0.0;
};

// Steers with the learned direction and each control direction on the same
// tasks (reused across directions) and compares the bias changes.
inline BaselineResult direction_baseline(const ModelWeights & w, const std::vector<EvalTask> & tasks,
                                         const std::vector<float> & learned,
                                         const std::vector<std::vector<float>> & controls, int layer, double alpha,
                                         unsigned threads = 1) {
    require(controls.size() >= 2, "baseline needs at least 2 control directions");
    BaselineResult r;
    r.layer = layer;
    r.alpha = alpha;
    r.learned_hash = direction_hash(learned);
    const auto base = evaluate_tasks(w, tasks, std::nullopt, threads);
    r.baseline_bias = base.bias_score;
    const auto steered = evaluate_tasks(w, tasks, SteeringSpec{layer, learned, alpha, true}, threads);
    r.learned_effect = steered.bias_score - base.bias_score;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (base.flags[i] && steered.flags[i]) {
            r.learned_deltas.push_back(static_cast<double>(*steered.flags[i]) - static_cast<double>(*base.flags[i]));
        }
    }
    r.control_effects.assign(controls.size(), 0.0);
    parallel_for(controls.size(), threads, [&](std::size_t i) {
        r.control_effects[i] =
            evaluate_tasks(w, tasks, SteeringSpec{layer, controls[i], alpha, true}).bias_score - base.bias_score;
    });
    for (const auto & c : controls) {
        r.control_hashes.push_back(direction_hash(c));
    }
    r.stats = effect_stats(r.learned_deltas, r.control_effects);
    const auto t = stats::welch_t(r.learned_deltas, r.control_effects);
    r.p_learned_stronger = stats::t_upper_p(-t.t, t.df);
    return r;
}

struct CrossFamilyResult {
    std::vector<std::string> families;            // row i = direction family, column j = task family
    std::vector<std::vector<double>> delta;       // bias(steered) - bias(unsteered)
    double same_family_mean = 0.0;
    double cross_family_mean = 0.0;
    stats::TTest paired;                          // diagonal vs row off-diagonal mean
};

inline CrossFamilyResult cross_family_matrix(const ModelWeights & w, const std::map<Family, BiasDirection> & directions,
                                             const std::map<Family, std::vector<EvalTask>> & task_sets, int layer,
                                             double alpha, unsigned threads = 1) {
    for (Family f : kAllFamilies) {
        if (!directions.contains(f)) {
            throw ValidationError("cross-family matrix is missing a direction for " + family_name(f));
        }
        if (!task_sets.contains(f)) {
            throw ValidationError("cross-family matrix is missing tasks for " + family_name(f));
        }
    }
    CrossFamilyResult r;
    constexpr std::size_t k = 4;
    std::array<double, k> base{};
    for (std::size_t j = 0; j < k; ++j) {
        r.families.push_back(family_name(kAllFamilies[j]));
        base[j] = evaluate_tasks(w, task_sets.at(kAllFamilies[j]), std::nullopt, threads).bias_score;
    }
    r.delta.assign(k, std::vector<double>(k, 0.0));
    parallel_for(k * k, threads, [&](std::size_t idx) {
        const std::size_t i = idx / k;
        const std::size_t j = idx % k;
        const auto & dir = directions.at(kAllFamilies[i]).vector;
        r.delta[i][j] =
            evaluate_tasks(w, task_sets.at(kAllFamilies[j]), SteeringSpec{layer, dir, alpha, true}).bias_score -
            base[j];
    });
    std::vector<double> diag;
    std::vector<double> off;
    double cross_sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        diag.push_back(r.delta[i][i]);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (j != i) {
                s += r.delta[i][j];
            }
        }
        cross_sum += s;
        off.push_back(s / (k - 1));
    }
    r.same_family_mean = stats::mean(diag);
    r.cross_family_mean = cross_sum / static_cast<double>(k * (k - 1));
    r.paired = stats::paired_t(diag, off);
    return r;
}

} // namespace cogsteer
