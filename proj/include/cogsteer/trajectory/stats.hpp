#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cogsteer/core/format.hpp"
#include "cogsteer/core/stats.hpp"
#include "cogsteer/trajectory/monitor.hpp"

namespace cogsteer {

enum class TrajectorySummary { mean, final };

inline double summarize(const TrajectoryRecord & r, TrajectorySummary s = TrajectorySummary::mean) {
    require(!r.values.empty(), "cannot summarize an empty trajectory");
    return s == TrajectorySummary::final ? r.values.back() : stats::mean(r.values);
}

inline std::vector<double> summaries(const std::vector<TrajectoryRecord> & g,
                                     TrajectorySummary s = TrajectorySummary::mean) {
    std::vector<double> out;
    for (const auto & r : g) {
        out.push_back(summarize(r, s));
    }
    return out;
}

// P(a > b) + P(a = b) / 2 over all cross pairs. Counts come from sorted
// lookups; the smaller of the two complementary counts is divided and the
// other side is 1 minus it, so auc(a, b) + auc(b, a) == 1 exactly.
inline double auc_scores(std::vector<double> a, std::vector<double> b) {
    require(!a.empty() && !b.empty(), "AUC needs two nonempty groups");
    std::sort(b.begin(), b.end());
    long double less2 = 0; // 2 * #(a > b) + #(a == b)
    for (double x : a) {
        const auto lo = std::lower_bound(b.begin(), b.end(), x);
        const auto hi = std::upper_bound(b.begin(), b.end(), x);
        less2 += 2.0L * static_cast<long double>(lo - b.begin()) + static_cast<long double>(hi - lo);
    }
    const long double total2 = 2.0L * static_cast<long double>(a.size()) * static_cast<long double>(b.size());
    if (less2 * 2 <= total2) {
        return static_cast<double>(less2) / static_cast<double>(total2);
    }
    return 1.0 - static_cast<double>(total2 - less2) / static_cast<double>(total2);
}

inline double trajectory_auc(const std::vector<TrajectoryRecord> & group_a, const std::vector<TrajectoryRecord> & group_b,
                             TrajectorySummary s = TrajectorySummary::mean) {
    require(!group_a.empty() && !group_b.empty(), "AUC needs two nonempty trajectory groups");
    return auc_scores(summaries(group_a, s), summaries(group_b, s));
}

// 1 - mean |y[t+1] - y[t]|; a single-value trajectory counts as fully stable.
inline double trajectory_stability(const std::vector<double> & values) {
    require(!values.empty(), "stability of an empty trajectory");
    if (values.size() == 1) {
        return 1.0;
    }
    double s = 0.0;
    for (std::size_t t = 1; t < values.size(); ++t) {
        s += std::abs(values[t] - values[t - 1]);
    }
    return std::clamp(1.0 - s / static_cast<double>(values.size() - 1), 0.0, 1.0);
}

struct TrajectoryStats {
    double auc = 0.5;
    double cohens_d = 0.0; // NaN when both groups have zero spread
    std::optional<double> pearson_r;
    std::optional<double> r_p_value;
    std::size_t n_paired = 0;
    double stability = 1.0;
    double stability_a = 1.0;
    double stability_b = 1.0;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
};

namespace detail {

inline std::pair<std::string, std::string> trajectory_key(const TrajectoryRecord & r) {
    return {r.prompt_id, r.condition};
}

inline double mean_stability(const std::vector<TrajectoryRecord> & g) {
    double s = 0.0;
    for (const auto & r : g) {
        s += trajectory_stability(r.values);
    }
    return s / static_cast<double>(g.size());
}

} // namespace detail

// Group a is usually bias_salient and b debias. With `other_model`, each
// trajectory of a and b is matched to the other model's trajectory for the
// same (prompt id, condition) and r correlates their per-prompt means.
inline TrajectoryStats trajectory_stats(const std::vector<TrajectoryRecord> & group_a,
                                        const std::vector<TrajectoryRecord> & group_b,
                                        const std::optional<std::vector<TrajectoryRecord>> & other_model = std::nullopt,
                                        TrajectorySummary s = TrajectorySummary::mean) {
    require(!group_a.empty() && !group_b.empty(), "trajectory stats need two nonempty groups");
    TrajectoryStats st;
    st.n_a = group_a.size();
    st.n_b = group_b.size();
    st.auc = trajectory_auc(group_a, group_b, s);
    const auto ma = summaries(group_a);
    const auto mb = summaries(group_b);
    if (ma.size() >= 2 && mb.size() >= 2) {
        const double sp = stats::pooled_std(ma, mb);
        st.cohens_d = sp > 0.0 ? (stats::mean(ma) - stats::mean(mb)) / sp : std::nan("");
    } else {
        st.cohens_d = std::nan("");
    }
    st.stability_a = detail::mean_stability(group_a);
    st.stability_b = detail::mean_stability(group_b);
    st.stability = (st.stability_a * static_cast<double>(st.n_a) + st.stability_b * static_cast<double>(st.n_b)) /
                   static_cast<double>(st.n_a + st.n_b);

    if (other_model) {
        std::map<std::pair<std::string, std::string>, double> mine;
        for (const auto * g : {&group_a, &group_b}) {
            for (const auto & r : *g) {
                require(mine.emplace(detail::trajectory_key(r), stats::mean(r.values)).second,
                        "duplicate trajectory for prompt " + r.prompt_id + " / " + r.condition);
            }
        }
        std::map<std::pair<std::string, std::string>, double> theirs;
        for (const auto & r : *other_model) {
            require(theirs.emplace(detail::trajectory_key(r), stats::mean(r.values)).second,
                    "duplicate trajectory for prompt " + r.prompt_id + " / " + r.condition + " in the other model");
        }
        if (mine.size() != theirs.size()) {
            throw ValidationError("cross-model pairing mismatch: " + std::to_string(mine.size()) + " vs " +
                                  std::to_string(theirs.size()) + " trajectories");
        }
        std::vector<double> x;
        std::vector<double> y;
        for (const auto & [key, v] : mine) {
            auto it = theirs.find(key);
            if (it == theirs.end()) {
                throw ValidationError("cross-model pairing mismatch: no trajectory for prompt " + key.first + " / " +
                                      key.second + " in the other model");
            }
            x.push_back(v);
            y.push_back(it->second);
        }
        require(x.size() >= 3, "cross-model correlation needs at least 3 paired prompts");
        st.n_paired = x.size();
        st.pearson_r = stats::pearson(x, y);
        st.r_p_value = stats::correlation_p(*st.pearson_r, x.size());
    }
    return st;
}

inline std::string significance_label(std::optional<double> p) {
    if (!p) {
        return "";
    }
    if (*p < 0.001) {
        return "p<.001";
    }
    return "p=" + fmt_fixed(*p, 3);
}

inline std::string trajectory_stats_csv_header() { return "family,model,auc,cohens_d,r,significance,stability,n_a,n_b\n"; }

inline std::string trajectory_stats_csv_row(const std::string & family, const std::string & model,
                                            const TrajectoryStats & s) {
    return family + "," + model + "," + fmt_num(s.auc) + "," + fmt_num(s.cohens_d) + "," +
           (s.pearson_r ? fmt_num(*s.pearson_r) : std::string()) + "," + significance_label(s.r_p_value) + "," +
           fmt_num(s.stability) + "," + std::to_string(s.n_a) + "," + std::to_string(s.n_b) + "\n";
}

// Mean and standard error of the values at each generated-token index, over
// the trajectories long enough to reach it.
struct TrajectoryBand {
    std::vector<double> t;
    std::vector<double> mean;
    std::vector<double> se;
};

inline TrajectoryBand mean_band(const std::vector<TrajectoryRecord> & g) {
    require(!g.empty(), "band of an empty trajectory group");
    std::size_t len = 0;
    for (const auto & r : g) {
        len = std::max(len, r.values.size());
    }
    TrajectoryBand b;
    for (std::size_t t = 0; t < len; ++t) {
        std::vector<double> col;
        for (const auto & r : g) {
            if (t < r.values.size()) {
                col.push_back(r.values[t]);
            }
        }
        b.t.push_back(static_cast<double>(t + 1));
        b.mean.push_back(stats::mean(col));
        b.se.push_back(col.size() >= 2 ? stats::standard_error(col) : 0.0);
    }
    return b;
}

} // namespace cogsteer
