#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "cogsteer/core/error.hpp"

namespace cogsteer::stats {

inline double mean(std::span<const double> x) {
    require(!x.empty(), "mean of an empty sample");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Sum of squared deviations divided by (n - ddof).
inline double variance(std::span<const double> x, int ddof = 1) {
    require(static_cast<int>(x.size()) > ddof, "variance needs more values than ddof");
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) {
        ss += (v - m) * (v - m);
    }
    return ss / static_cast<double>(static_cast<int>(x.size()) - ddof);
}

inline double stddev(std::span<const double> x, int ddof = 1) { return std::sqrt(variance(x, ddof)); }

inline double standard_error(std::span<const double> x) {
    return stddev(x, 1) / std::sqrt(static_cast<double>(x.size()));
}

// Two-sided p-value of a t statistic with `df` degrees of freedom.
inline double t_two_sided_p(double t, double df) {
    if (std::isnan(t)) {
        return 1.0;
    }
    if (std::isinf(t)) {
        return 0.0;
    }
    boost::math::students_t dist(df);
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

// One-sided p-value for H1: mean difference > 0.
inline double t_upper_p(double t, double df) {
    if (std::isnan(t)) {
        return 1.0;
    }
    if (std::isinf(t)) {
        return t > 0 ? 0.0 : 1.0;
    }
    boost::math::students_t dist(df);
    return boost::math::cdf(boost::math::complement(dist, t));
}

struct TTest {
    double t = 0.0;
    double df = 0.0;
    double p_two_sided = 1.0;
    double p_greater = 0.5; // H1: mean(a) > mean(b)
};

// Welch's unequal-variance two-sample t-test.
inline TTest welch_t(std::span<const double> a, std::span<const double> b) {
    require(a.size() >= 2 && b.size() >= 2, "t-test needs at least 2 values per sample");
    const double va = variance(a) / static_cast<double>(a.size());
    const double vb = variance(b) / static_cast<double>(b.size());
    const double diff = mean(a) - mean(b);
    TTest r;
    const double se2 = va + vb;
    if (se2 == 0.0) {
        r.t = diff == 0.0 ? std::nan("") : std::copysign(INFINITY, diff);
        r.df = static_cast<double>(a.size() + b.size() - 2);
    } else {
        r.t = diff / std::sqrt(se2);
        const double num = se2 * se2;
        const double den = va * va / (static_cast<double>(a.size()) - 1.0) +
                           vb * vb / (static_cast<double>(b.size()) - 1.0);
        r.df = num / den;
    }
    r.p_two_sided = t_two_sided_p(r.t, r.df);
    r.p_greater = t_upper_p(r.t, r.df);
    return r;
}

// Paired t-test on a - b.
inline TTest paired_t(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "paired t-test needs equal-length samples");
    require(a.size() >= 2, "paired t-test needs at least 2 pairs");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        d[i] = a[i] - b[i];
    }
    const double m = mean(d);
    const double se = stddev(d) / std::sqrt(static_cast<double>(d.size()));
    TTest r;
    r.df = static_cast<double>(d.size() - 1);
    r.t = se == 0.0 ? (m == 0.0 ? std::nan("") : std::copysign(INFINITY, m)) : m / se;
    r.p_two_sided = t_two_sided_p(r.t, r.df);
    r.p_greater = t_upper_p(r.t, r.df);
    return r;
}

// sqrt(((n1-1)s1^2 + (n2-1)s2^2) / (n1+n2-2))
inline double pooled_std(std::span<const double> a, std::span<const double> b) {
    require(a.size() >= 2 && b.size() >= 2, "pooled std needs at least 2 values per sample");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    return std::sqrt(((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0));
}

inline double bonferroni(double p, int m) {
    require(m >= 1, "Bonferroni multiplier must be >= 1");
    return std::min(1.0, p * m);
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, "correlation needs two equal-length samples of size >= 2");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        return std::nan("");
    }
    return sxy / std::sqrt(sxx * syy);
}

// Two-sided p for H0: rho = 0, via the t transform with n - 2 df.
inline double correlation_p(double r, std::size_t n) {
    if (std::isnan(r) || n < 3) {
        return 1.0;
    }
    if (std::abs(r) >= 1.0) {
        return 0.0;
    }
    const double df = static_cast<double>(n) - 2.0;
    return t_two_sided_p(r * std::sqrt(df / (1.0 - r * r)), df);
}

// Ranks starting at 1; ties receive the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) {
            ++j;
        }
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[idx[k]] = r;
        }
        i = j + 1;
    }
    return ranks;
}

// Pearson correlation of average ranks; nan when either side is constant.
inline double spearman(std::span<const double> x, std::span<const double> y) {
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LineFit ols(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, "regression needs two equal-length samples of size >= 2");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    require(sxx > 0.0, "regression on a constant predictor");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

// Upper-tail probability of a standard normal.
inline double normal_upper_p(double z) {
    boost::math::normal_distribution<double> dist;
    return boost::math::cdf(boost::math::complement(dist, z));
}

} // namespace cogsteer::stats
