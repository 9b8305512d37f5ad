#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cogsteer/core/error.hpp"
#include "cogsteer/core/rng.hpp"
#include "cogsteer/model/transformer.hpp"
#include "cogsteer/probe/dataset.hpp"

namespace cogsteer {

struct ProbeConfig {
    double reg = 1.0;          // L2 strength on the weights (bias unpenalised)
    int max_iter = 100;        // Newton iterations
    double tol = 1e-8;         // gradient infinity-norm tolerance, per example
    bool standardize = false;  // z-score features before fitting
    std::uint64_t split_seed = 42;
    double test_fraction = 0.2;
    int cv_folds = 5;

    int hidden = 256;
    double dropout = 0.1;
    int epochs = 50;
    int patience = 5;
    double learning_rate = 1e-3;
    int batch_size = 32;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;

    bool operator==(const ProbeConfig &) const = default;
};

enum class ProbeKind { linear, mlp };

inline std::string probe_kind_name(ProbeKind k) { return k == ProbeKind::linear ? "linear" : "mlp"; }

struct ProbeEval {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::optional<double> cv_mean;
    std::optional<double> cv_std;
    bool converged = true;
    int iterations = 0; // Newton iterations or epochs run
};

struct MlpParams {
    Eigen::MatrixXd w1; // [hidden, d]
    Eigen::VectorXd b1;
    Eigen::VectorXd w2; // [hidden]
    double b2 = 0.0;
};

struct ProbeModel {
    ProbeKind kind = ProbeKind::linear;
    int layer = 0;
    int d_model = 0;
    std::string family;
    std::string source_model;
    std::vector<double> weights; // linear, in raw activation coordinates
    double bias = 0.0;
    MlpParams mlp;
    Eigen::VectorXd feature_mean;  // mlp input standardisation (empty: none)
    Eigen::VectorXd feature_scale;
    ProbeConfig config;
    ProbeEval eval;
    PairSplit split;

    double logit(std::span<const float> h) const {
        require(static_cast<int>(h.size()) == d_model, "probe input dimension mismatch");
        if (kind == ProbeKind::linear) {
            double z = bias;
            for (std::size_t i = 0; i < h.size(); ++i) {
                z += weights[i] * h[i];
            }
            return z;
        }
        Eigen::VectorXd x(d_model);
        for (int i = 0; i < d_model; ++i) {
            x(i) = h[static_cast<std::size_t>(i)];
        }
        if (feature_mean.size() == d_model) {
            x = ((x - feature_mean).array() / feature_scale.array()).matrix();
        }
        const Eigen::VectorXd a = (mlp.w1 * x + mlp.b1).cwiseMax(0.0);
        return mlp.w2.dot(a) + mlp.b2;
    }

    double predict_proba(std::span<const float> h) const { return sigmoid(logit(h)); }
    int predict(std::span<const float> h) const { return logit(h) > 0.0 ? 1 : 0; }

    // The linear probe as a bias direction (weights) for steering or monitoring.
    BiasDirection as_direction() const {
        require(kind == ProbeKind::linear, "only linear probes define a direction");
        BiasDirection d;
        d.method = DirectionMethod::linear_probe;
        d.layer = layer;
        d.family = family;
        d.source_model = source_model;
        d.vector.assign(weights.begin(), weights.end());
        return d;
    }
};

inline double probe_accuracy(const ProbeModel & probe, const LabeledActivationSet & set,
                             const std::vector<std::string> & pairs = {}) {
    std::set<std::string> keep(pairs.begin(), pairs.end());
    int correct = 0;
    int total = 0;
    for (const auto & it : set.items) {
        if (!keep.empty() && !keep.contains(it.pair_id)) {
            continue;
        }
        correct += probe.predict(it.vector) == it.label ? 1 : 0;
        ++total;
    }
    require(total > 0, "accuracy over an empty selection");
    return static_cast<double>(correct) / total;
}

namespace detail {

struct LogisticFit {
    Eigen::VectorXd w;
    double b = 0.0;
    bool converged = false;
    int iterations = 0;
};

inline double log1pexp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Newton's method with backtracking on
//   sum_i [log(1 + e^{z_i}) - y_i z_i] + reg/2 |w|^2,   z = Xw + b.
inline LogisticFit fit_logistic(const Eigen::MatrixXd & x, const Eigen::VectorXd & y, double reg, int max_iter,
                                double tol) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
    auto objective = [&](const Eigen::VectorXd & th) {
        const Eigen::VectorXd z = (x * th.head(d)).array() + th(d);
        double f = 0.5 * reg * th.head(d).squaredNorm();
        for (Eigen::Index i = 0; i < n; ++i) {
            f += log1pexp(z(i)) - y(i) * z(i);
        }
        return f;
    };
    LogisticFit fit;
    double f = objective(theta);
    const double gtol = tol * std::max<double>(1.0, static_cast<double>(n));
    for (int it = 0;; ++it) {
        const Eigen::VectorXd z = (x * theta.head(d)).array() + theta(d);
        Eigen::VectorXd p(n);
        Eigen::VectorXd s(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i) = sigmoid(z(i));
            s(i) = p(i) * (1.0 - p(i));
        }
        Eigen::VectorXd g(d + 1);
        g.head(d) = x.transpose() * (p - y) + reg * theta.head(d);
        g(d) = (p - y).sum();
        fit.iterations = it;
        if (g.cwiseAbs().maxCoeff() < gtol) {
            fit.converged = true;
            break;
        }
        if (it == max_iter) {
            break;
        }
        Eigen::MatrixXd h(d + 1, d + 1);
        const Eigen::MatrixXd xs = x.array().colwise() * s.array();
        h.topLeftCorner(d, d) = x.transpose() * xs;
        h.topLeftCorner(d, d).diagonal().array() += reg;
        h.topRightCorner(d, 1) = xs.colwise().sum().transpose();
        h.bottomLeftCorner(1, d) = h.topRightCorner(d, 1).transpose();
        h(d, d) = s.sum() + 1e-12;
        const Eigen::VectorXd step = h.ldlt().solve(g);
        const double slope = g.dot(step);
        double t = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 50 && !moved; ++ls, t *= 0.5) {
            const Eigen::VectorXd cand = theta - t * step;
            const double fc = objective(cand);
            if (fc <= f - 1e-4 * t * slope) {
                theta = cand;
                f = fc;
                moved = true;
            }
        }
        if (!moved) {
            // No further decrease is representable; accept a near-stationary point.
            fit.converged = g.cwiseAbs().maxCoeff() < std::sqrt(gtol);
            break;
        }
    }
    fit.w = theta.head(d);
    fit.b = theta(d);
    return fit;
}

struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static Standardizer fit(const Eigen::MatrixXd & x) {
        Standardizer s;
        s.mean = x.colwise().mean().transpose();
        s.scale.resize(x.cols());
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            const double var = (x.col(c).array() - s.mean(c)).square().mean();
            s.scale(c) = var > 0 ? std::sqrt(var) : 1.0;
        }
        return s;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd & x) const {
        return ((x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
    }
};

inline void require_both_labels(const Eigen::VectorXd & y) {
    const double s = y.sum();
    if (s <= 0.0 || s >= static_cast<double>(y.size())) {
        throw ValidationError("training data contains a single class");
    }
}

inline ProbeModel fit_linear_on(const LabeledActivationSet & set, const std::vector<std::string> & train_pairs,
                                const ProbeConfig & cfg) {
    const auto data = design(set, train_pairs);
    require_both_labels(data.y);
    ProbeModel m;
    m.kind = ProbeKind::linear;
    m.layer = set.layer;
    m.d_model = set.d_model;
    m.config = cfg;
    if (cfg.standardize) {
        const auto st = Standardizer::fit(data.x);
        const auto fit = fit_logistic(st.apply(data.x), data.y, cfg.reg, cfg.max_iter, cfg.tol);
        const Eigen::VectorXd w = fit.w.array() / st.scale.array();
        m.weights.assign(w.data(), w.data() + w.size());
        m.bias = fit.b - w.dot(st.mean);
        m.eval.converged = fit.converged;
        m.eval.iterations = fit.iterations;
    } else {
        const auto fit = fit_logistic(data.x, data.y, cfg.reg, cfg.max_iter, cfg.tol);
        m.weights.assign(fit.w.data(), fit.w.data() + fit.w.size());
        m.bias = fit.b;
        m.eval.converged = fit.converged;
        m.eval.iterations = fit.iterations;
    }
    return m;
}

inline ProbeModel fit_mlp_on(const LabeledActivationSet & set, const std::vector<std::string> & train_pairs,
                             const ProbeConfig & cfg, std::uint64_t seed) {
    require(cfg.hidden >= 1 && cfg.epochs >= 1 && cfg.batch_size >= 1, "invalid MLP configuration");
    require(cfg.dropout >= 0.0 && cfg.dropout < 1.0, "dropout must lie in [0, 1)");
    Rng rng(seed);

    // Hold out a validation slice of the training pairs for early stopping.
    std::vector<std::string> fit_pairs = train_pairs;
    std::vector<std::string> val_pairs;
    if (fit_pairs.size() >= 4) {
        std::sort(fit_pairs.begin(), fit_pairs.end());
        rng.shuffle(fit_pairs);
        auto n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(fit_pairs.size())));
        n_val = std::clamp<std::size_t>(n_val, 1, fit_pairs.size() - 2);
        val_pairs.assign(fit_pairs.begin(), fit_pairs.begin() + static_cast<std::ptrdiff_t>(n_val));
        fit_pairs.erase(fit_pairs.begin(), fit_pairs.begin() + static_cast<std::ptrdiff_t>(n_val));
    }
    const auto train = design(set, fit_pairs);
    require_both_labels(train.y);

    ProbeModel m;
    m.kind = ProbeKind::mlp;
    m.layer = set.layer;
    m.d_model = set.d_model;
    m.config = cfg;
    Eigen::MatrixXd xtr = train.x;
    Eigen::MatrixXd xval;
    Eigen::VectorXd yval;
    if (cfg.standardize) {
        const auto st = Standardizer::fit(train.x);
        m.feature_mean = st.mean;
        m.feature_scale = st.scale;
        xtr = st.apply(train.x);
    }
    if (!val_pairs.empty()) {
        const auto val = design(set, val_pairs);
        xval = cfg.standardize ? Standardizer{m.feature_mean, m.feature_scale}.apply(val.x) : val.x;
        yval = val.y;
    }

    const int d = set.d_model;
    const int h = cfg.hidden;
    MlpParams p;
    p.w1.resize(h, d);
    const double s1 = std::sqrt(2.0 / d);
    for (Eigen::Index i = 0; i < p.w1.size(); ++i) {
        p.w1.data()[i] = rng.normal(0.0, s1);
    }
    p.b1 = Eigen::VectorXd::Zero(h);
    p.w2.resize(h);
    const double s2 = std::sqrt(1.0 / h);
    for (int i = 0; i < h; ++i) {
        p.w2(i) = rng.normal(0.0, s2);
    }
    p.b2 = 0.0;

    // Adam state
    Eigen::MatrixXd mw1 = Eigen::MatrixXd::Zero(h, d), vw1 = Eigen::MatrixXd::Zero(h, d);
    Eigen::VectorXd mb1 = Eigen::VectorXd::Zero(h), vb1 = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd mw2 = Eigen::VectorXd::Zero(h), vw2 = Eigen::VectorXd::Zero(h);
    double mb2 = 0.0, vb2 = 0.0;
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, lr = cfg.learning_rate;
    long step = 0;

    auto loss_on = [&](const MlpParams & q, const Eigen::MatrixXd & x, const Eigen::VectorXd & y) {
        const Eigen::MatrixXd a = ((x * q.w1.transpose()).rowwise() + q.b1.transpose()).cwiseMax(0.0);
        const Eigen::VectorXd z = (a * q.w2).array() + q.b2;
        double l = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            l += log1pexp(z(i)) - y(i) * z(i);
        }
        return l / static_cast<double>(z.size());
    };

    MlpParams best = p;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;
    int epochs_run = 0;
    const Eigen::Index n = xtr.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const double keep = 1.0 - cfg.dropout;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
            const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, n - start);
            Eigen::MatrixXd xb(bs, d);
            Eigen::VectorXd yb(bs);
            for (Eigen::Index r = 0; r < bs; ++r) {
                xb.row(r) = xtr.row(order[static_cast<std::size_t>(start + r)]);
                yb(r) = train.y(order[static_cast<std::size_t>(start + r)]);
            }
            const Eigen::MatrixXd pre = (xb * p.w1.transpose()).rowwise() + p.b1.transpose();
            Eigen::MatrixXd mask(bs, h);
            for (Eigen::Index i = 0; i < mask.size(); ++i) {
                mask.data()[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
            }
            const Eigen::MatrixXd act = pre.cwiseMax(0.0).cwiseProduct(mask);
            const Eigen::VectorXd z = (act * p.w2).array() + p.b2;
            Eigen::VectorXd dz(bs);
            for (Eigen::Index i = 0; i < bs; ++i) {
                dz(i) = (sigmoid(z(i)) - yb(i)) / static_cast<double>(bs);
            }
            const Eigen::VectorXd gw2 = act.transpose() * dz;
            const double gb2 = dz.sum();
            Eigen::MatrixXd dact = dz * p.w2.transpose();
            dact = dact.cwiseProduct(mask);
            for (Eigen::Index i = 0; i < dact.size(); ++i) {
                if (pre.data()[i] <= 0.0) {
                    dact.data()[i] = 0.0;
                }
            }
            const Eigen::MatrixXd gw1 = dact.transpose() * xb;
            const Eigen::VectorXd gb1 = dact.colwise().sum().transpose();

            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            auto adam = [&](auto & param, auto & m1, auto & v1, const auto & g) {
                m1 = beta1 * m1 + (1.0 - beta1) * g;
                v1 = beta2 * v1 + (1.0 - beta2) * g.cwiseProduct(g);
                param -= (lr * (m1 / c1).array() / ((v1 / c2).array().sqrt() + eps)).matrix();
            };
            adam(p.w1, mw1, vw1, gw1);
            adam(p.b1, mb1, vb1, gb1);
            adam(p.w2, mw2, vw2, gw2);
            mb2 = beta1 * mb2 + (1.0 - beta1) * gb2;
            vb2 = beta2 * vb2 + (1.0 - beta2) * gb2 * gb2;
            p.b2 -= lr * (mb2 / c1) / (std::sqrt(vb2 / c2) + eps);
        }
        ++epochs_run;
        const double monitor = yval.size() > 0 ? loss_on(p, xval, yval) : loss_on(p, xtr, train.y);
        if (monitor < best_loss - 1e-9) {
            best_loss = monitor;
            best = p;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    m.mlp = best;
    m.eval.iterations = epochs_run;
    return m;
}

} // namespace detail

inline void check_probe_set(const LabeledActivationSet & set) {
    require(set.pair_ids().size() >= 4, "probe training needs at least 4 pairs");
}

// Logistic probe on an 80/20 pair-level split; test accuracy is measured on
// the held-out pairs.
inline ProbeModel train_linear_probe(const LabeledActivationSet & set, const ProbeConfig & cfg = {}) {
    check_probe_set(set);
    require(cfg.reg > 0.0, "regularization strength must be positive");
    const auto split = split_pairs(set.pair_ids(), cfg.split_seed, cfg.test_fraction);
    auto m = detail::fit_linear_on(set, split.train, cfg);
    m.split = split;
    m.eval.train_accuracy = probe_accuracy(m, set, split.train);
    m.eval.test_accuracy = probe_accuracy(m, set, split.test);
    return m;
}

inline ProbeModel train_mlp_probe(const LabeledActivationSet & set, const ProbeConfig & cfg = {}) {
    check_probe_set(set);
    const auto split = split_pairs(set.pair_ids(), cfg.split_seed, cfg.test_fraction);
    auto m = detail::fit_mlp_on(set, split.train, cfg, cfg.seed);
    m.split = split;
    m.eval.train_accuracy = probe_accuracy(m, set, split.train);
    m.eval.test_accuracy = probe_accuracy(m, set, split.test);
    return m;
}

struct CvResult {
    double mean = 0.0;
    double std = 0.0;
    std::vector<double> fold_accuracies;
};

// k-fold cross-validation with folds partitioning the pair ids; the fold
// seed is derived from split_seed.
inline CvResult cross_validate(const LabeledActivationSet & set, const ProbeConfig & cfg,
                               ProbeKind kind = ProbeKind::linear) {
    check_probe_set(set);
    const auto ids = set.pair_ids();
    const auto folds = cv_folds(ids, cfg.cv_folds, derive_seed(cfg.split_seed, 0xcf01d5ULL));
    CvResult r;
    for (std::size_t k = 0; k < folds.size(); ++k) {
        std::vector<std::string> train;
        for (std::size_t j = 0; j < folds.size(); ++j) {
            if (j != k) {
                train.insert(train.end(), folds[j].begin(), folds[j].end());
            }
        }
        const auto m = kind == ProbeKind::linear
                           ? detail::fit_linear_on(set, train, cfg)
                           : detail::fit_mlp_on(set, train, cfg, derive_seed(cfg.seed, 0xcf02ULL, k));
        r.fold_accuracies.push_back(probe_accuracy(m, set, folds[k]));
    }
    const double n = static_cast<double>(r.fold_accuracies.size());
    r.mean = std::accumulate(r.fold_accuracies.begin(), r.fold_accuracies.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : r.fold_accuracies) {
        ss += (a - r.mean) * (a - r.mean);
    }
    r.std = std::sqrt(ss / n);
    return r;
}

// Applies a trained probe unchanged to activations from another model.
inline double transfer_evaluate(const ProbeModel & probe, const LabeledActivationSet & foreign_set) {
    if (probe.d_model != foreign_set.d_model) {
        throw ValidationError("dimension mismatch: probe expects " + std::to_string(probe.d_model) +
                              " features, set has " + std::to_string(foreign_set.d_model));
    }
    return probe_accuracy(probe, foreign_set);
}

} // namespace cogsteer
