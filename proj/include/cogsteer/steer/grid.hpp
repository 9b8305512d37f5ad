#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cogsteer/core/format.hpp"
#include "cogsteer/core/stats.hpp"
#include "cogsteer/core/svg.hpp"
#include "cogsteer/steer/evaluate.hpp"

namespace cogsteer {

struct GridRow {
    int layer = 0;
    double alpha = 0.0;
    double bias_score = 0.0;
    double capability = 0.0;
    int n = 0;
    int n_invalid = 0;
    bool ok = true;
    std::string error;
};

struct SteeringGrid {
    std::string family;
    std::string model;
    std::vector<int> layers;
    std::vector<double> alphas;
    std::vector<GridRow> rows; // layer-major, alpha-minor

    const GridRow & at(std::size_t li, std::size_t ai) const { return rows.at(li * alphas.size() + ai); }
};

// alpha = i / 10 for i = 0..30.
inline std::vector<double> fine_alphas() {
    std::vector<double> a;
    for (int i = 0; i <= 30; ++i) {
        a.push_back(i / 10.0);
    }
    return a;
}

// -10..10 in 21 unit steps.
inline std::vector<double> coarse_alphas() {
    std::vector<double> a;
    for (int i = -10; i <= 10; ++i) {
        a.push_back(static_cast<double>(i));
    }
    return a;
}

// Eight layers spread evenly over the model (every tenth layer of an 80-layer
// model).
inline std::vector<int> coarse_layers(int n_layers) {
    std::vector<int> out;
    for (int i = 0; i < 8; ++i) {
        const int l = static_cast<int>(std::lround(i * (n_layers - 1) / 7.0));
        if (out.empty() || out.back() != l) {
            out.push_back(l);
        }
    }
    return out;
}

inline void validate_axes(const std::vector<int> & layers, const std::vector<double> & alphas) {
    require(!layers.empty() && !alphas.empty(), "grid axes must be nonempty");
    for (std::size_t i = 1; i < alphas.size(); ++i) {
        require(alphas[i] > alphas[i - 1], "grid alphas must be strictly increasing");
    }
}

// One steered evaluation per (layer, alpha). A failing cell is recorded and the
// grid carries on.
inline SteeringGrid grid_search(const ModelWeights & w, const WordTokenizer & tok, const std::vector<float> & direction,
                                const std::vector<int> & layers, const std::vector<double> & alphas,
                                const std::vector<EvalTask> & tasks, const QaProbe & qa, const std::string & family,
                                const std::string & model_id, unsigned threads = 1) {
    validate_axes(layers, alphas);
    SteeringGrid g;
    g.family = family;
    g.model = model_id;
    g.layers = layers;
    g.alphas = alphas;
    g.rows.resize(layers.size() * alphas.size());
    parallel_for(g.rows.size(), threads, [&](std::size_t i) {
        GridRow & r = g.rows[i];
        r.layer = layers[i / alphas.size()];
        r.alpha = alphas[i % alphas.size()];
        try {
            const auto c = steered_eval(w, tok, direction, r.layer, r.alpha, tasks, qa);
            r.bias_score = c.bias_score;
            r.capability = c.capability;
            r.n = c.n;
            r.n_invalid = c.n_invalid;
        } catch (const Error & e) {
            r.ok = false;
            r.error = e.what();
        }
    });
    return g;
}

struct ParetoChoice {
    int layer = 0;
    double alpha = 0.0;
    double bias_score = 0.0;
    double capability = 0.0;
    double threshold = 0.5;
    double baseline_capability = 0.0;
};

// Lowest bias among cells keeping capability >= threshold * baseline; ties go
// to the smaller alpha, then the smaller layer.
inline ParetoChoice pareto_select(const SteeringGrid & grid, double baseline_capability, double threshold = 0.5) {
    require(!grid.rows.empty(), "Pareto selection on an empty grid");
    require(baseline_capability > 0.0, "baseline capability must be positive");
    const GridRow * best = nullptr;
    for (const auto & r : grid.rows) {
        if (!r.ok || r.capability < threshold * baseline_capability) {
            continue;
        }
        const bool better = !best || r.bias_score < best->bias_score ||
                            (r.bias_score == best->bias_score &&
                             (r.alpha < best->alpha || (r.alpha == best->alpha && r.layer < best->layer)));
        if (better) {
            best = &r;
        }
    }
    if (!best) {
        throw ValidationError("no grid cell meets the capability threshold");
    }
    return {best->layer, best->alpha, best->bias_score, best->capability, threshold, baseline_capability};
}

struct DoseResponse {
    double rho = 0.0;
    bool rho_defined = true;
    double slope = 0.0;
    double intercept = 0.0;
    std::size_t n = 0;
};

// Spearman rho and OLS slope of bias_score on alpha, pooled over layers.
inline DoseResponse dose_response(const SteeringGrid & grid) {
    std::vector<double> a;
    std::vector<double> b;
    for (const auto & r : grid.rows) {
        if (r.ok) {
            a.push_back(r.alpha);
            b.push_back(r.bias_score);
        }
    }
    std::vector<double> distinct = a;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) {
        throw ValidationError("dose-response needs a non-constant alpha axis");
    }
    require(distinct.size() >= 3, "dose-response needs at least 3 distinct alphas");
    DoseResponse d;
    d.n = a.size();
    d.rho = stats::spearman(a, b);
    if (std::isnan(d.rho)) {
        d.rho = 0.0;
        d.rho_defined = false;
    }
    const auto fit = stats::ols(a, b);
    d.slope = fit.slope;
    d.intercept = fit.intercept;
    return d;
}

inline std::string grid_csv(const SteeringGrid & g) {
    std::string out = "family,model,layer,alpha,bias_score,capability,n,n_invalid\n";
    for (const auto & r : g.rows) {
        out += g.family + "," + g.model + "," + std::to_string(r.layer) + "," + fmt_num(r.alpha) + ",";
        if (r.ok) {
            out += fmt_num(r.bias_score) + "," + fmt_num(r.capability) + "," + std::to_string(r.n) + "," +
                   std::to_string(r.n_invalid) + "\n";
        } else {
            out += ",,,\n";
        }
    }
    return out;
}

inline std::string grid_heatmap(const SteeringGrid & g, bool capability = false) {
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::vector<std::vector<double>> vals;
    for (double a : g.alphas) {
        cols.push_back(fmt_num(a));
    }
    for (std::size_t li = 0; li < g.layers.size(); ++li) {
        rows.push_back("layer " + std::to_string(g.layers[li]));
        std::vector<double> line;
        for (std::size_t ai = 0; ai < g.alphas.size(); ++ai) {
            const auto & r = g.at(li, ai);
            line.push_back(r.ok ? (capability ? r.capability : r.bias_score) : std::nan(""));
        }
        vals.push_back(std::move(line));
    }
    const std::string what = capability ? "capability" : "bias score";
    return svg::heatmap(g.family + " " + g.model + " " + what + " by layer and alpha", rows, cols, vals, 0.0, 1.0);
}

} // namespace cogsteer
