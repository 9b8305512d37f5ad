#pragma once

// Oracle fixture: a random decoder whose answer readout is an exact linear
// function of the residual component along a known unit direction u.
//
// Construction, with w a second unit direction orthogonal to u:
//   * every token embedding carries u-component `readout_offset` and
//     w-component s(token) (trigger tokens get `trigger_score`, others are
//     drawn from N(0, token_score_std));
//   * every block writes only into the complement of span{u, w}, except head 0
//     of `plant_layer`, which attends uniformly over the prefix and writes
//     plant_scale * mean(normed w-component) into u;
//   * attention before `plant_layer` is silenced, so at earlier layers the
//     final-position residual depends only on the last token and position;
//   * the two answer rows of the unembedding differ by gain * u.
//
// Consequences: the u-component of the residual is unchanged by every block
// except the plant head, and logit[a] - logit[b] = gain * (h_hat . u), where
// h_hat is the final-normed last-layer residual. Steering along u at a layer
// at or after `plant_layer` shifts the readout's sign boundary by exactly alpha.

#include <array>
#include <cmath>
#include <span>
#include <unordered_set>
#include <vector>

#include "cogsteer/core/error.hpp"
#include "cogsteer/core/rng.hpp"
#include "cogsteer/model/transformer.hpp"
#include "cogsteer/model/weights.hpp"

namespace cogsteer {

struct PlantOptions {
    int plant_layer = -1; // -1: layer 1 (or 0 for single-layer models)
    std::vector<int> trigger_tokens;
    double trigger_score = 3.0;
    double token_score_std = 1.0;
    double plant_scale = 24.0;
    double readout_offset = 0.0;
    std::array<int, 2> answer_tokens = {1, 2}; // "A", "B" under WordTokenizer

    int resolved_plant_layer(const ModelSpec & spec) const {
        return plant_layer >= 0 ? plant_layer : (spec.n_layers > 1 ? 1 : 0);
    }
};

namespace detail {

inline std::vector<double> unit(std::span<const float> v) {
    double n2 = 0.0;
    for (float x : v) {
        n2 += static_cast<double>(x) * x;
    }
    require(n2 > 0.0, "planted vector must be nonzero");
    const double inv = 1.0 / std::sqrt(n2);
    std::vector<double> u(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        u[i] = v[i] * inv;
    }
    return u;
}

inline double dot(const std::vector<double> & a, const std::vector<double> & b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

} // namespace detail

inline ModelWeights build_planted_model(const ModelSpec & spec, std::span<const float> planted, double gain,
                                        std::uint64_t seed, const PlantOptions & opts = {}) {
    spec.validate();
    require(static_cast<int>(planted.size()) == spec.d_model, "planted vector length must equal d_model");
    const std::vector<double> u = detail::unit(planted);
    const int d = spec.d_model;
    const int L = spec.n_layers;
    const int H = spec.n_heads;
    const int hd = spec.head_dim();
    const int V = spec.vocab_size;
    const int C = spec.max_context;
    const int ff = spec.ff_width();
    const int plant = opts.resolved_plant_layer(spec);
    require(plant >= 0 && plant < L, "plant layer out of range");
    require(d >= 3, "planted model needs d_model >= 3");
    for (int t : opts.answer_tokens) {
        require(t >= 0 && t < V, "answer token out of range");
    }
    require(opts.answer_tokens[0] != opts.answer_tokens[1], "answer tokens must differ");

    Rng rng(seed);

    std::vector<double> w(static_cast<std::size_t>(d));
    for (auto & x : w) {
        x = rng.normal();
    }
    {
        const double p = detail::dot(w, u);
        for (int i = 0; i < d; ++i) {
            w[i] -= p * u[i];
        }
        const double n = std::sqrt(detail::dot(w, w));
        for (auto & x : w) {
            x /= n;
        }
    }
    // Removes the u and w components in place.
    auto project_out = [&](std::vector<double> & x) {
        const double pu = detail::dot(x, u);
        const double pw = detail::dot(x, w);
        for (int i = 0; i < d; ++i) {
            x[i] -= pu * u[i] + pw * w[i];
        }
    };
    auto random_matrix = [&](int rows, int cols, double stddev) {
        std::vector<float> m(static_cast<std::size_t>(rows) * cols);
        for (auto & x : m) {
            x = static_cast<float>(rng.normal(0.0, stddev));
        }
        return m;
    };
    // Projects every column of a row-major [rows=d, cols] matrix onto the
    // complement of span{u, w}.
    auto project_columns = [&](std::vector<float> & m, int cols) {
        std::vector<double> col(static_cast<std::size_t>(d));
        for (int c = 0; c < cols; ++c) {
            for (int r = 0; r < d; ++r) {
                col[r] = m[static_cast<std::size_t>(r) * cols + c];
            }
            project_out(col);
            for (int r = 0; r < d; ++r) {
                m[static_cast<std::size_t>(r) * cols + c] = static_cast<float>(col[r]);
            }
        }
    };

    std::unordered_set<int> triggers(opts.trigger_tokens.begin(), opts.trigger_tokens.end());
    TensorMap t;

    std::vector<float> emb(static_cast<std::size_t>(V) * d);
    for (int tok = 0; tok < V; ++tok) {
        std::vector<double> g(static_cast<std::size_t>(d));
        for (auto & x : g) {
            x = rng.normal();
        }
        project_out(g);
        const double score_draw = rng.normal(0.0, opts.token_score_std);
        const double s = triggers.contains(tok) ? opts.trigger_score : score_draw;
        for (int i = 0; i < d; ++i) {
            emb[static_cast<std::size_t>(tok) * d + i] = static_cast<float>(g[i] + s * w[i] + opts.readout_offset * u[i]);
        }
    }
    t[names::token_embedding] = Tensor({V, d}, std::move(emb));

    std::vector<float> pos(static_cast<std::size_t>(C) * d);
    for (int p = 0; p < C; ++p) {
        std::vector<double> g(static_cast<std::size_t>(d));
        for (auto & x : g) {
            x = rng.normal(0.0, 0.3);
        }
        project_out(g);
        for (int i = 0; i < d; ++i) {
            pos[static_cast<std::size_t>(p) * d + i] = static_cast<float>(g[i]);
        }
    }
    t[names::position_embedding] = Tensor({C, d}, std::move(pos));

    const double in_scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (int l = 0; l < L; ++l) {
        auto wq = random_matrix(d, d, in_scale);
        auto wk = random_matrix(d, d, in_scale);
        auto wv = random_matrix(d, d, in_scale);
        auto wo = random_matrix(d, d, in_scale);
        project_columns(wo, d);
        if (l < plant) {
            std::fill(wo.begin(), wo.end(), 0.0f);
        }
        if (l == plant) {
            for (int r = 0; r < hd; ++r) {
                for (int c = 0; c < d; ++c) {
                    const auto idx = static_cast<std::size_t>(r) * d + c;
                    wq[idx] = 0.0f;
                    wk[idx] = 0.0f;
                    wv[idx] = r == 0 ? static_cast<float>(w[c]) : 0.0f;
                }
            }
            for (int r = 0; r < d; ++r) {
                for (int c = 0; c < hd; ++c) {
                    wo[static_cast<std::size_t>(r) * d + c] = c == 0 ? static_cast<float>(opts.plant_scale * u[r]) : 0.0f;
                }
            }
        }
        auto up = random_matrix(ff, d, in_scale);
        auto down = random_matrix(d, ff, 1.0 / std::sqrt(static_cast<double>(ff)));
        project_columns(down, ff);

        t[names::layer(l, "attn_norm")] = Tensor({d}, std::vector<float>(static_cast<std::size_t>(d), 1.0f));
        t[names::layer(l, "attn.wq")] = Tensor({H, hd, d}, std::move(wq));
        t[names::layer(l, "attn.wk")] = Tensor({H, hd, d}, std::move(wk));
        t[names::layer(l, "attn.wv")] = Tensor({H, hd, d}, std::move(wv));
        t[names::layer(l, "attn.wo")] = Tensor({d, d}, std::move(wo));
        t[names::layer(l, "mlp_norm")] = Tensor({d}, std::vector<float>(static_cast<std::size_t>(d), 1.0f));
        t[names::layer(l, "mlp.up")] = Tensor({ff, d}, std::move(up));
        t[names::layer(l, "mlp.down")] = Tensor({d, ff}, std::move(down));
    }
    t[names::final_norm] = Tensor({d}, std::vector<float>(static_cast<std::size_t>(d), 1.0f));

    auto unembed = random_matrix(V, d, in_scale);
    {
        const auto a = static_cast<std::size_t>(opts.answer_tokens[0]);
        const auto b = static_cast<std::size_t>(opts.answer_tokens[1]);
        for (int i = 0; i < d; ++i) {
            const float base = unembed[a * d + i];
            unembed[a * d + i] = static_cast<float>(base + 0.5 * gain * u[i]);
            unembed[b * d + i] = static_cast<float>(base - 0.5 * gain * u[i]);
        }
    }
    t[names::unembedding] = Tensor({V, d}, std::move(unembed));

    return ModelWeights(std::move(t));
}

// Component of the last-layer, final-position residual along unit(planted).
inline double planted_projection(const ModelWeights & w, std::span<const int> tokens, std::span<const float> planted,
                                 const std::optional<SteeringSpec> & steering = std::nullopt) {
    const auto u = detail::unit(planted);
    const auto rec = forward_capture(w, tokens, {w.spec().n_layers - 1}, steering);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        s += u[i] * rec.front().vector[i];
    }
    return s;
}

// Chooses readout_offset so the median planted projection over `prompts` is
// zero (within `tol`), i.e. the unsteered model picks answer a on about half
// of them. Bracket by fixed-point steps, then Illinois regula falsi.
inline PlantOptions calibrate_readout_offset(const ModelSpec & spec, std::span<const float> planted, double gain,
                                             std::uint64_t seed, PlantOptions opts,
                                             const std::vector<std::vector<int>> & prompts, int max_iter = 40,
                                             double tol = 1e-4) {
    require(!prompts.empty(), "calibration needs at least one prompt");
    auto median_at = [&](double offset) {
        PlantOptions o = opts;
        o.readout_offset = offset;
        const auto model = build_planted_model(spec, planted, gain, seed, o);
        std::vector<double> proj;
        proj.reserve(prompts.size());
        for (const auto & p : prompts) {
            proj.push_back(planted_projection(model, p, planted));
        }
        std::sort(proj.begin(), proj.end());
        const std::size_t n = proj.size();
        return n % 2 ? proj[n / 2] : 0.5 * (proj[n / 2 - 1] + proj[n / 2]);
    };
    double a = opts.readout_offset;
    double fa = median_at(a);
    int it = 0;
    double b = a;
    double fb = fa;
    while (std::abs(fa) > tol && it < max_iter && (fb > 0) == (fa > 0)) {
        a = b;
        fa = fb;
        b = a - fb;
        fb = median_at(b);
        ++it;
        if (std::abs(fb) <= tol) {
            opts.readout_offset = b;
            return opts;
        }
    }
    if (std::abs(fa) <= tol) {
        opts.readout_offset = a;
        return opts;
    }
    int side = 0;
    double c = b;
    while (it < max_iter) {
        c = (a * fb - b * fa) / (fb - fa);
        const double fc = median_at(c);
        ++it;
        if (std::abs(fc) <= tol) {
            break;
        }
        if ((fc > 0) == (fb > 0)) {
            b = c;
            fb = fc;
            if (side == -1) {
                fa /= 2;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if (side == 1) {
                fb /= 2;
            }
            side = 1;
        }
    }
    opts.readout_offset = c;
    return opts;
}

} // namespace cogsteer
