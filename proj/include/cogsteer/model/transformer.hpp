#pragma once

// Pre-norm decoder-only transformer: learned token + position embeddings,
// RMSNorm, causal multi-head attention, GELU MLP, final RMSNorm, untied
// unembedding. "Layer l" always refers to the residual stream after block l;
// layer -1 is the embedding output.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cogsteer/core/error.hpp"
#include "cogsteer/model/weights.hpp"

namespace cogsteer {

using Tokens = std::vector<int>;

// h' = h - alpha * v_hat, applied to every token position of the residual
// leaving block `layer`.
struct SteeringSpec {
    int layer = 0;
    std::vector<float> direction;
    double alpha = 0.0;
    bool normalize = true;
};

struct CaptureRecord {
    std::string pair_id;
    std::string condition;
    int layer = 0;
    int position = 0;
    std::vector<float> vector;
};

// Linear readout sigma(w.h + b) on the residual at `layer`.
struct Monitor {
    int layer = 0;
    std::vector<float> weights;
    double bias = 0.0;
};

struct GenerationResult {
    Tokens tokens;                                   // generated tokens only
    std::optional<std::vector<double>> probe_values; // one per generated token
};

inline double sigmoid(double x) {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace detail {

constexpr double kNormEps = 1e-5;

// Row-wise RMSNorm with double accumulation.
inline MatrixRM rms_norm_rows(const MatrixRM & x, const VectorF & gain) {
    MatrixRM out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double ss = 0.0;
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            ss += static_cast<double>(x(r, c)) * x(r, c);
        }
        const double scale = 1.0 / std::sqrt(ss / static_cast<double>(x.cols()) + kNormEps);
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            out(r, c) = static_cast<float>(x(r, c) * scale) * gain(c);
        }
    }
    return out;
}

inline float gelu(float x) {
    constexpr float k = 0.7978845608028654f; // sqrt(2/pi)
    return 0.5f * x * (1.0f + std::tanh(k * (x + 0.044715f * x * x * x)));
}

// Steering offset resolved to the exact row vector subtracted from the
// residual.
struct ResolvedSteering {
    int layer = -2;
    Eigen::RowVectorXf delta;
    bool active = false;
};

inline ResolvedSteering resolve(const ModelSpec & spec, const std::optional<SteeringSpec> & steering) {
    ResolvedSteering r;
    if (!steering) {
        return r;
    }
    const auto & s = *steering;
    require(s.layer >= 0 && s.layer < spec.n_layers, "steering layer out of range: " + std::to_string(s.layer));
    require(static_cast<int>(s.direction.size()) == spec.d_model, "steering direction length must equal d_model");
    require(std::isfinite(s.alpha), "steering alpha must be finite");
    double norm2 = 0.0;
    for (float v : s.direction) {
        norm2 += static_cast<double>(v) * v;
    }
    if (s.alpha != 0.0 && norm2 == 0.0) {
        throw ValidationError("zero-norm steering direction with nonzero alpha");
    }
    if (s.alpha == 0.0) {
        return r; // identity
    }
    const double scale = s.normalize ? s.alpha / std::sqrt(norm2) : s.alpha;
    r.layer = s.layer;
    r.delta.resize(spec.d_model);
    for (int i = 0; i < spec.d_model; ++i) {
        r.delta(i) = static_cast<float>(scale * s.direction[static_cast<std::size_t>(i)]);
    }
    r.active = true;
    return r;
}

inline void check_tokens(const ModelSpec & spec, std::span<const int> tokens) {
    for (int t : tokens) {
        if (t < 0 || t >= spec.vocab_size) {
            throw ValidationError("token id out of range: " + std::to_string(t));
        }
    }
}

} // namespace detail

// Incremental decoder state: per-layer key/value caches.
class DecodeState {
public:
    explicit DecodeState(const ModelWeights & w) : weights_(&w) {
        const auto & spec = w.spec();
        keys_.assign(static_cast<std::size_t>(spec.n_layers), MatrixRM(0, spec.d_model));
        values_.assign(static_cast<std::size_t>(spec.n_layers), MatrixRM(0, spec.d_model));
    }

    int length() const { return length_; }

    // Runs `tokens` at positions [length, length + n). `on_layer(l, x)` sees the
    // residual rows for the new positions after block l (and l = -1 for the
    // embeddings). Returns the final residual rows (pre final norm).
    MatrixRM advance(std::span<const int> tokens, const detail::ResolvedSteering & steer,
                     const std::function<void(int, const MatrixRM &)> & on_layer = {}) {
        const ModelWeights & w = *weights_;
        const ModelSpec & spec = w.spec();
        const int n = static_cast<int>(tokens.size());
        require(n > 0, "empty token sequence");
        if (length_ + n > spec.max_context) {
            throw ValidationError("context overflow: " + std::to_string(length_ + n) + " > " +
                                  std::to_string(spec.max_context));
        }
        detail::check_tokens(spec, tokens);

        MatrixRM x(n, spec.d_model);
        for (int i = 0; i < n; ++i) {
            x.row(i) = w.token_embedding().row(tokens[static_cast<std::size_t>(i)]) +
                       w.position_embedding().row(length_ + i);
        }
        if (on_layer) {
            on_layer(-1, x);
        }
        return run_blocks(std::move(x), 0, steer, on_layer);
    }

    // Fresh-state pass over a whole sequence whose residual after block
    // `layer` is `x`: applies steering at `layer` if it targets it, then runs
    // the remaining blocks. Matches advance() bit for bit.
    MatrixRM resume(MatrixRM x, int layer, const detail::ResolvedSteering & steer) {
        const ModelSpec & spec = weights_->spec();
        require(length_ == 0, "resume needs a fresh decode state");
        require(layer >= -1 && layer < spec.n_layers, "resume layer out of range");
        require(x.rows() >= 1 && x.rows() <= spec.max_context && x.cols() == spec.d_model, "resume residual has the wrong shape");
        require(!steer.active || steer.layer >= layer, "steering layer lies below the cached residual");
        if (steer.active && steer.layer == layer && layer >= 0) {
            x.rowwise() -= steer.delta;
        }
        return run_blocks(std::move(x), layer + 1, steer, {});
    }

private:
    MatrixRM run_blocks(MatrixRM x, int first, const detail::ResolvedSteering & steer,
                        const std::function<void(int, const MatrixRM &)> & on_layer) {
        const ModelWeights & w = *weights_;
        const ModelSpec & spec = w.spec();
        const int n = static_cast<int>(x.rows());
        reserve(length_ + n);
        const int d = spec.d_model;
        const int hd = spec.head_dim();
        const float inv_sqrt_hd = 1.0f / std::sqrt(static_cast<float>(hd));

        for (int l = first; l < spec.n_layers; ++l) {
            const LayerWeights & lw = w.layer(l);
            auto & kc = keys_[static_cast<std::size_t>(l)];
            auto & vc = values_[static_cast<std::size_t>(l)];

            const MatrixRM xn = detail::rms_norm_rows(x, lw.attn_norm);
            const MatrixRM q = xn * lw.wq.transpose();
            kc.middleRows(length_, n) = xn * lw.wk.transpose();
            vc.middleRows(length_, n) = xn * lw.wv.transpose();

            const int total = length_ + n;
            MatrixRM att(n, d);
            for (int h = 0; h < spec.n_heads; ++h) {
                const auto qh = q.middleCols(h * hd, hd);
                const auto kh = kc.topRows(total).middleCols(h * hd, hd);
                const auto vh = vc.topRows(total).middleCols(h * hd, hd);
                MatrixRM scores = (qh * kh.transpose()) * inv_sqrt_hd;
                for (int i = 0; i < n; ++i) {
                    const int visible = length_ + i + 1;
                    float mx = -std::numeric_limits<float>::infinity();
                    for (int j = 0; j < visible; ++j) {
                        mx = std::max(mx, scores(i, j));
                    }
                    double denom = 0.0;
                    for (int j = 0; j < visible; ++j) {
                        const float e = std::exp(scores(i, j) - mx);
                        scores(i, j) = e;
                        denom += e;
                    }
                    const float inv = static_cast<float>(1.0 / denom);
                    for (int j = 0; j < visible; ++j) {
                        scores(i, j) *= inv;
                    }
                    for (int j = visible; j < total; ++j) {
                        scores(i, j) = 0.0f;
                    }
                }
                att.middleCols(h * hd, hd) = scores * vh;
            }
            x += att * lw.wo.transpose();

            const MatrixRM xm = detail::rms_norm_rows(x, lw.mlp_norm);
            MatrixRM hidden = xm * lw.up.transpose();
            hidden = hidden.unaryExpr([](float v) { return detail::gelu(v); });
            x += hidden * lw.down.transpose();

            if (steer.active && steer.layer == l) {
                x.rowwise() -= steer.delta;
            }
            if (on_layer) {
                on_layer(l, x);
            }
        }
        length_ += n;
        return x;
    }

    void reserve(int rows) {
        if (keys_.empty() || keys_.front().rows() >= rows) {
            return;
        }
        const int cap = std::min(weights_->spec().max_context, std::max(rows, 2 * static_cast<int>(keys_.front().rows())));
        for (auto * caches : {&keys_, &values_}) {
            for (auto & m : *caches) {
                m.conservativeResize(cap, Eigen::NoChange);
            }
        }
    }

    const ModelWeights * weights_;
    std::vector<MatrixRM> keys_;
    std::vector<MatrixRM> values_;
    int length_ = 0;
};

// Final-normed hidden state of one residual row.
inline VectorF final_hidden(const ModelWeights & w, const Eigen::RowVectorXf & residual_row) {
    MatrixRM row = residual_row;
    return detail::rms_norm_rows(row, w.final_norm()).row(0).transpose();
}

inline VectorF logits_from_residual(const ModelWeights & w, const Eigen::RowVectorXf & residual_row) {
    return w.unembedding() * final_hidden(w, residual_row);
}

// Residual-stream captures at the final token position for each requested
// layer (sorted ascending, duplicates dropped).
inline std::vector<CaptureRecord> forward_capture(const ModelWeights & w, std::span<const int> tokens,
                                                  std::vector<int> layers,
                                                  const std::optional<SteeringSpec> & steering = std::nullopt) {
    const auto & spec = w.spec();
    require(!tokens.empty(), "empty token sequence");
    std::sort(layers.begin(), layers.end());
    layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
    for (int l : layers) {
        require(l >= -1 && l < spec.n_layers, "capture layer out of range: " + std::to_string(l));
    }
    const auto steer = detail::resolve(spec, steering);
    const int last = static_cast<int>(tokens.size()) - 1;

    std::vector<CaptureRecord> out;
    out.reserve(layers.size());
    DecodeState state(w);
    state.advance(tokens, steer, [&](int l, const MatrixRM & x) {
        if (std::binary_search(layers.begin(), layers.end(), l)) {
            CaptureRecord rec;
            rec.layer = l;
            rec.position = last;
            rec.vector.assign(x.row(last).data(), x.row(last).data() + x.cols());
            out.push_back(std::move(rec));
        }
    });
    return out;
}

// Residual after every block at every position; rows = positions. Used by
// tests that check steering locality over all tokens.
inline std::vector<MatrixRM> forward_all_positions(const ModelWeights & w, std::span<const int> tokens,
                                                   const std::optional<SteeringSpec> & steering = std::nullopt) {
    const auto steer = detail::resolve(w.spec(), steering);
    std::vector<MatrixRM> out;
    DecodeState state(w);
    state.advance(tokens, steer, [&](int l, const MatrixRM & x) {
        if (l >= 0) {
            out.push_back(x);
        }
    });
    return out;
}

// Residual rows after block `layer` (-1: embeddings) at every position.
inline MatrixRM residual_rows(const ModelWeights & w, std::span<const int> tokens, int layer) {
    require(layer >= -1 && layer < w.spec().n_layers, "layer out of range: " + std::to_string(layer));
    MatrixRM out;
    DecodeState state(w);
    state.advance(tokens, {}, [&](int l, const MatrixRM & x) {
        if (l == layer) {
            out = x;
        }
    });
    return out;
}

// Next-token logits from a cached residual_rows(tokens, layer); equal bit for
// bit to next_token_logits(tokens) when steering targets `layer` or above.
inline VectorF next_token_logits_from(const ModelWeights & w, const MatrixRM & residual, int layer,
                                      const std::optional<SteeringSpec> & steering = std::nullopt) {
    DecodeState state(w);
    const MatrixRM x = state.resume(residual, layer, detail::resolve(w.spec(), steering));
    return logits_from_residual(w, x.row(x.rows() - 1));
}

inline VectorF next_token_logits(const ModelWeights & w, std::span<const int> tokens,
                                 const std::optional<SteeringSpec> & steering = std::nullopt) {
    require(!tokens.empty(), "empty token sequence");
    DecodeState state(w);
    const MatrixRM x = state.advance(tokens, detail::resolve(w.spec(), steering));
    return logits_from_residual(w, x.row(x.rows() - 1));
}

// Index (into option_tokens) of the highest next-token logit among the
// options; equal logits resolve to the lowest token id.
inline std::size_t argmax_option(const VectorF & logits, std::span<const int> option_tokens) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < option_tokens.size(); ++i) {
        const float a = logits(option_tokens[i]);
        const float b = logits(option_tokens[best]);
        if (a > b || (a == b && option_tokens[i] < option_tokens[best])) {
            best = i;
        }
    }
    return best;
}

inline std::size_t choose_option(const ModelWeights & w, std::span<const int> tokens, std::span<const int> option_tokens,
                                 const std::optional<SteeringSpec> & steering = std::nullopt) {
    const auto & spec = w.spec();
    require(!option_tokens.empty(), "empty option list");
    std::vector<int> sorted(option_tokens.begin(), option_tokens.end());
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "option tokens must be distinct");
    detail::check_tokens(spec, option_tokens);
    return argmax_option(next_token_logits(w, tokens, steering), option_tokens);
}

// Greedy decoding (ties to the lowest token id). With a monitor, value t is
// sigma(w.h + b) on the hidden state from which generated token t was
// decoded, so value 1 reads the prompt's final position.
inline GenerationResult generate_greedy(const ModelWeights & w, std::span<const int> prompt, int max_new,
                                        const std::optional<Monitor> & monitor = std::nullopt,
                                        const std::optional<SteeringSpec> & steering = std::nullopt) {
    const auto & spec = w.spec();
    require(!prompt.empty(), "empty prompt");
    require(max_new >= 1, "max_new must be >= 1");
    if (static_cast<long>(prompt.size()) + max_new > spec.max_context) {
        throw ValidationError("context overflow: prompt " + std::to_string(prompt.size()) + " + max_new " +
                              std::to_string(max_new) + " > max_context " + std::to_string(spec.max_context));
    }
    if (monitor) {
        require(monitor->layer >= -1 && monitor->layer < spec.n_layers, "monitor layer out of range");
        require(static_cast<int>(monitor->weights.size()) == spec.d_model, "monitor direction length must equal d_model");
    }
    const auto steer = detail::resolve(spec, steering);

    Eigen::VectorXf probe_w;
    if (monitor) {
        probe_w = Eigen::Map<const Eigen::VectorXf>(monitor->weights.data(), spec.d_model);
    }

    GenerationResult result;
    if (monitor) {
        result.probe_values.emplace();
    }
    DecodeState state(w);
    double pending_value = 0.0;
    auto hook = [&](int l, const MatrixRM & x) {
        if (monitor && l == monitor->layer) {
            double dot = monitor->bias;
            const auto row = x.row(x.rows() - 1);
            for (int i = 0; i < spec.d_model; ++i) {
                dot += static_cast<double>(probe_w(i)) * row(i);
            }
            pending_value = sigmoid(dot);
        }
    };

    MatrixRM x = state.advance(prompt, steer, hook);
    for (int t = 0; t < max_new; ++t) {
        const VectorF logits = logits_from_residual(w, x.row(x.rows() - 1));
        int best = 0;
        for (int v = 1; v < spec.vocab_size; ++v) {
            if (logits(v) > logits(best)) {
                best = v;
            }
        }
        result.tokens.push_back(best);
        if (monitor) {
            result.probe_values->push_back(pending_value);
        }
        if (t + 1 < max_new) {
            const int next[1] = {best};
            x = state.advance(next, steer, hook);
        }
    }
    return result;
}

} // namespace cogsteer
