#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cogsteer/core/error.hpp"
#include "cogsteer/io/tensor_container.hpp"

namespace cogsteer {

using MatrixRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorF = Eigen::VectorXf;

struct ModelSpec {
    int d_model = 0;
    int n_layers = 0;
    int n_heads = 0;
    int vocab_size = 0;
    int max_context = 0;
    int d_ff = 0; // 0 means 4 * d_model

    int head_dim() const { return d_model / n_heads; }
    int ff_width() const { return d_ff > 0 ? d_ff : 4 * d_model; }

    void validate() const {
        require(d_model >= 1 && n_layers >= 1 && n_heads >= 1 && vocab_size >= 1 && max_context >= 1,
                "model spec fields must all be >= 1");
        require(d_model % n_heads == 0, "d_model must be divisible by n_heads");
        require(d_ff >= 0, "d_ff must be non-negative");
    }

    bool operator==(const ModelSpec &) const = default;
};

// Tensor names used in weight containers.
namespace names {
inline const std::string token_embedding = "embed.tokens";      // [vocab, d]
inline const std::string position_embedding = "embed.positions"; // [max_context, d]
inline const std::string final_norm = "final_norm";              // [d]
inline const std::string unembedding = "unembed";                // [vocab, d]
inline std::string layer(int i, const char * leaf) { return "layers." + std::to_string(i) + "." + leaf; }
// per layer: attn_norm [d], attn.wq/wk/wv [heads, head_dim, d], attn.wo [d, d],
//            mlp_norm [d], mlp.up [d_ff, d], mlp.down [d, d_ff]
} // namespace names

struct LayerWeights {
    VectorF attn_norm;
    MatrixRM wq, wk, wv; // [d, d] with rows grouped by head
    MatrixRM wo;         // [d, d]
    VectorF mlp_norm;
    MatrixRM up;   // [d_ff, d]
    MatrixRM down; // [d, d_ff]
};

// Immutable decoder weights. Built from a tensor map, which is kept for
// serialization; the Eigen copies are what the forward pass reads.
class ModelWeights {
public:
    ModelWeights() = default;

    explicit ModelWeights(TensorMap tensors) : tensors_(std::move(tensors)) { compile(); }

    const ModelSpec & spec() const { return spec_; }
    const TensorMap & tensors() const { return tensors_; }

    const MatrixRM & token_embedding() const { return tok_emb_; }
    const MatrixRM & position_embedding() const { return pos_emb_; }
    const LayerWeights & layer(int i) const { return layers_.at(static_cast<std::size_t>(i)); }
    const VectorF & final_norm() const { return final_norm_; }
    const MatrixRM & unembedding() const { return unembed_; }

    bool operator==(const ModelWeights & other) const { return tensors_ == other.tensors_; }

private:
    const Tensor & fetch(const std::string & name, const std::vector<std::int64_t> & shape) const {
        auto it = tensors_.find(name);
        if (it == tensors_.end()) {
            throw ValidationError("missing tensor '" + name + "'");
        }
        if (it->second.shape != shape) {
            throw ValidationError("shape mismatch for tensor '" + name + "'");
        }
        for (float v : it->second.data) {
            if (!std::isfinite(v)) {
                throw ValidationError("non-finite value in tensor '" + name + "'");
            }
        }
        return it->second;
    }

    static MatrixRM as_matrix(const Tensor & t, Eigen::Index rows, Eigen::Index cols) {
        return Eigen::Map<const MatrixRM>(t.data.data(), rows, cols);
    }

    static VectorF as_vector(const Tensor & t) {
        return Eigen::Map<const VectorF>(t.data.data(), static_cast<Eigen::Index>(t.data.size()));
    }

    void compile() {
        auto emb = tensors_.find(names::token_embedding);
        if (emb == tensors_.end()) {
            throw ValidationError("missing tensor '" + names::token_embedding + "'");
        }
        if (emb->second.shape.size() != 2) {
            throw ValidationError("shape mismatch for tensor '" + names::token_embedding + "'");
        }
        spec_.vocab_size = static_cast<int>(emb->second.shape[0]);
        spec_.d_model = static_cast<int>(emb->second.shape[1]);

        auto pos = tensors_.find(names::position_embedding);
        if (pos == tensors_.end() || pos->second.shape.size() != 2) {
            throw ValidationError("missing tensor '" + names::position_embedding + "'");
        }
        spec_.max_context = static_cast<int>(pos->second.shape[0]);

        int n_layers = 0;
        while (tensors_.contains(names::layer(n_layers, "attn_norm"))) {
            ++n_layers;
        }
        spec_.n_layers = n_layers;
        if (n_layers == 0) {
            throw ValidationError("missing tensor '" + names::layer(0, "attn_norm") + "'");
        }
        auto wq = tensors_.find(names::layer(0, "attn.wq"));
        if (wq == tensors_.end() || wq->second.shape.size() != 3) {
            throw ValidationError("missing tensor '" + names::layer(0, "attn.wq") + "'");
        }
        spec_.n_heads = static_cast<int>(wq->second.shape[0]);
        auto up = tensors_.find(names::layer(0, "mlp.up"));
        if (up == tensors_.end() || up->second.shape.size() != 2) {
            throw ValidationError("missing tensor '" + names::layer(0, "mlp.up") + "'");
        }
        spec_.d_ff = static_cast<int>(up->second.shape[0]);
        if (spec_.n_heads < 1 || spec_.d_model % spec_.n_heads != 0) {
            throw ValidationError("head count does not divide d_model");
        }
        spec_.validate();

        const std::int64_t d = spec_.d_model;
        const std::int64_t v = spec_.vocab_size;
        const std::int64_t ff = spec_.d_ff;
        const std::int64_t h = spec_.n_heads;
        const std::int64_t hd = spec_.head_dim();

        tok_emb_ = as_matrix(fetch(names::token_embedding, {v, d}), v, d);
        pos_emb_ = as_matrix(fetch(names::position_embedding, {spec_.max_context, d}), spec_.max_context, d);
        layers_.clear();
        for (int i = 0; i < n_layers; ++i) {
            LayerWeights lw;
            lw.attn_norm = as_vector(fetch(names::layer(i, "attn_norm"), {d}));
            lw.wq = as_matrix(fetch(names::layer(i, "attn.wq"), {h, hd, d}), d, d);
            lw.wk = as_matrix(fetch(names::layer(i, "attn.wk"), {h, hd, d}), d, d);
            lw.wv = as_matrix(fetch(names::layer(i, "attn.wv"), {h, hd, d}), d, d);
            lw.wo = as_matrix(fetch(names::layer(i, "attn.wo"), {d, d}), d, d);
            lw.mlp_norm = as_vector(fetch(names::layer(i, "mlp_norm"), {d}));
            lw.up = as_matrix(fetch(names::layer(i, "mlp.up"), {ff, d}), ff, d);
            lw.down = as_matrix(fetch(names::layer(i, "mlp.down"), {d, ff}), d, ff);
            layers_.push_back(std::move(lw));
        }
        final_norm_ = as_vector(fetch(names::final_norm, {d}));
        unembed_ = as_matrix(fetch(names::unembedding, {v, d}), v, d);
    }

    TensorMap tensors_;
    ModelSpec spec_;
    MatrixRM tok_emb_;
    MatrixRM pos_emb_;
    std::vector<LayerWeights> layers_;
    VectorF final_norm_;
    MatrixRM unembed_;
};

inline ModelWeights load_container(const std::string & path) { return ModelWeights(read_container(path)); }

inline void save_container(const std::string & path, const ModelWeights & weights) {
    write_container(path, weights.tensors());
}

} // namespace cogsteer
