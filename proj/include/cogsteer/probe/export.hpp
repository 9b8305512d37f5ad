#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cogsteer/core/format.hpp"
#include "cogsteer/core/hash.hpp"
#include "cogsteer/io/tensor_container.hpp"
#include "cogsteer/probe/analysis.hpp"
#include "cogsteer/probe/probes.hpp"

namespace cogsteer {

namespace detail {

inline Tensor tensor_from(const Eigen::MatrixXd & m) {
    std::vector<float> data(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            data[static_cast<std::size_t>(r * m.cols() + c)] = static_cast<float>(m(r, c));
        }
    }
    return Tensor({m.rows(), m.cols()}, std::move(data));
}

inline Tensor tensor_from(const Eigen::VectorXd & v) {
    std::vector<float> data(v.data(), v.data() + v.size());
    return Tensor({v.size()}, std::move(data));
}

inline Eigen::MatrixXd matrix_of(const Tensor & t) {
    require(t.shape.size() == 2, "expected a 2-d tensor");
    Eigen::MatrixXd m(t.shape[0], t.shape[1]);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = t.data[static_cast<std::size_t>(r * m.cols() + c)];
        }
    }
    return m;
}

inline Eigen::VectorXd vector_of(const Tensor & t) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(t.data.size()));
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = t.data[i];
    }
    return v;
}

inline const Tensor & need(const TensorMap & m, const std::string & name) {
    auto it = m.find(name);
    if (it == m.end()) {
        throw ValidationError("missing tensor '" + name + "'");
    }
    return it->second;
}

} // namespace detail

inline nlohmann::ordered_json probe_sidecar(const ProbeModel & p) {
    nlohmann::ordered_json j;
    j["kind"] = probe_kind_name(p.kind);
    j["layer"] = p.layer;
    j["family"] = p.family;
    j["source_model"] = p.source_model;
    j["seed"] = p.kind == ProbeKind::linear ? p.config.split_seed : p.config.seed;
    j["split_seed"] = p.config.split_seed;
    j["d_model"] = p.d_model;
    nlohmann::ordered_json acc;
    acc["train"] = p.eval.train_accuracy;
    acc["test"] = p.eval.test_accuracy;
    if (p.eval.cv_mean) {
        acc["cv_mean"] = *p.eval.cv_mean;
    }
    if (p.eval.cv_std) {
        acc["cv_std"] = *p.eval.cv_std;
    }
    j["accuracies"] = acc;
    j["converged"] = p.eval.converged;
    j["iterations"] = p.eval.iterations;
    j["reg"] = p.config.reg;
    return j;
}

// Writes `<stem>.tensors` and `<stem>.json`.
inline void save_probe(const std::string & stem, const ProbeModel & p) {
    TensorMap t;
    if (p.kind == ProbeKind::linear) {
        std::vector<float> w(p.weights.begin(), p.weights.end());
        const auto n = static_cast<std::int64_t>(w.size());
        t["weight"] = Tensor({n}, std::move(w));
        t["bias"] = Tensor({1}, {static_cast<float>(p.bias)});
    } else {
        t["mlp.w1"] = detail::tensor_from(p.mlp.w1);
        t["mlp.b1"] = detail::tensor_from(p.mlp.b1);
        t["mlp.w2"] = detail::tensor_from(p.mlp.w2);
        t["mlp.b2"] = Tensor({1}, {static_cast<float>(p.mlp.b2)});
        if (p.feature_mean.size() > 0) {
            t["mlp.feature_mean"] = detail::tensor_from(p.feature_mean);
            t["mlp.feature_scale"] = detail::tensor_from(p.feature_scale);
        }
    }
    write_container(stem + ".tensors", t);
    write_text(stem + ".json", probe_sidecar(p).dump(2) + "\n");
}

inline ProbeModel load_probe(const std::string & stem) {
    const auto meta = nlohmann::json::parse(read_text(stem + ".json"));
    const auto t = read_container(stem + ".tensors");
    ProbeModel p;
    p.kind = meta.at("kind").get<std::string>() == "linear" ? ProbeKind::linear : ProbeKind::mlp;
    p.layer = meta.at("layer").get<int>();
    p.family = meta.at("family").get<std::string>();
    p.source_model = meta.at("source_model").get<std::string>();
    p.d_model = meta.at("d_model").get<int>();
    p.config.split_seed = meta.at("split_seed").get<std::uint64_t>();
    p.config.reg = meta.at("reg").get<double>();
    p.eval.train_accuracy = meta.at("accuracies").at("train").get<double>();
    p.eval.test_accuracy = meta.at("accuracies").at("test").get<double>();
    p.eval.converged = meta.at("converged").get<bool>();
    if (p.kind == ProbeKind::linear) {
        const auto & w = detail::need(t, "weight");
        p.weights.assign(w.data.begin(), w.data.end());
        p.bias = detail::need(t, "bias").data.at(0);
    } else {
        p.mlp.w1 = detail::matrix_of(detail::need(t, "mlp.w1"));
        p.mlp.b1 = detail::vector_of(detail::need(t, "mlp.b1"));
        p.mlp.w2 = detail::vector_of(detail::need(t, "mlp.w2"));
        p.mlp.b2 = detail::need(t, "mlp.b2").data.at(0);
        if (t.contains("mlp.feature_mean")) {
            p.feature_mean = detail::vector_of(t.at("mlp.feature_mean"));
            p.feature_scale = detail::vector_of(t.at("mlp.feature_scale"));
        }
    }
    return p;
}

inline nlohmann::ordered_json direction_sidecar(const BiasDirection & d) {
    nlohmann::ordered_json j;
    j["method"] = method_name(d.method);
    j["layer"] = d.layer;
    j["family"] = d.family;
    j["source_model"] = d.source_model;
    j["norm"] = d.norm();
    j["d_model"] = d.vector.size();
    return j;
}

// Writes `<stem>.tensors` (tensor "direction") and `<stem>.json`.
inline void save_direction(const std::string & stem, const BiasDirection & d) {
    TensorMap t;
    t["direction"] = Tensor({static_cast<std::int64_t>(d.vector.size())}, d.vector);
    write_container(stem + ".tensors", t);
    write_text(stem + ".json", direction_sidecar(d).dump(2) + "\n");
}

inline BiasDirection load_direction(const std::string & stem) {
    const auto meta = nlohmann::json::parse(read_text(stem + ".json"));
    const auto t = read_container(stem + ".tensors");
    BiasDirection d;
    d.vector = detail::need(t, "direction").data;
    d.method = meta.at("method").get<std::string>() == "mean_diff" ? DirectionMethod::mean_diff
                                                                   : DirectionMethod::linear_probe;
    d.layer = meta.at("layer").get<int>();
    d.family = meta.at("family").get<std::string>();
    d.source_model = meta.at("source_model").get<std::string>();
    return d;
}

inline std::string sweep_csv(const std::string & family, const std::vector<SweepRow> & rows) {
    std::string out = "family,layer,test_accuracy,train_accuracy,cv_mean,cv_std,converged,status\n";
    for (const auto & r : rows) {
        out += family + "," + std::to_string(r.layer) + ",";
        if (r.ok) {
            out += fmt_num(r.test_accuracy) + "," + fmt_num(r.train_accuracy) + "," + fmt_num(r.cv_mean) + "," +
                   fmt_num(r.cv_std) + "," + (r.converged ? "true" : "false") + ",ok\n";
        } else {
            out += ",,,,,failed\n";
        }
    }
    return out;
}

inline std::string permutation_csv_header() { return "family,layer,observed,null_mean,null_std,z,p,iterations\n"; }

inline std::string permutation_csv_row(const std::string & family, int layer, const StatResult & r) {
    return family + "," + std::to_string(layer) + "," + fmt_num(r.statistic) + "," + fmt_num(r.null_mean) + "," +
           fmt_num(r.null_std) + "," + (r.z_score ? fmt_num(*r.z_score) : std::string("undefined")) + "," +
           fmt_num(r.p_value) + "," + std::to_string(r.n_iterations) + "\n";
}

} // namespace cogsteer
