#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "cogsteer/bench/types.hpp"
#include "cogsteer/core/hash.hpp"
#include "cogsteer/model/weights.hpp"
#include "cogsteer/probe/dataset.hpp"
#include "cogsteer/probe/probes.hpp"
#include "cogsteer/remote/client.hpp"
#include "cogsteer/remote/fixtures.hpp"

namespace cogsteer {

class ConfigError : public ValidationError {
public:
    ConfigError(const std::string & path, const std::string & msg) : ValidationError("config " + path + ": " + msg) {}
};

namespace detail {

inline std::string json_type(const nlohmann::json & j) { return j.type_name(); }

// Typed access into one JSON object that reports errors by field path.
class ConfigReader {
public:
    ConfigReader(const nlohmann::json * j, std::string path) : j_(j), path_(std::move(path)) {
        if (j_ && !j_->is_object()) {
            throw ConfigError(path_, "expected an object, got " + json_type(*j_));
        }
    }

    std::string at(const std::string & key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string & key) const { return j_ && j_->contains(key) && !(*j_)[key].is_null(); }

    template <typename T>
    T get(const std::string & key, T fallback) const {
        if (!has(key)) {
            return fallback;
        }
        return convert<T>((*j_)[key], at(key));
    }

    template <typename T>
    T need(const std::string & key) const {
        if (!has(key)) {
            throw ConfigError(at(key), "required field is missing");
        }
        return convert<T>((*j_)[key], at(key));
    }

    ConfigReader child(const std::string & key) const {
        return ConfigReader(has(key) ? &(*j_)[key] : nullptr, at(key));
    }

    const nlohmann::json * raw(const std::string & key) const { return has(key) ? &(*j_)[key] : nullptr; }

    void only(const std::set<std::string> & known) const {
        if (!j_) {
            return;
        }
        for (const auto & [k, v] : j_->items()) {
            if (!known.contains(k)) {
                throw ConfigError(at(k), "unknown field");
            }
        }
    }

    template <typename T>
    static T convert(const nlohmann::json & v, const std::string & where) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) {
                throw ConfigError(where, "expected a boolean, got " + json_type(v));
            }
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) {
                throw ConfigError(where, "expected an integer, got " + json_type(v));
            }
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_unsigned()) {
                    return v.get<T>();
                }
                if (v.get<std::int64_t>() < 0) {
                    throw ConfigError(where, "expected a non-negative integer");
                }
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) {
                throw ConfigError(where, "expected a number, got " + json_type(v));
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) {
                throw ConfigError(where, "expected a string, got " + json_type(v));
            }
        } else {
            if (!v.is_array()) {
                throw ConfigError(where, "expected an array, got " + json_type(v));
            }
            T out;
            for (std::size_t i = 0; i < v.size(); ++i) {
                out.push_back(convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
            }
            return out;
        }
        return v.get<T>();
    }

private:
    const nlohmann::json * j_;
    std::string path_;
};

} // namespace detail

struct PlantedConfig {
    ModelSpec spec{32, 4, 4, 1024, 512, 0};
    double gain = 0.5;
    double plant_scale = 24.0;
    int plant_layer = 1;
    double trigger_score = 3.0;
    Family calibrate_family = Family::Response;
};

struct ModelConfig {
    std::string id = "desk";
    std::string path; // existing container; empty: build the planted model
    std::optional<PlantedConfig> planted;
};

struct DataConfig {
    std::vector<Family> families{std::begin(kAllFamilies), std::end(kAllFamilies)};
    int pairs_per_family = 200;
    int eval_per_family = 50;
};

struct ProbeStageConfig {
    ProbeConfig probe;
    int permutation_iterations = 50;
    bool mlp = false;
    std::optional<int> direction_layer; // empty: chosen from the sweep
    DirectionMethod method = DirectionMethod::mean_diff;
};

struct SteerConfig {
    std::string preset = "fine";
    std::vector<int> layers;    // empty: preset layers
    std::vector<double> alphas; // empty: preset alphas
    double capability_threshold = 0.5;
    bool robustness = true;
    int random_directions = 100;
    int orthogonal_directions = 20;
    bool cross_family = true;
    double cross_family_alpha = 1.0; // applied at the last grid layer
};

struct TrajectoryConfig {
    int prompts_per_family = 50;
    int max_new = 256;
    std::string summary = "mean";
};

struct ProfileInput {
    std::string name;
    Family family = Family::Judgment;
    std::string instances; // resolved path
    std::vector<std::string> models; // empty: every endpoint
};

struct DebiasComparison {
    std::string model;
    Family family = Family::Judgment;
    std::string metric;
    std::string neutral; // input name
    std::string biased;  // input name
};

struct ProfileConfig {
    std::vector<EndpointConfig> endpoints;
    std::string store; // resolved path
    FixtureMode mode = FixtureMode::replay;
    GenerationParams params;
    std::vector<ProfileInput> inputs;
    std::vector<DebiasComparison> debias;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "runs/desk";
    unsigned threads = 1;
    ModelConfig model;
    DataConfig data;
    std::vector<int> capture_layers; // empty: every layer from -1
    ProbeStageConfig probe;
    SteerConfig steer;
    TrajectoryConfig trajectory;
    std::optional<ProfileConfig> profile;
    std::string config_hash; // sha256 of the canonical config text
};

namespace detail {

inline std::string resolve_path(const std::string & base_dir, const std::string & p) {
    if (p.empty() || std::filesystem::path(p).is_absolute()) {
        return p;
    }
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

inline Family family_field(const ConfigReader & r, const std::string & key) {
    const auto s = r.need<std::string>(key);
    try {
        return parse_family(s);
    } catch (const Error &) {
        throw ConfigError(r.at(key), "unknown family '" + s + "'");
    }
}

} // namespace detail

// `base_dir` anchors relative input paths (normally the config file's
// directory); out_dir stays relative to the working directory.
inline RunConfig parse_run_config(const nlohmann::json & j, const std::string & base_dir = ".") {
    using detail::ConfigReader;
    const ConfigReader root(&j, "");
    root.only({"seed", "out_dir", "threads", "model", "data", "capture", "probe", "steer", "trajectory", "profile"});
    RunConfig c;
    c.seed = root.need<std::uint64_t>("seed");
    c.out_dir = root.get<std::string>("out_dir", c.out_dir);
    c.threads = root.get<unsigned>("threads", 1u);
    if (c.threads < 1) {
        throw ConfigError("threads", "must be >= 1");
    }

    const auto m = root.child("model");
    m.only({"id", "path", "planted"});
    c.model.id = m.get<std::string>("id", c.model.id);
    c.model.path = detail::resolve_path(base_dir, m.get<std::string>("path", ""));
    if (m.has("planted")) {
        const auto p = m.child("planted");
        p.only({"d_model", "n_layers", "n_heads", "vocab_size", "max_context", "d_ff", "gain", "plant_scale",
                "plant_layer", "trigger_score", "calibrate_family"});
        PlantedConfig pc;
        pc.spec.d_model = p.get<int>("d_model", pc.spec.d_model);
        pc.spec.n_layers = p.get<int>("n_layers", pc.spec.n_layers);
        pc.spec.n_heads = p.get<int>("n_heads", pc.spec.n_heads);
        pc.spec.vocab_size = p.get<int>("vocab_size", pc.spec.vocab_size);
        pc.spec.max_context = p.get<int>("max_context", pc.spec.max_context);
        pc.spec.d_ff = p.get<int>("d_ff", pc.spec.d_ff);
        try {
            pc.spec.validate();
        } catch (const ValidationError & e) {
            throw ConfigError(m.at("planted"), e.what());
        }
        pc.gain = p.get<double>("gain", pc.gain);
        pc.plant_scale = p.get<double>("plant_scale", pc.plant_scale);
        pc.plant_layer = p.get<int>("plant_layer", pc.plant_layer);
        if (pc.plant_layer < 0 || pc.plant_layer >= pc.spec.n_layers) {
            throw ConfigError(p.at("plant_layer"), "must lie in [0, n_layers)");
        }
        pc.trigger_score = p.get<double>("trigger_score", pc.trigger_score);
        if (p.has("calibrate_family")) {
            pc.calibrate_family = detail::family_field(p, "calibrate_family");
        }
        c.model.planted = pc;
    }
    if (c.model.path.empty() && !c.model.planted) {
        throw ConfigError("model", "needs either path or planted");
    }
    if (!c.model.path.empty() && !std::filesystem::exists(c.model.path)) {
        throw ConfigError("model.path", "file does not exist: " + c.model.path);
    }

    const auto d = root.child("data");
    d.only({"families", "pairs_per_family", "eval_per_family"});
    if (d.has("families")) {
        c.data.families.clear();
        const auto names = d.need<std::vector<std::string>>("families");
        for (std::size_t i = 0; i < names.size(); ++i) {
            try {
                c.data.families.push_back(parse_family(names[i]));
            } catch (const Error &) {
                throw ConfigError(d.at("families") + "[" + std::to_string(i) + "]", "unknown family '" + names[i] + "'");
            }
        }
        if (c.data.families.empty()) {
            throw ConfigError(d.at("families"), "must not be empty");
        }
    }
    c.data.pairs_per_family = d.get<int>("pairs_per_family", c.data.pairs_per_family);
    c.data.eval_per_family = d.get<int>("eval_per_family", c.data.eval_per_family);
    if (c.data.pairs_per_family < 10) {
        throw ConfigError(d.at("pairs_per_family"), "must be >= 10");
    }
    if (c.data.eval_per_family < 2) {
        throw ConfigError(d.at("eval_per_family"), "must be >= 2");
    }

    const auto cap = root.child("capture");
    cap.only({"layers"});
    c.capture_layers = cap.get<std::vector<int>>("layers", {});

    const auto pr = root.child("probe");
    pr.only({"reg", "max_iter", "standardize", "split_seed", "test_fraction", "cv_folds", "hidden", "epochs",
             "learning_rate", "permutation_iterations", "mlp", "direction_layer", "method"});
    auto & pc = c.probe.probe;
    pc.reg = pr.get<double>("reg", pc.reg);
    pc.max_iter = pr.get<int>("max_iter", pc.max_iter);
    pc.standardize = pr.get<bool>("standardize", pc.standardize);
    pc.split_seed = pr.get<std::uint64_t>("split_seed", pc.split_seed);
    pc.test_fraction = pr.get<double>("test_fraction", pc.test_fraction);
    pc.cv_folds = pr.get<int>("cv_folds", pc.cv_folds);
    pc.hidden = pr.get<int>("hidden", pc.hidden);
    pc.epochs = pr.get<int>("epochs", pc.epochs);
    pc.learning_rate = pr.get<double>("learning_rate", pc.learning_rate);
    pc.seed = derive_seed(c.seed, 0x9b0be5ULL);
    c.probe.permutation_iterations = pr.get<int>("permutation_iterations", c.probe.permutation_iterations);
    if (c.probe.permutation_iterations < 1) {
        throw ConfigError(pr.at("permutation_iterations"), "must be >= 1");
    }
    c.probe.mlp = pr.get<bool>("mlp", c.probe.mlp);
    if (pr.has("direction_layer")) {
        c.probe.direction_layer = pr.get<int>("direction_layer", 0);
    }
    const auto method = pr.get<std::string>("method", "mean_diff");
    if (method == "mean_diff") {
        c.probe.method = DirectionMethod::mean_diff;
    } else if (method == "linear_probe") {
        c.probe.method = DirectionMethod::linear_probe;
    } else {
        throw ConfigError(pr.at("method"), "must be mean_diff or linear_probe");
    }

    const auto st = root.child("steer");
    st.only({"preset", "layers", "alphas", "capability_threshold", "robustness", "random_directions",
             "orthogonal_directions", "cross_family", "cross_family_alpha"});
    c.steer.preset = st.get<std::string>("preset", c.steer.preset);
    if (c.steer.preset != "fine" && c.steer.preset != "coarse") {
        throw ConfigError(st.at("preset"), "must be fine or coarse");
    }
    c.steer.layers = st.get<std::vector<int>>("layers", {});
    c.steer.alphas = st.get<std::vector<double>>("alphas", {});
    c.steer.capability_threshold = st.get<double>("capability_threshold", c.steer.capability_threshold);
    if (!(c.steer.capability_threshold >= 0.0 && c.steer.capability_threshold <= 1.0)) {
        throw ConfigError(st.at("capability_threshold"), "must lie in [0, 1]");
    }
    c.steer.robustness = st.get<bool>("robustness", c.steer.robustness);
    c.steer.random_directions = st.get<int>("random_directions", c.steer.random_directions);
    c.steer.orthogonal_directions = st.get<int>("orthogonal_directions", c.steer.orthogonal_directions);
    if (c.steer.random_directions < 2 || c.steer.orthogonal_directions < 2) {
        throw ConfigError(st.at("random_directions"), "control direction counts must be >= 2");
    }
    c.steer.cross_family = st.get<bool>("cross_family", c.steer.cross_family);
    c.steer.cross_family_alpha = st.get<double>("cross_family_alpha", c.steer.cross_family_alpha);

    const auto tr = root.child("trajectory");
    tr.only({"prompts_per_family", "max_new", "summary"});
    c.trajectory.prompts_per_family = tr.get<int>("prompts_per_family", c.trajectory.prompts_per_family);
    c.trajectory.max_new = tr.get<int>("max_new", c.trajectory.max_new);
    c.trajectory.summary = tr.get<std::string>("summary", c.trajectory.summary);
    if (c.trajectory.summary != "mean" && c.trajectory.summary != "final") {
        throw ConfigError(tr.at("summary"), "must be mean or final");
    }
    if (c.trajectory.prompts_per_family < 2 || c.trajectory.max_new < 1) {
        throw ConfigError(tr.at("prompts_per_family"), "needs >= 2 prompts and max_new >= 1");
    }

    if (root.has("profile")) {
        const auto pf = root.child("profile");
        pf.only({"endpoints", "store", "mode", "max_tokens", "system_prompt", "inputs", "debias"});
        ProfileConfig p;
        const auto * eps = pf.raw("endpoints");
        if (!eps || !eps->is_array() || eps->empty()) {
            throw ConfigError(pf.at("endpoints"), "expected a nonempty array");
        }
        for (std::size_t i = 0; i < eps->size(); ++i) {
            const ConfigReader e(&(*eps)[i], pf.at("endpoints") + "[" + std::to_string(i) + "]");
            e.only({"base_url", "path", "model", "token_env", "timeout_s", "max_parallel", "backoff_ms"});
            EndpointConfig ep;
            ep.base_url = e.get<std::string>("base_url", "");
            ep.path = e.get<std::string>("path", ep.path);
            ep.model = e.need<std::string>("model");
            ep.token_env = e.get<std::string>("token_env", "");
            ep.timeout_s = e.get<double>("timeout_s", ep.timeout_s);
            ep.max_parallel = e.get<int>("max_parallel", ep.max_parallel);
            ep.backoff_ms = e.get<int>("backoff_ms", ep.backoff_ms);
            try {
                ep.validate();
            } catch (const ValidationError & err) {
                throw ConfigError(e.at(""), err.what());
            }
            p.endpoints.push_back(ep);
        }
        p.store = detail::resolve_path(base_dir, pf.need<std::string>("store"));
        try {
            p.mode = parse_fixture_mode(pf.get<std::string>("mode", "replay"));
        } catch (const ValidationError & err) {
            throw ConfigError(pf.at("mode"), err.what());
        }
        if (p.mode == FixtureMode::replay && !std::filesystem::exists(p.store)) {
            throw ConfigError(pf.at("store"), "replay store does not exist: " + p.store);
        }
        p.params.max_tokens = pf.get<int>("max_tokens", 512);
        p.params.use_system_prompt = pf.get<bool>("system_prompt", true);
        try {
            p.params.validate();
        } catch (const ValidationError & err) {
            throw ConfigError(pf.at("max_tokens"), err.what());
        }
        const auto * ins = pf.raw("inputs");
        if (!ins || !ins->is_array() || ins->empty()) {
            throw ConfigError(pf.at("inputs"), "expected a nonempty array");
        }
        std::set<std::string> names;
        for (std::size_t i = 0; i < ins->size(); ++i) {
            const ConfigReader e(&(*ins)[i], pf.at("inputs") + "[" + std::to_string(i) + "]");
            e.only({"name", "family", "instances", "models"});
            ProfileInput in;
            in.name = e.need<std::string>("name");
            in.family = detail::family_field(e, "family");
            in.instances = detail::resolve_path(base_dir, e.need<std::string>("instances"));
            if (!std::filesystem::exists(in.instances)) {
                throw ConfigError(e.at("instances"), "file does not exist: " + in.instances);
            }
            in.models = e.get<std::vector<std::string>>("models", {});
            for (const auto & m : in.models) {
                const bool known = std::any_of(p.endpoints.begin(), p.endpoints.end(),
                                               [&](const EndpointConfig & ep) { return ep.model == m; });
                if (!known) {
                    throw ConfigError(e.at("models"), "no endpoint for model '" + m + "'");
                }
            }
            if (!names.insert(in.name).second) {
                throw ConfigError(e.at("name"), "duplicate input name '" + in.name + "'");
            }
            p.inputs.push_back(in);
        }
        if (const auto * deb = pf.raw("debias")) {
            if (!deb->is_array()) {
                throw ConfigError(pf.at("debias"), "expected an array");
            }
            for (std::size_t i = 0; i < deb->size(); ++i) {
                const ConfigReader e(&(*deb)[i], pf.at("debias") + "[" + std::to_string(i) + "]");
                e.only({"model", "family", "metric", "neutral", "biased"});
                DebiasComparison dc;
                dc.model = e.need<std::string>("model");
                dc.family = detail::family_field(e, "family");
                dc.metric = e.need<std::string>("metric");
                dc.neutral = e.need<std::string>("neutral");
                dc.biased = e.need<std::string>("biased");
                for (const auto * n : {&dc.neutral, &dc.biased}) {
                    if (!names.contains(*n)) {
                        throw ConfigError(e.at(n == &dc.neutral ? "neutral" : "biased"), "unknown input '" + *n + "'");
                    }
                }
                p.debias.push_back(dc);
            }
        }
        c.profile = p;
    }
    c.config_hash = sha256_hex(j.dump());
    return c;
}

inline RunConfig load_run_config(const std::string & path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception & e) {
        throw FormatError("config " + path + ": " + e.what());
    }
    const auto dir = std::filesystem::path(path).parent_path().string();
    return parse_run_config(j, dir.empty() ? "." : dir);
}

} // namespace cogsteer
