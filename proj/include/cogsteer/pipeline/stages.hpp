#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "cogsteer/bench/io.hpp"
#include "cogsteer/bench/synthetic.hpp"
#include "cogsteer/bench/templates.hpp"
#include "cogsteer/core/rng.hpp"
#include "cogsteer/core/svg.hpp"
#include "cogsteer/io/activation_store.hpp"
#include "cogsteer/model/planted.hpp"
#include "cogsteer/pipeline/config.hpp"
#include "cogsteer/probe/analysis.hpp"
#include "cogsteer/probe/export.hpp"
#include "cogsteer/remote/fixtures.hpp"
#include "cogsteer/remote/profile.hpp"
#include "cogsteer/steer/grid.hpp"
#include "cogsteer/steer/robustness.hpp"
#include "cogsteer/trajectory/render.hpp"
#include "cogsteer/trajectory/stats.hpp"

namespace cogsteer {

inline constexpr const char * kToolVersion = "0.1.0";

inline const std::vector<std::string> & stage_names() {
    static const std::vector<std::string> s = {"gen-data", "make-model", "capture", "probe",
                                               "steer",    "trajectory", "profile", "report"};
    return s;
}

class PrerequisiteError : public Error {
public:
    using Error::Error;
};

// Seed streams, one per stage task.
namespace seed_stream {
inline constexpr std::uint64_t pairs = 0x9a125ULL;
inline constexpr std::uint64_t eval = 0xe7a1ULL;
inline constexpr std::uint64_t plant = 0x91a27ULL;
inline constexpr std::uint64_t model = 0x30de1ULL;
inline constexpr std::uint64_t permutation = 0x9e3ULL;
inline constexpr std::uint64_t random_dirs = 0x7a2dULL;
inline constexpr std::uint64_t orthogonal_dirs = 0x0b7ULL;
} // namespace seed_stream

// Files of one stage under <out>/<stage>/, with a manifest of input and
// output hashes. Paths in the manifest are relative to <out>, external inputs
// are keyed by file name.
class StageArtifacts {
public:
    StageArtifacts(const RunConfig & cfg, std::string stage)
        : cfg_(cfg), root_(cfg.out_dir), stage_(std::move(stage)) {
        std::filesystem::remove_all(root_ / stage_);
        std::filesystem::create_directories(root_ / stage_);
    }

    std::string path(const std::string & name) const { return (root_ / stage_ / name).string(); }
    std::string rel(const std::string & name) const { return stage_ + "/" + name; }

    // An artifact from an earlier stage; missing ones raise a prerequisite error.
    std::string input(const std::string & rel_path, const std::string & producer) {
        const auto p = root_ / rel_path;
        if (!std::filesystem::exists(p)) {
            throw PrerequisiteError("missing prerequisite artifact " + rel_path + " (run the " + producer +
                                    " stage first)");
        }
        inputs_[rel_path] = sha256_file(p.string());
        return p.string();
    }

    bool has_input(const std::string & rel_path) const { return std::filesystem::exists(root_ / rel_path); }

    std::string external(const std::string & file) {
        inputs_["external:" + std::filesystem::path(file).filename().string()] = sha256_file(file);
        return file;
    }

    void wrote(const std::string & name) { outputs_[rel(name)] = sha256_file(path(name)); }

    void text(const std::string & name, const std::string & content) {
        write_text(path(name), content);
        wrote(name);
    }

    void json(const std::string & name, const nlohmann::ordered_json & j) { text(name, j.dump(2) + "\n"); }

    void finish() {
        nlohmann::ordered_json m;
        m["stage"] = stage_;
        m["version"] = kToolVersion;
        m["seed"] = cfg_.seed;
        m["config_hash"] = cfg_.config_hash;
        m["inputs"] = inputs_;
        m["outputs"] = outputs_;
        write_text(path("manifest.json"), m.dump(2) + "\n");
    }

private:
    const RunConfig & cfg_;
    std::filesystem::path root_;
    std::string stage_;
    std::map<std::string, std::string> inputs_;
    std::map<std::string, std::string> outputs_;
};

namespace detail {

inline std::string file_safe(const std::string & s) {
    std::string out;
    for (char c : s) {
        out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_';
    }
    return out;
}

inline std::vector<int> all_layers(const ModelSpec & spec) {
    std::vector<int> out;
    for (int l = -1; l < spec.n_layers; ++l) {
        out.push_back(l);
    }
    return out;
}

inline ModelWeights load_run_model(const RunConfig & cfg, StageArtifacts & a) {
    if (!cfg.model.path.empty()) {
        return load_container(a.external(cfg.model.path));
    }
    return load_container(a.input("make-model/model.tensors", "make-model"));
}

inline std::vector<ContrastivePair> load_pairs(StageArtifacts & a, Family f) {
    return parse_pairs(read_text(a.input("gen-data/pairs_" + family_name(f) + ".jsonl", "gen-data")));
}

inline std::vector<PairedInstance> load_eval(StageArtifacts & a, Family f) {
    return load_instances(a.input("gen-data/eval_" + family_name(f) + ".jsonl", "gen-data"));
}

inline nlohmann::ordered_json read_json(const std::string & path) {
    try {
        return nlohmann::ordered_json::parse(read_text(path));
    } catch (const nlohmann::json::exception & e) {
        throw FormatError(path + ": " + e.what());
    }
}

inline std::optional<double> report_metric(const FamilyReport & r, const std::string & metric) {
    if (metric == "mean_shift_pp") return r.mean_shift_pp;
    if (metric == "bias_rate") return r.bias_rate;
    if (metric == "order_bias") return r.order_bias;
    if (metric == "accuracy") return r.accuracy;
    if (metric == "p_first") return r.p_first;
    if (metric == "position_independence") return r.position_independence;
    throw ValidationError("unknown report metric '" + metric + "'");
}

} // namespace detail

inline void stage_gen_data(const RunConfig & cfg) {
    StageArtifacts a(cfg, "gen-data");
    nlohmann::ordered_json summary;
    for (Family f : cfg.data.families) {
        const auto pairs =
            generate_contrastive_pairs(f, cfg.data.pairs_per_family, derive_seed(cfg.seed, seed_stream::pairs));
        const auto eval = generate_instances(f, cfg.data.eval_per_family, derive_seed(cfg.seed, seed_stream::eval),
                                             guidance_text(f, true));
        a.text("pairs_" + family_name(f) + ".jsonl", serialize_pairs(pairs));
        a.text("eval_" + family_name(f) + ".jsonl", serialize_instances(eval));
        summary[family_name(f)] = {{"pairs", pairs.size()}, {"eval_instances", eval.size()}};
    }
    a.json("summary.json", summary);
    a.finish();
}

struct DeskModel {
    ModelWeights weights;
    std::vector<float> planted;
    PlantOptions options;
};

// Planted model whose readout offset is calibrated on every variant of
// `calibration` instances.
inline DeskModel make_desk_model(const PlantedConfig & pc, std::uint64_t seed,
                                 const std::vector<PairedInstance> & calibration) {
    const auto tok = make_tokenizer(pc.spec.vocab_size);
    DeskModel m;
    Rng rng(derive_seed(seed, seed_stream::plant));
    m.planted.resize(static_cast<std::size_t>(pc.spec.d_model));
    for (auto & x : m.planted) {
        x = static_cast<float>(rng.normal());
    }
    PlantOptions opts;
    opts.plant_layer = pc.plant_layer;
    opts.plant_scale = pc.plant_scale;
    opts.trigger_score = pc.trigger_score;
    for (const auto & w : bias_trigger_words()) {
        opts.trigger_tokens.push_back(tok.encode(w).at(0));
    }
    std::vector<std::vector<int>> cal;
    for (const auto & inst : calibration) {
        for (const auto & [cond, text] : inst.variants) {
            cal.push_back(tok.encode(text));
        }
    }
    const std::uint64_t model_seed = derive_seed(seed, seed_stream::model);
    m.options = calibrate_readout_offset(pc.spec, m.planted, pc.gain, model_seed, opts, cal);
    m.weights = build_planted_model(pc.spec, m.planted, pc.gain, model_seed, m.options);
    return m;
}

inline void stage_make_model(const RunConfig & cfg) {
    if (!cfg.model.planted) {
        throw ValidationError("make-model needs a model.planted block");
    }
    StageArtifacts a(cfg, "make-model");
    const auto & pc = *cfg.model.planted;
    const auto desk = make_desk_model(pc, cfg.seed, detail::load_eval(a, pc.calibrate_family));
    const auto & model = desk.weights;
    const auto & planted = desk.planted;
    const auto & opts = desk.options;
    save_container(a.path("model.tensors"), model);
    a.wrote("model.tensors");

    BiasDirection d;
    d.vector = planted;
    d.layer = pc.plant_layer;
    d.family = "planted";
    d.source_model = cfg.model.id;
    save_direction(a.path("planted"), d);
    a.wrote("planted.tensors");
    a.wrote("planted.json");

    nlohmann::ordered_json j;
    j["id"] = cfg.model.id;
    j["d_model"] = pc.spec.d_model;
    j["n_layers"] = pc.spec.n_layers;
    j["n_heads"] = pc.spec.n_heads;
    j["vocab_size"] = pc.spec.vocab_size;
    j["max_context"] = pc.spec.max_context;
    j["gain"] = pc.gain;
    j["plant_layer"] = pc.plant_layer;
    j["plant_scale"] = pc.plant_scale;
    j["trigger_score"] = pc.trigger_score;
    j["trigger_tokens"] = opts.trigger_tokens.size();
    j["readout_offset"] = opts.readout_offset;
    j["calibrate_family"] = family_name(pc.calibrate_family);
    a.json("model.json", j);
    a.finish();
}

inline void stage_capture(const RunConfig & cfg) {
    StageArtifacts a(cfg, "capture");
    const auto w = detail::load_run_model(cfg, a);
    const auto tok = make_tokenizer(w.spec().vocab_size);
    const auto layers = cfg.capture_layers.empty() ? detail::all_layers(w.spec()) : cfg.capture_layers;
    for (Family f : cfg.data.families) {
        const auto pairs = detail::load_pairs(a, f);
        const auto caps = capture_pairs(w, tok, pairs, layers, cfg.threads);
        save_activations(a.path("activations_" + family_name(f) + ".tensors"), caps);
        a.wrote("activations_" + family_name(f) + ".tensors");
    }
    a.json("summary.json", {{"layers", layers}, {"d_model", w.spec().d_model}});
    a.finish();
}

// Highest test accuracy, then highest CV mean, then the deeper layer.
inline int choose_probe_layer(const std::vector<SweepRow> & rows) {
    const SweepRow * best = nullptr;
    for (const auto & r : rows) {
        if (!r.ok) {
            continue;
        }
        if (!best || r.test_accuracy > best->test_accuracy ||
            (r.test_accuracy == best->test_accuracy &&
             (r.cv_mean > best->cv_mean || (r.cv_mean == best->cv_mean && r.layer > best->layer)))) {
            best = &r;
        }
    }
    if (!best) {
        throw ValidationError("every layer of the probe sweep failed");
    }
    return best->layer;
}

inline void stage_probe(const RunConfig & cfg) {
    StageArtifacts a(cfg, "probe");
    const std::string model_id = cfg.model.id;
    std::optional<BiasDirection> planted;
    if (cfg.model.path.empty() && a.has_input("make-model/planted.tensors")) {
        a.input("make-model/planted.tensors", "make-model");
        planted = load_direction((std::filesystem::path(cfg.out_dir) / "make-model/planted").string());
    }
    std::string perm_csv = permutation_csv_header();
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
    std::vector<BiasDirection> family_dirs;
    for (Family f : cfg.data.families) {
        const std::string fam = family_name(f);
        const auto caps = load_activations(a.input("capture/activations_" + fam + ".tensors", "capture"));
        std::vector<int> layers;
        for (const auto & c : caps) {
            if (std::find(layers.begin(), layers.end(), c.layer) == layers.end()) {
                layers.push_back(c.layer);
            }
        }
        std::sort(layers.begin(), layers.end());
        const auto sweep = layer_sweep(caps, layers, cfg.probe.probe, {}, cfg.threads);
        a.text("sweep_" + fam + ".csv", sweep_csv(fam, sweep));

        int layer = cfg.probe.direction_layer.value_or(0);
        if (cfg.probe.direction_layer) {
            require(std::find(layers.begin(), layers.end(), layer) != layers.end(),
                    "probe.direction_layer " + std::to_string(layer) + " was not captured");
        } else {
            layer = choose_probe_layer(sweep);
        }
        const auto set = assemble_set(caps, layer);
        auto probe = train_linear_probe(set, cfg.probe.probe);
        const auto cv = cross_validate(set, cfg.probe.probe);
        probe.eval.cv_mean = cv.mean;
        probe.eval.cv_std = cv.std;
        probe.family = fam;
        probe.source_model = model_id;
        save_probe(a.path("probe_" + fam), probe);
        a.wrote("probe_" + fam + ".tensors");
        a.wrote("probe_" + fam + ".json");

        const auto perm = permutation_test(set, cfg.probe.probe, cfg.probe.permutation_iterations,
                                           derive_seed(cfg.seed, seed_stream::permutation, static_cast<int>(f)),
                                           cfg.threads);
        perm_csv += permutation_csv_row(fam, layer, perm);

        BiasDirection dir = cfg.probe.method == DirectionMethod::mean_diff ? mean_diff_direction(set)
                                                                          : probe.as_direction();
        dir.layer = layer;
        dir.family = fam;
        dir.source_model = model_id;
        save_direction(a.path("direction_" + fam), dir);
        a.wrote("direction_" + fam + ".tensors");
        a.wrote("direction_" + fam + ".json");
        family_dirs.push_back(dir);

        // mean-difference direction at every layer, compared across layers
        std::vector<BiasDirection> per_layer;
        std::vector<int> ok_layers;
        for (int l : layers) {
            try {
                per_layer.push_back(mean_diff_direction(assemble_set(caps, l)));
                ok_layers.push_back(l);
            } catch (const Error &) {
            }
        }
        if (!per_layer.empty()) {
            const auto cos = direction_cosine_matrix(per_layer);
            std::string csv = "layer";
            for (int l : ok_layers) {
                csv += "," + std::to_string(l);
            }
            csv += "\n";
            for (std::size_t i = 0; i < cos.size(); ++i) {
                csv += std::to_string(ok_layers[i]);
                for (double v : cos[i]) {
                    csv += "," + fmt_num(v);
                }
                csv += "\n";
            }
            a.text("layer_cosine_" + fam + ".csv", csv);
        }

        nlohmann::ordered_json fj;
        fj["layer"] = layer;
        fj["method"] = method_name(dir.method);
        fj["test_accuracy"] = probe.eval.test_accuracy;
        fj["train_accuracy"] = probe.eval.train_accuracy;
        fj["cv_mean"] = cv.mean;
        fj["cv_std"] = cv.std;
        fj["permutation"] = {{"observed", perm.statistic},
                             {"null_mean", perm.null_mean},
                             {"null_std", perm.null_std},
                             {"p", perm.p_value},
                             {"iterations", perm.n_iterations}};
        if (perm.z_score) {
            fj["permutation"]["z"] = *perm.z_score;
        }
        if (planted) {
            fj["cosine_to_planted"] = direction_cosine_matrix({dir, *planted})[0][1];
        }
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (const auto & r : sweep) {
            rows.push_back({{"layer", r.layer}, {"ok", r.ok}, {"test_accuracy", r.test_accuracy},
                            {"cv_mean", r.cv_mean}, {"cv_std", r.cv_std}});
        }
        fj["sweep"] = rows;
        if (cfg.probe.mlp) {
            auto mlp = train_mlp_probe(set, cfg.probe.probe);
            mlp.family = fam;
            mlp.source_model = model_id;
            save_probe(a.path("mlp_" + fam), mlp);
            a.wrote("mlp_" + fam + ".tensors");
            a.wrote("mlp_" + fam + ".json");
            fj["mlp_test_accuracy"] = mlp.eval.test_accuracy;
        }
        summary[fam] = fj;
    }
    a.text("permutation.csv", perm_csv);
    if (family_dirs.size() > 1) {
        const auto cos = direction_cosine_matrix(family_dirs);
        std::string csv = "family";
        for (const auto & d : family_dirs) {
            csv += "," + d.family;
        }
        csv += "\n";
        for (std::size_t i = 0; i < cos.size(); ++i) {
            csv += family_dirs[i].family;
            for (double v : cos[i]) {
                csv += "," + fmt_num(v);
            }
            csv += "\n";
        }
        a.text("family_cosine.csv", csv);
    }
    a.json("summary.json", summary);
    a.finish();
}

inline void stage_steer(const RunConfig & cfg) {
    StageArtifacts a(cfg, "steer");
    const auto w = detail::load_run_model(cfg, a);
    const auto tok = make_tokenizer(w.spec().vocab_size);
    const auto & sc = cfg.steer;
    std::vector<int> layers = sc.layers;
    if (layers.empty()) {
        if (sc.preset == "fine") {
            for (int l = 1; l <= 3 && l < w.spec().n_layers; ++l) {
                layers.push_back(l);
            }
        } else {
            layers = coarse_layers(w.spec().n_layers);
        }
    }
    for (int l : layers) {
        if (l < 0 || l >= w.spec().n_layers) {
            throw ConfigError("steer.layers", "layer " + std::to_string(l) + " is outside the model");
        }
    }
    const auto alphas = !sc.alphas.empty() ? sc.alphas : (sc.preset == "fine" ? fine_alphas() : coarse_alphas());
    validate_axes(layers, alphas);

    const auto qa = self_consistent_qa(w, tok, factual_qa_set());
    const double baseline_cap = capability_probe(w, tok, qa);

    std::map<Family, std::vector<EvalTask>> task_sets;
    std::map<Family, BiasDirection> dirs;
    std::string pareto_csv =
        "family,model,layer,alpha,bias_score,capability,baseline_bias,baseline_capability,threshold,delta_bias,status\n";
    std::string dose_csv = "family,rho,rho_defined,slope,intercept,n\n";
    std::string robust_csv = "family,control,layer,alpha,learned_effect,control_mean,cohens_d,t,df,p_learned_stronger,"
                             "n_learned,n_controls,status\n";
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
    summary["layers"] = layers;
    summary["alphas"] = alphas;
    summary["baseline_capability"] = baseline_cap;

    for (Family f : cfg.data.families) {
        const std::string fam = family_name(f);
        auto tasks = prepare_tasks(detail::load_eval(a, f), tok);
        cache_residuals(w, tasks, layers, cfg.threads);
        const auto dir = load_direction(
            std::filesystem::path(a.input("probe/direction_" + fam + ".tensors", "probe")).replace_extension("").string());
        a.input("probe/direction_" + fam + ".json", "probe");
        const auto base = evaluate_tasks(w, tasks, std::nullopt, cfg.threads);

        const auto grid = grid_search(w, tok, dir.vector, layers, alphas, tasks, qa, fam, cfg.model.id, cfg.threads);
        a.text("grid_" + fam + ".csv", grid_csv(grid));
        a.text("heatmap_bias_" + fam + ".svg", grid_heatmap(grid));
        a.text("heatmap_capability_" + fam + ".svg", grid_heatmap(grid, true));

        nlohmann::ordered_json fj;
        fj["baseline_bias"] = base.bias_score;
        fj["direction_layer"] = dir.layer;
        std::optional<ParetoChoice> choice;
        try {
            choice = pareto_select(grid, baseline_cap, sc.capability_threshold);
            pareto_csv += fam + "," + cfg.model.id + "," + std::to_string(choice->layer) + "," +
                          fmt_num(choice->alpha) + "," + fmt_num(choice->bias_score) + "," +
                          fmt_num(choice->capability) + "," + fmt_num(base.bias_score) + "," +
                          fmt_num(baseline_cap) + "," + fmt_num(sc.capability_threshold) + "," +
                          fmt_num(choice->bias_score - base.bias_score) + ",ok\n";
            fj["pareto"] = {{"layer", choice->layer},
                            {"alpha", choice->alpha},
                            {"bias_score", choice->bias_score},
                            {"capability", choice->capability},
                            {"delta_bias", choice->bias_score - base.bias_score}};
        } catch (const ValidationError & e) {
            pareto_csv += fam + "," + cfg.model.id + ",,,,," + fmt_num(base.bias_score) + "," +
                          fmt_num(baseline_cap) + "," + fmt_num(sc.capability_threshold) + ",,infeasible\n";
            fj["pareto"] = {{"error", e.what()}};
        }
        try {
            const auto d = dose_response(grid);
            dose_csv += fam + "," + fmt_num(d.rho) + "," + (d.rho_defined ? "true" : "false") + "," +
                        fmt_num(d.slope) + "," + fmt_num(d.intercept) + "," + std::to_string(d.n) + "\n";
            fj["dose_response"] = {{"rho", d.rho}, {"rho_defined", d.rho_defined}, {"slope", d.slope}};
        } catch (const ValidationError & e) {
            dose_csv += fam + ",,,,," + std::to_string(grid.rows.size()) + "\n";
            fj["dose_response"] = {{"error", e.what()}};
        }

        if (sc.robustness) {
            // reference cell: the Pareto choice, or the strongest cell when
            // the choice leaves the model unsteered
            int rl = layers.back();
            double ra = alphas.back();
            if (choice && choice->alpha != 0.0) {
                rl = choice->layer;
                ra = choice->alpha;
            }
            const double norm = dir.norm();
            const std::map<std::string, std::vector<std::vector<float>>> controls = {
                {"random", random_directions(w.spec().d_model, sc.random_directions, norm,
                                             derive_seed(cfg.seed, seed_stream::random_dirs, static_cast<int>(f)))},
                {"orthogonal", orthogonal_directions(dir.vector, sc.orthogonal_directions,
                                                     derive_seed(cfg.seed, seed_stream::orthogonal_dirs,
                                                                 static_cast<int>(f)))}};
            nlohmann::ordered_json rj = nlohmann::ordered_json::object();
            for (const auto & [kind, dirs_k] : controls) {
                std::string row = fam + "," + kind + "," + std::to_string(rl) + "," + fmt_num(ra) + ",";
                try {
                    const auto br = direction_baseline(w, tasks, dir.vector, dirs_k, rl, ra, cfg.threads);
                    row += fmt_num(br.learned_effect) + "," + fmt_num(stats::mean(br.control_effects)) + "," +
                           fmt_num(br.stats.cohens_d) + "," + fmt_num(br.stats.t_statistic) + "," +
                           fmt_num(br.stats.df) + "," + fmt_num(br.p_learned_stronger) + "," +
                           std::to_string(br.learned_deltas.size()) + "," + std::to_string(dirs_k.size()) + ",ok\n";
                    rj[kind] = {{"learned_effect", br.learned_effect},
                                {"control_mean", stats::mean(br.control_effects)},
                                {"cohens_d", br.stats.cohens_d},
                                {"p_learned_stronger", br.p_learned_stronger},
                                {"control_hashes", br.control_hashes}};
                } catch (const Error & e) {
                    row += ",,,,,,," + std::to_string(dirs_k.size()) + ",undefined\n";
                    rj[kind] = {{"error", e.what()}};
                }
                robust_csv += row;
            }
            fj["robustness"] = rj;
        }
        summary[fam] = fj;
        task_sets[f] = std::move(tasks);
        dirs[f] = dir;
    }
    a.text("pareto.csv", pareto_csv);
    a.text("dose_response.csv", dose_csv);
    if (sc.robustness) {
        a.text("robustness.csv", robust_csv);
    }
    if (sc.cross_family && dirs.size() == 4) {
        const auto cf = cross_family_matrix(w, dirs, task_sets, layers.back(), sc.cross_family_alpha, cfg.threads);
        std::string csv = "direction\\tasks";
        for (const auto & n : cf.families) {
            csv += "," + n;
        }
        csv += "\n";
        for (std::size_t i = 0; i < cf.delta.size(); ++i) {
            csv += cf.families[i];
            for (double v : cf.delta[i]) {
                csv += "," + fmt_num(v);
            }
            csv += "\n";
        }
        a.text("cross_family.csv", csv);
        summary["cross_family"] = {{"layer", layers.back()},
                                   {"alpha", sc.cross_family_alpha},
                                   {"same_family_mean", cf.same_family_mean},
                                   {"cross_family_mean", cf.cross_family_mean},
                                   {"t", cf.paired.t},
                                   {"p", cf.paired.p_two_sided}};
    }
    a.json("summary.json", summary);
    a.finish();
}

inline void stage_trajectory(const RunConfig & cfg) {
    StageArtifacts a(cfg, "trajectory");
    const auto w = detail::load_run_model(cfg, a);
    const auto tok = make_tokenizer(w.spec().vocab_size);
    const auto summary_kind = cfg.trajectory.summary == "final" ? TrajectorySummary::final : TrajectorySummary::mean;
    std::string csv = trajectory_stats_csv_header();
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
    for (Family f : cfg.data.families) {
        const std::string fam = family_name(f);
        const auto probe_path = a.input("probe/probe_" + fam + ".tensors", "probe");
        a.input("probe/probe_" + fam + ".json", "probe");
        const auto probe = load_probe(std::filesystem::path(probe_path).replace_extension("").string());
        const auto pairs = detail::load_pairs(a, f);
        std::vector<MonitorJob> jobs;
        const std::size_t n = std::min<std::size_t>(pairs.size(), static_cast<std::size_t>(cfg.trajectory.prompts_per_family));
        for (std::size_t i = 0; i < n; ++i) {
            jobs.push_back({pairs[i].id, condition::bias_salient, tok.encode(pairs[i].bias_prompt)});
            jobs.push_back({pairs[i].id, condition::debias, tok.encode(pairs[i].debias_prompt)});
        }
        auto recs = monitor_all(w, probe, jobs, cfg.trajectory.max_new, cfg.threads);
        std::vector<TrajectoryRecord> salient;
        std::vector<TrajectoryRecord> debias;
        for (auto & r : recs) {
            r.family = fam;
            r.model = cfg.model.id;
            (r.condition == condition::bias_salient ? salient : debias).push_back(r);
        }
        a.text("trajectories_" + fam + ".jsonl", trajectories_jsonl(recs));
        const auto st = trajectory_stats(salient, debias, std::nullopt, summary_kind);
        csv += trajectory_stats_csv_row(fam, cfg.model.id, st);

        std::vector<std::string> texts;
        for (int t : salient.front().tokens) {
            texts.push_back(tok.token_text(t));
        }
        a.text("highlight_" + fam + ".svg",
               render_highlight(salient.front(), texts, fam + " " + salient.front().prompt_id + " (bias-salient)"));
        const auto bs = mean_band(salient);
        const auto bd = mean_band(debias);
        a.text("mean_" + fam + ".svg",
               svg::line_chart(fam + " probe output per generated token (mean, 1 SE band)", "token", "P(bias-salient)",
                               {{"bias_salient", bs.t, bs.mean, bs.se}, {"debias", bd.t, bd.mean, bd.se}},
                               std::make_pair(0.0, 1.0)));
        summary[fam] = {{"layer", probe.layer},
                        {"auc", st.auc},
                        {"cohens_d", st.cohens_d},
                        {"stability", st.stability},
                        {"stability_bias_salient", st.stability_a},
                        {"stability_debias", st.stability_b},
                        {"n", n}};
    }
    a.text("stats.csv", csv);
    a.json("summary.json", summary);
    a.finish();
}

inline void stage_profile(const RunConfig & cfg) {
    if (!cfg.profile) {
        throw ValidationError("profile stage needs a profile block in the config");
    }
    const auto & pc = *cfg.profile;
    StageArtifacts a(cfg, "profile");
    auto store = record_replay(pc.mode, pc.store);
    if (pc.mode == FixtureMode::replay) {
        a.external(pc.store);
    }
    const Transport transport = store->wrap(pc.mode == FixtureMode::record ? http_transport() : Transport{});
    std::string csv = "model,input," + FamilyReport::csv_header() + ",requests\n";
    std::map<std::pair<std::string, std::string>, FamilyReport> reports;
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
    for (const auto & ep : pc.endpoints) {
        for (const auto & in : pc.inputs) {
            if (!in.models.empty() && std::find(in.models.begin(), in.models.end(), ep.model) == in.models.end()) {
                continue;
            }
            const auto instances = load_instances(a.external(in.instances));
            ProfileOptions opts;
            opts.params = pc.params;
            const std::string stem = detail::file_safe(ep.model) + "__" + detail::file_safe(in.name);
            ProfileResult r;
            try {
                r = profile_family(ep, transport, instances, in.family, opts);
            } catch (const ProfileError & e) {
                a.json(stem + ".partial.json", {{"cursor", e.cursor()}, {"error", e.what()}});
                throw;
            }
            a.text("log_" + stem + ".jsonl", query_log_jsonl(r.log));
            auto j = family_report_json(r.report);
            j["model"] = ep.model;
            j["input"] = in.name;
            j["requests"] = r.requests;
            a.json(stem + ".json", j);
            csv += ep.model + "," + in.name + "," + r.report.csv_row() + "," + std::to_string(r.requests) + "\n";
            reports[{ep.model, in.name}] = r.report;
            summary[ep.model][in.name] = j;
        }
    }
    a.text("profile.csv", csv);
    if (!pc.debias.empty()) {
        std::string dcsv = "model,family,metric,neutral,biased,delta\n";
        for (const auto & d : pc.debias) {
            const auto n = reports.find({d.model, d.neutral});
            const auto b = reports.find({d.model, d.biased});
            if (n == reports.end() || b == reports.end()) {
                throw ValidationError("debias comparison refers to model '" + d.model + "' which was not profiled");
            }
            const auto mn = detail::report_metric(n->second, d.metric);
            const auto mb = detail::report_metric(b->second, d.metric);
            if (!mn || !mb) {
                throw ValidationError("metric " + d.metric + " is undefined for " + family_name(d.family));
            }
            const double delta = debias_delta(*mn, *mb);
            dcsv += d.model + "," + family_name(d.family) + "," + d.metric + "," + fmt_num(*mn) + "," + fmt_num(*mb) +
                    "," + fmt_num(delta) + "\n";
        }
        a.text("debias.csv", dcsv);
    }
    a.json("summary.json", summary);
    a.finish();
}

inline void stage_report(const RunConfig & cfg) {
    const std::filesystem::path root(cfg.out_dir);
    std::vector<std::string> present;
    for (const auto & st : stage_names()) {
        if (st != "report" && std::filesystem::exists(root / st / "summary.json")) {
            present.push_back(st);
        }
    }
    if (present.empty()) {
        throw PrerequisiteError("no stage artifacts under " + cfg.out_dir + " (run gen-data first)");
    }
    StageArtifacts a(cfg, "report");
    std::map<std::string, nlohmann::ordered_json> sums;
    for (const auto & st : present) {
        sums[st] = detail::read_json(a.input(st + "/summary.json", st));
    }
    std::string md = "# Run report: " + cfg.model.id + "\n\nseed " + std::to_string(cfg.seed) + ", config " +
                     cfg.config_hash.substr(0, 12) + "\n";
    std::vector<std::string> figures;

    if (sums.contains("probe")) {
        md += "\n## Probes\n\n| family | layer | test acc | cv mean | cv std | perm z | perm p | cos(planted) |\n"
              "|---|---|---|---|---|---|---|---|\n";
        std::vector<svg::Series> series;
        for (const auto & [fam, fj] : sums["probe"].items()) {
            const auto & perm = fj["permutation"];
            md += "| " + fam + " | " + std::to_string(fj["layer"].get<int>()) + " | " +
                  fmt_fixed(fj["test_accuracy"].get<double>(), 3) + " | " + fmt_fixed(fj["cv_mean"].get<double>(), 3) +
                  " | " + fmt_fixed(fj["cv_std"].get<double>(), 3) + " | " +
                  (perm.contains("z") ? fmt_fixed(perm["z"].get<double>(), 2) : std::string("-")) + " | " +
                  fmt_fixed(perm["p"].get<double>(), 4) + " | " +
                  (fj.contains("cosine_to_planted") ? fmt_fixed(fj["cosine_to_planted"].get<double>(), 3)
                                                    : std::string("-")) +
                  " |\n";
            svg::Series sr;
            sr.name = fam;
            for (const auto & r : fj["sweep"]) {
                if (r["ok"].get<bool>()) {
                    sr.x.push_back(r["layer"].get<int>());
                    sr.y.push_back(r["cv_mean"].get<double>());
                    sr.band.push_back(r["cv_std"].get<double>());
                }
            }
            series.push_back(std::move(sr));
        }
        a.text("layer_accuracy.svg", svg::line_chart("Probe CV accuracy by layer (band: 1 std)", "layer",
                                                     "accuracy", series, std::make_pair(0.0, 1.0)));
        figures.push_back("report/layer_accuracy.svg");
    }
    if (sums.contains("steer")) {
        const auto & sj = sums["steer"];
        md += "\n## Steering\n\nbaseline capability " + fmt_fixed(sj["baseline_capability"].get<double>(), 3) +
              "\n\n| family | baseline bias | layer | alpha | bias | capability | delta | rho |\n"
              "|---|---|---|---|---|---|---|---|\n";
        for (Family f : cfg.data.families) {
            const auto fam = family_name(f);
            if (!sj.contains(fam)) {
                continue;
            }
            const auto & fj = sj[fam];
            const auto & pj = fj["pareto"];
            md += "| " + fam + " | " + fmt_fixed(fj["baseline_bias"].get<double>(), 3) + " | ";
            if (pj.contains("layer")) {
                md += std::to_string(pj["layer"].get<int>()) + " | " + fmt_num(pj["alpha"].get<double>()) + " | " +
                      fmt_fixed(pj["bias_score"].get<double>(), 3) + " | " +
                      fmt_fixed(pj["capability"].get<double>(), 3) + " | " +
                      fmt_fixed(pj["delta_bias"].get<double>(), 3) + " | ";
            } else {
                md += "- | - | - | - | - | ";
            }
            const auto & dj = fj["dose_response"];
            md += (dj.contains("rho") && dj["rho_defined"].get<bool>() ? fmt_fixed(dj["rho"].get<double>(), 3)
                                                                      : std::string("-")) +
                  " |\n";
            figures.push_back("steer/heatmap_bias_" + fam + ".svg");
            figures.push_back("steer/heatmap_capability_" + fam + ".svg");
        }
        if (sj.contains("cross_family")) {
            const auto & cj = sj["cross_family"];
            md += "\nCross-family transfer at layer " + std::to_string(cj["layer"].get<int>()) + ": same-family mean " +
                  fmt_fixed(cj["same_family_mean"].get<double>(), 3) + ", cross-family mean " +
                  fmt_fixed(cj["cross_family_mean"].get<double>(), 3) + " (see steer/cross_family.csv)\n";
        }
    }
    if (sums.contains("trajectory")) {
        md += "\n## Trajectories\n\n| family | layer | AUC | Cohen's d | stability |\n|---|---|---|---|---|\n";
        for (const auto & [fam, fj] : sums["trajectory"].items()) {
            md += "| " + fam + " | " + std::to_string(fj["layer"].get<int>()) + " | " +
                  fmt_fixed(fj["auc"].get<double>(), 3) + " | " +
                  (fj["cohens_d"].is_number() ? fmt_fixed(fj["cohens_d"].get<double>(), 3) : std::string("-")) +
                  " | " + fmt_fixed(fj["stability"].get<double>(), 3) + " |\n";
            figures.push_back("trajectory/mean_" + fam + ".svg");
            figures.push_back("trajectory/highlight_" + fam + ".svg");
        }
    }
    if (sums.contains("profile")) {
        md += "\n## Remote profiles\n\nSee profile/profile.csv";
        if (std::filesystem::exists(root / "profile" / "debias.csv")) {
            md += " and profile/debias.csv";
        }
        md += ".\n";
    }
    if (!figures.empty()) {
        md += "\n## Figures\n\n";
        for (const auto & f : figures) {
            md += "- [" + f + "](../" + f + ")\n";
        }
    }
    a.text("report.md", md);
    a.finish();
}

inline void run_stage(const std::string & stage, const RunConfig & cfg) {
    if (stage == "gen-data") {
        stage_gen_data(cfg);
    } else if (stage == "make-model") {
        stage_make_model(cfg);
    } else if (stage == "capture") {
        stage_capture(cfg);
    } else if (stage == "probe") {
        stage_probe(cfg);
    } else if (stage == "steer") {
        stage_steer(cfg);
    } else if (stage == "trajectory") {
        stage_trajectory(cfg);
    } else if (stage == "profile") {
        stage_profile(cfg);
    } else if (stage == "report") {
        stage_report(cfg);
    } else if (stage == "all") {
        for (const auto & st : stage_names()) {
            if (st == "make-model" && !cfg.model.path.empty()) {
                continue;
            }
            if (st == "profile" && !cfg.profile) {
                continue;
            }
            run_stage(st, cfg);
        }
    } else {
        throw ValidationError("unknown stage '" + stage + "'");
    }
}

} // namespace cogsteer
