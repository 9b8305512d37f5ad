#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cogsteer/bench/types.hpp"
#include "cogsteer/core/format.hpp"
#include "cogsteer/core/hash.hpp"
#include "cogsteer/core/parallel.hpp"
#include "cogsteer/model/transformer.hpp"
#include "cogsteer/probe/probes.hpp"

namespace cogsteer {

struct TrajectoryRecord {
    std::string prompt_id;
    std::string condition;
    int layer = 0;
    std::vector<double> values;
    Tokens tokens;
    std::string family; // optional metadata
    std::string model;

    void validate() const {
        require(condition == condition::bias_salient || condition == condition::debias,
                "trajectory condition must be bias_salient or debias, got '" + condition + "'");
        require(!values.empty(), "trajectory must hold at least one value");
        require(values.size() == tokens.size(), "trajectory values and tokens differ in length");
        for (double v : values) {
            if (!(v > 0.0 && v < 1.0)) {
                throw ValidationError("trajectory value outside (0, 1): " + fmt_num(v));
            }
        }
    }
};

// Keeps saturated sigmoids strictly inside (0, 1).
inline double open_unit(double v) {
    return std::clamp(v, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

inline TrajectoryRecord monitor(const ModelWeights & w, const std::vector<float> & weights, double bias,
                                std::span<const int> prompt, int layer, int max_new = 256,
                                const std::string & prompt_id = "", const std::string & cond = condition::bias_salient,
                                const std::optional<SteeringSpec> & steering = std::nullopt) {
    require(layer >= -1 && layer < w.spec().n_layers, "monitor layer out of range");
    require(static_cast<int>(weights.size()) == w.spec().d_model, "monitor direction length must equal d_model");
    const auto gen = generate_greedy(w, prompt, max_new, Monitor{layer, weights, bias}, steering);
    TrajectoryRecord r;
    r.prompt_id = prompt_id;
    r.condition = cond;
    r.layer = layer;
    r.tokens = gen.tokens;
    for (double v : *gen.probe_values) {
        r.values.push_back(open_unit(v));
    }
    r.validate();
    return r;
}

inline TrajectoryRecord monitor(const ModelWeights & w, const ProbeModel & probe, std::span<const int> prompt,
                                int max_new = 256, const std::string & prompt_id = "",
                                const std::string & cond = condition::bias_salient) {
    require(probe.kind == ProbeKind::linear, "monitoring needs a linear probe");
    const std::vector<float> wf(probe.weights.begin(), probe.weights.end());
    return monitor(w, wf, probe.bias, prompt, probe.layer, max_new, prompt_id, cond);
}

struct MonitorJob {
    std::string prompt_id;
    std::string condition;
    Tokens prompt;
};

inline std::vector<TrajectoryRecord> monitor_all(const ModelWeights & w, const ProbeModel & probe,
                                                 const std::vector<MonitorJob> & jobs, int max_new,
                                                 unsigned threads = 1) {
    std::vector<TrajectoryRecord> out(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        out[i] = monitor(w, probe, jobs[i].prompt, max_new, jobs[i].prompt_id, jobs[i].condition);
    });
    return out;
}

inline nlohmann::ordered_json trajectory_to_json(const TrajectoryRecord & r) {
    nlohmann::ordered_json j;
    j["prompt_id"] = r.prompt_id;
    j["condition"] = r.condition;
    j["layer"] = r.layer;
    if (!r.family.empty()) {
        j["family"] = r.family;
    }
    if (!r.model.empty()) {
        j["model"] = r.model;
    }
    j["values"] = r.values;
    j["tokens"] = r.tokens;
    return j;
}

inline TrajectoryRecord trajectory_from_json(const nlohmann::json & j) {
    try {
        TrajectoryRecord r;
        r.prompt_id = j.at("prompt_id").get<std::string>();
        r.condition = j.at("condition").get<std::string>();
        r.layer = j.at("layer").get<int>();
        r.family = j.value("family", "");
        r.model = j.value("model", "");
        r.values = j.at("values").get<std::vector<double>>();
        r.tokens = j.at("tokens").get<Tokens>();
        r.validate();
        return r;
    } catch (const nlohmann::json::exception & e) {
        throw FormatError(std::string("bad trajectory record: ") + e.what());
    }
}

inline std::string trajectories_jsonl(const std::vector<TrajectoryRecord> & recs) {
    std::string out;
    for (const auto & r : recs) {
        out += trajectory_to_json(r).dump() + "\n";
    }
    return out;
}

inline std::vector<TrajectoryRecord> parse_trajectories(const std::string & text) {
    std::vector<TrajectoryRecord> out;
    std::istringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception & e) {
            throw FormatError("trajectory line " + std::to_string(n) + ": " + e.what());
        }
        out.push_back(trajectory_from_json(j));
    }
    return out;
}

inline void save_trajectories(const std::string & path, const std::vector<TrajectoryRecord> & recs) {
    write_text(path, trajectories_jsonl(recs));
}

inline std::vector<TrajectoryRecord> load_trajectories(const std::string & path) {
    return parse_trajectories(read_text(path));
}

} // namespace cogsteer
