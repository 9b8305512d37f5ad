#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cogsteer/bench/synthetic.hpp"
#include "cogsteer/bench/types.hpp"
#include "cogsteer/core/error.hpp"

namespace cogsteer {

inline nlohmann::ordered_json instance_to_json(const PairedInstance & inst) {
    nlohmann::ordered_json j;
    j["id"] = inst.id;
    j["family"] = family_name(inst.family);
    j["category"] = inst.category;
    if (inst.subtype) {
        j["subtype"] = *inst.subtype;
    }
    j["variants"] = nlohmann::ordered_json::object();
    for (const auto & [cond, text] : inst.variants) {
        j["variants"][cond] = text;
    }
    j["options"] = inst.options;
    if (inst.answer_key) {
        j["answer_key"] = *inst.answer_key;
    }
    if (inst.stereotype_index) {
        j["stereotype_index"] = *inst.stereotype_index;
    }
    return j;
}

inline PairedInstance instance_from_json(const nlohmann::json & j) {
    if (!j.is_object()) {
        throw ValidationError("instance is not a JSON object");
    }
    PairedInstance inst;
    try {
        inst.id = j.at("id").get<std::string>();
        inst.family = parse_family(j.at("family").get<std::string>());
        inst.category = j.at("category").get<std::string>();
        if (j.contains("subtype") && !j["subtype"].is_null()) {
            inst.subtype = j["subtype"].get<std::string>();
        }
        for (const auto & [cond, text] : j.at("variants").items()) {
            inst.variants[cond] = text.get<std::string>();
        }
        inst.options = j.at("options").get<std::vector<std::string>>();
        if (j.contains("answer_key") && !j["answer_key"].is_null()) {
            inst.answer_key = j["answer_key"].get<int>();
        }
        if (j.contains("stereotype_index") && !j["stereotype_index"].is_null()) {
            inst.stereotype_index = j["stereotype_index"].get<int>();
        }
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("schema violation: ") + e.what());
    }
    inst.validate();
    return inst;
}

// Parses JSON Lines text; blank lines are skipped. Errors carry the 1-based
// line number.
inline std::vector<PairedInstance> parse_instances(const std::string & text) {
    std::vector<PairedInstance> out;
    std::set<std::string> ids;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = "line " + std::to_string(lineno) + ": ";
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception & e) {
            throw FormatError(where + "invalid JSON: " + e.what());
        }
        PairedInstance inst;
        try {
            inst = instance_from_json(j);
        } catch (const ValidationError & e) {
            throw ValidationError(where + e.what());
        }
        if (!ids.insert(inst.id).second) {
            throw ValidationError(where + "duplicate id '" + inst.id + "'");
        }
        out.push_back(std::move(inst));
    }
    return out;
}

inline std::vector<PairedInstance> load_instances(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open instance file: " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_instances(ss.str());
}

inline std::string serialize_instances(const std::vector<PairedInstance> & instances) {
    std::string out;
    for (const auto & inst : instances) {
        out += instance_to_json(inst).dump() + "\n";
    }
    return out;
}

inline void write_instances(const std::string & path, const std::vector<PairedInstance> & instances) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open for writing: " + path);
    }
    out << serialize_instances(instances);
}

inline nlohmann::ordered_json pair_to_json(const ContrastivePair & p) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["family"] = family_name(p.family);
    j["category"] = p.category;
    j["bias_guidance"] = p.bias_guidance;
    j["debias_guidance"] = p.debias_guidance;
    j["body"] = p.body;
    j["bias_prompt"] = p.bias_prompt;
    j["debias_prompt"] = p.debias_prompt;
    return j;
}

inline std::string serialize_pairs(const std::vector<ContrastivePair> & pairs) {
    std::string out;
    for (const auto & p : pairs) {
        out += pair_to_json(p).dump() + "\n";
    }
    return out;
}

inline std::vector<ContrastivePair> parse_pairs(const std::string & text) {
    std::vector<ContrastivePair> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            ContrastivePair p;
            p.id = j.at("id").get<std::string>();
            p.family = parse_family(j.at("family").get<std::string>());
            p.category = j.at("category").get<std::string>();
            p.bias_guidance = j.at("bias_guidance").get<std::string>();
            p.debias_guidance = j.at("debias_guidance").get<std::string>();
            p.body = j.at("body").get<std::string>();
            p.bias_prompt = j.at("bias_prompt").get<std::string>();
            p.debias_prompt = j.at("debias_prompt").get<std::string>();
            out.push_back(std::move(p));
        } catch (const nlohmann::json::exception & e) {
            throw FormatError("pair line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace cogsteer
