#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cogsteer/bench/types.hpp"
#include "cogsteer/core/error.hpp"

namespace cogsteer {

struct JudgmentScore {
    double shift_pp = 0.0;
    bool biased = false;
};

inline JudgmentScore score_judgment_pair(const ParsedAnswer & control, const ParsedAnswer & treatment) {
    require(control.ok() && treatment.ok(), "judgment scoring needs two parsed answers");
    const int c = control.option_number();
    const int t = treatment.option_number();
    require(c >= 1 && c <= 11 && t >= 1 && t <= 11, "judgment option numbers must lie in 1..11");
    const double shift = 10.0 * (t - c);
    return {shift, std::abs(shift) > 10.0};
}

// True when the same listed position was chosen in both orderings, i.e. the
// chosen content followed the presentation order.
inline bool score_order_pair(const ParsedAnswer & resp_ab, const ParsedAnswer & resp_ba) {
    require(resp_ab.ok() && resp_ba.ok(), "order scoring needs two parsed answers");
    return resp_ab.listed() == resp_ba.listed();
}

struct SocialScore {
    double accuracy = 0.0;
    double bias_rate = 0.0;
};

// Answers on ambiguous Social items. Accuracy counts "cannot be determined"
// (answer_key) choices; bias_rate = (stereotyped - anti-stereotyped) / total.
inline SocialScore score_social_set(const std::vector<std::pair<ParsedAnswer, PairedInstance>> & answers) {
    require(!answers.empty(), "social scoring needs at least one answer");
    int correct = 0;
    int stereotyped = 0;
    int anti = 0;
    for (const auto & [ans, inst] : answers) {
        require(ans.ok(), "social scoring needs parsed answers");
        require(inst.answer_key.has_value(), "social instance '" + inst.id + "' has no answer_key");
        if (ans.index == *inst.answer_key) {
            ++correct;
        } else if (inst.stereotype_index && ans.index == *inst.stereotype_index) {
            ++stereotyped;
        } else {
            ++anti;
        }
    }
    const double n = static_cast<double>(answers.size());
    return {correct / n, (stereotyped - anti) / n};
}

inline double position_independence(double p_first) {
    return std::clamp(1.0 - std::abs(p_first - 0.5) * 2.0, 0.0, 1.0);
}

struct PositionScore {
    double p_first = 0.0;
    double position_independence = 0.0;
    double chance_baseline = 0.0;
};

// Each choice is (chosen position, option count) with positions 0-based, so
// position 0 is the first-listed option.
inline PositionScore score_position_set(const std::vector<std::pair<int, int>> & choices) {
    require(!choices.empty(), "position scoring needs at least one choice");
    int first = 0;
    double chance = 0.0;
    for (const auto & [pos, k] : choices) {
        require(k >= 1 && pos >= 0 && pos < k, "chosen position out of range");
        first += pos == 0 ? 1 : 0;
        chance += 1.0 / k;
    }
    const double n = static_cast<double>(choices.size());
    PositionScore s;
    s.p_first = first / n;
    s.position_independence = position_independence(s.p_first);
    s.chance_baseline = chance / n;
    return s;
}

inline double debias_delta(double metric_neutral, double metric_biased) { return metric_neutral - metric_biased; }

// Parsed answers for one instance, keyed by condition label.
struct InstanceAnswers {
    PairedInstance instance;
    std::map<std::string, ParsedAnswer> answers;

    bool complete() const {
        if (answers.size() < instance.variants.size()) {
            return false;
        }
        for (const auto & [cond, text] : instance.variants) {
            auto it = answers.find(cond);
            if (it == answers.end() || !it->second.ok()) {
                return false;
            }
        }
        return true;
    }
};

// Per-instance bias flag under the family rule; nullopt when any answer is
// missing or unparsed.
//   Judgment:        |treatment - control| exceeds one option
//   InfoProcessing:  same listed position in both orderings
//   Social:          a definite answer on the ambiguous variant
//   Response:        the first-listed option in every permutation
inline std::optional<bool> instance_biased(const InstanceAnswers & ia) {
    const auto & inst = ia.instance;
    auto get = [&](const std::string & c) -> const ParsedAnswer * {
        auto it = ia.answers.find(c);
        return it != ia.answers.end() && it->second.ok() ? &it->second : nullptr;
    };
    switch (inst.family) {
    case Family::Judgment: {
        const auto * c = get(condition::control);
        const auto * t = get(condition::treatment);
        if (!c || !t) {
            return std::nullopt;
        }
        return score_judgment_pair(*c, *t).biased;
    }
    case Family::InfoProcessing: {
        const auto * ab = get(condition::order_ab);
        const auto * ba = get(condition::order_ba);
        if (!ab || !ba) {
            return std::nullopt;
        }
        return score_order_pair(*ab, *ba);
    }
    case Family::Social: {
        const auto * amb = get(condition::ambiguous);
        if (!amb || !inst.answer_key) {
            return std::nullopt;
        }
        return amb->index != *inst.answer_key;
    }
    case Family::Response: {
        if (!ia.complete()) {
            return std::nullopt;
        }
        bool all_first = true;
        for (const auto & [cond, text] : inst.variants) {
            all_first = all_first && ia.answers.at(cond).index == 0;
        }
        return all_first;
    }
    }
    return std::nullopt;
}

// Aggregates one family's answers into its report. Instances with any
// unparsed answer are excluded from the metrics and counted in n_invalid.
inline FamilyReport score_family(Family family, const std::vector<InstanceAnswers> & items) {
    FamilyReport r;
    r.family = family;
    std::vector<const InstanceAnswers *> valid;
    for (const auto & ia : items) {
        require(ia.instance.family == family, "instance '" + ia.instance.id + "' is not of family " +
                                                  family_name(family));
        const bool usable = family == Family::Social ? instance_biased(ia).has_value() : ia.complete();
        if (usable) {
            valid.push_back(&ia);
        } else {
            ++r.n_invalid;
        }
    }
    r.n_valid = static_cast<int>(valid.size());
    if (valid.empty()) {
        return r;
    }
    const double n = static_cast<double>(valid.size());
    switch (family) {
    case Family::Judgment: {
        double shift = 0.0;
        int biased = 0;
        int same = 0;
        for (const auto * ia : valid) {
            const auto & c = ia->answers.at(condition::control);
            const auto & t = ia->answers.at(condition::treatment);
            const auto s = score_judgment_pair(c, t);
            shift += s.shift_pp;
            biased += s.biased ? 1 : 0;
            same += c.index == t.index ? 1 : 0;
        }
        r.mean_shift_pp = shift / n;
        r.bias_rate = biased / n;
        r.accuracy = same / n;
        break;
    }
    case Family::InfoProcessing: {
        int biased = 0;
        int correct = 0;
        int keyed = 0;
        std::vector<std::pair<int, int>> positions;
        for (const auto * ia : valid) {
            const auto & ab = ia->answers.at(condition::order_ab);
            const auto & ba = ia->answers.at(condition::order_ba);
            biased += score_order_pair(ab, ba) ? 1 : 0;
            positions.emplace_back(ab.index, 2);
            positions.emplace_back(ba.index, 2);
            if (ia->instance.answer_key) {
                keyed += 2;
                correct += ab.index == *ia->instance.answer_key ? 1 : 0;
                correct += 1 - ba.index == *ia->instance.answer_key ? 1 : 0;
            }
        }
        r.order_bias = biased / n;
        const auto ps = score_position_set(positions);
        r.p_first = ps.p_first;
        r.position_independence = ps.position_independence;
        r.chance_baseline = ps.chance_baseline;
        if (keyed > 0) {
            r.accuracy = static_cast<double>(correct) / keyed;
        }
        break;
    }
    case Family::Social: {
        std::vector<std::pair<ParsedAnswer, PairedInstance>> amb;
        for (const auto * ia : valid) {
            amb.emplace_back(ia->answers.at(condition::ambiguous), ia->instance);
        }
        const auto s = score_social_set(amb);
        r.accuracy = s.accuracy;
        r.bias_rate = s.bias_rate;
        break;
    }
    case Family::Response: {
        std::vector<std::pair<int, int>> positions;
        for (const auto * ia : valid) {
            for (const auto & [cond, ans] : ia->answers) {
                positions.emplace_back(ans.index, static_cast<int>(ia->instance.options.size()));
            }
        }
        const auto ps = score_position_set(positions);
        r.p_first = ps.p_first;
        r.position_independence = ps.position_independence;
        r.chance_baseline = ps.chance_baseline;
        break;
    }
    }
    return r;
}

} // namespace cogsteer
