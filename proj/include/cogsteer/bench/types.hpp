#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cogsteer/core/error.hpp"
#include "cogsteer/core/format.hpp"

namespace cogsteer {

enum class Family { Judgment, InfoProcessing, Social, Response };

inline constexpr Family kAllFamilies[] = {Family::Judgment, Family::InfoProcessing, Family::Social,
                                          Family::Response};

inline std::string family_name(Family f) {
    switch (f) {
    case Family::Judgment:
        return "Judgment";
    case Family::InfoProcessing:
        return "InfoProcessing";
    case Family::Social:
        return "Social";
    case Family::Response:
        return "Response";
    }
    return "?";
}

inline Family parse_family(std::string_view s) {
    if (s == "Judgment" || s == "judgment" || s == "D1") {
        return Family::Judgment;
    }
    if (s == "InfoProcessing" || s == "info_processing" || s == "D2") {
        return Family::InfoProcessing;
    }
    if (s == "Social" || s == "social" || s == "D3") {
        return Family::Social;
    }
    if (s == "Response" || s == "response" || s == "D4") {
        return Family::Response;
    }
    throw ValidationError("unknown family '" + std::string(s) + "'");
}

inline const std::vector<std::string> & family_categories(Family f) {
    static const std::vector<std::string> judgment = {"base_rate", "anchoring", "sunk_cost", "status_quo"};
    static const std::vector<std::string> info = {"availability", "framing", "familiarity", "randomness"};
    static const std::vector<std::string> social = {"confirmation", "overconfidence"};
    static const std::vector<std::string> response = {"response_formation"};
    switch (f) {
    case Family::Judgment:
        return judgment;
    case Family::InfoProcessing:
        return info;
    case Family::Social:
        return social;
    case Family::Response:
        return response;
    }
    return response;
}

inline bool category_in_family(Family f, const std::string & category) {
    const auto & cats = family_categories(f);
    return std::find(cats.begin(), cats.end(), category) != cats.end();
}

namespace condition {
inline const std::string control = "control";
inline const std::string treatment = "treatment";
inline const std::string order_ab = "order_ab";
inline const std::string order_ba = "order_ba";
inline const std::string ambiguous = "ambiguous";
inline const std::string disambiguated = "disambiguated";
inline const std::string bias_salient = "bias_salient";
inline const std::string debias = "debias";
} // namespace condition

struct PairedInstance {
    std::string id;
    Family family = Family::Judgment;
    std::string category;
    std::optional<std::string> subtype;
    std::map<std::string, std::string> variants; // condition label -> prompt text
    std::vector<std::string> options;
    std::optional<int> answer_key;       // 0-based option index
    std::optional<int> stereotype_index; // 0-based option index (Social)

    bool operator==(const PairedInstance &) const = default;

    // Throws ValidationError describing the first violated invariant.
    void validate() const {
        require(!id.empty(), "instance id is empty");
        require(category_in_family(family, category),
                "category '" + category + "' does not belong to family " + family_name(family));
        auto has = [&](const std::string & c) { return variants.contains(c); };
        const int k = static_cast<int>(options.size());
        auto in_range = [&](const std::optional<int> & v) { return !v || (*v >= 0 && *v < k); };
        require(in_range(answer_key), "answer_key out of range");
        require(in_range(stereotype_index), "stereotype_index out of range");
        switch (family) {
        case Family::Judgment:
            require(variants.size() == 2 && has(condition::control) && has(condition::treatment),
                    "Judgment instance needs exactly the variants {control, treatment}");
            require(k == 11, "Judgment instance needs exactly 11 options, got " + std::to_string(k));
            break;
        case Family::InfoProcessing:
            require(variants.size() == 2 && has(condition::order_ab) && has(condition::order_ba),
                    "InfoProcessing instance needs exactly the variants {order_ab, order_ba}");
            require(k == 2, "InfoProcessing instance needs exactly 2 options");
            break;
        case Family::Social:
            require(variants.size() == 2 && has(condition::ambiguous) && has(condition::disambiguated),
                    "Social instance needs exactly the variants {ambiguous, disambiguated}");
            require(answer_key.has_value(), "Social instance needs an answer_key");
            require(k >= 2, "Social instance needs at least 2 options");
            break;
        case Family::Response:
            require(variants.size() >= 2, "Response instance needs at least 2 permutation variants");
            require(k >= 2, "Response instance needs at least 2 options");
            break;
        }
    }
};

enum class ParseStatus { ok, retry_needed, invalid };

inline std::string status_name(ParseStatus s) {
    switch (s) {
    case ParseStatus::ok:
        return "ok";
    case ParseStatus::retry_needed:
        return "retry_needed";
    case ParseStatus::invalid:
        return "invalid";
    }
    return "?";
}

enum class Listed { first_listed = 0, second_listed = 1 };

// `index` is 0-based into the options as displayed. Judgment answers report
// their 1-based option number through option_number(); InfoProcessing answers
// use index 0/1 for first/second listed.
struct ParsedAnswer {
    Family family = Family::Judgment;
    int index = -1;
    std::string raw_text;
    ParseStatus status = ParseStatus::retry_needed;

    bool ok() const { return status == ParseStatus::ok; }
    int option_number() const { return index + 1; }
    Listed listed() const { return index == 0 ? Listed::first_listed : Listed::second_listed; }

    static ParsedAnswer make(Family f, int index, std::string raw = {}) {
        return ParsedAnswer{f, index, std::move(raw), ParseStatus::ok};
    }
};

struct FamilyReport {
    Family family = Family::Judgment;
    std::optional<double> mean_shift_pp;
    std::optional<double> bias_rate;
    std::optional<double> order_bias;
    std::optional<double> accuracy;
    std::optional<double> p_first;
    std::optional<double> position_independence;
    std::optional<double> chance_baseline;
    int n_valid = 0;
    int n_invalid = 0;

    static std::string csv_header() {
        return "family,mean_shift_pp,bias_rate,order_bias,accuracy,p_first,position_independence,chance_baseline,"
               "n_valid,n_invalid";
    }

    std::string csv_row() const {
        auto cell = [](const std::optional<double> & v) { return v ? fmt_num(*v) : std::string(); };
        return family_name(family) + "," + cell(mean_shift_pp) + "," + cell(bias_rate) + "," + cell(order_bias) +
               "," + cell(accuracy) + "," + cell(p_first) + "," + cell(position_independence) + "," +
               cell(chance_baseline) + "," + std::to_string(n_valid) + "," + std::to_string(n_invalid);
    }
};

inline std::string reports_csv(const std::vector<FamilyReport> & reports) {
    std::string out = FamilyReport::csv_header() + "\n";
    for (const auto & r : reports) {
        out += r.csv_row() + "\n";
    }
    return out;
}

} // namespace cogsteer
