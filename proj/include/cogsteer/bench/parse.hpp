#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "cogsteer/bench/types.hpp"

namespace cogsteer {

namespace detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto & c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

inline bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// First "option <digits>" (case-insensitive); -1 when absent.
inline long find_option_number(const std::string & low) {
    for (std::size_t pos = low.find("option"); pos != std::string::npos; pos = low.find("option", pos + 1)) {
        std::size_t i = pos + 6;
        while (i < low.size() && (low[i] == ' ' || low[i] == '#' || low[i] == ':')) {
            ++i;
        }
        std::size_t j = i;
        while (j < low.size() && j - i < 6 && std::isdigit(static_cast<unsigned char>(low[j]))) {
            ++j;
        }
        if (j > i && (j == low.size() || !is_word_char(low[j]))) {
            return std::stol(low.substr(i, j - i));
        }
    }
    return -1;
}

// Index of a standalone option letter: the whole answer ("B", "(B)", "B."),
// a leading "B." / "(B)", a parenthesised "(B)" anywhere, or "answer: B" /
// "answer is B". -1 when none.
inline int find_option_letter(std::string_view text, std::size_t n_options) {
    auto letter_index = [&](char c) -> int {
        const int idx = std::toupper(static_cast<unsigned char>(c)) - 'A';
        return idx >= 0 && idx < static_cast<int>(n_options) ? idx : -1;
    };
    const std::string_view t = trim(text);
    if (t.empty()) {
        return -1;
    }
    {
        std::size_t i = t.front() == '(' ? 1 : 0;
        if (i < t.size() && std::isalpha(static_cast<unsigned char>(t[i]))) {
            const std::size_t after = i + 1;
            const bool alone = after == t.size();
            const bool marked = after < t.size() && (t[after] == '.' || t[after] == ')' || t[after] == ':');
            if ((alone || marked) && std::isupper(static_cast<unsigned char>(t[i]))) {
                if (int idx = letter_index(t[i]); idx >= 0) {
                    return idx;
                }
            }
        }
    }
    for (std::size_t p = t.find('('); p != std::string_view::npos; p = t.find('(', p + 1)) {
        if (p + 2 < t.size() && t[p + 2] == ')' && std::isalpha(static_cast<unsigned char>(t[p + 1]))) {
            if (int idx = letter_index(t[p + 1]); idx >= 0) {
                return idx;
            }
        }
    }
    const std::string low = lower(t);
    for (const char * cue : {"answer:", "answer is", "option"}) {
        for (std::size_t p = low.find(cue); p != std::string::npos; p = low.find(cue, p + 1)) {
            std::size_t i = p + std::char_traits<char>::length(cue);
            while (i < low.size() && (low[i] == ' ' || low[i] == '(')) {
                ++i;
            }
            if (i < low.size() && std::isalpha(static_cast<unsigned char>(low[i])) &&
                (i + 1 == low.size() || !is_word_char(low[i + 1]))) {
                if (int idx = letter_index(low[i]); idx >= 0) {
                    return idx;
                }
            }
        }
    }
    return -1;
}

// Earliest case-insensitive occurrence of an option's full text; on a shared
// start position the longer option wins. -1 when none.
inline int find_option_text(const std::string & low, const std::vector<std::string> & options) {
    int best = -1;
    std::size_t best_pos = std::string::npos;
    std::size_t best_len = 0;
    for (std::size_t i = 0; i < options.size(); ++i) {
        const std::string opt = lower(trim(options[i]));
        if (opt.empty()) {
            continue;
        }
        const std::size_t pos = low.find(opt);
        if (pos == std::string::npos) {
            continue;
        }
        if (pos < best_pos || (pos == best_pos && opt.size() > best_len)) {
            best = static_cast<int>(i);
            best_pos = pos;
            best_len = opt.size();
        }
    }
    return best;
}

} // namespace detail

// `options` are the labels in the order they were displayed for this
// variant. Never throws; failures are reported through the status.
inline ParsedAnswer parse_answer(Family family, std::string_view raw, const std::vector<std::string> & options) {
    ParsedAnswer a;
    a.family = family;
    a.raw_text = std::string(raw);
    const std::string low = detail::lower(raw);
    switch (family) {
    case Family::Judgment: {
        long k = detail::find_option_number(low);
        if (k < 0) {
            const auto t = detail::trim(raw);
            if (!t.empty() && t.size() <= 3 && std::all_of(t.begin(), t.end(), [](char c) {
                    return std::isdigit(static_cast<unsigned char>(c)) != 0;
                })) {
                k = std::stol(std::string(t));
            }
        }
        if (k < 0) {
            return a;
        }
        if (k < 1 || k > static_cast<long>(options.size())) {
            a.status = ParseStatus::invalid;
            return a;
        }
        a.index = static_cast<int>(k - 1);
        a.status = ParseStatus::ok;
        return a;
    }
    case Family::InfoProcessing: {
        const std::size_t star = low.find("system star");
        const std::size_t square = low.find("system square");
        if (star == std::string::npos && square == std::string::npos) {
            return a;
        }
        const std::string chosen = star < square ? "system star" : "system square";
        for (std::size_t i = 0; i < options.size(); ++i) {
            if (detail::lower(options[i]) == chosen) {
                a.index = static_cast<int>(i);
                a.status = ParseStatus::ok;
                return a;
            }
        }
        a.status = ParseStatus::invalid;
        return a;
    }
    case Family::Social:
    case Family::Response: {
        int idx = detail::find_option_letter(raw, options.size());
        if (idx < 0) {
            idx = detail::find_option_text(low, options);
        }
        if (idx >= 0) {
            a.index = idx;
            a.status = ParseStatus::ok;
        }
        return a;
    }
    }
    return a;
}

// Option labels in display order for one variant of an instance.
// InfoProcessing order_ba reverses the listing; Response variants list their
// options as "A. text" lines, which are read back when complete.
inline std::vector<std::string> displayed_options(const PairedInstance & inst, const std::string & cond) {
    if (inst.family == Family::InfoProcessing && cond == condition::order_ba) {
        return {inst.options.rbegin(), inst.options.rend()};
    }
    if (inst.family == Family::Response) {
        const auto it = inst.variants.find(cond);
        if (it != inst.variants.end()) {
            std::vector<std::string> shown;
            std::size_t start = 0;
            const std::string & text = it->second;
            while (start <= text.size()) {
                std::size_t end = text.find('\n', start);
                if (end == std::string::npos) {
                    end = text.size();
                }
                const auto line = detail::trim(std::string_view(text).substr(start, end - start));
                if (line.size() > 3 && line[0] == static_cast<char>('A' + shown.size()) && line[1] == '.' &&
                    line[2] == ' ') {
                    shown.emplace_back(detail::trim(line.substr(3)));
                }
                start = end + 1;
            }
            if (shown.size() == inst.options.size()) {
                return shown;
            }
        }
    }
    return inst.options;
}

} // namespace cogsteer
