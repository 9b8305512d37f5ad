#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cogsteer/core/error.hpp"

namespace cogsteer {

// Whitespace/punctuation tokenizer for desk-scale models.
//
//   id 0           padding
//   ids 1..26      the single capital letters "A".."Z" (answer options)
//   ids 32..       lexicon words, in the order given
//   remaining ids  FNV-1a hash buckets for out-of-lexicon words
//
// A word is a maximal run of letters, digits and ' % $; every other
// non-space character is a token of its own.
class WordTokenizer {
public:
    static constexpr int kFirstLexiconId = 32;

    explicit WordTokenizer(int vocab_size, std::vector<std::string> lexicon = {}) : vocab_size_(vocab_size) {
        require(vocab_size > kFirstLexiconId, "tokenizer vocab must exceed " + std::to_string(kFirstLexiconId));
        int next = kFirstLexiconId;
        for (auto & word : lexicon) {
            if (word.empty() || is_letter_token(word) || ids_.contains(word)) {
                continue;
            }
            require(next < vocab_size, "lexicon does not fit in vocab of " + std::to_string(vocab_size));
            ids_.emplace(word, next);
            words_.push_back(word);
            ++next;
        }
        hash_base_ = next;
    }

    int vocab_size() const { return vocab_size_; }

    static std::vector<std::string> split(std::string_view text) {
        std::vector<std::string> out;
        std::string cur;
        auto flush = [&] {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        };
        for (char ch : text) {
            const auto c = static_cast<unsigned char>(ch);
            if (std::isalnum(c) || ch == '\'' || ch == '%' || ch == '$' || c >= 0x80) {
                cur.push_back(ch);
            } else if (std::isspace(c)) {
                flush();
            } else {
                flush();
                out.emplace_back(1, ch);
            }
        }
        flush();
        return out;
    }

    int token_id(const std::string & word) const {
        if (is_letter_token(word)) {
            return 1 + (word[0] - 'A');
        }
        if (auto it = ids_.find(word); it != ids_.end()) {
            return it->second;
        }
        const int buckets = vocab_size_ - hash_base_;
        if (buckets <= 0) {
            return kFirstLexiconId + static_cast<int>(fnv1a(word) % static_cast<std::uint64_t>(vocab_size_ - kFirstLexiconId));
        }
        return hash_base_ + static_cast<int>(fnv1a(word) % static_cast<std::uint64_t>(buckets));
    }

    std::vector<int> encode(std::string_view text) const {
        std::vector<int> ids;
        for (const auto & w : split(text)) {
            ids.push_back(token_id(w));
        }
        return ids;
    }

    std::size_t count(std::string_view text) const { return split(text).size(); }

    std::string token_text(int id) const {
        if (id >= 1 && id <= 26) {
            return std::string(1, static_cast<char>('A' + id - 1));
        }
        const int idx = id - kFirstLexiconId;
        if (idx >= 0 && idx < static_cast<int>(words_.size())) {
            return words_[static_cast<std::size_t>(idx)];
        }
        return "<" + std::to_string(id) + ">";
    }

    std::string decode(const std::vector<int> & ids) const {
        std::string out;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i > 0) {
                out.push_back(' ');
            }
            out += token_text(ids[i]);
        }
        return out;
    }

private:
    static bool is_letter_token(const std::string & w) { return w.size() == 1 && w[0] >= 'A' && w[0] <= 'Z'; }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    int vocab_size_;
    int hash_base_ = kFirstLexiconId;
    std::unordered_map<std::string, int> ids_;
    std::vector<std::string> words_;
};

} // namespace cogsteer
