#pragma once

#include <map>
#include <string>
#include <vector>

#include "cogsteer/bench/synthetic.hpp"
#include "cogsteer/core/parallel.hpp"
#include "cogsteer/io/tensor_container.hpp"
#include "cogsteer/model/tokenizer.hpp"
#include "cogsteer/model/transformer.hpp"

namespace cogsteer {

inline std::string activation_tensor_name(const std::string & pair_id, const std::string & condition, int layer) {
    return "pair" + pair_id + "/" + condition + "/layer" + std::to_string(layer);
}

inline std::string position_tensor_name(const std::string & pair_id, const std::string & condition) {
    return "pair" + pair_id + "/" + condition + "/position";
}

// Captures become "pair{id}/{condition}/layer{l}" tensors of shape [d_model];
// the token position goes in a parallel "pair{id}/{condition}/position" [1].
inline TensorMap captures_to_tensors(const std::vector<CaptureRecord> & captures) {
    TensorMap t;
    for (const auto & c : captures) {
        require(c.pair_id.find('/') == std::string::npos && c.condition.find('/') == std::string::npos,
                "pair ids and conditions must not contain '/'");
        const auto name = activation_tensor_name(c.pair_id, c.condition, c.layer);
        require(!t.contains(name), "duplicate capture " + name);
        t[name] = Tensor({static_cast<std::int64_t>(c.vector.size())}, c.vector);
        t[position_tensor_name(c.pair_id, c.condition)] = Tensor({1}, {static_cast<float>(c.position)});
    }
    return t;
}

inline std::vector<CaptureRecord> captures_from_tensors(const TensorMap & t) {
    std::vector<CaptureRecord> out;
    for (const auto & [name, tensor] : t) {
        const auto a = name.find('/');
        const auto b = name.find('/', a == std::string::npos ? a : a + 1);
        if (name.rfind("pair", 0) != 0 || a == std::string::npos || b == std::string::npos) {
            throw FormatError("unexpected tensor name in activation store: " + name);
        }
        const std::string leaf = name.substr(b + 1);
        if (leaf == "position") {
            continue;
        }
        if (leaf.rfind("layer", 0) != 0) {
            throw FormatError("unexpected tensor name in activation store: " + name);
        }
        CaptureRecord rec;
        rec.pair_id = name.substr(4, a - 4);
        rec.condition = name.substr(a + 1, b - a - 1);
        try {
            std::size_t used = 0;
            rec.layer = std::stoi(leaf.substr(5), &used);
            if (used != leaf.size() - 5) {
                throw std::invalid_argument(leaf);
            }
        } catch (const std::logic_error &) {
            throw FormatError("bad layer index in tensor name: " + name);
        }
        rec.vector = tensor.data;
        auto pos = t.find(position_tensor_name(rec.pair_id, rec.condition));
        if (pos != t.end() && !pos->second.data.empty()) {
            rec.position = static_cast<int>(pos->second.data[0]);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

inline void save_activations(const std::string & path, const std::vector<CaptureRecord> & captures) {
    write_container(path, captures_to_tensors(captures));
}

inline std::vector<CaptureRecord> load_activations(const std::string & path) {
    return captures_from_tensors(read_container(path));
}

// Final-token captures for both prompts of every pair at `layers`. Output is
// ordered by (pair index, bias-salient then debias, layer) regardless of
// thread count.
inline std::vector<CaptureRecord> capture_pairs(const ModelWeights & w, const WordTokenizer & tok,
                                                const std::vector<ContrastivePair> & pairs,
                                                const std::vector<int> & layers, unsigned threads = 1) {
    std::vector<std::vector<CaptureRecord>> slots(pairs.size() * 2);
    parallel_for(slots.size(), threads, [&](std::size_t i) {
        const auto & p = pairs[i / 2];
        const bool salient = i % 2 == 0;
        const auto tokens = tok.encode(salient ? p.bias_prompt : p.debias_prompt);
        auto recs = forward_capture(w, tokens, layers);
        for (auto & r : recs) {
            r.pair_id = p.id;
            r.condition = salient ? condition::bias_salient : condition::debias;
        }
        slots[i] = std::move(recs);
    });
    std::vector<CaptureRecord> out;
    for (auto & s : slots) {
        for (auto & r : s) {
            out.push_back(std::move(r));
        }
    }
    return out;
}

} // namespace cogsteer
