#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cogsteer/bench/parse.hpp"
#include "cogsteer/bench/scoring.hpp"
#include "cogsteer/bench/templates.hpp"
#include "cogsteer/core/parallel.hpp"
#include "cogsteer/model/tokenizer.hpp"
#include "cogsteer/model/transformer.hpp"

namespace cogsteer {

// Constrained-answer form of one benchmark instance for a desk model.
struct EvalTask {
    struct Variant {
        std::string condition;
        Tokens tokens;
        std::vector<std::string> displayed;
        std::map<int, MatrixRM> residuals; // optional cache: layer -> residual rows
    };
    PairedInstance instance;
    std::vector<Variant> variants;
    std::vector<int> option_tokens;
};

// Next-token labels a desk model picks between: option numbers for
// Judgment, letters otherwise (Info: A = first listed, B = second listed).
inline std::vector<std::string> answer_labels(Family f, std::size_t n_options) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n_options; ++i) {
        out.push_back(f == Family::Judgment ? std::to_string(i + 1) : std::string(1, static_cast<char>('A' + i)));
    }
    return out;
}

// Text handed to the answer parser for choice k.
inline std::string raw_answer(Family f, std::size_t k, const std::vector<std::string> & displayed) {
    switch (f) {
    case Family::Judgment:
        return "Option " + std::to_string(k + 1);
    case Family::InfoProcessing:
        return displayed.at(k);
    default:
        return std::string(1, static_cast<char>('A' + k));
    }
}

inline std::vector<EvalTask> prepare_tasks(const std::vector<PairedInstance> & instances, const WordTokenizer & tok) {
    std::vector<EvalTask> out;
    for (const auto & inst : instances) {
        inst.validate();
        EvalTask t;
        t.instance = inst;
        for (const auto & label : answer_labels(inst.family, inst.options.size())) {
            const auto ids = tok.encode(label);
            require(ids.size() == 1, "answer label '" + label + "' is not a single token");
            t.option_tokens.push_back(ids[0]);
        }
        for (const auto & [cond, text] : inst.variants) {
            t.variants.push_back({cond, tok.encode(text), displayed_options(inst, cond)});
        }
        out.push_back(std::move(t));
    }
    return out;
}

// Stores every variant's residual rows after each of `layers`, so steered
// passes at those layers (or above) skip the blocks beneath.
inline void cache_residuals(const ModelWeights & w, std::vector<EvalTask> & tasks, const std::vector<int> & layers,
                            unsigned threads = 1) {
    parallel_for(tasks.size(), threads, [&](std::size_t i) {
        for (auto & v : tasks[i].variants) {
            DecodeState state(w);
            state.advance(v.tokens, {}, [&](int l, const MatrixRM & x) {
                if (std::find(layers.begin(), layers.end(), l) != layers.end()) {
                    v.residuals[l] = x;
                }
            });
        }
    });
}

inline std::size_t choose_variant(const ModelWeights & w, const EvalTask::Variant & v,
                                  const std::vector<int> & option_tokens,
                                  const std::optional<SteeringSpec> & steering) {
    const bool active = steering && steering->alpha != 0.0;
    const int limit = active ? steering->layer : w.spec().n_layers;
    auto it = v.residuals.upper_bound(limit);
    if (it == v.residuals.begin()) {
        return choose_option(w, v.tokens, option_tokens, steering);
    }
    --it;
    return argmax_option(next_token_logits_from(w, it->second, it->first, steering), option_tokens);
}

inline InstanceAnswers answer_task(const ModelWeights & w, const EvalTask & task,
                                   const std::optional<SteeringSpec> & steering = std::nullopt) {
    InstanceAnswers ia;
    ia.instance = task.instance;
    for (const auto & v : task.variants) {
        const std::size_t k = choose_variant(w, v, task.option_tokens, steering);
        ia.answers[v.condition] = parse_answer(task.instance.family, raw_answer(task.instance.family, k, v.displayed),
                                               v.displayed);
    }
    return ia;
}

inline double bias_score(const std::vector<bool> & flags) {
    require(!flags.empty(), "bias score of an empty response list");
    std::size_t biased = 0;
    for (bool f : flags) {
        biased += f ? 1 : 0;
    }
    return static_cast<double>(biased) / static_cast<double>(flags.size());
}

struct FamilyEval {
    std::vector<InstanceAnswers> answers;
    std::vector<std::optional<bool>> flags; // per task, in task order
    double bias_score = 0.0;
    int n = 0;
    int n_invalid = 0;
};

inline FamilyEval evaluate_tasks(const ModelWeights & w, const std::vector<EvalTask> & tasks,
                                 const std::optional<SteeringSpec> & steering = std::nullopt, unsigned threads = 1) {
    require(!tasks.empty(), "evaluation set is empty");
    FamilyEval e;
    e.answers.resize(tasks.size());
    parallel_for(tasks.size(), threads, [&](std::size_t i) { e.answers[i] = answer_task(w, tasks[i], steering); });
    std::vector<bool> valid;
    for (const auto & ia : e.answers) {
        const auto f = instance_biased(ia);
        e.flags.push_back(f);
        if (f) {
            valid.push_back(*f);
        } else {
            ++e.n_invalid;
        }
    }
    e.n = static_cast<int>(tasks.size());
    if (valid.empty()) {
        throw ValidationError("every answer in the evaluation set failed to parse");
    }
    e.bias_score = bias_score(valid);
    return e;
}

struct QaProbe {
    std::vector<QaItem> items;
    std::vector<Tokens> prompts;
    int max_new = 4;
};

inline QaProbe make_qa_probe(const WordTokenizer & tok, const std::vector<QaItem> & items, int max_new = 4) {
    require(!items.empty(), "capability probe needs at least one question");
    QaProbe p;
    p.items = items;
    p.max_new = max_new;
    for (const auto & it : items) {
        p.prompts.push_back(tok.encode(qa_prompt(it.question)));
    }
    return p;
}

// Desk models know no facts, so their expected answers are their own
// unsteered greedy continuations.
inline QaProbe self_consistent_qa(const ModelWeights & w, const WordTokenizer & tok, const std::vector<QaItem> & items,
                                  int max_new = 4) {
    QaProbe p = make_qa_probe(tok, items, max_new);
    for (std::size_t i = 0; i < p.items.size(); ++i) {
        p.items[i].expected = tok.decode(generate_greedy(w, p.prompts[i], max_new).tokens);
    }
    return p;
}

// Fraction of answers containing the expected string, case-insensitively.
inline double capability_probe(const ModelWeights & w, const WordTokenizer & tok, const QaProbe & probe,
                               const std::optional<SteeringSpec> & steering = std::nullopt) {
    require(!probe.items.empty(), "capability probe needs at least one question");
    int hits = 0;
    for (std::size_t i = 0; i < probe.items.size(); ++i) {
        const auto gen = generate_greedy(w, probe.prompts[i], probe.max_new, std::nullopt, steering);
        const std::string text = detail::lower(tok.decode(gen.tokens));
        if (text.find(detail::lower(probe.items[i].expected)) != std::string::npos) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(probe.items.size());
}

struct EvalCell {
    double bias_score = 0.0;
    double capability = 0.0;
    int n = 0;
    int n_invalid = 0;
};

// Bias and capability under one shared steering spec.
inline EvalCell steered_eval(const ModelWeights & w, const WordTokenizer & tok, const std::vector<float> & direction,
                             int layer, double alpha, const std::vector<EvalTask> & tasks, const QaProbe & qa,
                             unsigned threads = 1) {
    require(static_cast<int>(direction.size()) == w.spec().d_model, "direction length must equal d_model");
    const SteeringSpec spec{layer, direction, alpha, true};
    const auto e = evaluate_tasks(w, tasks, spec, threads);
    EvalCell c;
    c.bias_score = e.bias_score;
    c.n = e.n;
    c.n_invalid = e.n_invalid;
    c.capability = capability_probe(w, tok, qa, spec);
    return c;
}

} // namespace cogsteer
