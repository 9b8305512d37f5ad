#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cogsteer/bench/parse.hpp"
#include "cogsteer/bench/scoring.hpp"
#include "cogsteer/core/format.hpp"
#include "cogsteer/core/parallel.hpp"
#include "cogsteer/remote/client.hpp"

namespace cogsteer {

struct ProfileOptions {
    GenerationParams params;
    std::string prompt_prefix; // prepended to every variant (e.g. debiasing guidance)
};

struct QueryLog {
    std::string instance_id;
    std::string condition;
    std::vector<Attempt> attempts;
};

struct ProfileResult {
    FamilyReport report;
    std::vector<InstanceAnswers> answers; // canonical instance order
    std::vector<QueryLog> log;
    int requests = 0;
};

// Thrown when an instance fails; `cursor` instances (in canonical order) are
// complete and kept in `partial`. Rerunning against a record-mode store
// serves those from the store and resumes at the cursor.
class ProfileError : public Error {
public:
    ProfileError(const std::string & msg, std::size_t cursor, std::vector<InstanceAnswers> partial)
        : Error(msg), cursor_(cursor), partial_(std::move(partial)) {}

    std::size_t cursor() const { return cursor_; }
    const std::vector<InstanceAnswers> & partial() const { return partial_; }

private:
    std::size_t cursor_;
    std::vector<InstanceAnswers> partial_;
};

inline ProfileResult profile_family(const EndpointConfig & endpoint, const Transport & transport,
                                    const std::vector<PairedInstance> & instances, Family family,
                                    const ProfileOptions & opts = {}) {
    endpoint.validate();
    opts.params.validate();
    if (instances.empty()) {
        throw ValidationError("profile_family: no instances");
    }
    for (const auto & inst : instances) {
        inst.validate();
        require(inst.family == family, "instance '" + inst.id + "' is not of family " + family_name(family));
    }

    struct Slot {
        InstanceAnswers answers;
        std::vector<QueryLog> log;
        int requests = 0;
        std::optional<std::string> error;
    };
    std::vector<Slot> slots(instances.size());
    parallel_for(instances.size(), static_cast<unsigned>(endpoint.max_parallel), [&](std::size_t i) {
        const auto & inst = instances[i];
        Slot & s = slots[i];
        s.answers.instance = inst;
        try {
            for (const auto & [cond, text] : inst.variants) {
                const auto shown = displayed_options(inst, cond);
                auto retry = [&](const std::string & reply) {
                    return parse_answer(family, reply, shown).status == ParseStatus::retry_needed;
                };
                const auto q = query_with_retry(endpoint, opts.prompt_prefix + text, opts.params, transport, retry);
                s.requests += q.attempts;
                s.log.push_back({inst.id, cond, q.transcript});
                s.answers.answers[cond] = parse_answer(family, q.text, shown);
            }
        } catch (const Error & e) {
            s.error = e.what();
        }
    });

    ProfileResult r;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].error) {
            std::vector<InstanceAnswers> partial = std::move(r.answers);
            throw ProfileError("profiling stopped at instance " + std::to_string(i) + " ('" + instances[i].id +
                                   "'): " + *slots[i].error,
                               i, std::move(partial));
        }
        r.answers.push_back(std::move(slots[i].answers));
        r.requests += slots[i].requests;
        for (auto & l : slots[i].log) {
            r.log.push_back(std::move(l));
        }
    }
    r.report = score_family(family, r.answers);
    return r;
}

inline nlohmann::ordered_json family_report_json(const FamilyReport & r) {
    nlohmann::ordered_json j;
    j["family"] = family_name(r.family);
    auto put = [&](const char * name, const std::optional<double> & v) {
        if (v) {
            j[name] = *v;
        }
    };
    put("mean_shift_pp", r.mean_shift_pp);
    put("bias_rate", r.bias_rate);
    put("order_bias", r.order_bias);
    put("accuracy", r.accuracy);
    put("p_first", r.p_first);
    put("position_independence", r.position_independence);
    put("chance_baseline", r.chance_baseline);
    j["n_valid"] = r.n_valid;
    j["n_invalid"] = r.n_invalid;
    return j;
}

inline std::string query_log_jsonl(const std::vector<QueryLog> & log) {
    std::string out;
    for (const auto & q : log) {
        nlohmann::ordered_json j;
        j["instance"] = q.instance_id;
        j["condition"] = q.condition;
        j["attempts"] = nlohmann::ordered_json::array();
        for (const auto & a : q.attempts) {
            j["attempts"].push_back({{"round", a.round},
                                     {"max_tokens", a.max_tokens},
                                     {"status", a.status},
                                     {"outcome", a.outcome}});
        }
        out += j.dump() + "\n";
    }
    return out;
}

} // namespace cogsteer
