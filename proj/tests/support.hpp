#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cogsteer/cogsteer.hpp"

namespace cogsteer::testing {

inline std::string source_path(const std::string & rel) { return std::string(COGSTEER_SOURCE_DIR) + "/" + rel; }
inline std::string fixture_path(const std::string & rel) { return std::string(COGSTEER_FIXTURE_DIR) + "/" + rel; }

// Fresh empty directory under the working directory.
inline std::string scratch_dir(const std::string & name) {
    const auto p = std::filesystem::current_path() / "scratch" / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

// The shipped desk config with its output redirected.
inline RunConfig desk_config(const std::string & out_dir, const std::function<void(nlohmann::json &)> & edit = {}) {
    auto j = nlohmann::json::parse(read_text(source_path("configs/desk.json")));
    j["out_dir"] = out_dir;
    if (edit) {
        edit(j);
    }
    return parse_run_config(j, source_path("configs"));
}

// Pairs whose two conditions are Gaussian clouds with means `margin` sigma
// apart along the first axis.
inline LabeledActivationSet two_gaussian_set(int n_pairs, int d, double margin, std::uint64_t seed) {
    Rng rng(seed);
    LabeledActivationSet set;
    set.layer = 0;
    set.d_model = d;
    for (int i = 0; i < n_pairs; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "p%04d", i);
        for (int label : {1, 0}) {
            std::vector<float> v(static_cast<std::size_t>(d));
            for (auto & x : v) {
                x = static_cast<float>(rng.normal());
            }
            v[0] += static_cast<float>((label == 1 ? 0.5 : -0.5) * margin);
            set.items.push_back({id, label == 1 ? condition::bias_salient : condition::debias, v, label});
        }
    }
    std::sort(set.items.begin(), set.items.end(), [](const LabeledItem & a, const LabeledItem & b) {
        return std::tie(a.pair_id, a.condition) < std::tie(b.pair_id, b.condition);
    });
    return set;
}

// An uncalibrated planted decoder with a random planted vector.
inline ModelWeights small_model(std::uint64_t seed, ModelSpec spec = {32, 4, 4, 1024, 512, 0}) {
    Rng rng(seed);
    std::vector<float> planted(static_cast<std::size_t>(spec.d_model));
    for (auto & x : planted) {
        x = static_cast<float>(rng.normal());
    }
    return build_planted_model(spec, planted, 0.5, derive_seed(seed, 1));
}

inline std::vector<int> random_tokens(std::size_t n, int vocab, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> t(n);
    for (auto & x : t) {
        x = static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab)));
    }
    return t;
}

} // namespace cogsteer::testing
