#include <gtest/gtest.h>

#include "support.hpp"

using namespace cogsteer;
using namespace cogsteer::testing;

namespace {

SteeringGrid grid_of(const std::vector<int> & layers, const std::vector<double> & alphas,
                     const std::vector<std::pair<double, double>> & bias_cap) {
    SteeringGrid g;
    g.layers = layers;
    g.alphas = alphas;
    std::size_t k = 0;
    for (int l : layers) {
        for (double a : alphas) {
            g.rows.push_back({l, a, bias_cap.at(k).first, bias_cap.at(k).second, 10, 0, true, {}});
            ++k;
        }
    }
    return g;
}

double dot(const std::vector<float> & a, const std::vector<float> & b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += static_cast<double>(a[i]) * b[i];
    }
    return s;
}

} // namespace

TEST(Grid, PresetAxes) {
    const auto fine = fine_alphas();
    ASSERT_EQ(fine.size(), 31u);
    EXPECT_DOUBLE_EQ(fine.front(), 0.0);
    EXPECT_DOUBLE_EQ(fine[7], 0.7);
    EXPECT_DOUBLE_EQ(fine.back(), 3.0);
    const auto coarse = coarse_alphas();
    ASSERT_EQ(coarse.size(), 21u);
    EXPECT_DOUBLE_EQ(coarse.front(), -10.0);
    EXPECT_DOUBLE_EQ(coarse.back(), 10.0);
    EXPECT_EQ(coarse_layers(80), (std::vector<int>{0, 11, 23, 34, 45, 56, 68, 79}));
    EXPECT_EQ(coarse_layers(4), (std::vector<int>{0, 1, 2, 3}));
    EXPECT_THROW(validate_axes({1}, {0.0, 0.0}), ValidationError);
    EXPECT_THROW(validate_axes({}, {0.0}), ValidationError);
}

TEST(Pareto, LowestBiasAboveCapabilityThreshold) {
    // rows: (layer 1: a=0,1,2), (layer 2: a=0,1,2)
    const auto g = grid_of({1, 2}, {0.0, 1.0, 2.0},
                           {{0.9, 1.0}, {0.5, 0.8}, {0.1, 0.3}, {0.8, 1.0}, {0.4, 0.6}, {0.05, 0.2}});
    const auto p = pareto_select(g, 1.0, 0.5);
    EXPECT_EQ(p.layer, 2);
    EXPECT_DOUBLE_EQ(p.alpha, 1.0);
    EXPECT_DOUBLE_EQ(p.bias_score, 0.4);
    // dropping the threshold admits the cheapest cell
    EXPECT_DOUBLE_EQ(pareto_select(g, 1.0, 0.0).bias_score, 0.05);
    EXPECT_THROW(pareto_select(g, 1.0, 1.5), ValidationError);
    EXPECT_THROW(pareto_select(g, 0.0, 0.5), ValidationError);
}

TEST(Pareto, TiesPreferSmallerAlphaThenSmallerLayer) {
    const auto g = grid_of({1, 2}, {0.0, 1.0, 2.0},
                           {{0.9, 1.0}, {0.3, 1.0}, {0.3, 1.0}, {0.9, 1.0}, {0.3, 1.0}, {0.3, 1.0}});
    const auto p = pareto_select(g, 1.0);
    EXPECT_EQ(p.layer, 1);
    EXPECT_DOUBLE_EQ(p.alpha, 1.0);
    auto failed = g;
    failed.rows[1].ok = false;
    const auto q = pareto_select(failed, 1.0);
    EXPECT_EQ(q.layer, 2);
    EXPECT_DOUBLE_EQ(q.alpha, 1.0);
}

TEST(DoseResponse, MonotoneGridGivesRhoMinusOne) {
    const auto g = grid_of({1, 2}, {0.0, 1.0, 2.0, 3.0},
                           {{0.8, 1}, {0.6, 1}, {0.4, 1}, {0.2, 1}, {0.8, 1}, {0.6, 1}, {0.4, 1}, {0.2, 1}});
    const auto d = dose_response(g);
    EXPECT_TRUE(d.rho_defined);
    EXPECT_NEAR(d.rho, -1.0, 1e-12);
    EXPECT_NEAR(d.slope, -0.2, 1e-12);
    EXPECT_NEAR(d.intercept, 0.8, 1e-12);
    EXPECT_EQ(d.n, 8u);
}

TEST(DoseResponse, DegenerateAxes) {
    const auto flat = grid_of({1}, {0.0, 1.0, 2.0}, {{0.5, 1}, {0.5, 1}, {0.5, 1}});
    const auto d = dose_response(flat);
    EXPECT_FALSE(d.rho_defined);
    EXPECT_DOUBLE_EQ(d.slope, 0.0);
    const auto one = grid_of({1, 2}, {1.0}, {{0.5, 1}, {0.4, 1}});
    EXPECT_THROW(dose_response(one), ValidationError);
    const auto two = grid_of({1}, {0.0, 1.0}, {{0.5, 1}, {0.4, 1}});
    EXPECT_THROW(dose_response(two), ValidationError);
}

TEST(Controls, RandomDirectionsAreScaledAndDeterministic) {
    const auto dirs = random_directions(32, 50, 2.5, 7);
    ASSERT_EQ(dirs.size(), 50u);
    double mean_abs_cos = 0.0;
    for (const auto & v : dirs) {
        EXPECT_NEAR(std::sqrt(dot(v, v)), 2.5, 1e-5);
        mean_abs_cos += std::abs(dot(v, dirs.front())) / (2.5 * 2.5);
    }
    mean_abs_cos = (mean_abs_cos - 1.0) / 49.0;
    // E|cos| for isotropic directions in 32 dimensions is about 0.14
    EXPECT_LT(mean_abs_cos, 0.25);
    EXPECT_EQ(random_directions(32, 50, 2.5, 7), dirs);
    EXPECT_NE(random_directions(32, 50, 2.5, 8).front(), dirs.front());
    EXPECT_THROW(random_directions(32, 3, 0.0, 1), ValidationError);
}

TEST(Controls, OrthogonalDirectionsAreOrthonormalToLearned) {
    Rng rng(3);
    std::vector<float> learned(16);
    for (auto & x : learned) {
        x = static_cast<float>(rng.normal());
    }
    const double n = std::sqrt(dot(learned, learned));
    const auto dirs = orthogonal_directions(learned, 15, 4);
    ASSERT_EQ(dirs.size(), 15u);
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        EXPECT_NEAR(std::sqrt(dot(dirs[i], dirs[i])), n, 1e-4 * n);
        EXPECT_NEAR(dot(dirs[i], learned) / (n * n), 0.0, 1e-6);
        for (std::size_t j = 0; j < i; ++j) {
            EXPECT_NEAR(dot(dirs[i], dirs[j]) / (n * n), 0.0, 1e-6);
        }
    }
    EXPECT_THROW(orthogonal_directions(learned, 16, 4), ValidationError);
    EXPECT_THROW(orthogonal_directions(std::vector<float>(16, 0.0f), 2, 4), NumericError);
}

TEST(Effects, CohensDAndBonferroni) {
    const std::vector<double> a{1, 2, 3, 4};
    const std::vector<double> b{3, 4, 5, 6, 7};
    const auto e = effect_stats(a, b, 3);
    const double sp = std::sqrt((3 * stats::variance(a) + 4 * stats::variance(b)) / 7.0);
    EXPECT_NEAR(e.pooled_std, sp, 1e-12);
    EXPECT_NEAR(e.cohens_d, (2.5 - 5.0) / sp, 1e-12);
    const auto t = stats::welch_t(a, b);
    EXPECT_NEAR(e.p_value, std::min(1.0, 3 * t.p_two_sided), 1e-12);
    EXPECT_EQ(e.bonferroni_m, 3);
    EXPECT_THROW(effect_stats(std::vector<double>{1, 1}, std::vector<double>{1, 1}), NumericError);
    EXPECT_EQ(direction_hash({1.0f, 2.0f}), direction_hash({1.0f, 2.0f}));
    EXPECT_NE(direction_hash({1.0f, 2.0f}), direction_hash({2.0f, 1.0f}));
}

TEST(Evaluate, BiasScoreFraction) {
    EXPECT_DOUBLE_EQ(bias_score({true, false, true, true}), 0.75);
    EXPECT_THROW(bias_score({}), ValidationError);
}

TEST(Evaluate, CachedResidualsGiveIdenticalAnswers) {
    const auto w = small_model(21);
    const auto tok = make_tokenizer(1024);
    auto tasks = prepare_tasks(generate_instances(Family::Response, 8, 5), tok);
    const auto plain = tasks;
    cache_residuals(w, tasks, {1, 2});
    Rng rng(2);
    std::vector<float> dir(32);
    for (auto & x : dir) {
        x = static_cast<float>(rng.normal());
    }
    std::vector<std::optional<SteeringSpec>> specs{std::nullopt};
    for (int l = 0; l < 4; ++l) {
        specs.push_back(SteeringSpec{l, dir, 2.0, true});
    }
    for (const auto & s : specs) {
        const auto a = evaluate_tasks(w, plain, s);
        const auto b = evaluate_tasks(w, tasks, s);
        EXPECT_EQ(a.flags, b.flags);
        EXPECT_DOUBLE_EQ(a.bias_score, b.bias_score);
        for (std::size_t i = 0; i < a.answers.size(); ++i) {
            for (const auto & [cond, ans] : a.answers[i].answers) {
                EXPECT_EQ(ans.index, b.answers[i].answers.at(cond).index);
            }
        }
    }
}

TEST(Evaluate, GridRecordsFailingCellsAndZeroAlphaMatchesBaseline) {
    const auto w = small_model(22);
    const auto tok = make_tokenizer(1024);
    const auto tasks = prepare_tasks(generate_instances(Family::Judgment, 6, 6), tok);
    const auto qa = self_consistent_qa(w, tok, factual_qa_set(), 2);
    EXPECT_DOUBLE_EQ(capability_probe(w, tok, qa), 1.0);
    std::vector<float> dir(32, 0.0f);
    dir[3] = 1.0f;
    const auto g = grid_search(w, tok, dir, {1, 9}, {0.0, 1.0}, tasks, qa, "Judgment", "unit");
    ASSERT_EQ(g.rows.size(), 4u);
    EXPECT_TRUE(g.at(0, 0).ok);
    EXPECT_DOUBLE_EQ(g.at(0, 0).bias_score, evaluate_tasks(w, tasks).bias_score);
    EXPECT_DOUBLE_EQ(g.at(0, 0).capability, 1.0);
    EXPECT_FALSE(g.at(1, 1).ok);
    EXPECT_NE(g.at(1, 1).error.find("steering layer out of range"), std::string::npos);
    const auto csv = grid_csv(g);
    EXPECT_EQ(csv.rfind("family,model,layer,alpha,bias_score,capability,n,n_invalid\n", 0), 0u);
    EXPECT_NE(grid_heatmap(g).find("<svg"), std::string::npos);
}

TEST(Robustness, BaselineReusesTasksAndHashesDirections) {
    const auto w = small_model(23);
    const auto tok = make_tokenizer(1024);
    const auto tasks = prepare_tasks(generate_instances(Family::Response, 12, 7), tok);
    std::vector<float> learned(32, 0.0f);
    learned[0] = 1.0f;
    const auto controls = random_directions(32, 4, 1.0, 9);
    try {
        const auto r = direction_baseline(w, tasks, learned, controls, 2, 3.0);
        EXPECT_EQ(r.control_effects.size(), 4u);
        EXPECT_EQ(r.control_hashes.size(), 4u);
        EXPECT_EQ(r.learned_hash, direction_hash(learned));
        EXPECT_LE(r.learned_deltas.size(), tasks.size());
        for (double x : r.learned_deltas) {
            EXPECT_TRUE(x == -1.0 || x == 0.0 || x == 1.0);
        }
        EXPECT_DOUBLE_EQ(r.baseline_bias, evaluate_tasks(w, tasks).bias_score);
        EXPECT_DOUBLE_EQ(r.control_effects[1],
                         evaluate_tasks(w, tasks, SteeringSpec{2, controls[1], 3.0, true}).bias_score - r.baseline_bias);
    } catch (const NumericError &) {
        // every flag unchanged and every control effect equal: d is undefined
        SUCCEED();
    }
}
