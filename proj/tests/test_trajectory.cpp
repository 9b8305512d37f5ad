#include <gtest/gtest.h>

#include "support.hpp"

using namespace cogsteer;
using namespace cogsteer::testing;

namespace {

TrajectoryRecord rec(const std::string & id, const std::string & cond, std::vector<double> values) {
    TrajectoryRecord r;
    r.prompt_id = id;
    r.condition = cond;
    r.layer = 2;
    r.values = std::move(values);
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        r.tokens.push_back(static_cast<int>(40 + i));
    }
    return r;
}

double brute_auc(const std::vector<double> & a, const std::vector<double> & b) {
    double s = 0.0;
    for (double x : a) {
        for (double y : b) {
            s += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
        }
    }
    return s / static_cast<double>(a.size() * b.size());
}

} // namespace

TEST(Auc, HandCasesAndTies) {
    EXPECT_DOUBLE_EQ(auc_scores({0.9, 0.8}, {0.1, 0.2}), 1.0);
    EXPECT_DOUBLE_EQ(auc_scores({0.1, 0.2}, {0.9, 0.8}), 0.0);
    EXPECT_DOUBLE_EQ(auc_scores({0.5}, {0.5}), 0.5);
    EXPECT_DOUBLE_EQ(auc_scores({0.3, 0.7}, {0.5, 0.7}), 0.375);
    EXPECT_THROW(auc_scores({}, {0.5}), ValidationError);
}

TEST(Auc, MatchesPairCountAndComplementsExactly) {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(1 + rng.below(30));
        std::vector<double> b(1 + rng.below(30));
        // a coarse grid forces ties
        for (auto & x : a) {
            x = static_cast<double>(rng.below(7)) / 7.0;
        }
        for (auto & x : b) {
            x = static_cast<double>(rng.below(7)) / 7.0;
        }
        const double ab = auc_scores(a, b);
        EXPECT_NEAR(ab, brute_auc(a, b), 1e-12);
        EXPECT_EQ(ab + auc_scores(b, a), 1.0);
    }
}

TEST(Stability, OneMinusMeanAbsoluteStep) {
    EXPECT_DOUBLE_EQ(trajectory_stability({0.4}), 1.0);
    EXPECT_DOUBLE_EQ(trajectory_stability({0.2, 0.2, 0.2}), 1.0);
    EXPECT_NEAR(trajectory_stability({0.1, 0.5, 0.2}), 1.0 - (0.4 + 0.3) / 2.0, 1e-12);
    EXPECT_NEAR(trajectory_stability({0.01, 0.99, 0.01}), 1.0 - 0.98, 1e-12);
    EXPECT_THROW(trajectory_stability({}), ValidationError);
}

TEST(TrajectoryStats, HandFixture) {
    const std::vector<TrajectoryRecord> a{rec("p1", condition::bias_salient, {0.8, 0.6}),
                                          rec("p2", condition::bias_salient, {0.9}),
                                          rec("p3", condition::bias_salient, {0.5, 0.7, 0.6})};
    const std::vector<TrajectoryRecord> b{rec("p1", condition::debias, {0.2, 0.4}),
                                          rec("p2", condition::debias, {0.3}),
                                          rec("p3", condition::debias, {0.1, 0.2, 0.3})};
    const auto s = trajectory_stats(a, b);
    EXPECT_DOUBLE_EQ(s.auc, 1.0);
    const std::vector<double> ma{0.7, 0.9, 0.6};
    const std::vector<double> mb{0.3, 0.3, 0.2};
    const double sp = std::sqrt((2 * stats::variance(ma) + 2 * stats::variance(mb)) / 4.0);
    EXPECT_NEAR(s.cohens_d, (stats::mean(ma) - stats::mean(mb)) / sp, 1e-12);
    const double stab_a = ((1 - 0.2) + 1 + (1 - 0.15)) / 3.0;
    const double stab_b = ((1 - 0.2) + 1 + (1 - 0.1)) / 3.0;
    EXPECT_NEAR(s.stability_a, stab_a, 1e-12);
    EXPECT_NEAR(s.stability_b, stab_b, 1e-12);
    EXPECT_NEAR(s.stability, (stab_a + stab_b) / 2.0, 1e-12);
    EXPECT_FALSE(s.pearson_r.has_value());

    // the other model's per-prompt means, keyed identically
    std::vector<TrajectoryRecord> other;
    const std::vector<double> om{0.75, 0.85, 0.55, 0.35, 0.25, 0.15};
    const std::vector<std::pair<std::string, std::string>> keys{
        {"p1", condition::bias_salient}, {"p2", condition::bias_salient}, {"p3", condition::bias_salient},
        {"p1", condition::debias},       {"p2", condition::debias},       {"p3", condition::debias}};
    for (std::size_t i = 0; i < keys.size(); ++i) {
        other.push_back(rec(keys[i].first, keys[i].second, {om[i]}));
    }
    const auto c = trajectory_stats(a, b, other);
    ASSERT_TRUE(c.pearson_r.has_value());
    EXPECT_EQ(c.n_paired, 6u);
    const std::vector<double> mine{0.7, 0.9, 0.6, 0.3, 0.3, 0.2};
    EXPECT_NEAR(*c.pearson_r, stats::pearson(mine, om), 1e-12);

    auto short_other = other;
    short_other.pop_back();
    EXPECT_THROW(trajectory_stats(a, b, short_other), ValidationError);
    auto renamed = other;
    renamed[0].prompt_id = "p9";
    EXPECT_THROW(trajectory_stats(a, b, renamed), ValidationError);
}

TEST(TrajectoryStats, ZeroSpreadGivesNanD) {
    const std::vector<TrajectoryRecord> a{rec("p1", condition::bias_salient, {0.5}),
                                          rec("p2", condition::bias_salient, {0.5})};
    const std::vector<TrajectoryRecord> b{rec("p1", condition::debias, {0.5}), rec("p2", condition::debias, {0.5})};
    const auto s = trajectory_stats(a, b);
    EXPECT_TRUE(std::isnan(s.cohens_d));
    EXPECT_DOUBLE_EQ(s.auc, 0.5);
}

TEST(TrajectoryStats, SignificanceLabel) {
    EXPECT_EQ(significance_label(std::nullopt), "");
    EXPECT_EQ(significance_label(0.0004), "p<.001");
    EXPECT_EQ(significance_label(0.0421), "p=0.042");
}

TEST(Band, UnequalLengths) {
    const std::vector<TrajectoryRecord> g{rec("a", condition::debias, {0.2, 0.4, 0.6}),
                                          rec("b", condition::debias, {0.4, 0.8}),
                                          rec("c", condition::debias, {0.3})};
    const auto band = mean_band(g);
    ASSERT_EQ(band.t, (std::vector<double>{1, 2, 3}));
    EXPECT_NEAR(band.mean[0], 0.3, 1e-12);
    EXPECT_NEAR(band.se[0], 0.1 / std::sqrt(3.0), 1e-12);
    EXPECT_NEAR(band.mean[1], 0.6, 1e-12);
    EXPECT_NEAR(band.se[1], std::sqrt(0.08) / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(band.mean[2], 0.6, 1e-12);
    EXPECT_DOUBLE_EQ(band.se[2], 0.0);
}

TEST(Records, JsonlRoundTripAndValidation) {
    auto r1 = rec("p1", condition::bias_salient, {0.25, 0.75});
    r1.family = "Judgment";
    r1.model = "desk-a";
    const auto r2 = rec("p2", condition::debias, {1e-300});
    const auto text = trajectories_jsonl({r1, r2});
    const auto back = parse_trajectories(text + "\n");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].values, r1.values);
    EXPECT_EQ(back[0].tokens, r1.tokens);
    EXPECT_EQ(back[0].model, "desk-a");
    EXPECT_EQ(back[1].values, r2.values);
    EXPECT_EQ(trajectories_jsonl(back), text);

    EXPECT_THROW(rec("p", "neutral", {0.5}).validate(), ValidationError);
    EXPECT_THROW(rec("p", condition::debias, {1.0}).validate(), ValidationError);
    EXPECT_THROW(rec("p", condition::debias, {0.0}).validate(), ValidationError);
    auto uneven = rec("p", condition::debias, {0.5, 0.5});
    uneven.tokens.pop_back();
    EXPECT_THROW(uneven.validate(), ValidationError);
    try {
        parse_trajectories(text + "{oops\n");
        FAIL();
    } catch (const FormatError & e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
    EXPECT_THROW(parse_trajectories(R"({"prompt_id":"x"})"), FormatError);

    EXPECT_GT(open_unit(0.0), 0.0);
    EXPECT_LT(open_unit(1.0), 1.0);
    EXPECT_DOUBLE_EQ(open_unit(0.3), 0.3);
}

TEST(Monitor, ValuesMatchGreedyMonitor) {
    const auto w = small_model(31);
    Rng rng(4);
    std::vector<float> weights(32);
    for (auto & x : weights) {
        x = static_cast<float>(rng.normal());
    }
    const auto prompt = random_tokens(10, 1024, 3);
    const auto r = monitor(w, weights, -0.1, prompt, 1, 8, "q1", condition::debias);
    const auto gen = generate_greedy(w, prompt, 8, Monitor{1, weights, -0.1});
    EXPECT_EQ(r.tokens, gen.tokens);
    ASSERT_EQ(r.values.size(), 8u);
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_DOUBLE_EQ(r.values[i], open_unit((*gen.probe_values)[i]));
    }
    EXPECT_EQ(r.prompt_id, "q1");
    EXPECT_EQ(r.layer, 1);
    EXPECT_THROW(monitor(w, weights, 0.0, prompt, 4, 2), ValidationError);
    EXPECT_THROW(monitor(w, std::vector<float>(8, 1.0f), 0.0, prompt, 1, 2), ValidationError);
}

TEST(Render, HighlightEmbedsValuesAndChecksSizes) {
    const auto r = rec("p<1>", condition::bias_salient, {0.1, 0.9});
    const auto svg_text = render_highlight(r, {"Option", "<7>"});
    EXPECT_EQ(svg_text.rfind("<svg", 0), 0u);
    EXPECT_NE(svg_text.find("0,40,0.1\n1,41,0.9\n"), std::string::npos);
    EXPECT_NE(svg_text.find("&lt;7&gt;"), std::string::npos);
    EXPECT_NE(svg_text.find(svg::rgb(svg::ramp(0.9))), std::string::npos);
    EXPECT_THROW(render_highlight(r, {"one"}), ValidationError);
}
