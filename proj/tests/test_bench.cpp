#include <gtest/gtest.h>

#include "support.hpp"

using namespace cogsteer;
using namespace cogsteer::testing;

namespace {

PairedInstance judgment_instance(const std::string & id) {
    PairedInstance inst;
    inst.id = id;
    inst.family = Family::Judgment;
    inst.category = family_categories(Family::Judgment).front();
    inst.variants = {{condition::control, "c"}, {condition::treatment, "t"}};
    inst.options = judgment_option_labels();
    return inst;
}

ParsedAnswer ok(Family f, int index) { return ParsedAnswer::make(f, index); }

} // namespace

TEST(Family, NamesRoundTrip) {
    for (Family f : kAllFamilies) {
        EXPECT_EQ(parse_family(family_name(f)), f);
    }
    EXPECT_THROW(parse_family("Cooking"), Error);
}

TEST(ParseAnswer, JudgmentOptionNumbers) {
    const auto opts = judgment_option_labels();
    auto p = parse_answer(Family::Judgment, "I would pick Option 7 here.", opts);
    EXPECT_TRUE(p.ok());
    EXPECT_EQ(p.option_number(), 7);
    EXPECT_EQ(parse_answer(Family::Judgment, "option: 11", opts).index, 10);
    EXPECT_EQ(parse_answer(Family::Judgment, " 3 ", opts).index, 2);
    EXPECT_EQ(parse_answer(Family::Judgment, "Option 12", opts).status, ParseStatus::invalid);
    EXPECT_EQ(parse_answer(Family::Judgment, "Let me think about it", opts).status, ParseStatus::retry_needed);
    EXPECT_EQ(parse_answer(Family::Judgment, "Options 4", opts).status, ParseStatus::retry_needed);
}

TEST(ParseAnswer, LettersAndOptionText) {
    const std::vector<std::string> opts{"Price", "Battery life", "Camera", "Brand"};
    EXPECT_EQ(parse_answer(Family::Response, "B", opts).index, 1);
    EXPECT_EQ(parse_answer(Family::Response, "(C)", opts).index, 2);
    EXPECT_EQ(parse_answer(Family::Response, "D. Brand", opts).index, 3);
    EXPECT_EQ(parse_answer(Family::Response, "I think the answer is A", opts).index, 0);
    EXPECT_EQ(parse_answer(Family::Response, "Probably battery life matters most", opts).index, 1);
    EXPECT_EQ(parse_answer(Family::Response, "E", opts).status, ParseStatus::retry_needed);
    EXPECT_EQ(parse_answer(Family::Response, "A lot depends on you", opts).status, ParseStatus::retry_needed);
    EXPECT_EQ(parse_answer(Family::Social, "(b)", {"Tom", "Ana"}).index, 1);
}

TEST(ParseAnswer, InfoProcessingSystems) {
    const std::vector<std::string> opts{"System Star", "System Square"};
    EXPECT_EQ(parse_answer(Family::InfoProcessing, "I'd go with System Square.", opts).index, 1);
    EXPECT_EQ(parse_answer(Family::InfoProcessing, "system star over system square", opts).index, 0);
    EXPECT_EQ(parse_answer(Family::InfoProcessing, "neither", opts).status, ParseStatus::retry_needed);
    EXPECT_EQ(parse_answer(Family::InfoProcessing, "system star", {"a", "b"}).status, ParseStatus::invalid);
}

TEST(ParseAnswer, NeverThrowsOnArbitraryText) {
    Rng rng(5);
    const std::string alphabet = "ABCabc()12 .:option#";
    for (int i = 0; i < 2000; ++i) {
        std::string s;
        const auto len = rng.below(24);
        for (std::uint64_t k = 0; k < len; ++k) {
            s += alphabet[rng.below(alphabet.size())];
        }
        for (Family f : kAllFamilies) {
            EXPECT_NO_THROW(parse_answer(f, s, judgment_option_labels()));
        }
    }
}

TEST(Scoring, JudgmentShiftAndFlag) {
    const auto s = score_judgment_pair(ok(Family::Judgment, 4), ok(Family::Judgment, 2));
    EXPECT_DOUBLE_EQ(s.shift_pp, -20.0);
    EXPECT_TRUE(s.biased);
    EXPECT_FALSE(score_judgment_pair(ok(Family::Judgment, 4), ok(Family::Judgment, 5)).biased);
    EXPECT_THROW(score_judgment_pair(ParsedAnswer{}, ok(Family::Judgment, 1)), ValidationError);
}

TEST(Scoring, PositionIndependence) {
    EXPECT_DOUBLE_EQ(position_independence(0.5), 1.0);
    EXPECT_DOUBLE_EQ(position_independence(1.0), 0.0);
    EXPECT_DOUBLE_EQ(position_independence(0.0), 0.0);
    EXPECT_NEAR(position_independence(0.79), 0.42, 1e-12);
    const auto ps = score_position_set({{0, 4}, {1, 4}, {0, 2}, {3, 4}});
    EXPECT_DOUBLE_EQ(ps.p_first, 0.5);
    EXPECT_DOUBLE_EQ(ps.chance_baseline, (0.25 * 3 + 0.5) / 4);
    EXPECT_THROW(score_position_set({{4, 4}}), ValidationError);
    EXPECT_DOUBLE_EQ(debias_delta(0.62, 0.3), 0.62 - 0.3);
}

TEST(Scoring, JudgmentFamilyReport) {
    std::vector<InstanceAnswers> items;
    const std::vector<std::pair<int, int>> answers{{5, 3}, {5, 5}, {2, 3}, {6, 6}};
    for (std::size_t i = 0; i < answers.size(); ++i) {
        InstanceAnswers ia{judgment_instance("j" + std::to_string(i)), {}};
        ia.answers[condition::control] = ok(Family::Judgment, answers[i].first);
        ia.answers[condition::treatment] = ok(Family::Judgment, answers[i].second);
        items.push_back(ia);
    }
    InstanceAnswers broken{judgment_instance("jx"), {}};
    broken.answers[condition::control] = ok(Family::Judgment, 1);
    items.push_back(broken);

    const auto r = score_family(Family::Judgment, items);
    EXPECT_EQ(r.n_valid, 4);
    EXPECT_EQ(r.n_invalid, 1);
    EXPECT_DOUBLE_EQ(*r.mean_shift_pp, (-20.0 + 0 + 10 + 0) / 4);
    EXPECT_DOUBLE_EQ(*r.bias_rate, 0.25);
    EXPECT_DOUBLE_EQ(*r.accuracy, 0.5);
    EXPECT_FALSE(r.p_first.has_value());
}

TEST(Scoring, ResponseAllFirstIsBiased) {
    PairedInstance inst;
    inst.id = "r0";
    inst.family = Family::Response;
    inst.category = family_categories(Family::Response).front();
    inst.options = {"a", "b", "c"};
    inst.variants = {{"perm0", "x"}, {"perm1", "y"}, {"perm2", "z"}};
    InstanceAnswers ia{inst, {}};
    for (const auto & [c, t] : inst.variants) {
        ia.answers[c] = ok(Family::Response, 0);
    }
    EXPECT_EQ(instance_biased(ia), true);
    ia.answers["perm1"] = ok(Family::Response, 2);
    EXPECT_EQ(instance_biased(ia), false);
    const auto r = score_family(Family::Response, {ia});
    EXPECT_NEAR(*r.p_first, 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(*r.chance_baseline, 1.0 / 3.0, 1e-12);
    ia.answers.erase("perm2");
    EXPECT_FALSE(instance_biased(ia).has_value());
}

TEST(Scoring, InfoProcessingSameListedPosition) {
    PairedInstance inst;
    inst.id = "i0";
    inst.family = Family::InfoProcessing;
    inst.category = family_categories(Family::InfoProcessing).front();
    inst.options = {"System Star", "System Square"};
    inst.variants = {{condition::order_ab, "x"}, {condition::order_ba, "y"}};
    InstanceAnswers ia{inst, {}};
    ia.answers[condition::order_ab] = ok(Family::InfoProcessing, 0);
    ia.answers[condition::order_ba] = ok(Family::InfoProcessing, 0);
    EXPECT_EQ(instance_biased(ia), true);
    EXPECT_EQ(displayed_options(inst, condition::order_ba), (std::vector<std::string>{"System Square", "System Star"}));
}

TEST(Instances, ValidationRejectsBrokenInvariants) {
    auto inst = judgment_instance("x");
    EXPECT_NO_THROW(inst.validate());
    auto few = inst;
    few.options.pop_back();
    EXPECT_THROW(few.validate(), ValidationError);
    auto wrong_cat = inst;
    wrong_cat.category = "nonsense";
    EXPECT_THROW(wrong_cat.validate(), ValidationError);
    auto key = inst;
    key.answer_key = 11;
    EXPECT_THROW(key.validate(), ValidationError);
    auto variants = inst;
    variants.variants.erase(condition::treatment);
    EXPECT_THROW(variants.validate(), ValidationError);
}

TEST(Instances, GeneratedSetsValidateAndRoundTrip) {
    for (Family f : kAllFamilies) {
        const auto insts = generate_instances(f, 20, 77);
        const auto text = serialize_instances(insts);
        const auto back = parse_instances(text);
        EXPECT_EQ(back, insts) << family_name(f);
        EXPECT_EQ(serialize_instances(back), text);
        EXPECT_EQ(generate_instances(f, 20, 77), insts);
    }
}

TEST(Instances, ParseErrorsCarryLineNumbers) {
    const auto good = serialize_instances(generate_instances(Family::Judgment, 2, 1));
    try {
        parse_instances(good + "\n{not json}\n");
        FAIL();
    } catch (const FormatError & e) {
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
    const auto first = good.substr(0, good.find('\n') + 1);
    try {
        parse_instances(first + first);
        FAIL();
    } catch (const ValidationError & e) {
        EXPECT_NE(std::string(e.what()).find("duplicate id"), std::string::npos);
    }
    EXPECT_THROW(parse_instances(R"({"id":"a","family":"Judgment"})"), ValidationError);
}

TEST(Instances, ProfileFixturesParse) {
    for (const char * name : {"judgment_vanilla", "response_vanilla", "judgment_biased", "response_neutral"}) {
        const auto insts = load_instances(fixture_path(std::string("profile/") + name + ".jsonl"));
        EXPECT_FALSE(insts.empty()) << name;
    }
}

TEST(Synthetic, ContrastivePairsDifferOnlyInGuidance) {
    const auto tok = make_tokenizer(1024);
    for (Family f : kAllFamilies) {
        const auto pairs = generate_contrastive_pairs(f, 25, 9);
        ASSERT_EQ(pairs.size(), 25u);
        for (const auto & p : pairs) {
            EXPECT_EQ(tok.encode(p.bias_prompt).size(), tok.encode(p.debias_prompt).size()) << p.id;
            EXPECT_EQ(p.bias_prompt, join_prompt(p.bias_guidance, p.body));
            EXPECT_EQ(p.debias_prompt, join_prompt(p.debias_guidance, p.body));
            EXPECT_NE(p.bias_prompt, p.debias_prompt);
        }
        EXPECT_EQ(parse_pairs(serialize_pairs(pairs)).size(), pairs.size());
    }
}

TEST(Synthetic, StratifiedSampleCapsEachStratum) {
    const auto insts = generate_instances(Family::Judgment, 40, 3);
    const auto s = stratified_sample(insts, 3, StratumKey::category, 8);
    std::map<std::string, int> counts;
    for (const auto & i : s) {
        counts[i.category]++;
    }
    for (const auto & [cat, n] : counts) {
        EXPECT_EQ(n, 3) << cat;
    }
    EXPECT_EQ(counts.size(), family_categories(Family::Judgment).size());
}
