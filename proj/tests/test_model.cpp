#include <gtest/gtest.h>

#include "support.hpp"

using namespace cogsteer;
using namespace cogsteer::testing;

namespace {

const ModelWeights & model() {
    static const ModelWeights w = small_model(11);
    return w;
}

std::vector<float> random_direction(int d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(static_cast<std::size_t>(d));
    for (auto & x : v) {
        x = static_cast<float>(rng.normal());
    }
    return v;
}

bool same(const VectorF & a, const VectorF & b) { return a.size() == b.size() && (a.array() == b.array()).all(); }

} // namespace

TEST(ModelSpec, Validation) {
    EXPECT_NO_THROW((ModelSpec{32, 4, 4, 1024, 512, 0}.validate()));
    EXPECT_THROW((ModelSpec{30, 4, 4, 1024, 512, 0}.validate()), ValidationError);
    EXPECT_THROW((ModelSpec{32, 0, 4, 1024, 512, 0}.validate()), ValidationError);
    EXPECT_EQ((ModelSpec{32, 4, 4, 1024, 512, 0}.ff_width()), 128);
}

TEST(Transformer, ZeroAlphaIsBitwiseIdentity) {
    const auto tokens = random_tokens(20, 1024, 1);
    const auto base = next_token_logits(model(), tokens);
    for (int layer = 0; layer < 4; ++layer) {
        const SteeringSpec s{layer, random_direction(32, 5), 0.0, true};
        EXPECT_TRUE(same(next_token_logits(model(), tokens, s), base));
    }
    // a zero direction is allowed when alpha is zero
    EXPECT_TRUE(same(next_token_logits(model(), tokens, SteeringSpec{1, std::vector<float>(32, 0.0f), 0.0, true}), base));
    EXPECT_THROW(next_token_logits(model(), tokens, SteeringSpec{1, std::vector<float>(32, 0.0f), 1.0, true}),
                 ValidationError);
}

TEST(Transformer, SteeringIsLocalToItsLayer) {
    const auto tokens = random_tokens(12, 1024, 2);
    const auto dir = random_direction(32, 6);
    const int layer = 2;
    const double alpha = 3.0;
    const auto plain = forward_all_positions(model(), tokens);
    const auto steered = forward_all_positions(model(), tokens, SteeringSpec{layer, dir, alpha, true});
    ASSERT_EQ(plain.size(), steered.size());

    double n2 = 0.0;
    for (float v : dir) {
        n2 += static_cast<double>(v) * v;
    }
    for (int l = 0; l < layer; ++l) {
        EXPECT_EQ(plain[static_cast<std::size_t>(l)], steered[static_cast<std::size_t>(l)]) << "layer " << l;
    }
    const auto & a = plain[static_cast<std::size_t>(layer)];
    const auto & b = steered[static_cast<std::size_t>(layer)];
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (int c = 0; c < 32; ++c) {
            EXPECT_NEAR(a(r, c) - b(r, c), alpha * dir[static_cast<std::size_t>(c)] / std::sqrt(n2), 1e-5);
        }
    }
    EXPECT_NE(plain.back(), steered.back());
}

TEST(Transformer, UnnormalizedSteeringUsesRawVector) {
    const auto tokens = random_tokens(6, 1024, 3);
    const auto dir = random_direction(32, 7);
    const auto plain = forward_all_positions(model(), tokens);
    const auto steered = forward_all_positions(model(), tokens, SteeringSpec{0, dir, 0.5, false});
    EXPECT_NEAR(plain[0](0, 0) - steered[0](0, 0), 0.5 * dir[0], 1e-5);
}

TEST(Transformer, CachedResidualResumeMatchesFullForward) {
    const auto tokens = random_tokens(15, 1024, 4);
    const auto dir = random_direction(32, 8);
    for (int cached = -1; cached < 4; ++cached) {
        const auto rows = residual_rows(model(), tokens, cached);
        EXPECT_TRUE(same(next_token_logits_from(model(), rows, cached), next_token_logits(model(), tokens)));
        for (int l = std::max(cached, 0); l < 4; ++l) {
            const SteeringSpec s{l, dir, 1.5, true};
            EXPECT_TRUE(same(next_token_logits_from(model(), rows, cached, s), next_token_logits(model(), tokens, s)))
                << "cached " << cached << " steer " << l;
        }
    }
}

TEST(Transformer, KvCacheGenerationMatchesFullRecompute) {
    auto seq = random_tokens(10, 1024, 5);
    const auto gen = generate_greedy(model(), seq, 12);
    ASSERT_EQ(gen.tokens.size(), 12u);
    for (int t : gen.tokens) {
        const auto logits = next_token_logits(model(), seq);
        int best = 0;
        for (int v = 1; v < 1024; ++v) {
            if (logits(v) > logits(best)) {
                best = v;
            }
        }
        EXPECT_EQ(t, best);
        seq.push_back(best);
    }
}

TEST(Transformer, MonitorValuesReadTheDecodingState) {
    const auto prompt = random_tokens(8, 1024, 6);
    const Monitor m{2, random_direction(32, 9), 0.25};
    const auto gen = generate_greedy(model(), prompt, 5, m);
    ASSERT_TRUE(gen.probe_values.has_value());
    ASSERT_EQ(gen.probe_values->size(), 5u);
    auto seq = prompt;
    for (std::size_t t = 0; t < 5; ++t) {
        const auto rec = forward_capture(model(), seq, {2});
        double z = m.bias;
        for (int i = 0; i < 32; ++i) {
            z += static_cast<double>(m.weights[static_cast<std::size_t>(i)]) * rec.front().vector[static_cast<std::size_t>(i)];
        }
        EXPECT_NEAR((*gen.probe_values)[t], sigmoid(z), 1e-5);
        seq.push_back(gen.tokens[t]);
    }
}

TEST(Transformer, ContextOverflowAndBadTokens) {
    const auto prompt = random_tokens(500, 1024, 7);
    EXPECT_THROW(generate_greedy(model(), prompt, 13), ValidationError);
    EXPECT_NO_THROW(generate_greedy(model(), prompt, 12));
    EXPECT_THROW(next_token_logits(model(), random_tokens(513, 1024, 8)), ValidationError);
    EXPECT_THROW(next_token_logits(model(), std::vector<int>{1, 5000}), ValidationError);
    EXPECT_THROW(next_token_logits(model(), std::vector<int>{}), ValidationError);
    EXPECT_THROW(next_token_logits(model(), std::vector<int>{1}, SteeringSpec{4, random_direction(32, 1), 1.0, true}),
                 ValidationError);
}

TEST(Transformer, ArgmaxOptionTiesGoToLowestToken) {
    VectorF logits = VectorF::Zero(10);
    logits(3) = 2.0f;
    logits(7) = 2.0f;
    const std::vector<int> opts{7, 3, 5};
    EXPECT_EQ(argmax_option(logits, opts), 1u);
}

TEST(Weights, SaveLoadRoundTrip) {
    const auto dir = scratch_dir("weights");
    save_container(dir + "/m.tensors", model());
    const auto back = load_container(dir + "/m.tensors");
    EXPECT_EQ(back, model());
    EXPECT_EQ(back.spec(), model().spec());
    const auto tokens = random_tokens(9, 1024, 10);
    EXPECT_TRUE(same(next_token_logits(back, tokens), next_token_logits(model(), tokens)));
}

TEST(Weights, MissingOrMisshapenTensorsAreRejected) {
    auto t = model().tensors();
    t.erase(names::unembedding);
    EXPECT_THROW(ModelWeights{t}, Error);
    auto u = model().tensors();
    u[names::final_norm] = Tensor({3}, {1, 1, 1});
    EXPECT_THROW(ModelWeights{u}, Error);
}

TEST(Tokenizer, SplitsWordsAndPunctuation) {
    EXPECT_EQ(WordTokenizer::split("Hello, world's 50% $5!"),
              (std::vector<std::string>{"Hello", ",", "world's", "50%", "$5", "!"}));
    const WordTokenizer tok(128, {"apple", "pear", "apple", "B"});
    EXPECT_EQ(tok.token_id("A"), 1);
    EXPECT_EQ(tok.token_id("Z"), 26);
    EXPECT_EQ(tok.token_id("apple"), 32);
    EXPECT_EQ(tok.token_id("pear"), 33);
    const int h = tok.token_id("kiwi");
    EXPECT_GE(h, 34);
    EXPECT_LT(h, 128);
    EXPECT_EQ(tok.token_id("kiwi"), h);
    EXPECT_EQ(tok.decode(tok.encode("B apple pear")), "B apple pear");
    EXPECT_THROW(WordTokenizer(16), ValidationError);
}

TEST(Tokenizer, DeskLexiconFitsAndTriggersAreKnown) {
    const auto tok = make_tokenizer(1024);
    for (const auto & w : bias_trigger_words()) {
        EXPECT_LT(tok.token_id(w), 1024);
        EXPECT_EQ(tok.token_text(tok.token_id(w)), w);
    }
}

TEST(Planted, ReadoutIsLinearInPlantedProjection) {
    const ModelSpec spec{32, 4, 4, 1024, 512, 0};
    const auto planted = random_direction(32, 12);
    const double gain = 0.5;
    const auto w = build_planted_model(spec, planted, gain, 99);
    const auto u = detail::unit(planted);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto tokens = random_tokens(16, 1024, 20 + s);
        const auto rec = forward_capture(w, tokens, {3});
        Eigen::RowVectorXf row(32);
        for (int i = 0; i < 32; ++i) {
            row(i) = rec.front().vector[static_cast<std::size_t>(i)];
        }
        const auto h = final_hidden(w, row);
        double proj = 0.0;
        for (int i = 0; i < 32; ++i) {
            proj += u[static_cast<std::size_t>(i)] * h(i);
        }
        const auto logits = next_token_logits(w, tokens);
        EXPECT_NEAR(logits(1) - logits(2), gain * proj, 1e-4);
    }
}

TEST(Planted, SteeringShiftsProjectionByAlpha) {
    const ModelSpec spec{32, 4, 4, 1024, 512, 0};
    const auto planted = random_direction(32, 13);
    const auto w = build_planted_model(spec, planted, 0.5, 7);
    const auto tokens = random_tokens(16, 1024, 30);
    const double base = planted_projection(w, tokens, planted);
    for (int layer = 1; layer < 4; ++layer) {
        for (double alpha : {-2.0, 0.5, 3.0}) {
            const double p = planted_projection(w, tokens, planted, SteeringSpec{layer, planted, alpha, true});
            EXPECT_NEAR(base - p, alpha, 1e-4) << "layer " << layer << " alpha " << alpha;
        }
    }
}

TEST(Planted, CalibrationCentersTheMedian) {
    const ModelSpec spec{32, 4, 4, 1024, 512, 0};
    const auto planted = random_direction(32, 14);
    std::vector<std::vector<int>> prompts;
    for (std::uint64_t s = 0; s < 9; ++s) {
        prompts.push_back(random_tokens(12, 1024, 40 + s));
    }
    const auto opts = calibrate_readout_offset(spec, planted, 0.5, 3, PlantOptions{}, prompts);
    const auto w = build_planted_model(spec, planted, 0.5, 3, opts);
    std::vector<double> proj;
    for (const auto & p : prompts) {
        proj.push_back(planted_projection(w, p, planted));
    }
    std::nth_element(proj.begin(), proj.begin() + 4, proj.end());
    EXPECT_NEAR(proj[4], 0.0, 1e-3);
}
