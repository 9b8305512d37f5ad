#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace cogsteer;
using namespace cogsteer::testing;

namespace {

std::vector<std::string> ids(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
        out.push_back("p" + std::to_string(1000 + i));
    }
    return out;
}

LabeledActivationSet restrict(const LabeledActivationSet & set, const std::vector<std::string> & keep) {
    const std::set<std::string> k(keep.begin(), keep.end());
    LabeledActivationSet out = set;
    out.items.clear();
    for (const auto & it : set.items) {
        if (k.contains(it.pair_id)) {
            out.items.push_back(it);
        }
    }
    return out;
}

// Signal along `axis` instead of axis 0.
LabeledActivationSet shifted_axis_set(int n_pairs, int d, double margin, int axis, std::uint64_t seed) {
    auto set = two_gaussian_set(n_pairs, d, 0.0, seed);
    for (auto & it : set.items) {
        it.vector[static_cast<std::size_t>(axis)] += static_cast<float>((it.label == 1 ? 0.5 : -0.5) * margin);
    }
    return set;
}

} // namespace

TEST(Dataset, AssembleSetPairsConditions) {
    std::vector<CaptureRecord> caps;
    for (int i = 0; i < 3; ++i) {
        for (const auto * c : {&condition::bias_salient, &condition::debias}) {
            caps.push_back({"x" + std::to_string(i), *c, 2, 5, {static_cast<float>(i), *c == condition::debias ? 0.f : 1.f}});
            caps.push_back({"x" + std::to_string(i), *c, 3, 5, {9.f, 9.f}});
        }
    }
    const auto set = assemble_set(caps, 2);
    EXPECT_EQ(set.size(), 6u);
    EXPECT_EQ(set.d_model, 2);
    EXPECT_EQ(set.pair_ids(), (std::vector<std::string>{"x0", "x1", "x2"}));
    for (const auto & it : set.items) {
        EXPECT_EQ(it.label, it.condition == condition::bias_salient ? 1 : 0);
        EXPECT_EQ(it.vector[1], static_cast<float>(it.label));
    }
    caps.pop_back();
    caps.pop_back();
    EXPECT_THROW(assemble_set(caps, 2), ValidationError);
    EXPECT_THROW(assemble_set(caps, 7), ValidationError);
}

TEST(Dataset, MeanDiffMatchesHandComputation) {
    LabeledActivationSet set;
    set.d_model = 2;
    set.items = {{"a", condition::bias_salient, {1, 2}, 1},
                 {"a", condition::debias, {0, 0}, 0},
                 {"b", condition::bias_salient, {3, 4}, 1},
                 {"b", condition::debias, {1, -2}, 0}};
    const auto d = mean_diff_direction(set);
    EXPECT_FLOAT_EQ(d.vector[0], 1.5f);
    EXPECT_FLOAT_EQ(d.vector[1], 4.0f);
    for (auto & it : set.items) {
        it.vector = {1, 1};
    }
    EXPECT_THROW(mean_diff_direction(set), NumericError);
}

TEST(Dataset, MeanDiffRecoversPlantedAxis) {
    const auto set = two_gaussian_set(500, 16, 2.0, 3);
    const auto d = mean_diff_direction(set);
    EXPECT_NEAR(d.vector[0], 2.0, 0.15);
    for (std::size_t i = 1; i < 16; ++i) {
        EXPECT_NEAR(d.vector[i], 0.0, 0.15);
    }
}

TEST(Dataset, SplitIsDisjointDeterministicAndSized) {
    const auto all = ids(50);
    const auto s = split_pairs(all, 42);
    EXPECT_EQ(s.test.size(), 10u);
    EXPECT_EQ(s.train.size(), 40u);
    std::set<std::string> u(s.train.begin(), s.train.end());
    for (const auto & t : s.test) {
        EXPECT_TRUE(u.insert(t).second) << t;
    }
    EXPECT_EQ(u.size(), 50u);
    auto reversed = all;
    std::reverse(reversed.begin(), reversed.end());
    EXPECT_EQ(split_pairs(reversed, 42).test, s.test);
    EXPECT_NE(split_pairs(all, 43).test, s.test);
    EXPECT_EQ(split_pairs(ids(3), 1, 0.01).test.size(), 1u);
}

TEST(Dataset, FoldsPartitionIds) {
    const auto folds = cv_folds(ids(23), 5, 9);
    ASSERT_EQ(folds.size(), 5u);
    std::set<std::string> seen;
    for (const auto & f : folds) {
        EXPECT_GE(f.size(), 4u);
        EXPECT_LE(f.size(), 5u);
        for (const auto & id : f) {
            EXPECT_TRUE(seen.insert(id).second);
        }
    }
    EXPECT_EQ(seen.size(), 23u);
    EXPECT_THROW(cv_folds(ids(3), 5, 1), ValidationError);
}

TEST(Probe, LogisticSolutionSatisfiesStationarity) {
    const auto set = two_gaussian_set(60, 5, 1.0, 4);
    ProbeConfig cfg;
    cfg.reg = 0.7;
    const auto split = split_pairs(set.pair_ids(), cfg.split_seed, cfg.test_fraction);
    const auto m = detail::fit_linear_on(set, split.train, cfg);
    ASSERT_TRUE(m.eval.converged);
    // gradient of sum logloss + reg/2 |w|^2, recomputed independently
    std::vector<double> gw(5, 0.0);
    double gb = 0.0;
    const std::set<std::string> train(split.train.begin(), split.train.end());
    for (const auto & it : set.items) {
        if (!train.contains(it.pair_id)) {
            continue;
        }
        const double r = m.predict_proba(it.vector) - it.label;
        for (std::size_t i = 0; i < 5; ++i) {
            gw[i] += r * it.vector[i];
        }
        gb += r;
    }
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_NEAR(gw[i] + cfg.reg * m.weights[i], 0.0, 1e-5);
    }
    EXPECT_NEAR(gb, 0.0, 1e-5);
}

TEST(Probe, StandardizedFitPredictsInRawCoordinates) {
    auto set = two_gaussian_set(100, 4, 3.0, 5);
    for (auto & it : set.items) {
        it.vector[2] = it.vector[2] * 100.0f + 50.0f;
    }
    ProbeConfig cfg;
    cfg.standardize = true;
    const auto m = train_linear_probe(set, cfg);
    EXPECT_GT(m.eval.test_accuracy, 0.85);
    EXPECT_GT(std::abs(m.weights[0]), 10 * std::abs(m.weights[2]));
}

TEST(Probe, SeparableSetIsLearnedAndNullIsNot) {
    const auto strong = train_linear_probe(two_gaussian_set(200, 16, 6.0, 6));
    EXPECT_GE(strong.eval.test_accuracy, 0.97);
    EXPECT_GE(strong.eval.train_accuracy, 0.97);
    const auto none = train_linear_probe(two_gaussian_set(200, 16, 0.0, 7));
    EXPECT_LT(none.eval.test_accuracy, 0.65);
    EXPECT_THROW(train_linear_probe(two_gaussian_set(3, 4, 1.0, 1)), ValidationError);
}

TEST(Probe, TransferToOwnHeldOutEqualsTestAccuracy) {
    const auto set = two_gaussian_set(150, 8, 1.5, 8);
    const auto m = train_linear_probe(set);
    EXPECT_DOUBLE_EQ(transfer_evaluate(m, restrict(set, m.split.test)), m.eval.test_accuracy);
}

TEST(Probe, TransferToUnalignedFeaturesIsChance) {
    // same task, but model B encodes the condition on an axis A never saw
    const auto a = two_gaussian_set(200, 64, 6.0, 9);
    const auto b = shifted_axis_set(200, 64, 6.0, 37, 10);
    const auto m = train_linear_probe(a);
    EXPECT_GE(m.eval.test_accuracy, 0.97);
    const double acc = transfer_evaluate(m, b);
    EXPECT_GE(acc, 0.45);
    EXPECT_LE(acc, 0.55);
    EXPECT_THROW(transfer_evaluate(m, two_gaussian_set(10, 8, 1.0, 1)), ValidationError);
}

TEST(Probe, CrossValidationOnSeparableData) {
    ProbeConfig cfg;
    cfg.cv_folds = 4;
    const auto cv = cross_validate(two_gaussian_set(80, 8, 6.0, 11), cfg);
    ASSERT_EQ(cv.fold_accuracies.size(), 4u);
    EXPECT_GE(cv.mean, 0.95);
    EXPECT_GE(cv.std, 0.0);
}

TEST(Probe, MlpLearnsNonlinearBoundary) {
    // label depends on |x0| only, which no linear probe can read
    Rng rng(12);
    LabeledActivationSet set;
    set.d_model = 4;
    for (int i = 0; i < 300; ++i) {
        const std::string id = "q" + std::to_string(1000 + i);
        for (int label : {1, 0}) {
            std::vector<float> v(4);
            for (auto & x : v) {
                x = static_cast<float>(rng.normal() * 0.3);
            }
            const double mag = label == 1 ? 2.0 : 0.0;
            v[0] += static_cast<float>(rng.coin() ? mag : -mag);
            set.items.push_back({id, label == 1 ? condition::bias_salient : condition::debias, v, label});
        }
    }
    ProbeConfig cfg;
    cfg.hidden = 32;
    cfg.epochs = 200;
    cfg.patience = 20;
    cfg.learning_rate = 1e-2;
    cfg.seed = 3;
    const auto mlp = train_mlp_probe(set, cfg);
    const auto lin = train_linear_probe(set, cfg);
    EXPECT_GE(mlp.eval.test_accuracy, 0.9);
    EXPECT_LE(lin.eval.test_accuracy, 0.7);
}

TEST(Permutation, ShuffleKeepsPairsComplementary) {
    const auto set = two_gaussian_set(40, 3, 1.0, 13);
    const auto sh = pair_consistent_shuffle(set, 5);
    int flipped = 0;
    for (std::size_t i = 0; i < sh.items.size(); i += 2) {
        EXPECT_EQ(sh.items[i].label + sh.items[i + 1].label, 1);
        flipped += sh.items[i].label != set.items[i].label ? 1 : 0;
    }
    EXPECT_GT(flipped, 5);
    EXPECT_LT(flipped, 35);
}

TEST(Permutation, StrongSignalBeatsEveryNullDraw) {
    const auto r = permutation_test(two_gaussian_set(100, 8, 6.0, 14), ProbeConfig{}, 20, 1);
    EXPECT_EQ(r.n_iterations, 20);
    EXPECT_DOUBLE_EQ(r.p_value, 1.0 / 21.0);
    EXPECT_NEAR(r.null_mean, 0.5, 0.15);
    ASSERT_TRUE(r.z_score.has_value());
    EXPECT_GT(*r.z_score, 3.0);
    const auto again = permutation_test(two_gaussian_set(100, 8, 6.0, 14), ProbeConfig{}, 20, 1, 3);
    EXPECT_EQ(again.null_values, r.null_values);
}

TEST(Similarity, CosineMatrix) {
    BiasDirection a, b, c;
    a.vector = {1, 0, 0};
    b.vector = {1, 1, 0};
    c.vector = {0, 0, -2};
    const auto m = direction_cosine_matrix({a, b, c});
    EXPECT_DOUBLE_EQ(m[0][0], 1.0);
    EXPECT_NEAR(m[0][1], 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_DOUBLE_EQ(m[1][0], m[0][1]);
    EXPECT_DOUBLE_EQ(m[0][2], 0.0);
    BiasDirection z;
    z.vector = {0, 0, 0};
    EXPECT_THROW(direction_cosine_matrix({a, z}), NumericError);
}

TEST(Similarity, LinearCkaMatchesGramFormAndInvariances) {
    Rng rng(15);
    Eigen::MatrixXd x(40, 6), y(40, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] = rng.normal();
    }
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        y.data()[i] = rng.normal();
    }
    y.col(0) += 2.0 * x.col(1);

    // HSIC form on centred Gram matrices
    const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(40, 40) - Eigen::MatrixXd::Constant(40, 40, 1.0 / 40);
    const Eigen::MatrixXd k = h * (x * x.transpose()) * h;
    const Eigen::MatrixXd l = h * (y * y.transpose()) * h;
    const double gram = (k.cwiseProduct(l)).sum() / std::sqrt(k.squaredNorm() * l.squaredNorm());
    EXPECT_NEAR(linear_cka(x, y), gram, 1e-10);

    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd::Random(6, 6));
    const Eigen::MatrixXd q = qr.householderQ();
    EXPECT_NEAR(linear_cka(x, 3.0 * x * q), 1.0, 1e-10);
    EXPECT_NEAR(linear_cka(x, (x.array() + 5.0).matrix()), 1.0, 1e-10);
    EXPECT_THROW(linear_cka(x, Eigen::MatrixXd::Ones(40, 2)), NumericError);
}

TEST(Export, ProbeAndDirectionRoundTrip) {
    const auto dir = scratch_dir("probe_export");
    auto m = train_linear_probe(two_gaussian_set(50, 6, 2.0, 16));
    m.family = "Judgment";
    m.source_model = "unit";
    save_probe(dir + "/p", m);
    const auto back = load_probe(dir + "/p");
    EXPECT_EQ(back.kind, ProbeKind::linear);
    EXPECT_EQ(back.d_model, 6);
    EXPECT_EQ(back.family, "Judgment");
    EXPECT_DOUBLE_EQ(back.eval.test_accuracy, m.eval.test_accuracy);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_FLOAT_EQ(static_cast<float>(back.weights[i]), static_cast<float>(m.weights[i]));
    }

    auto d = m.as_direction();
    d.layer = 3;
    save_direction(dir + "/d", d);
    const auto dback = load_direction(dir + "/d");
    EXPECT_EQ(dback.vector, d.vector);
    EXPECT_EQ(dback.method, DirectionMethod::linear_probe);
    EXPECT_EQ(dback.layer, 3);
}

TEST(Sweep, LayerSweepOnCapturedActivations) {
    const auto w = small_model(17);
    const auto tok = make_tokenizer(1024);
    const auto pairs = generate_contrastive_pairs(Family::Judgment, 30, 4);
    const auto caps = capture_pairs(w, tok, pairs, {0, 3});
    const auto rows = layer_sweep(caps, {3, 0, 3, 2}, ProbeConfig{});
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].layer, 0);
    EXPECT_TRUE(rows[0].ok);
    EXPECT_FALSE(rows[1].ok); // layer 2 was not captured
    EXPECT_NE(rows[1].error.find("no captures"), std::string::npos);
    EXPECT_TRUE(rows[2].ok);
    const auto dir = scratch_dir("activations");
    save_activations(dir + "/a.tensors", caps);
    const auto back = load_activations(dir + "/a.tensors");
    ASSERT_EQ(back.size(), caps.size());
    EXPECT_EQ(assemble_set(back, 3).items.front().vector, assemble_set(caps, 3).items.front().vector);
}
