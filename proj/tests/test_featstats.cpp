#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "lexbias/featstats.hpp"
#include "lexbias/synth.hpp"
#include "support.hpp"

using namespace lexbias;
using lexbias::testing::make_dataset;

namespace {

// Independent recomputation of per-feature balance straight from the raw
// segments, re-tokenizing every instance.
double brute_force_balance(const Dataset& d, const std::string& key, FeatureKind kind,
                           const std::vector<double>& weights, const std::vector<double>& ref) {
    std::vector<double> mass(d.num_labels(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        bool present = false;
        for (const auto& seg : d[i].segments) {
            const auto stream = tokenize_stream(seg);
            if (kind == FeatureKind::unigram) {
                present |= std::find(stream.begin(), stream.end(), key) != stream.end();
            } else {
                for (std::size_t t = 1; t < stream.size(); ++t) present |= stream[t - 1] + " " + stream[t] == key;
            }
        }
        if (present) mass[d[i].label] += weights.empty() ? 1.0 : weights[i];
    }
    double total = 0.0;
    for (double m : mass) total += m;
    double dev = 0.0;
    for (std::size_t y = 0; y < mass.size(); ++y) dev += std::abs(mass[y] / total - ref[y]);
    return dev / static_cast<double>(mass.size());
}

Dataset ten_instance_fixture() {
    return make_dataset({{"the cat sat", "pos"},
                         {"the dog sat", "neg"},
                         {"a cat ran", "pos"},
                         {"the cat ran", "pos"},
                         {"a dog sat", "neg"},
                         {"the bird sang", "neu"},
                         {"a bird sat", "neg"},
                         {"the cat sang", "neu"},
                         {"a dog ran", "pos"},
                         {"the dog sang", "neu"}});
}

} // namespace

TEST(FeatureTable, HandCountedToy) {
    auto d = make_dataset({{"f", "A"}, {"f g", "A"}, {"f", "B"}, {"g", "B"}});
    auto t = build_feature_table(d, {});
    auto j = t.find("f");
    ASSERT_TRUE(j);
    EXPECT_EQ(t.count(*j, 0), 2u);
    EXPECT_EQ(t.count(*j, 1), 1u);
    EXPECT_EQ(t.doc_count[*j], 3u);
    EXPECT_EQ(t.postings[*j], (std::vector<InstanceId>{0, 1, 2}));
}

TEST(FeatureTable, RequireAllLabelsDropsSingleLabelFeatures) {
    auto d = make_dataset({{"recess play", "A"}, {"recess play", "A"}, {"play", "B"}});
    FeatureTableOptions opts;
    opts.require_all_labels = true;
    auto t = build_feature_table(d, opts);
    EXPECT_FALSE(t.find("recess"));
    EXPECT_TRUE(t.find("play"));
}

TEST(FeatureTable, MinCountThreshold) {
    auto d = make_dataset({{"once twice", "A"}, {"twice", "B"}});
    FeatureTableOptions opts;
    opts.min_count = 2;
    auto t = build_feature_table(d, opts);
    EXPECT_FALSE(t.find("once"));
    EXPECT_TRUE(t.find("twice"));
    opts.min_count = 0;
    EXPECT_THROW(build_feature_table(d, opts), InputError);
}

TEST(FeatureTable, StopWordsApplyToUnigramsOnly) {
    auto d = make_dataset({{"the cat", "A"}, {"the dog", "B"}});
    FeatureTableOptions opts;
    opts.stop_words = builtin_stop_words();
    EXPECT_FALSE(build_feature_table(d, opts).find("the"));
    opts.kind = FeatureKind::bigram;
    EXPECT_TRUE(build_feature_table(d, opts).find("the cat"));
}

TEST(FeatureTable, CountInvariantsOnSyntheticCorpus) {
    SynthConfig cfg;
    cfg.n_instances = 2000;
    cfg.background_vocab_size = 100;
    cfg.plant(6, 0.8, 200);
    auto d = generate(cfg);
    for (auto kind : {FeatureKind::unigram, FeatureKind::bigram}) {
        FeatureTableOptions opts;
        opts.kind = kind;
        auto t = build_feature_table(d, opts);
        ASSERT_FALSE(t.empty());
        for (std::size_t j = 0; j < t.size(); ++j) {
            std::uint64_t sum = 0;
            for (auto c : t.label_counts(j)) sum += c;
            EXPECT_EQ(sum, t.doc_count[j]);
            EXPECT_EQ(t.postings[j].size(), t.doc_count[j]);
            EXPECT_TRUE(std::adjacent_find(t.postings[j].begin(), t.postings[j].end(),
                                           [](auto a, auto b) { return a >= b; }) == t.postings[j].end());
            const auto cd = t.cond_dist(j);
            double total = 0.0;
            for (double p : cd) {
                EXPECT_GE(p, 0.0);
                EXPECT_LE(p, 1.0);
                total += p;
            }
            EXPECT_NEAR(total, 1.0, 1e-12);
        }
        EXPECT_TRUE(std::is_sorted(t.features.begin(), t.features.end()));
    }
}

TEST(FeatureTable, BigramsBoundedByUnigramIntersection) {
    SynthConfig cfg;
    cfg.n_instances = 1500;
    cfg.background_vocab_size = 40;
    auto d = generate(cfg);
    auto uni = build_feature_table(d, {});
    FeatureTableOptions opts;
    opts.kind = FeatureKind::bigram;
    auto bi = build_feature_table(d, opts);
    for (std::size_t j = 0; j < bi.size(); ++j) {
        const auto& key = bi.features[j].key;
        const auto sp = key.find(' ');
        const auto& a = uni.postings[*uni.find(key.substr(0, sp))];
        const auto& b = uni.postings[*uni.find(key.substr(sp + 1))];
        std::vector<InstanceId> both;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
        EXPECT_LE(bi.doc_count[j], both.size()) << key;
    }
}

TEST(FeatureTable, BigramsDoNotCrossSegments) {
    auto d = Dataset::from_records({{{"a dog", "runs fast"}, "A"}, {{"x"}, "B"}}, LabelVocab());
    FeatureTableOptions opts;
    opts.kind = FeatureKind::bigram;
    auto t = build_feature_table(d, opts);
    EXPECT_TRUE(t.find("a dog"));
    EXPECT_TRUE(t.find("runs fast"));
    EXPECT_FALSE(t.find("dog runs"));
    EXPECT_EQ(t.size(), 2u);
}

TEST(ZScore, NobodyInSnliCounts) {
    // 40-digit reference: (2368/2381 - 1/3) / sqrt((1/3)(2/3)/2381)
    const double z = z_score(2368, 2381, 1.0 / 3.0);
    EXPECT_NEAR(z, 68.44208795479524, 1e-10);
    EXPECT_NEAR(2368.0 / 2381.0, 0.9945401091978160, 1e-15);
}

TEST(ZScore, NullAndHandArithmetic) {
    EXPECT_DOUBLE_EQ(z_score(50, 100, 0.5), 0.0);
    EXPECT_NEAR(z_score(60, 100, 0.5), 2.0, 1e-12);
    EXPECT_THROW(z_score(1, 2, 0.0), InputError);
    EXPECT_THROW(z_score(1, 2, 1.0), InputError);
    EXPECT_THROW(z_score(0, 0, 0.5), InputError);
}

TEST(ZScore, SignMatchesDirectionOfAssociation) {
    SynthConfig cfg;
    cfg.n_instances = 3000;
    cfg.n_labels = 3;
    cfg.background_vocab_size = 60;
    cfg.plant(6, 0.6, 300);
    auto d = generate(cfg);
    auto t = build_feature_table(d, {});
    const auto& null = d.overall_dist();
    for (std::size_t j = 0; j < t.size(); ++j) {
        const auto cd = t.cond_dist(j);
        for (LabelId y = 0; y < 3; ++y) {
            const double z = z_score(t, j, y, null);
            EXPECT_EQ(z > 0.0, cd[y] > null[y]) << t.features[j].key;
        }
    }
}

TEST(SelectTop, OppositeFeaturesEachTakeOneLabel) {
    std::vector<FeatureStats> stats(2);
    stats[0].feature = {FeatureKind::unigram, "a"};
    stats[0].z_scores = {5, -5};
    stats[0].usual_label = 0;
    stats[1].feature = {FeatureKind::unigram, "b"};
    stats[1].z_scores = {-5, 5};
    stats[1].usual_label = 1;
    auto sel = select_top(stats, 2, 1);
    ASSERT_EQ(sel.features.size(), 2u);
    EXPECT_EQ(sel.features[0].feature.key, "a");
    EXPECT_EQ(sel.features[0].usual_label, 0u);
    EXPECT_EQ(sel.features[1].usual_label, 1u);
    EXPECT_TRUE(sel.warnings.empty());
}

TEST(SelectTop, FromTableMatchesArgmax) {
    auto d = make_dataset({{"a a", "X"}, {"a", "X"}, {"b", "Y"}, {"b", "Y"}, {"a b", "X"}, {"b", "X"}});
    auto sel = select_top_features(build_feature_table(d, {}), d.overall_dist(), 1);
    ASSERT_EQ(sel.features.size(), 2u);
    for (const auto& s : sel.features) EXPECT_EQ(s.usual_label, argmax_label(s.z_scores));
}

TEST(SelectTop, WarnsWhenTooFewFeatures) {
    auto d = make_dataset({{"a", "X"}, {"b", "Y"}, {"a b", "X"}});
    auto sel = select_top_features(build_feature_table(d, {}), d.overall_dist(), 5);
    EXPECT_EQ(sel.features.size(), 2u);
    EXPECT_EQ(sel.warnings.size(), 2u);
    EXPECT_THROW(select_top_features(build_feature_table(d, {}), d.overall_dist(), 0), InputError);
}

TEST(SelectTop, FeatureShowsUpOnceAcrossLabels) {
    std::vector<FeatureStats> stats(3);
    stats[0].feature = {FeatureKind::unigram, "shared"};
    stats[0].z_scores = {4, 4, -8};
    stats[1].feature = {FeatureKind::unigram, "x"};
    stats[1].z_scores = {1, 0, -1};
    stats[2].feature = {FeatureKind::unigram, "z"};
    stats[2].z_scores = {-3, -3, 6};
    for (auto& s : stats) s.usual_label = argmax_label(s.z_scores);
    auto sel = select_top(stats, 3, 1);
    ASSERT_EQ(sel.features.size(), 2u);
    EXPECT_EQ(sel.features[0].feature.key, "shared");
    EXPECT_EQ(sel.features[0].usual_label, 0u);
    EXPECT_EQ(sel.features[1].feature.key, "z");
    EXPECT_LE(sel.features.size(), 3u * 1u);
}

TEST(SelectTop, TiesBrokenByKey) {
    std::vector<FeatureStats> stats(3);
    const char* keys[] = {"m", "c", "q"};
    for (int i = 0; i < 3; ++i) {
        stats[i].feature = {FeatureKind::unigram, keys[i]};
        stats[i].z_scores = {1.0, -1.0};
    }
    auto sel = select_top(stats, 2, 1);
    EXPECT_EQ(sel.features[0].feature.key, "c");
}

TEST(LabelBalance, MatchingReferenceIsZero) {
    auto d = make_dataset({{"f", "A"}, {"f", "B"}, {"g", "A"}, {"g", "B"}});
    auto rep = label_balance(build_feature_table(d, {}), {}, uniform_distribution(2));
    EXPECT_DOUBLE_EQ(rep.aggregate_err, 0.0);
    EXPECT_EQ(*rep.per_feature[0], 0.0);
}

TEST(LabelBalance, TwoLabelHandArithmetic) {
    auto d = make_dataset({{"f", "A"}, {"f", "A"}, {"f", "A"}, {"f", "B"}});
    auto rep = label_balance(build_feature_table(d, {}), {}, uniform_distribution(2));
    EXPECT_DOUBLE_EQ(*rep.per_feature[0], 0.25);
    EXPECT_DOUBLE_EQ(rep.aggregate_err, 0.25);
}

TEST(LabelBalance, MatchesBruteForceOnTenInstanceFixture) {
    auto d = ten_instance_fixture();
    auto t = build_feature_table(d, {});
    for (const auto& ref : {uniform_distribution(3), d.overall_dist()}) {
        auto rep = label_balance(t, {}, ref);
        double sum = 0.0;
        for (std::size_t j = 0; j < t.size(); ++j) {
            const double expected = brute_force_balance(d, t.features[j].key, FeatureKind::unigram, {}, ref);
            EXPECT_EQ(*rep.per_feature[j], expected) << t.features[j].key;
            sum += expected;
        }
        EXPECT_DOUBLE_EQ(rep.aggregate_err, sum / static_cast<double>(t.size()));
    }
}

TEST(LabelBalance, WeightedMatchesBruteForceAndExcludesZeroMass) {
    auto d = ten_instance_fixture();
    auto t = build_feature_table(d, {});
    std::vector<double> w = {0.1, 0.05, 0.2, 0.05, 0.1, 0.1, 0.0, 0.15, 0.1, 0.15};
    auto rep = label_balance(t, w, uniform_distribution(3));
    for (std::size_t j = 0; j < t.size(); ++j) {
        if (t.features[j].key == "bird") {
            // Instances 5 and 6; only 5 has weight.
            ASSERT_TRUE(rep.per_feature[j]);
        }
        if (rep.per_feature[j]) {
            EXPECT_NEAR(*rep.per_feature[j],
                        brute_force_balance(d, t.features[j].key, FeatureKind::unigram, w, uniform_distribution(3)),
                        1e-15);
        }
    }
    EXPECT_EQ(rep.excluded, 0u);

    std::vector<double> zero_bird = w;
    zero_bird[5] = 0.0;
    auto rep2 = label_balance(t, zero_bird, uniform_distribution(3));
    EXPECT_EQ(rep2.excluded, 1u);
    EXPECT_FALSE(rep2.per_feature[*t.find("bird")]);
    EXPECT_THROW(label_balance(t, std::vector<double>(3, 1.0), uniform_distribution(3)), InputError);
}

TEST(LabelBalance, InvariantUnderInstancePermutation) {
    auto d = ten_instance_fixture();
    std::vector<std::size_t> perm = {7, 2, 9, 0, 4, 1, 8, 3, 6, 5};
    auto shuffled = subset(d, perm);
    const auto ref = uniform_distribution(3);
    EXPECT_DOUBLE_EQ(label_balance(build_feature_table(d, {}), {}, ref).aggregate_err,
                     label_balance(build_feature_table(shuffled, {}), {}, ref).aggregate_err);
}

TEST(LabelBalance, WithinTheoreticalBound) {
    SynthConfig cfg;
    cfg.n_instances = 500;
    cfg.n_labels = 3;
    cfg.background_vocab_size = 200;
    cfg.plant(5, 1.0, 40);
    auto d = generate(cfg);
    auto rep = label_balance(build_feature_table(d, {}), {}, uniform_distribution(3));
    EXPECT_GE(rep.aggregate_err, 0.0);
    EXPECT_LE(rep.aggregate_err, 2.0 * 2.0 / 9.0);
    for (const auto& v : rep.per_feature) EXPECT_LE(*v, 2.0 * 2.0 / 9.0 + 1e-15);
}

TEST(BigramSample, ExhaustiveWhenCountCoversAll) {
    auto d = make_dataset({{"a b c d e f", "X"}, {"a b c d e f", "Y"}, {"q r", "X"}});
    FeatureTableOptions opts;
    opts.kind = FeatureKind::bigram;
    auto t = build_feature_table(d, opts);
    auto sample = sample_eligible_bigrams(t, 5, 1);
    ASSERT_EQ(sample.size(), 5u);
    EXPECT_EQ(sample, sample_eligible_bigrams(t, 5, 99));
    EXPECT_TRUE(std::is_sorted(sample.begin(), sample.end()));
    for (const auto& f : sample) EXPECT_NE(f.key, "q r");
}

TEST(BigramSample, ErrorsOnWrongKindOrNoEligible) {
    auto d = make_dataset({{"a b", "X"}, {"c d", "Y"}});
    EXPECT_THROW(sample_eligible_bigrams(build_feature_table(d, {}), 3, 0), InputError);
    FeatureTableOptions opts;
    opts.kind = FeatureKind::bigram;
    EXPECT_THROW(sample_eligible_bigrams(build_feature_table(d, opts), 3, 0), InputError);
}

TEST(BigramSample, UniformInclusionFrequency) {
    // 1000 eligible bigrams: "w<i> v<i>" present in one instance of each label.
    std::vector<std::pair<std::string, std::string>> rows;
    for (int i = 0; i < 1000; ++i) {
        const std::string text = "w" + std::to_string(i) + " v" + std::to_string(i);
        rows.emplace_back(text, "X");
        rows.emplace_back(text, "Y");
    }
    auto d = make_dataset(rows);
    FeatureTableOptions opts;
    opts.kind = FeatureKind::bigram;
    auto t = build_feature_table(d, opts);
    ASSERT_EQ(t.size(), 1000u);

    EXPECT_EQ(sample_eligible_bigram_rows(t, 200, 7), sample_eligible_bigram_rows(t, 200, 7));
    EXPECT_NE(sample_eligible_bigram_rows(t, 200, 7), sample_eligible_bigram_rows(t, 200, 8));

    constexpr int kSeeds = 10000;
    std::vector<int> hits(t.size(), 0);
    for (int s = 0; s < kSeeds; ++s)
        for (auto j : sample_eligible_bigram_rows(t, 200, static_cast<std::uint64_t>(s))) ++hits[j];
    const double sigma = std::sqrt(0.2 * 0.8 / kSeeds);
    int outside_3sigma = 0;
    for (int h : hits) {
        const double dev = std::abs(h / static_cast<double>(kSeeds) - 0.2);
        outside_3sigma += dev > 3.0 * sigma;
        // 1000 simultaneous checks: a 5 sigma band keeps the family-wise
        // false-alarm rate below 1e-3.
        EXPECT_LT(dev, 5.0 * sigma);
    }
    EXPECT_LE(outside_3sigma, 10);  // expected ~2.7 of 1000
}
