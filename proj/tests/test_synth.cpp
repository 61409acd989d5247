#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "lexbias/synth.hpp"
#include "support.hpp"

using namespace lexbias;

namespace {

std::string jsonl_bytes(const Dataset& d) {
    std::ostringstream out;
    write_jsonl(d, out);
    return out.str();
}

} // namespace

TEST(Synth, ShapeAndVocabulary) {
    SynthConfig cfg;
    cfg.n_instances = 500;
    cfg.n_labels = 3;
    cfg.background_vocab_size = 50;
    cfg.tokens_per_instance = 6;
    cfg.plant(3, 0.7, 60);
    auto d = generate(cfg);
    EXPECT_EQ(d.size(), 500u);
    EXPECT_EQ(d.label_vocab().labels(), (std::vector<std::string>{"label0", "label1", "label2"}));
    EXPECT_EQ(d.segment_fields(), (std::vector<std::string>{"text"}));
    std::size_t planted_total = 0;
    for (const auto& inst : d.instances()) {
        for (const auto& t : inst.tokens) EXPECT_TRUE(t.rfind("bg", 0) == 0 || t.rfind("pl", 0) == 0) << t;
        for (const auto& p : cfg.planted) planted_total += inst.has_token(p.token);
    }
    EXPECT_EQ(planted_total, 180u);
}

TEST(Synth, NullSkewShowsNoAssociation) {
    SynthConfig cfg;
    cfg.n_instances = 4000;
    cfg.plant(4, 0.5, 1000);
    auto d = generate(cfg);
    auto t = build_feature_table(d, {});
    for (const auto& p : cfg.planted) {
        const auto j = *t.find(p.token);
        for (LabelId y = 0; y < 2; ++y) EXPECT_LT(std::abs(z_score(t.count(j, y), t.doc_count[j], 0.5)), 4.0);
    }
}

TEST(Synth, SkewedTokenLandsOnTargetAtConfiguredRate) {
    SynthConfig cfg;
    cfg.n_instances = 5000;
    cfg.plant(2, 0.9, 1000);
    cfg.seed = 3;
    auto d = generate(cfg);
    auto t = build_feature_table(d, {});
    const double sigma = std::sqrt(1000 * 0.9 * 0.1);
    for (const auto& p : cfg.planted) {
        const auto j = *t.find(p.token);
        EXPECT_EQ(t.doc_count[j], 1000u);
        EXPECT_LE(std::abs(static_cast<double>(t.count(j, p.target_label)) - 900.0), 3 * sigma) << p.token;
    }
}

TEST(Synth, PlantedTokensDominateZScores) {
    SynthConfig cfg;
    cfg.n_instances = 6000;
    cfg.background_vocab_size = 200;
    cfg.plant(6, 0.85, 300);
    cfg.seed = 4;
    auto d = generate(cfg);
    auto t = build_feature_table(d, {});
    const auto& null = d.overall_dist();
    double best_background = -1e300;
    for (std::size_t j = 0; j < t.size(); ++j) {
        if (t.features[j].key.rfind("bg", 0) != 0) continue;
        for (LabelId y = 0; y < 2; ++y) best_background = std::max(best_background, z_score(t, j, y, null));
    }
    for (const auto& p : cfg.planted)
        EXPECT_GT(z_score(t, *t.find(p.token), p.target_label, null), best_background) << p.token;
}

TEST(Synth, ByteIdenticalForSeed) {
    SynthConfig cfg;
    cfg.n_instances = 300;
    cfg.plant(3, 0.8, 40);
    cfg.seed = 12;
    EXPECT_EQ(jsonl_bytes(generate(cfg)), jsonl_bytes(generate(cfg)));
    auto other = cfg;
    other.seed = 13;
    EXPECT_NE(jsonl_bytes(generate(cfg)), jsonl_bytes(generate(other)));
}

TEST(Synth, RejectsInvalidConfigs) {
    SynthConfig cfg;
    cfg.n_instances = 100;
    cfg.plant(1, 0.2, 10);  // below 1/|Y|
    EXPECT_THROW(generate(cfg), InputError);
    cfg.plant(1, 1.5, 10);
    EXPECT_THROW(generate(cfg), InputError);
    cfg.plant(1, 0.9, 101);
    EXPECT_THROW(generate(cfg), InputError);
    cfg.planted = {{"bg0003", 0, 0.9, 5}};
    EXPECT_THROW(generate(cfg), InputError);
    cfg.planted = {{"dup", 0, 0.9, 5}, {"dup", 1, 0.9, 5}};
    EXPECT_THROW(generate(cfg), InputError);
    cfg.planted = {{"Upper", 0, 0.9, 5}};
    EXPECT_THROW(generate(cfg), InputError);
    cfg.planted = {{"tok", 2, 0.9, 5}};
    EXPECT_THROW(generate(cfg), InputError);
    SynthConfig one_label;
    one_label.n_labels = 1;
    EXPECT_THROW(generate(one_label), InputError);
}

TEST(Synth, InfeasiblePlacementIsAnError) {
    SynthConfig cfg;
    cfg.n_instances = 20;
    cfg.planted = {{"pl000", 0, 1.0, 20}};
    EXPECT_THROW(generate(cfg), InputError);
}

TEST(Synth, SkewAtChanceBoundaryIsAccepted) {
    SynthConfig cfg;
    cfg.n_instances = 300;
    cfg.n_labels = 3;
    cfg.plant(2, 1.0 / 3.0, 30);
    EXPECT_NO_THROW(generate(cfg));
}

TEST(Synth, CoverageSplitKeepsPlantedTokensInHeldout) {
    SynthConfig cfg;
    cfg.n_instances = 2000;
    cfg.plant(10, 0.9, 60);
    auto d = generate(cfg);
    std::vector<std::string> keys;
    for (const auto& p : cfg.planted) keys.push_back(p.token);
    auto split = split_with_coverage(d, 0.1, 0, keys, 5);
    for (const auto& k : keys) {
        std::size_t c = 0;
        for (const auto& inst : split.heldout.instances()) c += inst.has_token(k);
        EXPECT_GE(c, 5u) << k;
    }
    EXPECT_THROW(split_with_coverage(d, 0.01, 0, keys, 50, 3), InputError);
}

TEST(Synth, ConfigSidecarEchoesEverything) {
    SynthConfig cfg;
    cfg.plant(2, 0.75, 100);
    cfg.seed = 42;
    const auto j = to_json(cfg);
    EXPECT_EQ(j["seed"], 42);
    EXPECT_EQ(j["planted"].size(), 2u);
    EXPECT_EQ(j["planted"][1]["token"], "pl001");
    EXPECT_EQ(j["planted"][1]["target_label"], 1);
    EXPECT_EQ(j["planted"][0]["skew"], 0.75);
}
