#include <gtest/gtest.h>

#include "lexbias/io.hpp"
#include "lexbias/synth.hpp"
#include "support.hpp"

using namespace lexbias;
using lexbias::testing::make_dataset;
using lexbias::testing::read_file;
using lexbias::testing::TempDir;

namespace {

Dataset corpus() {
    SynthConfig cfg;
    cfg.n_instances = 300;
    cfg.n_labels = 3;
    cfg.background_vocab_size = 40;
    cfg.plant(3, 0.8, 50);
    return generate(cfg);
}

template <class F>
std::string write_to(const TempDir& tmp, const std::string& name, F&& f) {
    auto out = io::open_out(tmp.file(name));
    f(out);
    return tmp.file(name);
}

} // namespace

TEST(Csv, FieldsRoundTrip) {
    const std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"", "", "a b"};
    EXPECT_EQ(csv::split(csv::join(fields)), fields);
    EXPECT_EQ(csv::format_double(0.1), "0.1");
    EXPECT_EQ(csv::parse_double(csv::format_double(1.0 / 3.0), "x"), 1.0 / 3.0);
    EXPECT_THROW(csv::parse_double("abc", "x"), InputError);
    EXPECT_THROW(csv::parse_int("1.5", "x"), InputError);
}

TEST(Csv, RaggedRowCitesLine) {
    TempDir tmp;
    auto path = tmp.write("bad.csv", "# a=1\nx,y\n1,2\n3\n");
    try {
        csv::read(path);
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find(":4:"), std::string::npos) << e.what();
    }
}

TEST(Io, FeatureTableRoundTrip) {
    TempDir tmp;
    auto d = corpus();
    auto t = build_feature_table(d, {});
    auto path = write_to(tmp, "t.csv", [&](auto& out) { io::write_feature_table(out, t, d.label_vocab()); });
    auto back = io::read_feature_table(path);
    EXPECT_EQ(back.labels, d.label_vocab().labels());
    EXPECT_EQ(back.table.features, t.features);
    EXPECT_EQ(back.table.counts, t.counts);
    EXPECT_EQ(back.table.doc_count, t.doc_count);
    EXPECT_EQ(back.table.num_instances, d.size());
}

TEST(Io, FeatureStatsRoundTrip) {
    TempDir tmp;
    auto d = corpus();
    auto sel = select_top_features(build_feature_table(d, {}), d.overall_dist(), 4);
    auto path = write_to(tmp, "s.csv", [&](auto& out) { io::write_feature_stats(out, sel.features, d.label_vocab()); });
    auto back = io::read_feature_stats(path);
    ASSERT_EQ(back.stats.size(), sel.features.size());
    for (std::size_t k = 0; k < back.stats.size(); ++k) {
        EXPECT_EQ(back.stats[k].feature, sel.features[k].feature);
        EXPECT_EQ(back.stats[k].counts, sel.features[k].counts);
        EXPECT_EQ(back.stats[k].z_scores, sel.features[k].z_scores);
        EXPECT_EQ(back.stats[k].cond_dist, sel.features[k].cond_dist);
        EXPECT_EQ(back.stats[k].usual_label, sel.features[k].usual_label);
    }
}

TEST(Io, WeightsRoundTrip) {
    TempDir tmp;
    auto d = lexbias::testing::toy4();
    auto res = optimize(d, build_feature_table(d, {}), std::vector<double>{0.5, 0.5});
    auto path = write_to(tmp, "w.csv", [&](auto& out) {
        io::write_weights(out, res.weights, std::vector<double>{0.5, 0.5}, res.report);
    });
    auto back = io::read_weights(path);
    EXPECT_EQ(back.q, res.weights.q);
    EXPECT_EQ(back.multipliers, loss_multipliers(res.weights.q));
    EXPECT_EQ(back.doc.meta("n"), "4");
    EXPECT_EQ(back.doc.meta("target"), "[0.5,0.5]");
}

TEST(Io, PredictionsRoundTripCsvAndJsonl) {
    TempDir tmp;
    auto d = make_dataset({{"a", "yes, sure"}, {"b", "no"}, {"c", "no"}});
    PredictionSet preds(3);
    preds.set(0, 1);
    preds.set(1, 0);
    preds.set(2, 1);
    auto path = write_to(tmp, "p.csv", [&](auto& out) { io::write_predictions(out, preds, d.label_vocab()); });
    EXPECT_EQ(io::read_predictions(path, d.label_vocab(), 3), preds);

    auto jl = tmp.write("p.jsonl",
                        "{\"instance_id\":0,\"predicted_label\":\"no\"}\n"
                        "{\"instance_id\":1,\"predicted_label\":0}\n"
                        "{\"instance_id\":2,\"predicted_label\":\"no\"}\n");
    EXPECT_EQ(io::read_predictions(jl, d.label_vocab(), 3), preds);
    auto bad = tmp.write("bad.csv", "instance_id,predicted_label\n0,maybe\n");
    EXPECT_THROW(io::read_predictions(bad, d.label_vocab(), 3), InputError);
    auto out_of_range = tmp.write("oor.csv", "instance_id,predicted_label\n7,no\n");
    EXPECT_THROW(io::read_predictions(out_of_range, d.label_vocab(), 3), InputError);
}

TEST(Io, ModelRoundTripPreservesPredictions) {
    TempDir tmp;
    auto d = corpus();
    auto model = train(d, {}, TrainConfig{.epochs = 3}).model;
    auto path = write_to(tmp, "m.csv", [&](auto& out) { io::write_model(out, model); });
    auto back = io::read_model(path);
    EXPECT_EQ(back, model);
    EXPECT_EQ(predict(back, d), predict(model, d));
    auto not_model = tmp.write("x.csv", "# labels=[\"a\",\"b\"]\nkind,key,w_0,w_1\nbias,,0,0\n");
    EXPECT_THROW(io::read_model(not_model), InputError);
}

TEST(Io, WritesAreByteStable) {
    TempDir tmp;
    auto d = corpus();
    auto t = build_feature_table(d, {});
    auto a = write_to(tmp, "a.csv", [&](auto& out) { io::write_feature_table(out, t, d.label_vocab()); });
    auto b = write_to(tmp, "b.csv", [&](auto& out) { io::write_feature_table(out, t, d.label_vocab()); });
    EXPECT_EQ(read_file(a), read_file(b));
}

TEST(Io, TestResultJson) {
    auto j = io::to_json(exact_log_p(lexbias::testing::pooled(5, 2, 2, 2)));
    EXPECT_EQ(j["M"], 5);
    EXPECT_NEAR(j["log10_p"].get<double>(), -1.0, 1e-14);
}
