#pragma once

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexbias/corpus.hpp"
#include "lexbias/csv.hpp"
#include "lexbias/error.hpp"
#include "lexbias/featstats.hpp"
#include "lexbias/permtest.hpp"
#include "lexbias/probe.hpp"
#include "lexbias/reweight.hpp"

namespace lexbias::io {

using Json = nlohmann::ordered_json;

/// "# key=value" lines written above a CSV header.
using Meta = std::vector<std::pair<std::string, std::string>>;

inline void write_meta(std::ostream& out, const Meta& meta) {
    for (const auto& [k, v] : meta) out << "# " << k << '=' << v << '\n';
}

inline std::string labels_json(const LabelVocab& v) { return Json(v.labels()).dump(); }

inline std::vector<std::string> parse_labels_meta(const csv::Document& doc, const std::string& path) {
    const auto text = doc.meta("labels");
    if (text.empty()) throw InputError("'" + path + "' has no '# labels=' line");
    try {
        return nlohmann::json::parse(text).get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception&) {
        throw InputError("'" + path + "': malformed labels line");
    }
}

inline std::string dist_json(std::span<const double> dist) {
    return Json(std::vector<double>(dist.begin(), dist.end())).dump();
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    return out;
}

// ---------------------------------------------------------------------------
// Feature table:  kind,key,doc_count,count_label_0..count_label_{L-1}

inline void write_feature_table(std::ostream& out, const FeatureTable& t, const LabelVocab& labels,
                                const Meta& extra = {}) {
    Meta meta = extra;
    meta.emplace_back("labels", labels_json(labels));
    meta.emplace_back("n", std::to_string(t.num_instances));
    write_meta(out, meta);
    std::vector<std::string> header = {"kind", "key", "doc_count"};
    for (std::size_t y = 0; y < t.num_labels; ++y) header.push_back("count_label_" + std::to_string(y));
    out << csv::join(header) << '\n';
    for (std::size_t j = 0; j < t.size(); ++j) {
        std::vector<std::string> row = {to_string(t.kind), t.features[j].key, std::to_string(t.doc_count[j])};
        for (std::size_t y = 0; y < t.num_labels; ++y) row.push_back(std::to_string(t.count(j, static_cast<LabelId>(y))));
        out << csv::join(row) << '\n';
    }
}

struct FeatureTableFile {
    std::vector<std::string> labels;
    FeatureTable table;  // counts only, no postings
};

inline FeatureTableFile read_feature_table(const std::string& path) {
    const auto doc = csv::read(path);
    FeatureTableFile f;
    f.labels = parse_labels_meta(doc, path);
    auto& t = f.table;
    t.num_labels = f.labels.size();
    const auto n = doc.meta("n");
    t.num_instances = n.empty() ? 0 : static_cast<std::size_t>(csv::parse_int(n, "n"));
    const auto kind_col = doc.column("kind"), key_col = doc.column("key"), dc_col = doc.column("doc_count");
    std::vector<std::size_t> count_cols;
    for (std::size_t y = 0; y < t.num_labels; ++y) count_cols.push_back(doc.column("count_label_" + std::to_string(y)));
    for (const auto& row : doc.rows) {
        t.kind = parse_feature_kind(row[kind_col]);
        t.features.push_back({t.kind, row[key_col]});
        t.doc_count.push_back(static_cast<std::uint64_t>(csv::parse_int(row[dc_col], "doc_count")));
        for (auto c : count_cols) t.counts.push_back(static_cast<std::uint64_t>(csv::parse_int(row[c], "count")));
    }
    return f;
}

// ---------------------------------------------------------------------------
// Feature stats: kind,key,doc_count,count_label_*,z_label_*,usual_label

inline void write_feature_stats(std::ostream& out, const std::vector<FeatureStats>& stats, const LabelVocab& labels,
                                const Meta& extra = {}) {
    Meta meta = extra;
    meta.emplace_back("labels", labels_json(labels));
    write_meta(out, meta);
    const std::size_t L = labels.size();
    std::vector<std::string> header = {"kind", "key", "doc_count"};
    for (std::size_t y = 0; y < L; ++y) header.push_back("count_label_" + std::to_string(y));
    for (std::size_t y = 0; y < L; ++y) header.push_back("z_label_" + std::to_string(y));
    header.push_back("usual_label");
    out << csv::join(header) << '\n';
    for (const auto& s : stats) {
        std::vector<std::string> row = {to_string(s.feature.kind), s.feature.key, std::to_string(s.doc_count)};
        for (auto c : s.counts) row.push_back(std::to_string(c));
        for (auto z : s.z_scores) row.push_back(csv::format_double(z));
        row.push_back(std::to_string(s.usual_label));
        out << csv::join(row) << '\n';
    }
}

struct FeatureStatsFile {
    std::vector<std::string> labels;
    std::vector<FeatureStats> stats;
};

inline FeatureStatsFile read_feature_stats(const std::string& path) {
    const auto doc = csv::read(path);
    FeatureStatsFile f;
    f.labels = parse_labels_meta(doc, path);
    const std::size_t L = f.labels.size();
    const auto kind_col = doc.column("kind"), key_col = doc.column("key"), dc_col = doc.column("doc_count");
    const auto usual_col = doc.column("usual_label");
    std::vector<std::size_t> count_cols, z_cols;
    for (std::size_t y = 0; y < L; ++y) {
        count_cols.push_back(doc.column("count_label_" + std::to_string(y)));
        z_cols.push_back(doc.column("z_label_" + std::to_string(y)));
    }
    for (std::size_t r = 0; r < doc.rows.size(); ++r) {
        const auto& row = doc.rows[r];
        FeatureStats s;
        s.feature = {parse_feature_kind(row[kind_col]), row[key_col]};
        s.doc_count = static_cast<std::uint64_t>(csv::parse_int(row[dc_col], "doc_count"));
        for (auto c : count_cols) s.counts.push_back(static_cast<std::uint64_t>(csv::parse_int(row[c], "count")));
        for (auto c : z_cols) s.z_scores.push_back(csv::parse_double(row[c], "z-score"));
        for (auto c : s.counts)
            s.cond_dist.push_back(s.doc_count ? static_cast<double>(c) / static_cast<double>(s.doc_count) : 0.0);
        const auto usual = csv::parse_int(row[usual_col], "usual_label");
        if (usual < 0 || static_cast<std::size_t>(usual) >= L)
            throw InputError(path + ":" + std::to_string(doc.line_numbers[r]) + ": usual_label out of range");
        s.usual_label = static_cast<LabelId>(usual);
        f.stats.push_back(std::move(s));
    }
    return f;
}

// ---------------------------------------------------------------------------
// Weights: instance_id,q,loss_multiplier

inline void write_weights(std::ostream& out, const WeightVector& w, std::span<const double> target,
                          const ReweightReport& rep, const Meta& extra = {}) {
    Meta meta = extra;
    meta.emplace_back("n", std::to_string(w.size()));
    meta.emplace_back("target", dist_json(target));
    meta.emplace_back("objective", csv::format_double(rep.objective_after));
    meta.emplace_back("err_before", csv::format_double(rep.err_before));
    meta.emplace_back("err_after", csv::format_double(rep.err_after));
    write_meta(out, meta);
    out << "instance_id,q,loss_multiplier\n";
    const auto mult = loss_multipliers(w.q);
    for (std::size_t i = 0; i < w.size(); ++i)
        out << i << ',' << csv::format_double(w.q[i]) << ',' << csv::format_double(mult[i]) << '\n';
}

struct WeightsFile {
    std::vector<double> q;
    std::vector<double> multipliers;
    csv::Document doc;
};

inline WeightsFile read_weights(const std::string& path) {
    WeightsFile f;
    f.doc = csv::read(path);
    const auto id_col = f.doc.column("instance_id"), q_col = f.doc.column("q"), m_col = f.doc.column("loss_multiplier");
    for (std::size_t r = 0; r < f.doc.rows.size(); ++r) {
        const auto& row = f.doc.rows[r];
        if (csv::parse_int(row[id_col], "instance_id") != static_cast<std::int64_t>(r))
            throw InputError(path + ":" + std::to_string(f.doc.line_numbers[r]) + ": instance ids must be 0..n-1 in order");
        f.q.push_back(csv::parse_double(row[q_col], "q"));
        f.multipliers.push_back(csv::parse_double(row[m_col], "loss_multiplier"));
    }
    return f;
}

// ---------------------------------------------------------------------------
// Predictions: instance_id,predicted_label (label names)

inline void write_predictions(std::ostream& out, const PredictionSet& preds, const LabelVocab& labels,
                              const Meta& extra = {}) {
    write_meta(out, extra);
    out << "instance_id,predicted_label\n";
    for (std::size_t i = 0; i < preds.num_instances(); ++i) {
        if (auto p = preds.get(static_cast<InstanceId>(i)))
            out << i << ',' << csv::escape(labels.name(*p)) << '\n';
    }
}

namespace detail {

inline LabelId resolve_label(const std::string& text, const LabelVocab& labels, const std::string& where) {
    if (auto id = labels.find(text)) return *id;
    throw InputError(where + "unknown predicted label '" + text + "'");
}

} // namespace detail

/// Reads CSV or JSONL ({"instance_id":..,"predicted_label":..}) predictions.
/// Labels are given by name; a JSON integer is taken as a label id.
inline PredictionSet read_predictions(const std::string& path, const LabelVocab& labels, std::size_t num_instances) {
    PredictionSet preds(num_instances);
    auto check_id = [&](std::int64_t id, const std::string& where) {
        if (id < 0 || static_cast<std::size_t>(id) >= num_instances)
            throw InputError(where + "instance id " + std::to_string(id) + " is not in the evaluation data");
        return static_cast<InstanceId>(id);
    };
    if (path.size() >= 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open '" + path + "'");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            const std::string where = path + ":" + std::to_string(lineno) + ": ";
            nlohmann::json rec;
            try {
                rec = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error&) {
                throw InputError(where + "malformed JSON");
            }
            if (!rec.contains("instance_id") || !rec.contains("predicted_label") || !rec["instance_id"].is_number_integer())
                throw InputError(where + "needs integer instance_id and predicted_label");
            const auto id = check_id(rec["instance_id"].get<std::int64_t>(), where);
            const auto& lab = rec["predicted_label"];
            LabelId y = 0;
            if (lab.is_number_integer()) {
                const auto v = lab.get<std::int64_t>();
                if (v < 0 || static_cast<std::size_t>(v) >= labels.size()) throw InputError(where + "label id out of range");
                y = static_cast<LabelId>(v);
            } else if (lab.is_string()) {
                y = detail::resolve_label(lab.get<std::string>(), labels, where);
            } else {
                throw InputError(where + "predicted_label must be a string or integer");
            }
            preds.set(id, y);
        }
        return preds;
    }
    const auto doc = csv::read(path);
    const auto id_col = doc.column("instance_id"), lab_col = doc.column("predicted_label");
    for (std::size_t r = 0; r < doc.rows.size(); ++r) {
        const std::string where = path + ":" + std::to_string(doc.line_numbers[r]) + ": ";
        const auto id = check_id(csv::parse_int(doc.rows[r][id_col], "instance_id"), where);
        preds.set(id, detail::resolve_label(doc.rows[r][lab_col], labels, where));
    }
    return preds;
}

// ---------------------------------------------------------------------------
// Probe model: kind,key,w_0..w_{L-1}; kind is "feature" or "bias"

inline void write_model(std::ostream& out, const ProbeModel& m, const Meta& extra = {}) {
    Meta meta = {{"format", "lexbias-probe-v1"}};
    meta.insert(meta.end(), extra.begin(), extra.end());
    meta.emplace_back("labels", labels_json(m.label_vocab()));
    write_meta(out, meta);
    const std::size_t L = m.num_labels();
    std::vector<std::string> header = {"kind", "key"};
    for (std::size_t y = 0; y < L; ++y) header.push_back("w_" + std::to_string(y));
    out << csv::join(header) << '\n';
    auto row = [&](const std::string& kind, const std::string& key, std::size_t r) {
        std::vector<std::string> fields = {kind, key};
        for (std::size_t y = 0; y < L; ++y) fields.push_back(csv::format_double(m.weight(r, static_cast<LabelId>(y))));
        out << csv::join(fields) << '\n';
    };
    for (std::size_t c = 0; c < m.vocab().size(); ++c) row("feature", m.vocab()[c], c);
    row("bias", "", m.vocab().size());
}

inline ProbeModel read_model(const std::string& path) {
    const auto doc = csv::read(path);
    if (doc.meta("format") != "lexbias-probe-v1") throw InputError("'" + path + "' is not a lexbias probe model");
    const auto labels = parse_labels_meta(doc, path);
    const std::size_t L = labels.size();
    const auto kind_col = doc.column("kind"), key_col = doc.column("key");
    std::vector<std::size_t> w_cols;
    for (std::size_t y = 0; y < L; ++y) w_cols.push_back(doc.column("w_" + std::to_string(y)));
    std::vector<std::string> vocab;
    std::vector<double> weights, bias;
    for (const auto& row : doc.rows) {
        std::vector<double> w;
        for (auto c : w_cols) w.push_back(csv::parse_double(row[c], "weight"));
        if (row[kind_col] == "bias") {
            bias = std::move(w);
        } else if (row[kind_col] == "feature") {
            vocab.push_back(row[key_col]);
            weights.insert(weights.end(), w.begin(), w.end());
        } else {
            throw InputError("'" + path + "': unknown row kind '" + row[kind_col] + "'");
        }
    }
    if (bias.size() != L) throw InputError("'" + path + "' has no bias row");
    weights.insert(weights.end(), bias.begin(), bias.end());
    return ProbeModel(std::move(vocab), std::move(weights), LabelVocab(labels));
}

// ---------------------------------------------------------------------------
// JSON reports

inline Json optional_number(std::optional<double> v) { return v ? Json(*v) : Json(nullptr); }

inline Json to_json(const TestResult& r) {
    Json j;
    j["M"] = r.M;
    j["K"] = r.K;
    j["n_U"] = r.n_U;
    j["c_U"] = r.c_U;
    j["n_N"] = r.n_N;
    j["c_N"] = r.c_N;
    j["acc_U"] = r.acc_U;
    j["acc_N"] = r.acc_N;
    j["log10_p"] = r.log10_p;
    j["p"] = r.p;
    return j;
}

inline Json to_json(const ReweightReport& r) {
    Json j;
    j["err_before"] = r.err_before;
    j["err_after"] = r.err_after;
    j["objective_before"] = r.objective_before;
    j["objective_after"] = r.objective_after;
    j["converged"] = r.converged;
    j["steps"] = r.steps;
    j["best_step"] = r.best_step;
    j["excluded_features"] = r.excluded_features;
    j["warnings"] = r.warnings;
    j["objective_trace"] = r.objective_trace;
    return j;
}

inline Json to_json(const OptimizerConfig& c) {
    Json j;
    j["max_steps"] = c.max_steps;
    j["step_size"] = c.step_size;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["epsilon"] = c.epsilon;
    j["tolerance"] = c.tolerance;
    j["window"] = c.window;
    j["min_rel_improvement"] = c.min_rel_improvement;
    j["seed"] = c.seed;
    return j;
}

inline Json to_json(const TrainConfig& c) {
    Json j;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["step_size"] = c.step_size;
    j["l2_strength"] = c.l2_strength;
    j["lr_decay"] = c.lr_decay;
    j["seed"] = c.seed;
    return j;
}

inline Json to_json(const AccuracyReport& r, const LabelVocab& labels) {
    Json j;
    j["n"] = r.n;
    j["correct"] = r.correct;
    j["accuracy"] = r.accuracy;
    Json per = Json::object();
    for (std::size_t y = 0; y < labels.size(); ++y) {
        per[labels.name(static_cast<LabelId>(y))] = {{"total", r.per_label_total[y]},
                                                     {"correct", r.per_label_correct[y]},
                                                     {"accuracy", optional_number(r.per_label_accuracy[y])}};
    }
    j["per_label"] = std::move(per);
    return j;
}

inline Json to_json(const BalanceReport& r) {
    Json j;
    j["aggregate_err"] = r.aggregate_err;
    j["target"] = r.target;
    j["features"] = r.per_feature.size();
    j["excluded"] = r.excluded;
    return j;
}

} // namespace lexbias::io
