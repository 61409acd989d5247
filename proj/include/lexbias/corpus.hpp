#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lexbias/error.hpp"
#include "lexbias/rng.hpp"
#include "lexbias/text.hpp"

namespace lexbias {

using LabelId = std::uint32_t;
using InstanceId = std::uint32_t;

/// Ordered, duplicate-free label names with a name -> id index.
class LabelVocab {
public:
    LabelVocab() = default;

    explicit LabelVocab(std::vector<std::string> labels) : labels_(std::move(labels)) {
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (!index_.emplace(labels_[i], static_cast<LabelId>(i)).second)
                throw InputError("duplicate label '" + labels_[i] + "'");
        }
    }

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& name(LabelId id) const { return labels_.at(id); }

    std::optional<LabelId> find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    LabelId intern(const std::string& name) {
        auto [it, inserted] = index_.emplace(name, static_cast<LabelId>(labels_.size()));
        if (inserted) labels_.push_back(name);
        return it->second;
    }

    friend bool operator==(const LabelVocab& a, const LabelVocab& b) { return a.labels_ == b.labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, LabelId> index_;
};

struct Instance {
    InstanceId id = 0;
    std::vector<std::string> segments;  // one or two raw texts
    std::vector<std::string> tokens;    // sorted distinct tokens over all segments
    LabelId label = 0;

    bool has_token(const std::string& tok) const {
        return std::binary_search(tokens.begin(), tokens.end(), tok);
    }

    friend bool operator==(const Instance&, const Instance&) = default;
};

/// A labeled record before tokenization.
struct Record {
    std::vector<std::string> segments;
    std::string label;
};

/// Immutable labeled dataset. Instance ids equal their position.
class Dataset {
public:
    Dataset(std::vector<Instance> instances, LabelVocab vocab, TokenizerOptions tokenizer = {},
            std::vector<std::string> segment_fields = {})
        : instances_(std::move(instances)),
          vocab_(std::move(vocab)),
          tokenizer_(tokenizer),
          segment_fields_(std::move(segment_fields)) {
        if (instances_.empty()) throw InputError("dataset has no instances");
        if (vocab_.size() < 2) throw InputError("dataset needs at least 2 labels");
        std::vector<std::size_t> counts(vocab_.size(), 0);
        for (std::size_t i = 0; i < instances_.size(); ++i) {
            const auto& inst = instances_[i];
            if (inst.id != i) throw InputError("instance ids must equal positions");
            if (inst.label >= vocab_.size()) throw InputError("instance label out of range");
            if (inst.segments.empty() || inst.segments.size() > 2)
                throw InputError("instance " + std::to_string(i) + " must have 1 or 2 segments");
            ++counts[inst.label];
        }
        overall_.resize(vocab_.size());
        const double n = static_cast<double>(instances_.size());
        for (std::size_t y = 0; y < counts.size(); ++y) overall_[y] = static_cast<double>(counts[y]) / n;
    }

    static Dataset from_records(const std::vector<Record>& records, LabelVocab vocab,
                                TokenizerOptions tokenizer = {},
                                std::vector<std::string> segment_fields = {}) {
        std::vector<Instance> instances;
        instances.reserve(records.size());
        for (const auto& rec : records) {
            Instance inst;
            inst.id = static_cast<InstanceId>(instances.size());
            inst.segments = rec.segments;
            inst.tokens = tokenize_segments(rec.segments, tokenizer);
            auto id = vocab.find(rec.label);
            if (!id) id = vocab.intern(rec.label);
            inst.label = *id;
            instances.push_back(std::move(inst));
        }
        return Dataset(std::move(instances), std::move(vocab), tokenizer, std::move(segment_fields));
    }

    static std::vector<std::string> tokenize_segments(const std::vector<std::string>& segments,
                                                      const TokenizerOptions& opts) {
        std::vector<std::string> tokens;
        for (const auto& s : segments) {
            auto part = tokenize_stream(s, opts);
            tokens.insert(tokens.end(), std::make_move_iterator(part.begin()),
                          std::make_move_iterator(part.end()));
        }
        std::sort(tokens.begin(), tokens.end());
        tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
        return tokens;
    }

    std::size_t size() const { return instances_.size(); }
    std::size_t num_labels() const { return vocab_.size(); }
    const std::vector<Instance>& instances() const { return instances_; }
    const Instance& operator[](std::size_t i) const { return instances_[i]; }
    const LabelVocab& label_vocab() const { return vocab_; }
    const std::vector<double>& overall_dist() const { return overall_; }
    const TokenizerOptions& tokenizer() const { return tokenizer_; }
    const std::vector<std::string>& segment_fields() const { return segment_fields_; }

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.instances_ == b.instances_ && a.vocab_ == b.vocab_ && a.overall_ == b.overall_;
    }

private:
    std::vector<Instance> instances_;
    LabelVocab vocab_;
    std::vector<double> overall_;
    TokenizerOptions tokenizer_;
    std::vector<std::string> segment_fields_;
};

/// Label distribution recomputed from the instances.
inline std::vector<double> overall_label_distribution(const Dataset& d) {
    std::vector<double> dist(d.num_labels(), 0.0);
    for (const auto& inst : d.instances()) dist[inst.label] += 1.0;
    for (auto& p : dist) p /= static_cast<double>(d.size());
    return dist;
}

inline std::vector<double> uniform_distribution(std::size_t k) {
    return std::vector<double>(k, 1.0 / static_cast<double>(k));
}

/// Instances at the given positions, renumbered from 0 in the given order.
inline Dataset subset(const Dataset& d, const std::vector<std::size_t>& positions) {
    std::vector<Instance> out;
    out.reserve(positions.size());
    for (auto pos : positions) {
        Instance inst = d[pos];
        inst.id = static_cast<InstanceId>(out.size());
        out.push_back(std::move(inst));
    }
    return Dataset(std::move(out), d.label_vocab(), d.tokenizer(), d.segment_fields());
}

struct Split {
    Dataset train;
    Dataset heldout;
};

/// Seeded random split; both parts keep the original relative order.
inline Split split_holdout(const Dataset& d, double heldout_fraction, std::uint64_t seed) {
    if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0))
        throw InputError("held-out fraction must be in (0, 1)");
    std::vector<std::size_t> order(d.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    auto n_held = static_cast<std::size_t>(std::llround(heldout_fraction * static_cast<double>(d.size())));
    n_held = std::clamp<std::size_t>(n_held, 1, d.size() - 1);
    std::vector<std::size_t> held(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_held));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_held), order.end());
    std::sort(held.begin(), held.end());
    std::sort(train.begin(), train.end());
    return {subset(d, train), subset(d, held)};
}

// ---------------------------------------------------------------------------
// File formats

enum class Format { jsonl, tsv };

inline Format format_from_path(const std::string& path) {
    auto ends_with = [&](std::string_view suffix) {
        return path.size() >= suffix.size() &&
               path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    return ends_with(".tsv") || ends_with(".tab") ? Format::tsv : Format::jsonl;
}

/// Field names used when reading a dataset file.
struct Schema {
    /// One or two text fields. Empty means auto-detect from the first record.
    std::vector<std::string> text_fields;
    std::string label_field = "label";
    /// Explicit label order. Empty means first-seen order.
    std::vector<std::string> labels;
    /// Records with these labels are dropped (e.g. "-" for no gold label).
    std::vector<std::string> skip_labels;
    TokenizerOptions tokenizer;
};

namespace detail {

inline const std::vector<std::vector<std::string>>& known_text_fields() {
    static const std::vector<std::vector<std::string>> known = {
        {"text"},
        {"premise", "hypothesis"},
        {"sentence1", "sentence2"},
        {"question1", "question2"},
        {"question", "sentence"},
        {"sentence"},
    };
    return known;
}

template <typename HasField>
std::vector<std::string> detect_text_fields(HasField&& has) {
    for (const auto& cand : known_text_fields()) {
        if (has(cand.front())) return cand;
    }
    return {};
}

class RecordCollector {
public:
    RecordCollector(const Schema& schema, std::string path) : schema_(schema), path_(std::move(path)) {
        if (!schema.labels.empty()) vocab_ = LabelVocab(schema.labels);
        skip_.insert(schema.skip_labels.begin(), schema.skip_labels.end());
    }

    void add(std::vector<std::string> segments, std::string label, std::size_t lineno) {
        if (segments.empty())
            throw InputError(where(lineno) + "record has no text fields");
        if (skip_.count(label)) return;
        if (!schema_.labels.empty() && !vocab_.find(label))
            throw InputError(where(lineno) + "unknown label '" + label + "'");
        vocab_.intern(label);
        records_.push_back({std::move(segments), std::move(label)});
    }

    std::string where(std::size_t lineno) const { return path_ + ":" + std::to_string(lineno) + ": "; }

    Dataset finish(std::vector<std::string> fields) {
        if (records_.empty()) throw InputError("'" + path_ + "' contains no records");
        return Dataset::from_records(records_, std::move(vocab_), schema_.tokenizer, std::move(fields));
    }

private:
    const Schema& schema_;
    std::string path_;
    LabelVocab vocab_;
    std::unordered_set<std::string> skip_;
    std::vector<Record> records_;
};

inline std::string json_label(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer() || v.is_number_unsigned() || v.is_boolean()) return v.dump();
    throw InputError("label must be a string or integer");
}

inline Dataset load_jsonl(std::istream& in, const Schema& schema, const std::string& path) {
    RecordCollector collector(schema, path);
    std::vector<std::string> fields = schema.text_fields;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw InputError(collector.where(lineno) + "malformed JSON: " + e.what());
        }
        if (!rec.is_object()) throw InputError(collector.where(lineno) + "record is not a JSON object");
        if (fields.empty()) {
            fields = detect_text_fields([&](const std::string& f) { return rec.contains(f); });
            if (fields.empty()) throw InputError(collector.where(lineno) + "record has no text fields");
        }
        auto lab = rec.find(schema.label_field);
        if (lab == rec.end() || lab->is_null())
            throw InputError(collector.where(lineno) + "missing label field '" + schema.label_field + "'");
        std::string label;
        try {
            label = json_label(*lab);
        } catch (const InputError& e) {
            throw InputError(collector.where(lineno) + e.what());
        }
        std::vector<std::string> segments;
        for (const auto& f : fields) {
            auto it = rec.find(f);
            if (it == rec.end() || it->is_null()) continue;
            if (!it->is_string())
                throw InputError(collector.where(lineno) + "text field '" + f + "' is not a string");
            segments.push_back(it->get<std::string>());
        }
        collector.add(std::move(segments), std::move(label), lineno);
    }
    return collector.finish(std::move(fields));
}

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

inline Dataset load_tsv(std::istream& in, const Schema& schema, const std::string& path) {
    RecordCollector collector(schema, path);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        header = split_tabs(line);
    }
    if (header.empty()) throw InputError("'" + path + "' is empty");
    auto col = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    };
    std::vector<std::string> fields = schema.text_fields;
    if (fields.empty()) fields = detect_text_fields([&](const std::string& f) { return col(f).has_value(); });
    std::vector<std::size_t> text_cols;
    for (const auto& f : fields) {
        if (auto c = col(f)) text_cols.push_back(*c);
    }
    if (text_cols.empty()) throw InputError(path + ": header has no text columns");
    const auto label_col = col(schema.label_field);
    if (!label_col) throw InputError(path + ": header has no label column '" + schema.label_field + "'");

    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = split_tabs(line);
        if (*label_col >= cells.size() || cells[*label_col].empty())
            throw InputError(collector.where(lineno) + "row is missing the label column");
        std::vector<std::string> segments;
        for (auto c : text_cols) {
            if (c < cells.size() && !cells[c].empty()) segments.push_back(cells[c]);
        }
        collector.add(std::move(segments), cells[*label_col], lineno);
    }
    return collector.finish(std::move(fields));
}

} // namespace detail

inline Dataset load_dataset(const std::string& path, Format format, const Schema& schema = {}) {
    if (schema.text_fields.size() > 2) throw InputError("at most two text fields may be configured");
    std::ifstream in(path);
    if (!in) throw InputError("cannot open dataset '" + path + "'");
    return format == Format::tsv ? detail::load_tsv(in, schema, path) : detail::load_jsonl(in, schema, path);
}

inline Dataset load_dataset(const std::string& path, const Schema& schema = {}) {
    return load_dataset(path, format_from_path(path), schema);
}

/// Writes one JSON object per instance using the dataset's segment field
/// names (or "text" / "premise","hypothesis" when none are recorded).
inline void write_jsonl(const Dataset& d, std::ostream& out, const std::string& label_field = "label") {
    for (const auto& inst : d.instances()) {
        nlohmann::ordered_json rec;
        const auto& names = d.segment_fields();
        for (std::size_t s = 0; s < inst.segments.size(); ++s) {
            std::string name;
            if (s < names.size()) name = names[s];
            else if (inst.segments.size() == 1) name = "text";
            else name = s == 0 ? "premise" : "hypothesis";
            rec[name] = inst.segments[s];
        }
        rec[label_field] = d.label_vocab().name(inst.label);
        out << rec.dump() << '\n';
    }
}

inline void write_jsonl(const Dataset& d, const std::string& path, const std::string& label_field = "label") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    write_jsonl(d, out, label_field);
}

} // namespace lexbias
