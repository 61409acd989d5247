#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lexbias/corpus.hpp"
#include "lexbias/error.hpp"
#include "lexbias/rng.hpp"
#include "lexbias/stopwords.hpp"

namespace lexbias {

enum class FeatureKind { unigram, bigram };

inline std::string to_string(FeatureKind k) { return k == FeatureKind::unigram ? "unigram" : "bigram"; }

inline FeatureKind parse_feature_kind(const std::string& s) {
    if (s == "unigram") return FeatureKind::unigram;
    if (s == "bigram") return FeatureKind::bigram;
    throw InputError("unknown feature kind '" + s + "'");
}

/// A unigram key is the token; a bigram key is the two tokens joined by one
/// space (tokens never contain whitespace).
struct FeatureId {
    FeatureKind kind = FeatureKind::unigram;
    std::string key;

    friend bool operator==(const FeatureId&, const FeatureId&) = default;
    friend auto operator<=>(const FeatureId&, const FeatureId&) = default;
};

inline std::string bigram_key(const std::string& first, const std::string& second) {
    std::string key;
    key.reserve(first.size() + second.size() + 1);
    key += first;
    key += ' ';
    key += second;
    return key;
}

/// Adjacent token pairs within each segment, deduplicated and sorted. Pairs
/// never span the boundary between two segments.
inline std::vector<std::string> instance_bigrams(const Instance& inst, const TokenizerOptions& opts) {
    std::vector<std::string> out;
    for (const auto& seg : inst.segments) {
        const auto stream = tokenize_stream(seg, opts);
        for (std::size_t t = 1; t < stream.size(); ++t) out.push_back(bigram_key(stream[t - 1], stream[t]));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Distinct feature keys of the given kind present in an instance.
inline std::vector<std::string> instance_features(const Instance& inst, FeatureKind kind,
                                                  const TokenizerOptions& opts) {
    return kind == FeatureKind::unigram ? inst.tokens : instance_bigrams(inst, opts);
}

/// Per-feature label counts and postings, features sorted by key.
struct FeatureTable {
    FeatureKind kind = FeatureKind::unigram;
    std::size_t num_labels = 0;
    std::size_t num_instances = 0;
    std::vector<FeatureId> features;
    std::vector<std::uint64_t> counts;  // row-major [feature][label]
    std::vector<std::uint64_t> doc_count;
    std::vector<std::vector<InstanceId>> postings;  // empty when read back from CSV
    std::vector<LabelId> instance_labels;           // likewise

    std::size_t size() const { return features.size(); }
    bool empty() const { return features.empty(); }

    std::uint64_t count(std::size_t j, LabelId y) const { return counts[j * num_labels + y]; }

    std::span<const std::uint64_t> label_counts(std::size_t j) const {
        return {counts.data() + j * num_labels, num_labels};
    }

    /// p̂(y | feature j present).
    std::vector<double> cond_dist(std::size_t j) const {
        std::vector<double> out(num_labels);
        const double total = static_cast<double>(doc_count[j]);
        for (std::size_t y = 0; y < num_labels; ++y) out[y] = static_cast<double>(count(j, y)) / total;
        return out;
    }

    std::optional<std::size_t> find(const std::string& key) const {
        auto it = std::lower_bound(features.begin(), features.end(), key,
                                   [](const FeatureId& f, const std::string& k) { return f.key < k; });
        if (it == features.end() || it->key != key) return std::nullopt;
        return static_cast<std::size_t>(it - features.begin());
    }

    bool covers_all_labels(std::size_t j) const {
        for (std::size_t y = 0; y < num_labels; ++y)
            if (count(j, y) == 0) return false;
        return true;
    }

    /// Table restricted to the given feature rows (kept in the given order).
    FeatureTable restricted(const std::vector<std::size_t>& rows) const {
        FeatureTable out;
        out.kind = kind;
        out.num_labels = num_labels;
        out.num_instances = num_instances;
        out.instance_labels = instance_labels;
        for (auto j : rows) {
            out.features.push_back(features[j]);
            auto lc = label_counts(j);
            out.counts.insert(out.counts.end(), lc.begin(), lc.end());
            out.doc_count.push_back(doc_count[j]);
            if (!postings.empty()) out.postings.push_back(postings[j]);
        }
        return out;
    }
};

struct FeatureTableOptions {
    FeatureKind kind = FeatureKind::unigram;
    std::uint64_t min_count = 1;
    bool require_all_labels = false;
    /// Applied to unigrams only.
    StopWords stop_words;
};

inline FeatureTable build_feature_table(const Dataset& d, const FeatureTableOptions& opts) {
    if (opts.min_count < 1) throw InputError("min_count must be >= 1");
    std::unordered_map<std::string, std::vector<InstanceId>> posting_map;
    for (const auto& inst : d.instances()) {
        for (auto& key : instance_features(inst, opts.kind, d.tokenizer())) {
            posting_map[std::move(key)].push_back(inst.id);
        }
    }

    std::vector<std::string> keys;
    keys.reserve(posting_map.size());
    const std::size_t L = d.num_labels();
    std::vector<std::uint64_t> scratch(L);
    auto label_ok = [&](const std::vector<InstanceId>& ids) {
        if (!opts.require_all_labels) return true;
        std::fill(scratch.begin(), scratch.end(), 0);
        for (auto i : ids) ++scratch[d[i].label];
        return std::all_of(scratch.begin(), scratch.end(), [](auto c) { return c > 0; });
    };
    for (const auto& [key, ids] : posting_map) {
        if (ids.size() < opts.min_count) continue;
        if (opts.kind == FeatureKind::unigram && opts.stop_words.count(key)) continue;
        if (!label_ok(ids)) continue;
        keys.push_back(key);
    }
    std::sort(keys.begin(), keys.end());

    FeatureTable table;
    table.kind = opts.kind;
    table.num_labels = L;
    table.num_instances = d.size();
    table.instance_labels.reserve(d.size());
    for (const auto& inst : d.instances()) table.instance_labels.push_back(inst.label);
    table.features.reserve(keys.size());
    table.counts.assign(keys.size() * L, 0);
    for (std::size_t j = 0; j < keys.size(); ++j) {
        auto& ids = posting_map[keys[j]];
        for (auto i : ids) ++table.counts[j * L + d[i].label];
        table.doc_count.push_back(ids.size());
        table.postings.push_back(std::move(ids));
        table.features.push_back({opts.kind, keys[j]});
    }
    return table;
}

// ---------------------------------------------------------------------------
// Association statistics

enum class NullKind { empirical, uniform };

inline NullKind parse_null_kind(const std::string& s) {
    if (s == "empirical") return NullKind::empirical;
    if (s == "uniform") return NullKind::uniform;
    throw InputError("unknown distribution kind '" + s + "' (expected uniform or empirical)");
}

inline std::string to_string(NullKind k) { return k == NullKind::empirical ? "empirical" : "uniform"; }

inline std::vector<double> reference_distribution(const Dataset& d, NullKind kind) {
    return kind == NullKind::empirical ? d.overall_dist() : uniform_distribution(d.num_labels());
}

/// One-proportion z statistic of p̂(y | feature) against p0 = null_dist[y].
inline double z_score(std::uint64_t label_count, std::uint64_t doc_count, double p0) {
    if (doc_count == 0) throw InputError("z-score of a feature with no occurrences");
    if (!(p0 > 0.0 && p0 < 1.0)) throw InputError("degenerate null proportion for z-score");
    const double n = static_cast<double>(doc_count);
    const double p_hat = static_cast<double>(label_count) / n;
    return (p_hat - p0) / std::sqrt(p0 * (1.0 - p0) / n);
}

inline double z_score(const FeatureTable& table, std::size_t j, LabelId y, std::span<const double> null_dist) {
    return z_score(table.count(j, y), table.doc_count[j], null_dist[y]);
}

struct FeatureStats {
    FeatureId feature;
    std::uint64_t doc_count = 0;
    std::vector<std::uint64_t> counts;
    std::vector<double> cond_dist;
    std::vector<double> z_scores;
    LabelId usual_label = 0;
};

/// Lowest index wins ties.
inline LabelId argmax_label(std::span<const double> v) {
    LabelId best = 0;
    for (std::size_t y = 1; y < v.size(); ++y)
        if (v[y] > v[best]) best = static_cast<LabelId>(y);
    return best;
}

inline FeatureStats feature_stats(const FeatureTable& table, std::size_t j, std::span<const double> null_dist) {
    FeatureStats s;
    s.feature = table.features[j];
    s.doc_count = table.doc_count[j];
    auto lc = table.label_counts(j);
    s.counts.assign(lc.begin(), lc.end());
    s.cond_dist = table.cond_dist(j);
    s.z_scores.resize(table.num_labels);
    for (std::size_t y = 0; y < table.num_labels; ++y)
        s.z_scores[y] = z_score(table, j, static_cast<LabelId>(y), null_dist);
    s.usual_label = argmax_label(s.z_scores);
    return s;
}

struct FeatureSelection {
    std::vector<FeatureStats> features;
    std::vector<std::string> warnings;
};

/// Top-k rows by z_scores[y] for each label y, ties by key. Rows are listed
/// label by label in rank order; a row already taken for an earlier label is
/// not repeated.
inline FeatureSelection select_top(const std::vector<FeatureStats>& stats, std::size_t num_labels,
                                   std::size_t k) {
    if (k < 1) throw InputError("k must be >= 1");
    FeatureSelection out;
    std::vector<bool> taken(stats.size(), false);
    std::vector<std::size_t> order(stats.size());
    for (std::size_t y = 0; y < num_labels; ++y) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        const std::size_t take = std::min(k, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              if (stats[a].z_scores[y] != stats[b].z_scores[y])
                                  return stats[a].z_scores[y] > stats[b].z_scores[y];
                              return stats[a].feature < stats[b].feature;
                          });
        if (take < k) {
            out.warnings.push_back("label " + std::to_string(y) + ": only " + std::to_string(take) +
                                   " eligible features, " + std::to_string(k) + " requested");
        }
        for (std::size_t r = 0; r < take; ++r) {
            if (taken[order[r]]) continue;
            taken[order[r]] = true;
            out.features.push_back(stats[order[r]]);
        }
    }
    return out;
}

inline FeatureSelection select_top_features(const FeatureTable& table, std::span<const double> null_dist,
                                            std::size_t k) {
    std::vector<FeatureStats> stats;
    stats.reserve(table.size());
    for (std::size_t j = 0; j < table.size(); ++j) stats.push_back(feature_stats(table, j, null_dist));
    return select_top(stats, table.num_labels, k);
}

// ---------------------------------------------------------------------------
// Label balance

struct BalanceReport {
    /// Mean absolute deviation per feature; nullopt when the feature has zero
    /// total weight.
    std::vector<std::optional<double>> per_feature;
    double aggregate_err = 0.0;
    std::vector<double> target;
    std::size_t excluded = 0;
};

/// (1/|Y|) Σ_y |q(y | F_j = 1) − reference[y]| per feature and its mean over
/// features with nonzero weighted mass. Empty weights mean uniform.
inline BalanceReport label_balance(const FeatureTable& table, std::span<const double> weights,
                                   std::span<const double> reference) {
    if (reference.size() != table.num_labels) throw InputError("reference distribution has wrong length");
    if (!weights.empty()) {
        if (weights.size() != table.num_instances) throw InputError("weight vector length differs from dataset size");
        if (table.postings.size() != table.size() || table.instance_labels.size() != table.num_instances)
            throw InputError("weighted balance needs feature postings");
    }
    BalanceReport rep;
    rep.target.assign(reference.begin(), reference.end());
    rep.per_feature.resize(table.size());
    const std::size_t L = table.num_labels;
    std::vector<double> mass(L);
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t j = 0; j < table.size(); ++j) {
        double total = 0.0;
        if (weights.empty()) {
            for (std::size_t y = 0; y < L; ++y) mass[y] = static_cast<double>(table.count(j, y));
        } else {
            std::fill(mass.begin(), mass.end(), 0.0);
            for (auto i : table.postings[j]) mass[table.instance_labels[i]] += weights[i];
        }
        for (double m : mass) total += m;
        if (!(total > 0.0)) {
            ++rep.excluded;
            continue;
        }
        double dev = 0.0;
        for (std::size_t y = 0; y < L; ++y) dev += std::abs(mass[y] / total - reference[y]);
        dev /= static_cast<double>(L);
        rep.per_feature[j] = dev;
        sum += dev;
        ++defined;
    }
    rep.aggregate_err = defined ? sum / static_cast<double>(defined) : 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Bigram sampling

/// Rows of a bigram table with at least one instance of every label, sampled
/// uniformly without replacement. Returned in table (key) order.
inline std::vector<std::size_t> sample_eligible_bigram_rows(const FeatureTable& table, std::size_t count,
                                                            std::uint64_t seed) {
    if (table.kind != FeatureKind::bigram) throw InputError("bigram sampling needs a bigram table");
    std::vector<std::size_t> eligible;
    for (std::size_t j = 0; j < table.size(); ++j)
        if (table.covers_all_labels(j)) eligible.push_back(j);
    if (eligible.empty()) throw InputError("no bigram occurs with every label");
    const std::size_t take = std::min(count, eligible.size());
    Rng rng(seed);
    rng.partial_shuffle(eligible, take);
    eligible.resize(take);
    std::sort(eligible.begin(), eligible.end());
    return eligible;
}

inline std::vector<FeatureId> sample_eligible_bigrams(const FeatureTable& table, std::size_t count,
                                                      std::uint64_t seed) {
    std::vector<FeatureId> out;
    for (auto j : sample_eligible_bigram_rows(table, count, seed)) out.push_back(table.features[j]);
    return out;
}

} // namespace lexbias
