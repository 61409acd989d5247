#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "lexbias/corpus.hpp"
#include "lexbias/error.hpp"
#include "lexbias/featstats.hpp"
#include "lexbias/rng.hpp"

namespace lexbias {

/// A token whose presence is skewed toward one label.
struct PlantedToken {
    std::string token;
    LabelId target_label = 0;
    /// Probability that an instance containing the token has the target label.
    double skew = 1.0;
    /// Number of instances that receive the token.
    std::size_t occurrences = 0;
};

struct SynthConfig {
    std::size_t n_instances = 20000;
    std::size_t n_labels = 2;
    std::size_t background_vocab_size = 500;
    std::size_t tokens_per_instance = 10;
    std::vector<PlantedToken> planted;
    std::uint64_t seed = 0;

    /// n_planted tokens "pl000", "pl001", ... assigned to labels round-robin.
    void plant(std::size_t n_planted, double skew, std::size_t occurrences) {
        planted.clear();
        for (std::size_t k = 0; k < n_planted; ++k) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "pl%03zu", k);
            planted.push_back({buf, static_cast<LabelId>(k % n_labels), skew, occurrences});
        }
    }
};

inline std::string background_token(std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "bg%04zu", k);
    return buf;
}

inline std::string synth_label(std::size_t y) { return "label" + std::to_string(y); }

inline void validate(const SynthConfig& cfg) {
    if (cfg.n_instances < 1) throw InputError("n_instances must be >= 1");
    if (cfg.n_labels < 2) throw InputError("n_labels must be >= 2");
    if (cfg.background_vocab_size < 1) throw InputError("background_vocab_size must be >= 1");
    std::unordered_set<std::string> seen;
    const double floor = 1.0 / static_cast<double>(cfg.n_labels);
    for (const auto& p : cfg.planted) {
        if (tokenize(p.token) != std::vector<std::string>{p.token})
            throw InputError("planted token '" + p.token + "' does not survive tokenization unchanged");
        if (p.token.size() == 6 && p.token.rfind("bg", 0) == 0) {
            bool digits = true;
            for (std::size_t c = 2; c < 6; ++c) digits &= p.token[c] >= '0' && p.token[c] <= '9';
            if (digits && std::stoul(p.token.substr(2)) < cfg.background_vocab_size)
                throw InputError("planted token '" + p.token + "' collides with the background vocabulary");
        }
        if (!seen.insert(p.token).second) throw InputError("duplicate planted token '" + p.token + "'");
        if (p.target_label >= cfg.n_labels) throw InputError("planted token '" + p.token + "' targets an unknown label");
        if (!(p.skew >= floor - 1e-12 && p.skew <= 1.0))
            throw InputError("planted token '" + p.token + "': skew must be in [1/n_labels, 1]");
        if (p.occurrences > cfg.n_instances)
            throw InputError("planted token '" + p.token + "' has more occurrences than instances");
    }
}

/// Labels are uniform; each instance gets tokens_per_instance background
/// tokens drawn with replacement; each planted token goes to `occurrences`
/// distinct instances, Binomial(occurrences, skew) of them with the target
/// label, inserted at a random position. Texts are space-joined tokens.
inline Dataset generate(const SynthConfig& cfg) {
    validate(cfg);
    Rng rng(cfg.seed);
    const std::size_t n = cfg.n_instances;
    std::vector<LabelId> labels(n);
    std::vector<std::vector<std::size_t>> by_label(cfg.n_labels);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<LabelId>(rng.below(cfg.n_labels));
        by_label[labels[i]].push_back(i);
    }
    std::vector<std::vector<std::string>> words(n);
    for (std::size_t i = 0; i < n; ++i) {
        words[i].reserve(cfg.tokens_per_instance + 4);
        for (std::size_t t = 0; t < cfg.tokens_per_instance; ++t)
            words[i].push_back(background_token(rng.below(cfg.background_vocab_size)));
    }

    for (const auto& p : cfg.planted) {
        std::size_t n_target = 0;
        for (std::size_t k = 0; k < p.occurrences; ++k) n_target += rng.bernoulli(p.skew);
        const std::size_t n_other = p.occurrences - n_target;
        std::vector<std::size_t> target_pool = by_label[p.target_label];
        std::vector<std::size_t> other_pool;
        for (std::size_t y = 0; y < cfg.n_labels; ++y)
            if (y != p.target_label) other_pool.insert(other_pool.end(), by_label[y].begin(), by_label[y].end());
        if (n_target > target_pool.size() || n_other > other_pool.size())
            throw InputError("planted token '" + p.token + "' needs more instances of a label than exist");
        rng.partial_shuffle(target_pool, n_target);
        rng.partial_shuffle(other_pool, n_other);
        auto place = [&](std::size_t i) {
            auto& w = words[i];
            const auto at = static_cast<std::ptrdiff_t>(rng.below(w.size() + 1));
            w.insert(w.begin() + at, p.token);
        };
        for (std::size_t k = 0; k < n_target; ++k) place(target_pool[k]);
        for (std::size_t k = 0; k < n_other; ++k) place(other_pool[k]);
    }

    std::vector<std::string> names;
    for (std::size_t y = 0; y < cfg.n_labels; ++y) names.push_back(synth_label(y));
    std::vector<Record> records(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        for (std::size_t t = 0; t < words[i].size(); ++t) {
            if (t) text += ' ';
            text += words[i][t];
        }
        records[i] = {{std::move(text)}, names[labels[i]]};
    }
    return Dataset::from_records(records, LabelVocab(names), {}, {"text"});
}

inline nlohmann::ordered_json to_json(const SynthConfig& cfg) {
    nlohmann::ordered_json j;
    j["n_instances"] = cfg.n_instances;
    j["n_labels"] = cfg.n_labels;
    j["background_vocab_size"] = cfg.background_vocab_size;
    j["tokens_per_instance"] = cfg.tokens_per_instance;
    j["seed"] = cfg.seed;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : cfg.planted) {
        arr.push_back({{"token", p.token}, {"target_label", p.target_label}, {"skew", p.skew},
                       {"occurrences", p.occurrences}});
    }
    j["planted"] = std::move(arr);
    return j;
}

/// Held-out split for bias evaluation: retries the split seed until every
/// feature in `keys` occurs at least `min_heldout` times on the held-out side.
inline Split split_with_coverage(const Dataset& d, double heldout_fraction, std::uint64_t seed,
                                 const std::vector<std::string>& keys, std::size_t min_heldout = 5,
                                 std::size_t max_attempts = 50) {
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
        auto split = split_holdout(d, heldout_fraction, seed + attempt);
        bool ok = true;
        for (const auto& key : keys) {
            std::size_t c = 0;
            for (const auto& inst : split.heldout.instances()) c += inst.has_token(key);
            if (c < min_heldout) {
                ok = false;
                break;
            }
        }
        if (ok) return split;
    }
    throw InputError("could not find a held-out split covering every feature " + std::to_string(min_heldout) +
                     " times");
}

} // namespace lexbias
