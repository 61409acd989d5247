#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lexbias/corpus.hpp"
#include "lexbias/error.hpp"
#include "lexbias/permtest.hpp"
#include "lexbias/rng.hpp"

namespace lexbias {

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double step_size = 0.5;
    double l2_strength = 1e-4;
    /// Step size at epoch e is step_size / (1 + lr_decay * e).
    double lr_decay = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 1) throw InputError("epochs must be >= 1");
        if (batch_size < 1) throw InputError("batch_size must be >= 1");
        if (!(step_size > 0.0)) throw InputError("step_size must be > 0");
        if (!(l2_strength >= 0.0)) throw InputError("l2_strength must be >= 0");
        if (!(lr_decay >= 0.0)) throw InputError("lr_decay must be >= 0");
    }
};

/// Multinomial logistic regression over binary unigram presence features.
/// weights is row-major [(|vocab| + 1) x |Y|]; the last row is the bias.
class ProbeModel {
public:
    ProbeModel() = default;

    ProbeModel(std::vector<std::string> vocab, std::vector<double> weights, LabelVocab labels)
        : vocab_(std::move(vocab)), weights_(std::move(weights)), labels_(std::move(labels)) {
        if (weights_.size() != (vocab_.size() + 1) * labels_.size())
            throw InputError("probe weight matrix has the wrong shape");
        for (double w : weights_)
            if (!std::isfinite(w)) throw InputError("probe weights must be finite");
        for (std::size_t c = 0; c < vocab_.size(); ++c) {
            if (!index_.emplace(vocab_[c], static_cast<std::uint32_t>(c)).second)
                throw InputError("duplicate probe feature '" + vocab_[c] + "'");
        }
    }

    const std::vector<std::string>& vocab() const { return vocab_; }
    const std::vector<double>& weights() const { return weights_; }
    const LabelVocab& label_vocab() const { return labels_; }
    std::size_t num_labels() const { return labels_.size(); }

    double weight(std::size_t row, LabelId y) const { return weights_[row * labels_.size() + y]; }

    std::optional<std::uint32_t> column(const std::string& token) const {
        auto it = index_.find(token);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::vector<double> scores(const Instance& inst) const {
        const std::size_t L = labels_.size();
        std::vector<double> s(weights_.begin() + static_cast<std::ptrdiff_t>(vocab_.size() * L), weights_.end());
        for (const auto& tok : inst.tokens) {
            if (auto c = column(tok)) {
                for (std::size_t y = 0; y < L; ++y) s[y] += weights_[*c * L + y];
            }
        }
        return s;
    }

    /// Argmax score, ties to the lowest label id.
    LabelId predict(const Instance& inst) const { return argmax_label(scores(inst)); }

    friend bool operator==(const ProbeModel& a, const ProbeModel& b) {
        return a.vocab_ == b.vocab_ && a.weights_ == b.weights_ && a.labels_ == b.labels_;
    }

private:
    std::vector<std::string> vocab_;
    std::vector<double> weights_;
    LabelVocab labels_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

struct TrainResult {
    ProbeModel model;
    /// Mean weighted cross-entropy plus penalty, measured during each epoch.
    std::vector<double> epoch_loss;
};

namespace detail {

inline TrainResult train_probe(const Dataset& d, std::span<const double> multipliers, const TrainConfig& cfg) {
    cfg.validate();
    const std::size_t n = d.size();
    const std::size_t L = d.num_labels();

    std::vector<std::string> vocab;
    for (const auto& inst : d.instances()) vocab.insert(vocab.end(), inst.tokens.begin(), inst.tokens.end());
    std::sort(vocab.begin(), vocab.end());
    vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
    const std::size_t V = vocab.size();

    std::vector<std::vector<std::uint32_t>> cols(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Instance tokens and vocab are both sorted, so one merge walk suffices.
        const auto& toks = d[i].tokens;
        std::size_t c = 0;
        for (const auto& tok : toks) {
            c = static_cast<std::size_t>(std::lower_bound(vocab.begin() + static_cast<std::ptrdiff_t>(c), vocab.end(), tok) -
                                         vocab.begin());
            cols[i].push_back(static_cast<std::uint32_t>(c));
        }
    }

    // Effective feature weights are scale * raw so the L2 shrink is O(1).
    std::vector<double> raw(V * L, 0.0), bias(L, 0.0);
    double scale = 1.0;
    std::vector<double> grad(V * L, 0.0), grad_bias(L, 0.0);
    std::vector<char> touched(V, 0);
    std::vector<std::uint32_t> touched_list;
    std::vector<double> s(L);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed);
    TrainResult out;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        const double lr = cfg.step_size / (1.0 + cfg.lr_decay * static_cast<double>(epoch));
        double epoch_ce = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const double inv_b = 1.0 / static_cast<double>(stop - start);
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                const double mult = multipliers.empty() ? 1.0 : multipliers[i];
                for (std::size_t y = 0; y < L; ++y) s[y] = bias[y];
                for (auto c : cols[i])
                    for (std::size_t y = 0; y < L; ++y) s[y] += scale * raw[c * L + y];
                const double mx = *std::max_element(s.begin(), s.end());
                double z = 0.0;
                for (std::size_t y = 0; y < L; ++y) {
                    s[y] = std::exp(s[y] - mx);
                    z += s[y];
                }
                const LabelId gold = d[i].label;
                epoch_ce += mult * -std::log(s[gold] / z);
                for (std::size_t y = 0; y < L; ++y) {
                    const double g = mult * inv_b * (s[y] / z - (y == gold ? 1.0 : 0.0));
                    grad_bias[y] += g;
                    for (auto c : cols[i]) grad[c * L + y] += g;
                }
                for (auto c : cols[i]) {
                    if (!touched[c]) {
                        touched[c] = 1;
                        touched_list.push_back(c);
                    }
                }
            }
            scale *= 1.0 - lr * cfg.l2_strength;
            if (!(scale > 0.0)) throw NumericalError("L2 shrink factor non-positive; reduce step size or l2");
            for (auto c : touched_list) {
                for (std::size_t y = 0; y < L; ++y) {
                    raw[c * L + y] -= lr * grad[c * L + y] / scale;
                    grad[c * L + y] = 0.0;
                }
                touched[c] = 0;
            }
            touched_list.clear();
            for (std::size_t y = 0; y < L; ++y) {
                bias[y] -= lr * grad_bias[y];
                grad_bias[y] = 0.0;
            }
            if (scale < 1e-9) {
                for (auto& w : raw) w *= scale;
                scale = 1.0;
            }
        }
        double penalty = 0.0;
        for (double w : raw) penalty += w * w;
        const double loss = epoch_ce / static_cast<double>(n) + 0.5 * cfg.l2_strength * scale * scale * penalty;
        if (!std::isfinite(loss))
            throw NumericalError("training loss became non-finite in epoch " + std::to_string(epoch) +
                                 "; reduce the step size");
        out.epoch_loss.push_back(loss);
    }

    std::vector<double> weights((V + 1) * L);
    for (std::size_t k = 0; k < V * L; ++k) weights[k] = scale * raw[k];
    for (std::size_t y = 0; y < L; ++y) weights[V * L + y] = bias[y];
    out.model = ProbeModel(std::move(vocab), std::move(weights), d.label_vocab());
    return out;
}

} // namespace detail

/// Mini-batch SGD on mean(multiplier_i * cross-entropy_i) + (l2/2)||W||²
/// (bias excluded from the penalty). Empty multipliers mean all ones.
inline TrainResult train(const Dataset& d, std::span<const double> multipliers, const TrainConfig& cfg = {}) {
    if (!multipliers.empty()) {
        if (multipliers.size() != d.size()) throw InputError("multiplier count differs from dataset size");
        double sum = 0.0;
        for (double m : multipliers) {
            if (!(m >= 0.0) || !std::isfinite(m)) throw InputError("loss multipliers must be finite and nonnegative");
            sum += m;
        }
        if (std::abs(sum / static_cast<double>(d.size()) - 1.0) > 1e-6)
            throw InputError("loss multipliers must have mean 1");
    }
    return detail::train_probe(d, multipliers, cfg);
}

/// Predictions indexed by the evaluation dataset's instance ids, expressed in
/// the evaluation dataset's label ids.
inline PredictionSet predict(const ProbeModel& m, const Dataset& d) {
    std::vector<LabelId> to_eval(m.num_labels());
    for (std::size_t y = 0; y < m.num_labels(); ++y) {
        auto id = d.label_vocab().find(m.label_vocab().name(static_cast<LabelId>(y)));
        if (!id) throw InputError("model label '" + m.label_vocab().name(static_cast<LabelId>(y)) +
                                  "' is not a label of the evaluation data");
        to_eval[y] = *id;
    }
    PredictionSet preds(d.size());
    for (const auto& inst : d.instances()) preds.set(inst.id, to_eval[m.predict(inst)]);
    return preds;
}

struct AccuracyReport {
    std::size_t n = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
    std::vector<std::size_t> per_label_total;
    std::vector<std::size_t> per_label_correct;
    /// nullopt for labels with no gold instances.
    std::vector<std::optional<double>> per_label_accuracy;
};

inline AccuracyReport evaluate(const PredictionSet& preds, const Dataset& d) {
    AccuracyReport r;
    r.n = d.size();
    r.per_label_total.assign(d.num_labels(), 0);
    r.per_label_correct.assign(d.num_labels(), 0);
    for (const auto& inst : d.instances()) {
        const auto p = preds.get(inst.id);
        if (!p) throw InputError("missing prediction for instance id " + std::to_string(inst.id));
        ++r.per_label_total[inst.label];
        if (*p == inst.label) {
            ++r.correct;
            ++r.per_label_correct[inst.label];
        }
    }
    r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.n);
    for (std::size_t y = 0; y < d.num_labels(); ++y) {
        if (r.per_label_total[y] == 0) r.per_label_accuracy.emplace_back(std::nullopt);
        else r.per_label_accuracy.emplace_back(static_cast<double>(r.per_label_correct[y]) /
                                               static_cast<double>(r.per_label_total[y]));
    }
    return r;
}

inline AccuracyReport evaluate(const ProbeModel& m, const Dataset& d) { return evaluate(predict(m, d), d); }

} // namespace lexbias
