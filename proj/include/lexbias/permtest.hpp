#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "lexbias/corpus.hpp"
#include "lexbias/error.hpp"
#include "lexbias/featstats.hpp"
#include "lexbias/rng.hpp"

namespace lexbias {

/// Predicted label per evaluation instance id.
class PredictionSet {
public:
    PredictionSet() = default;
    explicit PredictionSet(std::size_t num_instances) : labels_(num_instances) {}

    void set(InstanceId id, LabelId label) {
        if (id >= labels_.size())
            throw InputError("prediction for unknown instance id " + std::to_string(id));
        labels_[id] = label;
    }

    std::optional<LabelId> get(InstanceId id) const {
        if (id >= labels_.size()) return std::nullopt;
        return labels_[id];
    }

    std::size_t num_instances() const { return labels_.size(); }

    std::size_t num_predicted() const {
        return static_cast<std::size_t>(
            std::count_if(labels_.begin(), labels_.end(), [](const auto& l) { return l.has_value(); }));
    }

    friend bool operator==(const PredictionSet&, const PredictionSet&) = default;

private:
    std::vector<std::optional<LabelId>> labels_;
};

/// Distinct members of U ∪ N with their set memberships and correctness.
struct PooledEval {
    std::vector<InstanceId> members;
    std::vector<bool> in_U;
    std::vector<bool> in_N;
    std::vector<bool> correct;

    std::size_t size() const { return members.size(); }

    void add(InstanceId id, bool u, bool n, bool ok) {
        members.push_back(id);
        in_U.push_back(u);
        in_N.push_back(n);
        correct.push_back(ok);
    }
};

/// Builds U (gold label equals the usual label of some contained feature) and
/// N (gold label differs from the usual label of some contained feature) over
/// the evaluation set. Instances without any selected feature are left out.
inline PooledEval pool(const Dataset& eval, const std::vector<FeatureStats>& selected, const PredictionSet& preds) {
    if (selected.empty()) throw InputError("no features selected for pooling");
    std::unordered_map<std::string, LabelId> usual[2];
    bool need[2] = {false, false};
    for (const auto& s : selected) {
        const auto k = static_cast<std::size_t>(s.feature.kind);
        usual[k].emplace(s.feature.key, s.usual_label);
        need[k] = true;
    }
    PooledEval pe;
    for (const auto& inst : eval.instances()) {
        bool u = false, n = false;
        for (std::size_t k = 0; k < 2; ++k) {
            if (!need[k]) continue;
            for (const auto& key : instance_features(inst, static_cast<FeatureKind>(k), eval.tokenizer())) {
                auto it = usual[k].find(key);
                if (it == usual[k].end()) continue;
                (it->second == inst.label ? u : n) = true;
            }
        }
        if (!u && !n) continue;
        const auto pred = preds.get(inst.id);
        if (!pred) throw InputError("missing prediction for instance id " + std::to_string(inst.id));
        pe.add(inst.id, u, n, *pred == inst.label);
    }
    if (pe.members.empty()) throw InputError("no evaluation instance contains a selected feature");
    return pe;
}

struct TestResult {
    std::uint64_t M = 0;    // |U ∪ N|
    std::uint64_t K = 0;    // correct among members
    std::uint64_t n_U = 0;  // |U|
    std::uint64_t c_U = 0;  // correct within U
    std::uint64_t n_N = 0;
    std::uint64_t c_N = 0;
    double acc_U = 0.0;
    double acc_N = 0.0;
    double log10_p = 0.0;
    double p = 1.0;  // 0 when 10^log10_p underflows
};

inline double log_binomial(std::uint64_t n, std::uint64_t k) {
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

/// Natural log of P(X >= c) for X ~ Hypergeometric(population M, successes K,
/// draws n). Summed in log space from c upward; terms past the mode are
/// dropped once they fall 40 nats below the largest one.
inline double hypergeometric_log_upper_tail(std::uint64_t M, std::uint64_t K, std::uint64_t n, std::uint64_t c) {
    if (K > M || n > M) throw InputError("hypergeometric parameters out of range");
    const std::uint64_t lo = K + n > M ? K + n - M : 0;
    const std::uint64_t hi = std::min(n, K);
    if (n == 0 || K == 0 || n == M || c <= lo) return 0.0;
    if (c > hi) return -std::numeric_limits<double>::infinity();

    const double log_total = log_binomial(M, n);
    auto log_term = [&](std::uint64_t k) { return log_binomial(K, k) + log_binomial(M - K, n - k) - log_total; };
    const double mode = std::floor((static_cast<double>(n) + 1.0) * (static_cast<double>(K) + 1.0) /
                                   (static_cast<double>(M) + 2.0));

    double peak = log_term(c);
    double sum = 1.0;  // Σ exp(term - peak)
    for (std::uint64_t k = c + 1; k <= hi; ++k) {
        const double t = log_term(k);
        if (t > peak) {
            sum = sum * std::exp(peak - t) + 1.0;
            peak = t;
        } else {
            sum += std::exp(t - peak);
            if (static_cast<double>(k) > mode && t < peak - 40.0) break;
        }
    }
    return std::min(0.0, peak + std::log(sum));
}

namespace detail {

struct PooledCounts {
    std::uint64_t M = 0, K = 0, n_U = 0, c_U = 0, n_N = 0, c_N = 0;
};

inline PooledCounts count(const PooledEval& pe) {
    PooledCounts c;
    c.M = pe.size();
    for (std::size_t i = 0; i < pe.size(); ++i) {
        c.K += pe.correct[i];
        if (pe.in_U[i]) {
            ++c.n_U;
            c.c_U += pe.correct[i];
        }
        if (pe.in_N[i]) {
            ++c.n_N;
            c.c_N += pe.correct[i];
        }
    }
    return c;
}

} // namespace detail

/// One-sided exact permutation test of ACC(U) > ACC(N): shuffling the
/// correctness flags over the distinct members makes the correct count
/// within U hypergeometric.
inline TestResult exact_log_p(const PooledEval& pe) {
    if (pe.size() == 0) throw InputError("permutation test on an empty pool");
    const auto c = detail::count(pe);
    TestResult r;
    r.M = c.M;
    r.K = c.K;
    r.n_U = c.n_U;
    r.c_U = c.c_U;
    r.n_N = c.n_N;
    r.c_N = c.c_N;
    r.acc_U = c.n_U ? static_cast<double>(c.c_U) / static_cast<double>(c.n_U) : 0.0;
    r.acc_N = c.n_N ? static_cast<double>(c.c_N) / static_cast<double>(c.n_N) : 0.0;
    r.log10_p = hypergeometric_log_upper_tail(c.M, c.K, c.n_U, c.c_U) / std::log(10.0);
    r.p = std::pow(10.0, r.log10_p);
    return r;
}

/// Enumerates every placement of the K correct flags over the M members.
inline double brute_force_p(const PooledEval& pe, double max_placements = 1e6) {
    const auto c = detail::count(pe);
    if (c.M == 0) throw InputError("permutation test on an empty pool");
    if (log_binomial(c.M, c.K) > std::log(max_placements) + 1e-9)
        throw InputError("too many placements to enumerate; use exact_log_p");

    std::vector<std::size_t> pos(c.K);
    for (std::size_t i = 0; i < c.K; ++i) pos[i] = i;
    std::uint64_t total = 0, hits = 0;
    while (true) {
        std::uint64_t in_u = 0;
        for (auto p : pos) in_u += pe.in_U[p];
        ++total;
        hits += in_u >= c.c_U;
        // Next combination in lexicographic order.
        std::size_t i = c.K;
        while (i > 0 && pos[i - 1] == c.M - c.K + (i - 1)) --i;
        if (i == 0) break;
        ++pos[i - 1];
        for (std::size_t k = i; k < c.K; ++k) pos[k] = pos[k - 1] + 1;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

/// (1 + #{shuffles with statistic >= observed}) / (1 + rounds).
inline double monte_carlo_p(const PooledEval& pe, std::uint64_t rounds, std::uint64_t seed) {
    if (rounds < 1) throw InputError("rounds must be >= 1");
    const auto c = detail::count(pe);
    std::vector<std::uint32_t> idx(c.M);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
    // Draw whichever of the correct / incorrect sets is smaller.
    const bool draw_correct = c.K <= c.M - c.K;
    const std::size_t draws = draw_correct ? c.K : c.M - c.K;
    Rng rng(seed);
    std::uint64_t hits = 0;
    for (std::uint64_t r = 0; r < rounds; ++r) {
        rng.partial_shuffle(idx, draws);
        std::uint64_t in_u = 0;
        for (std::size_t k = 0; k < draws; ++k) in_u += pe.in_U[idx[k]];
        const std::uint64_t stat = draw_correct ? in_u : c.n_U - in_u;
        hits += stat >= c.c_U;
    }
    return static_cast<double>(1 + hits) / static_cast<double>(1 + rounds);
}

} // namespace lexbias
