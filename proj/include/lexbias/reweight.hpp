#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lexbias/corpus.hpp"
#include "lexbias/error.hpp"
#include "lexbias/featstats.hpp"

namespace lexbias {

/// Max-shifted softmax; every entry is strictly positive for finite input.
inline std::vector<double> softmax(std::span<const double> z) {
    std::vector<double> q(z.size());
    if (z.empty()) return q;
    const double shift = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        q[i] = std::exp(z[i] - shift);
        total += q[i];
    }
    for (auto& v : q) v /= total;
    return q;
}

/// Instance weights on the simplex, q = softmax(z).
struct WeightVector {
    std::vector<double> z;
    std::vector<double> q;

    static WeightVector from_scores(std::vector<double> scores) {
        WeightVector w;
        w.q = softmax(scores);
        w.z = std::move(scores);
        return w;
    }

    static WeightVector uniform(std::size_t n) { return from_scores(std::vector<double>(n, 0.0)); }

    std::size_t size() const { return q.size(); }
};

/// r[j][y] = Σ_i q_i 1{f_ji ∧ y_i = y} − t_y Σ_i q_i 1{f_ji}. This is the
/// balance constraint multiplied through by the feature's weighted mass, so
/// features with vanishing mass contribute vanishing residuals.
struct ResidualMatrix {
    std::size_t num_labels = 0;
    std::vector<double> r;  // row-major [feature][label]
    std::vector<double> target;

    double at(std::size_t j, LabelId y) const { return r[j * num_labels + y]; }
    std::size_t num_features() const { return num_labels ? r.size() / num_labels : 0; }
};

namespace detail {

inline void check_reweight_inputs(const FeatureTable& table, std::span<const double> q,
                                  std::span<const double> target) {
    if (target.size() != table.num_labels) throw InputError("target distribution has wrong length");
    if (q.size() != table.num_instances) throw InputError("weight vector length differs from dataset size");
    if (table.postings.size() != table.size() || table.instance_labels.size() != table.num_instances)
        throw InputError("reweighting needs a feature table with postings");
}

} // namespace detail

inline ResidualMatrix residuals(std::span<const double> q, const FeatureTable& table,
                                std::span<const double> target) {
    detail::check_reweight_inputs(table, q, target);
    const std::size_t L = table.num_labels;
    ResidualMatrix res;
    res.num_labels = L;
    res.target.assign(target.begin(), target.end());
    res.r.assign(table.size() * L, 0.0);
    for (std::size_t j = 0; j < table.size(); ++j) {
        double* row = res.r.data() + j * L;
        double mass = 0.0;
        for (auto i : table.postings[j]) {
            row[table.instance_labels[i]] += q[i];
            mass += q[i];
        }
        for (std::size_t y = 0; y < L; ++y) row[y] -= target[y] * mass;
    }
    return res;
}

/// Σ_j Σ_y r[j][y]².
inline double objective(std::span<const double> q, const FeatureTable& table, std::span<const double> target) {
    const auto res = residuals(q, table, target);
    double total = 0.0;
    for (double v : res.r) total += v * v;
    return total;
}

/// Objective and its gradient with respect to the softmax scores z.
struct ObjectiveValue {
    double value = 0.0;
    std::vector<double> grad_z;
};

inline ObjectiveValue evaluate_objective(std::span<const double> q, const FeatureTable& table,
                                         std::span<const double> target) {
    const auto res = residuals(q, table, target);
    const std::size_t L = table.num_labels;
    ObjectiveValue out;
    for (double v : res.r) out.value += v * v;

    // ∂obj/∂q_i = Σ_{j ∋ i} 2 (r[j][y_i] − Σ_y t_y r[j][y])
    std::vector<double> grad_q(q.size(), 0.0);
    for (std::size_t j = 0; j < table.size(); ++j) {
        const double* row = res.r.data() + j * L;
        double centre = 0.0;
        for (std::size_t y = 0; y < L; ++y) centre += target[y] * row[y];
        for (auto i : table.postings[j]) grad_q[i] += 2.0 * (row[table.instance_labels[i]] - centre);
    }
    // Softmax Jacobian: ∂obj/∂z_k = q_k (g_k − Σ_i q_i g_i)
    double mean = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) mean += q[i] * grad_q[i];
    out.grad_z.resize(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) out.grad_z[i] = q[i] * (grad_q[i] - mean);
    return out;
}

inline std::vector<double> gradient(std::span<const double> q, const FeatureTable& table,
                                    std::span<const double> target) {
    return evaluate_objective(q, table, target).grad_z;
}

/// Multipliers q_i · n applied to each instance's training loss; mean 1.
inline std::vector<double> loss_multipliers(std::span<const double> q) {
    std::vector<double> m(q.size());
    const double n = static_cast<double>(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) m[i] = q[i] * n;
    return m;
}

struct OptimizerConfig {
    std::size_t max_steps = 3000;
    double step_size = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// Stop once the objective is at or below this value.
    double tolerance = 0.0;
    /// Stop when the best objective improved by less than this fraction over
    /// the last `window` steps.
    std::size_t window = 50;
    double min_rel_improvement = 1e-9;
    /// Echoed in reports. The solve itself is deterministic: z starts at zero
    /// and gradients are full-batch.
    std::uint64_t seed = 0;

    void validate() const {
        if (max_steps < 1) throw InputError("max_steps must be >= 1");
        if (!(step_size > 0.0)) throw InputError("step_size must be > 0");
        if (!(tolerance >= 0.0)) throw InputError("tolerance must be >= 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw InputError("beta1 and beta2 must be in [0, 1)");
        if (window < 1) throw InputError("window must be >= 1");
    }
};

struct ReweightReport {
    double err_before = 0.0;
    double err_after = 0.0;
    double objective_before = 0.0;
    double objective_after = 0.0;
    std::vector<double> objective_trace;
    bool converged = false;
    std::size_t steps = 0;
    std::size_t best_step = 0;
    std::size_t excluded_features = 0;
    std::vector<std::string> warnings;
};

struct ReweightResult {
    WeightVector weights;
    ReweightReport report;
};

/// Adam on the softmax scores, starting from uniform weights, returning the
/// best iterate seen.
inline ReweightResult optimize(const Dataset& d, const FeatureTable& table, std::span<const double> target,
                               const OptimizerConfig& cfg = {}) {
    cfg.validate();
    const std::size_t n = d.size();
    if (table.num_instances != n) throw InputError("feature table was built on a different dataset");
    double target_sum = 0.0;
    for (double t : target) {
        if (!(t >= 0.0)) throw InputError("target distribution has a negative entry");
        target_sum += t;
    }
    if (std::abs(target_sum - 1.0) > 1e-9) throw InputError("target distribution must sum to 1");

    ReweightResult result;
    auto& rep = result.report;
    result.weights = WeightVector::uniform(n);
    rep.err_before = label_balance(table, {}, target).aggregate_err;
    rep.excluded_features = 0;
    if (table.empty()) {
        rep.warnings.push_back("no eligible features; returning uniform weights");
        rep.err_after = rep.err_before;
        rep.converged = true;
        rep.objective_trace.push_back(0.0);
        return result;
    }

    // Residuals are O(1/n) and the z-gradient O(1/n^2); rescaling to count
    // units keeps Adam's epsilon negligible at any dataset size.
    const double grad_scale = static_cast<double>(n) * static_cast<double>(n);

    std::vector<double> z(n, 0.0), m(n, 0.0), v(n, 0.0);
    std::vector<double> q = softmax(z);
    std::vector<double> best_z = z;
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_trace;  // best objective after each step
    double b1_pow = 1.0, b2_pow = 1.0;

    for (std::size_t step = 0; step < cfg.max_steps; ++step) {
        auto eval = evaluate_objective(q, table, target);
        if (!std::isfinite(eval.value))
            throw NumericalError("objective became non-finite at step " + std::to_string(step));
        rep.objective_trace.push_back(eval.value);
        if (step == 0) rep.objective_before = eval.value;
        if (eval.value < best) {
            best = eval.value;
            best_z = z;
            rep.best_step = step;
        }
        best_trace.push_back(best);
        rep.steps = step + 1;

        if (best <= cfg.tolerance) {
            rep.converged = true;
            break;
        }
        if (step >= cfg.window) {
            const double before = best_trace[step - cfg.window];
            if (before - best <= cfg.min_rel_improvement * before) {
                rep.converged = true;
                break;
            }
        }
        if (step + 1 == cfg.max_steps) break;

        b1_pow *= cfg.beta1;
        b2_pow *= cfg.beta2;
        for (std::size_t i = 0; i < n; ++i) {
            const double g = eval.grad_z[i] * grad_scale;
            if (!std::isfinite(g)) throw NumericalError("gradient became non-finite at step " + std::to_string(step));
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m[i] / (1.0 - b1_pow);
            const double v_hat = v[i] / (1.0 - b2_pow);
            z[i] -= cfg.step_size * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
        q = softmax(z);
    }

    result.weights = WeightVector::from_scores(std::move(best_z));
    rep.objective_after = best;
    const auto after = label_balance(table, result.weights.q, target);
    rep.err_after = after.aggregate_err;
    rep.excluded_features = after.excluded;
    return result;
}

} // namespace lexbias
