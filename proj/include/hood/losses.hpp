// Training objectives: soft-target cross-entropy, outlier exposure, energy
// margin fine-tuning, MixOE and TernaryMixOE, plus their exact analytic
// gradients for the MLP harness.
//
// Every batch term is reduced by arithmetic mean before weighting, so the
// logged total is exactly ce + beta*out_term + gamma*in_term.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hood/core.hpp"
#include "hood/model.hpp"

namespace hood {

enum class LossKind { Baseline, Oe, Energy, MixOe, TernaryMixOe };

inline const char* loss_kind_name(LossKind k) {
    switch (k) {
        case LossKind::Baseline: return "baseline";
        case LossKind::Oe: return "oe";
        case LossKind::Energy: return "energy";
        case LossKind::MixOe: return "mixoe";
        case LossKind::TernaryMixOe: return "ternary_mixoe";
    }
    return "?";
}

inline LossKind loss_kind_from_name(const std::string& s) {
    if (s == "baseline") return LossKind::Baseline;
    if (s == "oe") return LossKind::Oe;
    if (s == "energy") return LossKind::Energy;
    if (s == "mixoe") return LossKind::MixOe;
    if (s == "ternary_mixoe" || s == "ternary-mixoe") return LossKind::TernaryMixOe;
    throw ConfigError("unknown loss kind '" + s + "'");
}

// Defaults follow the cited methods: beta=5 (MixOE), oe_weight=0.5 (OE),
// margins m_in=-25 / m_out=-7 under the free-energy sign convention where
// in-distribution samples should have low energy. gamma=1 is this
// artifact's default for the third term.
struct LossConfig {
    LossKind kind = LossKind::Baseline;
    double beta = 5.0;
    double gamma = 1.0;
    double oe_weight = 0.5;
    double m_in = -25.0;
    double m_out = -7.0;
};

inline void validate_loss(const LossConfig& cfg) {
    if (!(cfg.beta >= 0.0) || !std::isfinite(cfg.beta)) throw ConfigError("loss beta must be finite and >= 0");
    if (!(cfg.gamma >= 0.0) || !std::isfinite(cfg.gamma)) throw ConfigError("loss gamma must be finite and >= 0");
    if (!(cfg.oe_weight >= 0.0) || !std::isfinite(cfg.oe_weight))
        throw ConfigError("oe_weight must be finite and >= 0");
    if (!std::isfinite(cfg.m_in) || !std::isfinite(cfg.m_out))
        throw ConfigError("energy margins must be finite");
}

struct LogitBatch {
    Matrix logits;
    Matrix targets; // soft labels, rows sum to 1
};

// The three expectation terms of the ternary objective. virtual_out doubles
// as the raw outlier batch for OE and energy fine-tuning (targets then
// being uniform rows or unused, respectively).
struct BatchTriplet {
    LogitBatch in_batch;
    std::optional<LogitBatch> virtual_out_batch;
    std::optional<LogitBatch> virtual_in_batch;
};

namespace detail {

inline void check_targets(const Matrix& logits, const Matrix& targets) {
    if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
        throw DataError("cross-entropy: logits/targets shape mismatch");
    if (logits.rows() == 0) throw DataError("cross-entropy: empty batch");
    for (std::size_t r = 0; r < targets.rows(); ++r) {
        double sum = 0.0;
        for (double t : targets.row(r)) {
            if (t < -1e-12) throw DataError("cross-entropy: negative target entry");
            sum += t;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw DataError("cross-entropy: target row " + std::to_string(r) + " sums to " +
                            std::to_string(sum) + ", expected 1");
    }
}

// Free energy E(x) = -log(sum(exp(l))); low for confident ID predictions.
inline double free_energy(std::span<const double> logits) { return -log_sum_exp(logits); }

} // namespace detail

// Mean over rows of -sum_k t_k log softmax(l)_k, stabilized as lse(l) - t.l.
inline double soft_cross_entropy(const Matrix& logits, const Matrix& targets) {
    detail::check_targets(logits, targets);
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto l = logits.row(r);
        const auto t = targets.row(r);
        double dot = 0.0;
        for (std::size_t k = 0; k < l.size(); ++k) dot += t[k] * l[k];
        total += log_sum_exp(l) - dot;
    }
    return total / static_cast<double>(logits.rows());
}

// Mean cross-entropy of outlier logits against the uniform distribution.
inline double uniform_cross_entropy(const Matrix& out_logits) {
    if (out_logits.rows() == 0) throw DataError("uniform cross-entropy: empty batch");
    const double u = 1.0 / static_cast<double>(out_logits.cols());
    double total = 0.0;
    for (std::size_t r = 0; r < out_logits.rows(); ++r) {
        const auto l = out_logits.row(r);
        double mean_logit = 0.0;
        for (double v : l) mean_logit += u * v;
        total += log_sum_exp(l) - mean_logit;
    }
    return total / static_cast<double>(out_logits.rows());
}

// CE(ID) + oe_weight * mean CE(outliers, uniform).
inline double oe_loss(const Matrix& id_logits, const Matrix& id_targets, const Matrix& out_logits,
                      double oe_weight) {
    return soft_cross_entropy(id_logits, id_targets) + oe_weight * uniform_cross_entropy(out_logits);
}

// CE(ID) + mean relu(E_in - m_in)^2 + mean relu(m_out - E_out)^2. Pushes ID
// free energies below m_in and outlier free energies above m_out.
inline double energy_ft_loss(const Matrix& id_logits, const Matrix& id_targets,
                             const Matrix& out_logits, double m_in, double m_out) {
    if (out_logits.rows() == 0) throw DataError("energy loss: empty outlier batch");
    double in_pen = 0.0;
    for (std::size_t r = 0; r < id_logits.rows(); ++r) {
        const double gap = detail::free_energy(id_logits.row(r)) - m_in;
        if (gap > 0.0) in_pen += gap * gap;
    }
    in_pen /= static_cast<double>(id_logits.rows());
    double out_pen = 0.0;
    for (std::size_t r = 0; r < out_logits.rows(); ++r) {
        const double gap = m_out - detail::free_energy(out_logits.row(r));
        if (gap > 0.0) out_pen += gap * gap;
    }
    out_pen /= static_cast<double>(out_logits.rows());
    return soft_cross_entropy(id_logits, id_targets) + in_pen + out_pen;
}

// CE(in) + beta * CE(virtual out).
inline double mixoe_loss(const BatchTriplet& triplet, double beta) {
    if (!triplet.virtual_out_batch) throw DataError("mixoe loss requires a virtual-out batch");
    return soft_cross_entropy(triplet.in_batch.logits, triplet.in_batch.targets) +
           beta * soft_cross_entropy(triplet.virtual_out_batch->logits,
                                     triplet.virtual_out_batch->targets);
}

// CE(in) + beta * CE(virtual out) + gamma * CE(virtual in).
inline double ternary_mixoe_loss(const BatchTriplet& triplet, double beta, double gamma) {
    double total = soft_cross_entropy(triplet.in_batch.logits, triplet.in_batch.targets);
    if (beta != 0.0) {
        if (!triplet.virtual_out_batch)
            throw DataError("ternary loss with beta > 0 requires a virtual-out batch");
        total += beta * soft_cross_entropy(triplet.virtual_out_batch->logits,
                                           triplet.virtual_out_batch->targets);
    }
    if (gamma != 0.0) {
        if (!triplet.virtual_in_batch)
            throw DataError("ternary loss with gamma > 0 requires a virtual-in batch");
        total += gamma * soft_cross_entropy(triplet.virtual_in_batch->logits,
                                            triplet.virtual_in_batch->targets);
    }
    return total;
}

// Raw feature batches feeding one optimization step. aux carries outliers
// (OE, energy) or the virtual-out mix; vin carries the virtual-in mix.
struct TrainBatch {
    Matrix in_xs;
    Matrix in_targets;
    std::optional<Matrix> aux_xs;
    std::optional<Matrix> aux_targets; // uniform rows for OE, mixed for MixOE
    std::optional<Matrix> vin_xs;
    std::optional<Matrix> vin_targets;
};

// Per-step loss decomposition. total = ce + beta*out_term + gamma*in_term
// with the weights implied by the loss kind (oe_weight for OE, 1 for the
// energy penalties).
struct LossTerms {
    double ce = 0.0;
    double out_term = 0.0;
    double in_term = 0.0;
    double total = 0.0;
};

namespace detail {

// d(mean CE)/d(logits): (softmax - target) / n, scaled by weight.
inline Matrix ce_logit_gradient(const Matrix& logits, const Matrix& targets, double weight) {
    Matrix g(logits.rows(), logits.cols());
    const double w = weight / static_cast<double>(logits.rows());
    std::vector<double> p(logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        softmax_into(logits.row(r), p);
        auto grow = g.row(r);
        const auto trow = targets.row(r);
        for (std::size_t k = 0; k < p.size(); ++k) grow[k] = w * (p[k] - trow[k]);
    }
    return g;
}

} // namespace detail

// Exact analytic gradient of the configured loss for one batch, with the
// per-term values. The finite-difference harness in the test suite checks
// this against central differences for every loss kind.
inline std::pair<LossTerms, MlpGradients> loss_gradient(const LossConfig& cfg, const MlpModel& model,
                                                        const TrainBatch& batch) {
    validate_loss(cfg);
    MlpGradients grads = model.zero_gradients();
    LossTerms terms;

    MlpModel::Cache cache;
    const Matrix in_logits = model.forward_batch(batch.in_xs, &cache);
    detail::check_targets(in_logits, batch.in_targets);
    terms.ce = soft_cross_entropy(in_logits, batch.in_targets);
    model.backward(cache, detail::ce_logit_gradient(in_logits, batch.in_targets, 1.0), grads);

    const bool needs_aux = cfg.kind == LossKind::Oe || cfg.kind == LossKind::Energy ||
                           cfg.kind == LossKind::MixOe || cfg.kind == LossKind::TernaryMixOe;
    if (needs_aux && !batch.aux_xs)
        throw DataError(std::string(loss_kind_name(cfg.kind)) + " loss requires an auxiliary batch");

    switch (cfg.kind) {
        case LossKind::Baseline:
            terms.total = terms.ce;
            break;
        case LossKind::Oe: {
            MlpModel::Cache aux_cache;
            const Matrix out_logits = model.forward_batch(*batch.aux_xs, &aux_cache);
            terms.out_term = uniform_cross_entropy(out_logits);
            Matrix uniform(out_logits.rows(), out_logits.cols(),
                           1.0 / static_cast<double>(out_logits.cols()));
            model.backward(aux_cache, detail::ce_logit_gradient(out_logits, uniform, cfg.oe_weight),
                           grads);
            terms.total = terms.ce + cfg.oe_weight * terms.out_term;
            break;
        }
        case LossKind::Energy: {
            MlpModel::Cache aux_cache;
            const Matrix out_logits = model.forward_batch(*batch.aux_xs, &aux_cache);

            // in-margin penalty on the ID batch
            Matrix d_in(in_logits.rows(), in_logits.cols());
            double in_pen = 0.0;
            std::vector<double> p(in_logits.cols());
            for (std::size_t r = 0; r < in_logits.rows(); ++r) {
                const double gap = detail::free_energy(in_logits.row(r)) - cfg.m_in;
                if (gap <= 0.0) continue;
                in_pen += gap * gap;
                softmax_into(in_logits.row(r), p);
                auto grow = d_in.row(r);
                const double c = -2.0 * gap / static_cast<double>(in_logits.rows());
                for (std::size_t k = 0; k < p.size(); ++k) grow[k] = c * p[k];
            }
            in_pen /= static_cast<double>(in_logits.rows());
            model.backward(cache, d_in, grads);

            Matrix d_out(out_logits.rows(), out_logits.cols());
            double out_pen = 0.0;
            for (std::size_t r = 0; r < out_logits.rows(); ++r) {
                const double gap = cfg.m_out - detail::free_energy(out_logits.row(r));
                if (gap <= 0.0) continue;
                out_pen += gap * gap;
                softmax_into(out_logits.row(r), p);
                auto grow = d_out.row(r);
                const double c = 2.0 * gap / static_cast<double>(out_logits.rows());
                for (std::size_t k = 0; k < p.size(); ++k) grow[k] = c * p[k];
            }
            out_pen /= static_cast<double>(out_logits.rows());
            model.backward(aux_cache, d_out, grads);

            terms.in_term = in_pen;
            terms.out_term = out_pen;
            terms.total = terms.ce + terms.out_term + terms.in_term;
            break;
        }
        case LossKind::MixOe:
        case LossKind::TernaryMixOe: {
            if (!batch.aux_targets) throw DataError("mix loss requires virtual-out targets");
            MlpModel::Cache aux_cache;
            const Matrix vout_logits = model.forward_batch(*batch.aux_xs, &aux_cache);
            detail::check_targets(vout_logits, *batch.aux_targets);
            terms.out_term = soft_cross_entropy(vout_logits, *batch.aux_targets);
            if (cfg.beta != 0.0)
                model.backward(aux_cache,
                               detail::ce_logit_gradient(vout_logits, *batch.aux_targets, cfg.beta),
                               grads);
            terms.total = terms.ce + cfg.beta * terms.out_term;

            if (cfg.kind == LossKind::TernaryMixOe) {
                if (!batch.vin_xs || !batch.vin_targets)
                    throw DataError("ternary loss requires a virtual-in batch");
                MlpModel::Cache vin_cache;
                const Matrix vin_logits = model.forward_batch(*batch.vin_xs, &vin_cache);
                detail::check_targets(vin_logits, *batch.vin_targets);
                terms.in_term = soft_cross_entropy(vin_logits, *batch.vin_targets);
                if (cfg.gamma != 0.0)
                    model.backward(vin_cache,
                                   detail::ce_logit_gradient(vin_logits, *batch.vin_targets, cfg.gamma),
                                   grads);
                terms.total = terms.ce + cfg.beta * terms.out_term + cfg.gamma * terms.in_term;
            }
            break;
        }
    }
    return {terms, std::move(grads)};
}

// Loss value only, along the forward path; the gradient tests difference
// this function, so it must not share code with the backward pass.
inline double loss_value(const LossConfig& cfg, const MlpModel& model, const TrainBatch& batch) {
    const Matrix in_logits = model.forward_batch(batch.in_xs);
    switch (cfg.kind) {
        case LossKind::Baseline:
            return soft_cross_entropy(in_logits, batch.in_targets);
        case LossKind::Oe:
            return oe_loss(in_logits, batch.in_targets, model.forward_batch(*batch.aux_xs),
                           cfg.oe_weight);
        case LossKind::Energy:
            return energy_ft_loss(in_logits, batch.in_targets, model.forward_batch(*batch.aux_xs),
                                  cfg.m_in, cfg.m_out);
        case LossKind::MixOe: {
            BatchTriplet t;
            t.in_batch = {in_logits, batch.in_targets};
            t.virtual_out_batch = LogitBatch{model.forward_batch(*batch.aux_xs), *batch.aux_targets};
            return mixoe_loss(t, cfg.beta);
        }
        case LossKind::TernaryMixOe: {
            BatchTriplet t;
            t.in_batch = {in_logits, batch.in_targets};
            t.virtual_out_batch = LogitBatch{model.forward_batch(*batch.aux_xs), *batch.aux_targets};
            if (batch.vin_xs)
                t.virtual_in_batch = LogitBatch{model.forward_batch(*batch.vin_xs), *batch.vin_targets};
            return ternary_mixoe_loss(t, cfg.beta, cfg.gamma);
        }
    }
    throw ConfigError("unhandled loss kind");
}

} // namespace hood
