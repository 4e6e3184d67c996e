// Desk-scale training harness: minibatch SGD over the synthetic data with
// per-epoch reseeded shuffling, per-batch lambda sampling, and virtual
// batch construction driven by the configured loss.
//
// Determinism contract: (seed, config) -> identical parameters, logs and
// reports. All randomness flows from seeds derived with derive_seed, and
// the loop is single-threaded.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hood/core.hpp"
#include "hood/detectors.hpp"
#include "hood/losses.hpp"
#include "hood/metrics.hpp"
#include "hood/mixing.hpp"
#include "hood/model.hpp"
#include "hood/rng.hpp"
#include "hood/synth.hpp"

namespace hood {

enum class Optimizer { Sgd, SgdMomentum };

inline const char* optimizer_name(Optimizer o) {
    return o == Optimizer::Sgd ? "sgd" : "sgd_momentum";
}

inline Optimizer optimizer_from_name(const std::string& s) {
    if (s == "sgd") return Optimizer::Sgd;
    if (s == "sgd_momentum" || s == "sgd-momentum") return Optimizer::SgdMomentum;
    throw ConfigError("unknown optimizer '" + s + "'");
}

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 20;
    double learning_rate = 0.05;
    Optimizer optimizer = Optimizer::Sgd;
    double momentum = 0.9;
    std::vector<std::size_t> hidden_sizes = {64};
    LossConfig loss;
    MixConfig mix;
    std::uint64_t seed = 1;
};

inline void validate_train(const TrainConfig& cfg) {
    if (cfg.epochs == 0 || cfg.batch_size == 0) throw ConfigError("epochs and batch_size must be positive");
    if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate))
        throw ConfigError("learning rate must be finite and >= 0");
    validate_loss(cfg.loss);
    validate_mix(cfg.mix);
}

// One optimization step. total always equals
// ce + <kind weight>*out_term + <kind weight>*in_term by construction.
struct StepLog {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double ce = 0.0;
    double out_term = 0.0;
    double in_term = 0.0;
    double total = 0.0;
    double lambda = 1.0;
};

struct TrainLog {
    std::vector<StepLog> steps;
};

namespace detail {

inline Matrix onehot_rows(const std::vector<int>& ys, std::size_t k) {
    Matrix t(ys.size(), k);
    for (std::size_t r = 0; r < ys.size(); ++r) {
        if (ys[r] < 0 || static_cast<std::size_t>(ys[r]) >= k)
            throw DataError("class index out of range");
        t(r, static_cast<std::size_t>(ys[r])) = 1.0;
    }
    return t;
}

struct SgdState {
    std::vector<Matrix> vw;
    std::vector<std::vector<double>> vb;
};

inline void apply_update(MlpModel& model, const MlpGradients& grads, const TrainConfig& cfg,
                         SgdState& state) {
    for (std::size_t l = 0; l < model.n_layers(); ++l) {
        auto& w = model.weights()[l].data();
        const auto& gw = grads.d_weights[l].data();
        auto& b = model.biases()[l];
        const auto& gb = grads.d_biases[l];
        if (cfg.optimizer == Optimizer::Sgd) {
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * gw[i];
            for (std::size_t i = 0; i < b.size(); ++i) b[i] -= cfg.learning_rate * gb[i];
        } else {
            auto& vw = state.vw[l].data();
            auto& vb = state.vb[l];
            for (std::size_t i = 0; i < w.size(); ++i) {
                vw[i] = cfg.momentum * vw[i] + gw[i];
                w[i] -= cfg.learning_rate * vw[i];
            }
            for (std::size_t i = 0; i < b.size(); ++i) {
                vb[i] = cfg.momentum * vb[i] + gb[i];
                b[i] -= cfg.learning_rate * vb[i];
            }
        }
    }
}

} // namespace detail

inline MlpModel make_model(const TrainConfig& cfg, std::size_t input_dim, std::size_t n_classes) {
    std::vector<std::size_t> sizes{input_dim};
    sizes.insert(sizes.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
    sizes.push_back(n_classes);
    Rng rng(derive_seed(cfg.seed, 0x1217));
    return MlpModel::random_init(std::move(sizes), rng);
}

inline TrainLog train(MlpModel& model, const SynthData& data, const TrainConfig& cfg) {
    validate_train(cfg);
    if (data.train.empty()) throw DataError("train: empty training set");
    const std::size_t k = data.manifest.id_classes.size();
    if (model.n_classes() != k) throw DataError("train: model output width != manifest class count");
    const std::size_t dim = data.train.front().x.size();
    if (model.input_dim() != dim) throw DataError("train: model input width != feature dim");

    Matrix train_xs(data.train.size(), dim);
    std::vector<int> train_ys(data.train.size());
    for (std::size_t i = 0; i < data.train.size(); ++i) {
        if (data.train[i].x.size() != dim) throw DataError("train: inconsistent feature dims");
        if (!data.train[i].true_class) throw DataError("train: unlabeled training record");
        std::copy(data.train[i].x.begin(), data.train[i].x.end(), train_xs.row(i).begin());
        train_ys[i] = *data.train[i].true_class;
    }

    const bool needs_outliers = cfg.loss.kind == LossKind::Oe || cfg.loss.kind == LossKind::Energy ||
                                cfg.loss.kind == LossKind::MixOe ||
                                cfg.loss.kind == LossKind::TernaryMixOe;
    if (needs_outliers && data.outliers.rows() == 0)
        throw DataError("train: loss kind requires a non-empty outlier pool");

    detail::SgdState state;
    if (cfg.optimizer == Optimizer::SgdMomentum) {
        for (std::size_t l = 0; l < model.n_layers(); ++l) {
            state.vw.emplace_back(model.weights()[l].rows(), model.weights()[l].cols());
            state.vb.emplace_back(model.biases()[l].size(), 0.0);
        }
    }

    TrainLog log;
    std::vector<std::size_t> order(data.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng(derive_seed(cfg.seed, 0xe60c + epoch));
        epoch_rng.shuffle(order);

        std::size_t step = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - start);
            Matrix xs(n, dim);
            std::vector<int> ys(n);
            for (std::size_t r = 0; r < n; ++r) {
                const std::size_t src = order[start + r];
                std::copy_n(train_xs.row(src).begin(), dim, xs.row(r).begin());
                ys[r] = train_ys[src];
            }

            TrainBatch batch;
            batch.in_targets = detail::onehot_rows(ys, k);
            batch.in_xs = std::move(xs);

            double lambda = 1.0;
            switch (cfg.loss.kind) {
                case LossKind::Baseline:
                    break;
                case LossKind::Oe:
                case LossKind::Energy: {
                    Matrix out(n, dim);
                    for (std::size_t r = 0; r < n; ++r) {
                        const auto pick = static_cast<std::size_t>(
                            epoch_rng.uniform_int(data.outliers.rows()));
                        std::copy_n(data.outliers.row(pick).begin(), dim, out.row(r).begin());
                    }
                    batch.aux_xs = std::move(out);
                    if (cfg.loss.kind == LossKind::Oe)
                        batch.aux_targets = Matrix(n, k, 1.0 / static_cast<double>(k));
                    break;
                }
                case LossKind::MixOe:
                case LossKind::TernaryMixOe: {
                    lambda = sample_lambda(cfg.mix, epoch_rng);
                    auto vout = make_virtual_out_batch(batch.in_xs, ys, data.outliers, k, lambda,
                                                       cfg.mix.op, epoch_rng);
                    batch.aux_xs = std::move(vout.xs);
                    batch.aux_targets = std::move(vout.ys);
                    if (cfg.loss.kind == LossKind::TernaryMixOe) {
                        auto vin = make_virtual_in_batch(batch.in_xs, ys, k, lambda, cfg.mix.op,
                                                         epoch_rng);
                        batch.vin_xs = std::move(vin.xs);
                        batch.vin_targets = std::move(vin.ys);
                    }
                    break;
                }
            }

            auto [terms, grads] = loss_gradient(cfg.loss, model, batch);
            if (!std::isfinite(terms.total))
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + " step " +
                                   std::to_string(step) +
                                   " (non-finite loss; learning rate likely too high)");
            detail::apply_update(model, grads, cfg, state);
            if (!model.finite())
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + " step " +
                                   std::to_string(step) +
                                   " (non-finite parameters; learning rate likely too high)");

            StepLog entry;
            entry.epoch = epoch;
            entry.step = step;
            entry.ce = terms.ce;
            entry.out_term = terms.out_term;
            entry.in_term = terms.in_term;
            entry.total = terms.total;
            entry.lambda = lambda;
            log.steps.push_back(entry);
        }
    }
    return log;
}

// Scores every test record with the configured detector and assembles the
// hierarchical rows, the ST row (when TRUE_OOD samples exist) and ID
// accuracy.
inline MetricReport evaluate(const MlpModel& model, const std::vector<FeatureRecord>& test,
                             const DetectorConfig& detector) {
    validate_detector(detector);
    if (test.empty()) throw DataError("evaluate: empty test set");

    std::vector<ScoreRecord> records;
    records.reserve(test.size());
    bool has_true_ood = false;
    for (const auto& f : test) {
        ScoreRecord r;
        r.record_id = f.record_id;
        r.membership = f.membership;
        r.logits = model.forward(f.x);
        r.score = detector_score(r.logits, detector);
        r.true_class = f.true_class;
        has_true_ood = has_true_ood || f.membership == Membership::TrueOod;
        records.push_back(std::move(r));
    }

    MetricReport report = hierarchical_report(records);
    if (has_true_ood) report.rows.push_back(semantic_true_row(records));
    report.id_accuracy = id_accuracy(records);
    return report;
}

} // namespace hood
