// Small feed-forward classifier with hand-derived gradients. Affine layers
// with rectifier activations between them; the last layer emits raw logits.
// An empty hidden list gives the plain linear (convex) model.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hood/core.hpp"
#include "hood/rng.hpp"

namespace hood {

struct MlpGradients {
    std::vector<Matrix> d_weights;
    std::vector<std::vector<double>> d_biases;

    void scale(double s) {
        for (auto& w : d_weights)
            for (auto& v : w.data()) v *= s;
        for (auto& b : d_biases)
            for (auto& v : b) v *= s;
    }

    void add(const MlpGradients& o) {
        for (std::size_t l = 0; l < d_weights.size(); ++l) {
            auto& w = d_weights[l].data();
            const auto& ow = o.d_weights[l].data();
            for (std::size_t i = 0; i < w.size(); ++i) w[i] += ow[i];
            for (std::size_t i = 0; i < d_biases[l].size(); ++i) d_biases[l][i] += o.d_biases[l][i];
        }
    }
};

class MlpModel {
public:
    MlpModel() = default;

    // layer_sizes = {input_dim, hidden..., n_classes}
    explicit MlpModel(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
        if (sizes_.size() < 2) throw ConfigError("model needs at least input and output widths");
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            weights_.emplace_back(sizes_[l + 1], sizes_[l]);
            biases_.emplace_back(sizes_[l + 1], 0.0);
        }
    }

    static MlpModel random_init(std::vector<std::size_t> layer_sizes, Rng& rng) {
        MlpModel m(std::move(layer_sizes));
        for (auto& w : m.weights_) {
            const double limit = std::sqrt(6.0 / static_cast<double>(w.cols()));
            for (auto& v : w.data()) v = rng.uniform(-limit, limit);
        }
        return m;
    }

    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    std::size_t input_dim() const { return sizes_.front(); }
    std::size_t n_classes() const { return sizes_.back(); }
    std::size_t n_layers() const { return weights_.size(); }

    std::vector<Matrix>& weights() { return weights_; }
    const std::vector<Matrix>& weights() const { return weights_; }
    std::vector<std::vector<double>>& biases() { return biases_; }
    const std::vector<std::vector<double>>& biases() const { return biases_; }

    bool operator==(const MlpModel&) const = default;

    std::vector<double> forward(std::span<const double> x) const {
        if (x.size() != input_dim()) throw DataError("forward: input dimension mismatch");
        std::vector<double> a(x.begin(), x.end());
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            a = affine(l, a);
            if (l + 1 < weights_.size())
                for (auto& v : a) v = v > 0.0 ? v : 0.0;
        }
        return a;
    }

    // Forward pass for a batch, keeping post-activation values per layer for
    // the backward pass. activations[0] is the input batch itself.
    struct Cache {
        std::vector<Matrix> activations;
    };

    Matrix forward_batch(const Matrix& xs, Cache* cache = nullptr) const {
        if (xs.cols() != input_dim()) throw DataError("forward: input dimension mismatch");
        if (cache) {
            cache->activations.clear();
            cache->activations.push_back(xs);
        }
        Matrix a = xs;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            Matrix z(a.rows(), sizes_[l + 1]);
            for (std::size_t r = 0; r < a.rows(); ++r) {
                auto in = a.row(r);
                auto out = z.row(r);
                const auto& w = weights_[l];
                for (std::size_t i = 0; i < w.rows(); ++i) {
                    double acc = biases_[l][i];
                    const auto wr = w.row(i);
                    for (std::size_t j = 0; j < w.cols(); ++j) acc += wr[j] * in[j];
                    out[i] = acc;
                }
            }
            if (l + 1 < weights_.size())
                for (auto& v : z.data()) v = v > 0.0 ? v : 0.0;
            a = std::move(z);
            if (cache && l + 1 < weights_.size()) cache->activations.push_back(a);
        }
        return a;
    }

    // Accumulates parameter gradients for d(loss)/d(logits) into grads.
    // The rectifier uses subgradient 0 at the kink.
    void backward(const Cache& cache, const Matrix& d_logits, MlpGradients& grads) const {
        Matrix delta = d_logits;
        for (std::size_t l = weights_.size(); l-- > 0;) {
            const Matrix& a_prev = cache.activations[l];
            Matrix& dw = grads.d_weights[l];
            auto& db = grads.d_biases[l];
            for (std::size_t r = 0; r < delta.rows(); ++r) {
                const auto drow = delta.row(r);
                const auto arow = a_prev.row(r);
                for (std::size_t i = 0; i < dw.rows(); ++i) {
                    const double d = drow[i];
                    if (d == 0.0) continue;
                    auto wrow = dw.row(i);
                    for (std::size_t j = 0; j < dw.cols(); ++j) wrow[j] += d * arow[j];
                    db[i] += d;
                }
            }
            if (l == 0) break;
            Matrix prev_delta(delta.rows(), sizes_[l]);
            const Matrix& w = weights_[l];
            for (std::size_t r = 0; r < delta.rows(); ++r) {
                const auto drow = delta.row(r);
                auto prow = prev_delta.row(r);
                for (std::size_t i = 0; i < w.rows(); ++i) {
                    const double d = drow[i];
                    if (d == 0.0) continue;
                    const auto wrow = w.row(i);
                    for (std::size_t j = 0; j < w.cols(); ++j) prow[j] += d * wrow[j];
                }
                // activation value > 0 iff pre-activation > 0 for ReLU
                const auto arow = cache.activations[l].row(r);
                for (std::size_t j = 0; j < prow.size(); ++j)
                    if (arow[j] <= 0.0) prow[j] = 0.0;
            }
            delta = std::move(prev_delta);
        }
    }

    MlpGradients zero_gradients() const {
        MlpGradients g;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            g.d_weights.emplace_back(weights_[l].rows(), weights_[l].cols());
            g.d_biases.emplace_back(biases_[l].size(), 0.0);
        }
        return g;
    }

    bool finite() const {
        for (const auto& w : weights_)
            if (!all_finite(w.data())) return false;
        for (const auto& b : biases_)
            if (!all_finite(b)) return false;
        return true;
    }

private:
    std::vector<double> affine(std::size_t l, const std::vector<double>& in) const {
        const auto& w = weights_[l];
        std::vector<double> out(w.rows());
        for (std::size_t i = 0; i < w.rows(); ++i) {
            double acc = biases_[l][i];
            const auto wr = w.row(i);
            for (std::size_t j = 0; j < w.cols(); ++j) acc += wr[j] * in[j];
            out[i] = acc;
        }
        return out;
    }

    std::vector<std::size_t> sizes_;
    std::vector<Matrix> weights_;
    std::vector<std::vector<double>> biases_;
};

// Versioned structured-text parameter dump; doubles round-trip exactly
// through the JSON encoder, so save/load is lossless.
inline nlohmann::json model_to_json(const MlpModel& m) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        nlohmann::json layer;
        layer["rows"] = m.weights()[l].rows();
        layer["cols"] = m.weights()[l].cols();
        layer["weights"] = m.weights()[l].data();
        layer["biases"] = m.biases()[l];
        layers.push_back(std::move(layer));
    }
    return nlohmann::json{{"version", 1},
                          {"layer_sizes", m.layer_sizes()},
                          {"layers", std::move(layers)}};
}

inline MlpModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("version").get<int>() != 1) throw DataError("unsupported model file version");
        MlpModel m(j.at("layer_sizes").get<std::vector<std::size_t>>());
        const auto& layers = j.at("layers");
        if (layers.size() != m.n_layers()) throw DataError("model file layer count mismatch");
        for (std::size_t l = 0; l < m.n_layers(); ++l) {
            const auto& layer = layers[l];
            if (layer.at("rows").get<std::size_t>() != m.weights()[l].rows() ||
                layer.at("cols").get<std::size_t>() != m.weights()[l].cols())
                throw DataError("model file layer shape mismatch");
            m.weights()[l].data() = layer.at("weights").get<std::vector<double>>();
            if (m.weights()[l].data().size() != m.weights()[l].rows() * m.weights()[l].cols())
                throw DataError("model file weight count mismatch");
            m.biases()[l] = layer.at("biases").get<std::vector<double>>();
            if (m.biases()[l].size() != m.weights()[l].rows())
                throw DataError("model file bias count mismatch");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

} // namespace hood
