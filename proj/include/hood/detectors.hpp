// Detectors turn a classifier's logits into a scalar ID-ness score.
// Polarity is normalized so that higher always means more in-distribution.
#pragma once

#include <string>
#include <vector>

#include "hood/core.hpp"
#include "hood/records.hpp"

namespace hood {

enum class DetectorKind { Msp, MspTemp, Energy };

inline const char* detector_kind_name(DetectorKind k) {
    switch (k) {
        case DetectorKind::Msp: return "msp";
        case DetectorKind::MspTemp: return "msp-temp";
        case DetectorKind::Energy: return "energy";
    }
    return "?";
}

inline DetectorKind detector_kind_from_name(const std::string& s) {
    if (s == "msp") return DetectorKind::Msp;
    if (s == "msp-temp" || s == "msp_temp") return DetectorKind::MspTemp;
    if (s == "energy") return DetectorKind::Energy;
    throw ConfigError("unknown detector '" + s + "' (expected msp, msp-temp or energy)");
}

// Temperature applies to the MSP variant only; the energy detector is
// evaluated at T=1 and plain MSP pins T=1.
struct DetectorConfig {
    DetectorKind kind = DetectorKind::Msp;
    double temperature = 1.0;
};

namespace detail {
inline void check_logits(std::span<const double> logits) {
    if (logits.size() < 2) throw DataError("logits must have at least 2 classes");
    if (!all_finite(logits)) throw DataError("logits contain non-finite entries");
}
} // namespace detail

// Maximum softmax probability of logits/T, in (0, 1].
inline double msp_score(std::span<const double> logits, double temperature = 1.0) {
    detail::check_logits(logits);
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
    const double m = max_value(logits);
    double s = 0.0;
    for (double l : logits) s += std::exp((l - m) / temperature);
    return 1.0 / s;
}

// Negated free energy T*log(sum(exp(l/T))); monotone in every logit.
inline double energy_score(std::span<const double> logits, double temperature = 1.0) {
    detail::check_logits(logits);
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
    const double m = max_value(logits);
    double s = 0.0;
    for (double l : logits) s += std::exp((l - m) / temperature);
    return m + temperature * std::log(s);
}

inline double detector_score(std::span<const double> logits, const DetectorConfig& cfg) {
    switch (cfg.kind) {
        case DetectorKind::Msp: return msp_score(logits, 1.0);
        case DetectorKind::MspTemp: return msp_score(logits, cfg.temperature);
        case DetectorKind::Energy: return energy_score(logits, 1.0);
    }
    throw ConfigError("unhandled detector kind");
}

inline void validate_detector(const DetectorConfig& cfg) {
    if (!(cfg.temperature > 0.0)) throw ConfigError("temperature must be positive");
    if (cfg.kind != DetectorKind::MspTemp && cfg.temperature != 1.0)
        throw ConfigError(std::string("detector '") + detector_kind_name(cfg.kind) +
                          "' is evaluated at T=1; use msp-temp for temperature scaling");
}

// Elementwise scoring of a record batch. K is the manifest class count;
// pass 0 to take it from the first record.
inline std::vector<std::pair<std::string, double>> score_batch(
    const std::vector<ScoreRecord>& records, const DetectorConfig& cfg, std::size_t expected_k = 0) {
    validate_detector(cfg);
    std::vector<std::pair<std::string, double>> out;
    out.reserve(records.size());
    std::size_t k = expected_k;
    for (const auto& r : records) {
        if (r.logits.empty())
            throw DataError("record '" + r.record_id + "' has no logits to score");
        if (k == 0) k = r.logits.size();
        if (r.logits.size() != k)
            throw DataError("record '" + r.record_id + "' has " + std::to_string(r.logits.size()) +
                            " logits, expected " + std::to_string(k));
        out.emplace_back(r.record_id, detector_score(r.logits, cfg));
    }
    return out;
}

} // namespace hood
