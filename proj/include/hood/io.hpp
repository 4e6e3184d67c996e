// File formats and strict config parsing.
//
// Scores travel as line-delimited JSON records; configs, manifests, models
// and reports are JSON objects with mandatory version fields. Parsing is
// strict: unknown keys are rejected by name, heterogeneous score files are
// rejected, and every error carries the offending line or key.
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hood/core.hpp"
#include "hood/detectors.hpp"
#include "hood/hierarchy.hpp"
#include "hood/losses.hpp"
#include "hood/metrics.hpp"
#include "hood/mixing.hpp"
#include "hood/records.hpp"
#include "hood/synth.hpp"
#include "hood/trainer.hpp"
#include "hood/version.hpp"

namespace hood {

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

namespace cfg {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError(context + ": unknown key '" + key + "'");
}

inline void require_version(const nlohmann::json& j, const std::string& context) {
    if (!j.contains("version")) throw ConfigError(context + ": missing mandatory 'version' field");
    if (!j.at("version").is_number_integer() || j.at("version").get<int>() != 1)
        throw ConfigError(context + ": unsupported version");
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

} // namespace cfg

// ---- configs ----------------------------------------------------------

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
    cfg::reject_unknown_keys(j, {"version", "branching", "dims", "level_dims", "level_scales",
                                 "noise_sigma", "norm_radius", "train_per_leaf", "test_per_leaf",
                                 "holdout_per_level", "true_ood_offset", "true_ood_count",
                                 "outlier_count", "outlier_sigma", "seed"},
                             "synth config");
    cfg::require_version(j, "synth config");
    SynthConfig c;
    c.branching = cfg::get_or(j, "branching", c.branching);
    c.dims = cfg::get_or(j, "dims", c.dims);
    c.level_dims = cfg::get_or(j, "level_dims", c.level_dims);
    c.level_scales = cfg::get_or(j, "level_scales", c.level_scales);
    c.noise_sigma = cfg::get_or(j, "noise_sigma", c.noise_sigma);
    c.norm_radius = cfg::get_or(j, "norm_radius", c.norm_radius);
    c.train_per_leaf = cfg::get_or(j, "train_per_leaf", c.train_per_leaf);
    c.test_per_leaf = cfg::get_or(j, "test_per_leaf", c.test_per_leaf);
    c.holdout_per_level = cfg::get_or(j, "holdout_per_level", c.holdout_per_level);
    c.true_ood_offset = cfg::get_or(j, "true_ood_offset", c.true_ood_offset);
    c.true_ood_count = cfg::get_or(j, "true_ood_count", c.true_ood_count);
    c.outlier_count = cfg::get_or(j, "outlier_count", c.outlier_count);
    c.outlier_sigma = cfg::get_or(j, "outlier_sigma", c.outlier_sigma);
    c.seed = cfg::get_or(j, "seed", c.seed);
    validate_synth(c);
    return c;
}

inline nlohmann::json synth_config_to_json(const SynthConfig& c) {
    return nlohmann::json{{"version", 1},
                          {"branching", c.branching},
                          {"dims", c.dims},
                          {"level_dims", c.level_dims},
                          {"level_scales", c.level_scales},
                          {"noise_sigma", c.noise_sigma},
                          {"norm_radius", c.norm_radius},
                          {"train_per_leaf", c.train_per_leaf},
                          {"test_per_leaf", c.test_per_leaf},
                          {"holdout_per_level", c.holdout_per_level},
                          {"true_ood_offset", c.true_ood_offset},
                          {"true_ood_count", c.true_ood_count},
                          {"outlier_count", c.outlier_count},
                          {"outlier_sigma", c.outlier_sigma},
                          {"seed", c.seed}};
}

inline LossConfig loss_config_from_json(const nlohmann::json& j) {
    cfg::reject_unknown_keys(j, {"kind", "beta", "gamma", "oe_weight", "m_in", "m_out"},
                             "loss config");
    LossConfig c;
    c.kind = loss_kind_from_name(cfg::get_or<std::string>(j, "kind", "baseline"));
    c.beta = cfg::get_or(j, "beta", c.beta);
    c.gamma = cfg::get_or(j, "gamma", c.gamma);
    c.oe_weight = cfg::get_or(j, "oe_weight", c.oe_weight);
    c.m_in = cfg::get_or(j, "m_in", c.m_in);
    c.m_out = cfg::get_or(j, "m_out", c.m_out);
    validate_loss(c);
    return c;
}

inline MixConfig mix_config_from_json(const nlohmann::json& j) {
    cfg::reject_unknown_keys(j, {"op", "alpha", "rng_seed"}, "mix config");
    MixConfig c;
    c.op = mix_op_from_name(cfg::get_or<std::string>(j, "op", "linear"));
    c.alpha = cfg::get_or(j, "alpha", c.alpha);
    c.rng_seed = cfg::get_or(j, "rng_seed", c.rng_seed);
    validate_mix(c);
    return c;
}

inline DetectorConfig detector_config_from_json(const nlohmann::json& j) {
    cfg::reject_unknown_keys(j, {"kind", "temperature"}, "detector config");
    DetectorConfig c;
    c.kind = detector_kind_from_name(cfg::get_or<std::string>(j, "kind", "msp"));
    c.temperature = cfg::get_or(j, "temperature",
                                c.kind == DetectorKind::MspTemp ? 1000.0 : 1.0);
    validate_detector(c);
    return c;
}

inline nlohmann::json detector_config_to_json(const DetectorConfig& c) {
    return nlohmann::json{{"kind", detector_kind_name(c.kind)}, {"temperature", c.temperature}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    cfg::reject_unknown_keys(j, {"version", "epochs", "batch_size", "learning_rate", "optimizer",
                                 "momentum", "hidden_sizes", "loss", "mix", "seed"},
                             "train config");
    cfg::require_version(j, "train config");
    TrainConfig c;
    c.epochs = cfg::get_or(j, "epochs", c.epochs);
    c.batch_size = cfg::get_or(j, "batch_size", c.batch_size);
    c.learning_rate = cfg::get_or(j, "learning_rate", c.learning_rate);
    c.optimizer = optimizer_from_name(cfg::get_or<std::string>(j, "optimizer", "sgd"));
    c.momentum = cfg::get_or(j, "momentum", c.momentum);
    c.hidden_sizes = cfg::get_or(j, "hidden_sizes", c.hidden_sizes);
    if (j.contains("loss")) c.loss = loss_config_from_json(j.at("loss"));
    if (j.contains("mix")) c.mix = mix_config_from_json(j.at("mix"));
    c.seed = cfg::get_or(j, "seed", c.seed);
    validate_train(c);
    return c;
}

// ---- provenance --------------------------------------------------------

inline nlohmann::json make_provenance(const nlohmann::json& config,
                                      std::optional<std::uint64_t> seed) {
    nlohmann::json p{{"config_hash", to_hex(fnv1a64(config.dump()))},
                     {"tool_version", kToolVersion}};
    if (seed) p["seed"] = *seed;
    return p;
}

// ---- score files -------------------------------------------------------

// Line-delimited records. Either every record carries logits or every
// record carries a score; mixing the two is rejected.
inline std::vector<ScoreRecord> parse_scores(const std::string& text) {
    std::vector<ScoreRecord> records;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::size_t logits_k = 0;
    int mode = 0; // 0 unknown, 1 logits, 2 scores
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("scores line " + std::to_string(lineno) + ": malformed JSON: " + e.what());
        }
        try {
            cfg::reject_unknown_keys(j, {"record_id", "membership", "logits", "score", "true_class"},
                                     "scores line " + std::to_string(lineno));
        } catch (const ConfigError& e) {
            throw DataError(e.what());
        }
        ScoreRecord r;
        try {
            r.record_id = j.at("record_id").get<std::string>();
            r.membership = membership_from_name(j.at("membership").get<std::string>());
            if (j.contains("true_class")) r.true_class = j.at("true_class").get<int>();
            const bool has_logits = j.contains("logits");
            const bool has_score = j.contains("score");
            if (has_logits == has_score)
                throw DataError("scores line " + std::to_string(lineno) +
                                ": record must carry exactly one of 'logits' or 'score'");
            if (mode == 0) mode = has_logits ? 1 : 2;
            if ((mode == 1) != has_logits)
                throw DataError("scores line " + std::to_string(lineno) +
                                ": mixes pre-scored and logits records in one file");
            if (has_logits) {
                r.logits = j.at("logits").get<std::vector<double>>();
                if (!all_finite(r.logits))
                    throw DataError("scores line " + std::to_string(lineno) + ": non-finite logits");
                if (logits_k == 0) logits_k = r.logits.size();
                if (r.logits.size() != logits_k)
                    throw DataError("scores line " + std::to_string(lineno) + ": logits length " +
                                    std::to_string(r.logits.size()) + " != " +
                                    std::to_string(logits_k) + " seen earlier");
            } else {
                r.score = j.at("score").get<double>();
                if (!std::isfinite(*r.score))
                    throw DataError("scores line " + std::to_string(lineno) + ": non-finite score");
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError("scores line " + std::to_string(lineno) + ": " + e.what());
        }
        records.push_back(std::move(r));
    }
    return records;
}

inline std::string scores_to_string(const std::vector<ScoreRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        nlohmann::json j{{"record_id", r.record_id}, {"membership", membership_name(r.membership)}};
        if (!r.logits.empty()) j["logits"] = r.logits;
        if (r.score) j["score"] = *r.score;
        if (r.true_class) j["true_class"] = *r.true_class;
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline std::vector<ScoreRecord> ingest_scores(const std::filesystem::path& path) {
    return parse_scores(read_text_file(path));
}

// ---- feature files (synth data dirs) ------------------------------------

inline std::string features_to_string(const std::vector<FeatureRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        nlohmann::json j{{"record_id", r.record_id},
                         {"membership", membership_name(r.membership)},
                         {"x", r.x}};
        if (r.true_class) j["true_class"] = *r.true_class;
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline std::vector<FeatureRecord> features_from_string(const std::string& text) {
    std::vector<FeatureRecord> records;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            cfg::reject_unknown_keys(j, {"record_id", "membership", "x", "true_class"},
                                     "features line " + std::to_string(lineno));
            FeatureRecord r;
            r.record_id = j.at("record_id").get<std::string>();
            r.membership = membership_from_name(j.at("membership").get<std::string>());
            r.x = j.at("x").get<std::vector<double>>();
            if (j.contains("true_class")) r.true_class = j.at("true_class").get<int>();
            if (dim == 0) dim = r.x.size();
            if (r.x.size() != dim)
                throw DataError("features line " + std::to_string(lineno) + ": inconsistent dims");
            records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("features line " + std::to_string(lineno) + ": " + e.what());
        } catch (const ConfigError& e) {
            throw DataError(e.what());
        }
    }
    return records;
}

inline std::string outliers_to_string(const Matrix& m) {
    std::string out;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        nlohmann::json j{{"x", std::vector<double>(m.row(r).begin(), m.row(r).end())}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline Matrix outliers_from_string(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            rows.push_back(j.at("x").get<std::vector<double>>());
        } catch (const nlohmann::json::exception& e) {
            throw DataError("outliers line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return Matrix::from_rows(rows);
}

// Writes a complete synth data directory; load_data_dir is its inverse.
inline void write_data_dir(const std::filesystem::path& dir, const SynthData& data,
                           const nlohmann::json& provenance) {
    std::filesystem::create_directories(dir);
    write_text_file(dir / "hierarchy.json", hierarchy_to_json(data.hierarchy).dump(2) + "\n");
    write_text_file(dir / "manifest.json", manifest_to_string(data.manifest));
    write_text_file(dir / "train.jsonl", features_to_string(data.train));
    write_text_file(dir / "test.jsonl", features_to_string(data.test));
    write_text_file(dir / "outliers.jsonl", outliers_to_string(data.outliers));
    write_text_file(dir / "meta.json",
                    nlohmann::json{{"version", 1}, {"provenance", provenance}}.dump(2) + "\n");
}

inline SynthData load_data_dir(const std::filesystem::path& dir) {
    SynthData data;
    data.hierarchy = parse_hierarchy(read_text_file(dir / "hierarchy.json"));
    data.manifest = manifest_from_string(read_text_file(dir / "manifest.json"));
    data.train = features_from_string(read_text_file(dir / "train.jsonl"));
    data.test = features_from_string(read_text_file(dir / "test.jsonl"));
    data.outliers = outliers_from_string(read_text_file(dir / "outliers.jsonl"));
    return data;
}

// ---- reports -----------------------------------------------------------

struct HistogramData {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<std::size_t> counts;
};

// Binned score counts per membership set, for external histogram rendering.
inline std::map<std::string, HistogramData> score_histograms(const std::vector<ScoreRecord>& records,
                                                             std::size_t bins = 20) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& r : records) {
        if (!r.score) continue;
        lo = std::min(lo, *r.score);
        hi = std::max(hi, *r.score);
    }
    std::map<std::string, HistogramData> out;
    if (!(lo <= hi)) return out;
    if (hi == lo) hi = lo + 1.0;
    for (const auto& r : records) {
        if (!r.score) continue;
        auto& h = out[membership_name(r.membership)];
        if (h.counts.empty()) {
            h.lo = lo;
            h.hi = hi;
            h.counts.assign(bins, 0);
        }
        auto bin = static_cast<std::size_t>(static_cast<double>(bins) * (*r.score - lo) / (hi - lo));
        if (bin >= bins) bin = bins - 1;
        ++h.counts[bin];
    }
    return out;
}

inline nlohmann::json report_to_json(const MetricReport& report, const DetectorConfig& detector,
                                     const nlohmann::json& provenance,
                                     const std::map<std::string, HistogramData>& histograms = {},
                                     const std::optional<TernarySummary>& ternary = std::nullopt) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows)
        rows.push_back(nlohmann::json{{"set", r.set_name},
                                      {"auroc", r.auroc},
                                      {"fpr95", r.fpr_at_95tpr},
                                      {"n_pos", r.n_pos},
                                      {"n_neg", r.n_neg}});
    nlohmann::json j{{"version", 1},
                     {"rows", std::move(rows)},
                     {"detector", detector_config_to_json(detector)},
                     {"provenance", provenance}};
    if (report.id_accuracy) j["id_accuracy"] = *report.id_accuracy;
    if (!histograms.empty()) {
        nlohmann::json h = nlohmann::json::object();
        for (const auto& [name, hist] : histograms)
            h[name] = nlohmann::json{{"lo", hist.lo}, {"hi", hist.hi}, {"counts", hist.counts}};
        j["histograms"] = std::move(h);
    }
    if (ternary) {
        nlohmann::json conf = nlohmann::json::array();
        for (const auto& row : ternary->confusion) conf.push_back(row);
        j["ternary"] = nlohmann::json{{"tau_high", ternary->tau_high},
                                      {"tau_low", ternary->tau_low},
                                      {"confusion", std::move(conf)}};
    }
    return j;
}

inline MetricReport report_from_json(const nlohmann::json& j) {
    MetricReport report;
    try {
        for (const auto& row : j.at("rows")) {
            MetricRow r;
            r.set_name = row.at("set").get<std::string>();
            r.auroc = row.at("auroc").get<double>();
            r.fpr_at_95tpr = row.at("fpr95").get<double>();
            r.n_pos = row.at("n_pos").get<std::size_t>();
            r.n_neg = row.at("n_neg").get<std::size_t>();
            report.rows.push_back(std::move(r));
        }
        if (j.contains("id_accuracy")) report.id_accuracy = j.at("id_accuracy").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed report: ") + e.what());
    }
    return report;
}

// ---- training log ------------------------------------------------------

inline std::string train_log_to_string(const TrainLog& log) {
    std::string out;
    for (const auto& s : log.steps) {
        nlohmann::json j{{"epoch", s.epoch}, {"step", s.step},    {"ce", s.ce},
                         {"out_term", s.out_term}, {"in_term", s.in_term}, {"total", s.total},
                         {"lambda", s.lambda}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

} // namespace hood
