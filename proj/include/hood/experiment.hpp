// Seeded experiment sweeps: synth data per seed, one training run per
// method x seed, per-run reports, and a Table-2-shaped aggregate (mean +/-
// sd per cell). Runs fan out to a bounded worker pool; every run writes to
// its own directory and aggregation is a single-threaded reduce over the
// sorted run list, so output is deterministic.
#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hood/io.hpp"
#include "hood/render.hpp"

namespace hood {

struct MethodSpec {
    std::string name;
    LossConfig loss;
    DetectorConfig detector;
    // Per-method tweaks on top of the shared train settings.
    std::optional<double> learning_rate;
    std::optional<std::size_t> epochs;
};

struct ExperimentConfig {
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    SynthConfig synth;
    TrainConfig train;
    std::vector<MethodSpec> methods;
};

inline MethodSpec method_spec_from_json(const nlohmann::json& j) {
    cfg::reject_unknown_keys(j, {"name", "loss", "detector", "learning_rate", "epochs"},
                             "method spec");
    MethodSpec m;
    m.name = cfg::get_or<std::string>(j, "name", "");
    if (m.name.empty()) throw ConfigError("method spec: missing 'name'");
    if (j.contains("loss")) m.loss = loss_config_from_json(j.at("loss"));
    if (j.contains("detector")) m.detector = detector_config_from_json(j.at("detector"));
    if (j.contains("learning_rate")) m.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("epochs")) m.epochs = j.at("epochs").get<std::size_t>();
    return m;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    cfg::reject_unknown_keys(j, {"version", "seeds", "synth", "train", "methods"},
                             "experiment config");
    cfg::require_version(j, "experiment config");
    ExperimentConfig c;
    c.seeds = cfg::get_or(j, "seeds", c.seeds);
    if (c.seeds.empty()) throw ConfigError("experiment config: seeds must be non-empty");
    if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (!j.contains("methods") || j.at("methods").empty())
        throw ConfigError("experiment config: missing 'methods'");
    for (const auto& m : j.at("methods")) c.methods.push_back(method_spec_from_json(m));
    return c;
}

struct RunResult {
    std::string method;
    std::uint64_t seed = 0;
    MetricReport report;
    bool failed = false;
    std::string error;
};

struct ExperimentResult {
    std::vector<RunResult> runs; // methods x seeds, method-major order
    std::vector<NamedReport> aggregate_rows;
    std::string aggregate_csv;
    std::string aggregate_table;
    std::vector<std::string> failures;
};

// Trains and evaluates one method on one seed's data.
inline MetricReport run_single(const ExperimentConfig& cfg, const MethodSpec& method,
                               const SynthData& data, std::uint64_t seed) {
    TrainConfig tc = cfg.train;
    tc.loss = method.loss;
    tc.seed = seed;
    if (method.learning_rate) tc.learning_rate = *method.learning_rate;
    if (method.epochs) tc.epochs = *method.epochs;

    MlpModel model = make_model(tc, cfg.synth.dims, data.manifest.id_classes.size());
    train(model, data, tc);
    return evaluate(model, data.test, method.detector);
}

namespace detail {

// Mean +/- sd rows per method over succeeded seeds, in config order.
inline void aggregate_runs(const ExperimentConfig& cfg, ExperimentResult& result) {
    for (const auto& method : cfg.methods) {
        std::map<std::string, std::vector<double>> aurocs, fprs;
        std::vector<double> accs;
        std::size_t n_ok = 0;
        for (const auto& run : result.runs) {
            if (run.method != method.name || run.failed) continue;
            ++n_ok;
            for (const auto& row : run.report.rows) {
                aurocs[row.set_name].push_back(row.auroc);
                fprs[row.set_name].push_back(row.fpr_at_95tpr);
            }
            if (run.report.id_accuracy) accs.push_back(*run.report.id_accuracy);
        }
        if (n_ok == 0) continue;
        NamedReport agg;
        agg.name = method.name;
        for (const auto& [set, values] : aurocs) {
            MetricRow row;
            row.set_name = set;
            row.auroc = aggregate(values).mean;
            row.fpr_at_95tpr = aggregate(fprs.at(set)).mean;
            row.n_pos = n_ok;
            agg.report.rows.push_back(std::move(row));
        }
        if (!accs.empty()) agg.report.id_accuracy = aggregate(accs).mean;
        result.aggregate_rows.push_back(std::move(agg));
    }
}

// CSV with mean and sd columns per cell, plus a text table of mean ± sd.
inline void render_aggregate(const ExperimentConfig& cfg, ExperimentResult& result) {
    const std::vector<std::string> sets{"L1", "L2", "L3", "All", "ST"};
    std::string csv = "method,seeds";
    for (const auto& s : sets)
        csv += "," + s + "_auroc_mean," + s + "_auroc_sd," + s + "_fpr_mean," + s + "_fpr_sd";
    csv += ",id_acc_mean,id_acc_sd\n";

    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{"method"};
    for (const auto& s : sets) header.push_back(s + " AUROC/FPR");
    header.push_back("ID Acc");
    grid.push_back(header);

    for (const auto& method : cfg.methods) {
        std::map<std::string, std::vector<double>> aurocs, fprs;
        std::vector<double> accs;
        std::size_t n_ok = 0;
        for (const auto& run : result.runs) {
            if (run.method != method.name || run.failed) continue;
            ++n_ok;
            for (const auto& row : run.report.rows) {
                aurocs[row.set_name].push_back(row.auroc);
                fprs[row.set_name].push_back(row.fpr_at_95tpr);
            }
            if (run.report.id_accuracy) accs.push_back(*run.report.id_accuracy);
        }
        csv += method.name + "," + std::to_string(n_ok);
        std::vector<std::string> cells{method.name};
        for (const auto& s : sets) {
            if (!aurocs.count(s)) {
                csv += ",,,,";
                cells.push_back("");
                continue;
            }
            const auto a = aggregate(aurocs.at(s));
            const auto f = aggregate(fprs.at(s));
            csv += "," + format_percent(a.mean) + "," + format_percent(a.sd) + "," +
                   format_percent(f.mean) + "," + format_percent(f.sd);
            cells.push_back(format_aggregate(a) + " / " + format_aggregate(f));
        }
        if (accs.empty()) {
            csv += ",,";
            cells.push_back("");
        } else {
            const auto a = aggregate(accs);
            csv += "," + format_percent(a.mean) + "," + format_percent(a.sd);
            cells.push_back(format_aggregate(a));
        }
        csv += "\n";
        grid.push_back(std::move(cells));
    }

    std::vector<std::size_t> widths(grid.front().size(), 0);
    for (const auto& row : grid)
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
    std::string table;
    for (const auto& row : grid) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            table += row[c];
            if (c + 1 < row.size()) table += std::string(widths[c] - row[c].size() + 2, ' ');
        }
        while (!table.empty() && table.back() == ' ') table.pop_back();
        table += '\n';
    }

    result.aggregate_csv = std::move(csv);
    result.aggregate_table = std::move(table);
}

} // namespace detail

// Runs the full sweep. If out_dir is non-empty, per-run reports land in
// out_dir/runs/<method>/seed_<s>/report.json and the aggregate files at the
// top level. A failed run is recorded and skipped; callers should treat a
// non-empty failures list as a non-zero exit.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const std::filesystem::path& out_dir = {},
                                       std::size_t jobs = 0) {
    if (jobs == 0) {
        jobs = std::thread::hardware_concurrency();
        if (jobs == 0) jobs = 1;
    }

    // Shared data per seed; methods see identical samples for a fair
    // comparison.
    std::vector<SynthData> data_by_seed;
    data_by_seed.reserve(cfg.seeds.size());
    for (const auto seed : cfg.seeds) {
        SynthConfig sc = cfg.synth;
        sc.seed = seed;
        data_by_seed.push_back(generate_synthetic(sc));
    }

    struct Task {
        std::size_t method_idx;
        std::size_t seed_idx;
    };
    std::vector<Task> tasks;
    for (std::size_t m = 0; m < cfg.methods.size(); ++m)
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) tasks.push_back({m, s});

    ExperimentResult result;
    result.runs.resize(tasks.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const auto& task = tasks[i];
            RunResult& run = result.runs[i];
            run.method = cfg.methods[task.method_idx].name;
            run.seed = cfg.seeds[task.seed_idx];
            try {
                run.report = run_single(cfg, cfg.methods[task.method_idx], data_by_seed[task.seed_idx],
                                        run.seed);
            } catch (const std::exception& e) {
                run.failed = true;
                run.error = e.what();
            }
        }
    };
    if (jobs <= 1 || tasks.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(jobs, tasks.size()); ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (const auto& run : result.runs)
        if (run.failed)
            result.failures.push_back(run.method + "/seed_" + std::to_string(run.seed) + ": " +
                                      run.error);

    detail::aggregate_runs(cfg, result);
    detail::render_aggregate(cfg, result);

    if (!out_dir.empty()) {
        const auto config_json = nlohmann::json{{"seeds", cfg.seeds}};
        for (const auto& run : result.runs) {
            const auto run_dir = out_dir / "runs" / run.method / ("seed_" + std::to_string(run.seed));
            std::filesystem::create_directories(run_dir);
            if (run.failed) {
                write_text_file(run_dir / "error.txt", run.error + "\n");
                continue;
            }
            const MethodSpec* spec = nullptr;
            for (const auto& m : cfg.methods)
                if (m.name == run.method) spec = &m;
            const auto prov = make_provenance(config_json, run.seed);
            write_text_file(run_dir / "report.json",
                            report_to_json(run.report, spec->detector, prov).dump(2) + "\n");
        }
        nlohmann::json agg{{"version", 1}, {"failures", result.failures}};
        nlohmann::json methods = nlohmann::json::object();
        for (const auto& row : result.aggregate_rows) {
            nlohmann::json rows = nlohmann::json::object();
            for (const auto& r : row.report.rows)
                rows[r.set_name] = nlohmann::json{{"auroc_mean", r.auroc}, {"fpr_mean", r.fpr_at_95tpr}};
            if (row.report.id_accuracy) rows["id_accuracy_mean"] = *row.report.id_accuracy;
            methods[row.name] = std::move(rows);
        }
        agg["methods"] = std::move(methods);
        write_text_file(out_dir / "aggregate.json", agg.dump(2) + "\n");
        write_text_file(out_dir / "aggregate.csv", result.aggregate_csv);
        write_text_file(out_dir / "aggregate.txt", result.aggregate_table);
    }
    return result;
}

} // namespace hood
