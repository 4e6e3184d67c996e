// hood: command-line front end for the toolkit.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
// failure (diverged training, undefined metric), 1 anything else.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hood/hood.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

// Relative outputs land under HOOD_OUT_DIR when it is set.
fs::path resolve_out(const std::string& path) {
    const char* base = std::getenv("HOOD_OUT_DIR");
    fs::path p(path);
    if (base && *base && p.is_relative()) return fs::path(base) / p;
    return p;
}

json load_json_file(const std::string& path) {
    try {
        return json::parse(hood::read_text_file(path));
    } catch (const json::exception& e) {
        throw hood::ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

hood::DetectorConfig detector_from_flags(const std::string& kind, std::optional<double> temperature) {
    hood::DetectorConfig cfg;
    cfg.kind = hood::detector_kind_from_name(kind);
    if (temperature)
        cfg.temperature = *temperature;
    else if (cfg.kind == hood::DetectorKind::MspTemp)
        cfg.temperature = 1000.0;
    hood::validate_detector(cfg);
    return cfg;
}

void check_membership_against_manifest(const std::vector<hood::ScoreRecord>& records,
                                       const hood::SplitManifest& manifest) {
    for (const auto& r : records) {
        if (!r.logits.empty() && r.logits.size() != manifest.id_classes.size())
            throw hood::DataError("record '" + r.record_id + "' has " +
                                  std::to_string(r.logits.size()) + " logits but the manifest lists " +
                                  std::to_string(manifest.id_classes.size()) + " classes");
        hood::HoldoutLevel level;
        switch (r.membership) {
            case hood::Membership::OodL1: level = hood::HoldoutLevel::L1; break;
            case hood::Membership::OodL2: level = hood::HoldoutLevel::L2; break;
            case hood::Membership::OodL3: level = hood::HoldoutLevel::L3; break;
            default: continue;
        }
        if (!manifest.ood_sets.count(level))
            throw hood::DataError("record '" + r.record_id + "' is tagged " +
                                  hood::membership_name(r.membership) +
                                  " but the manifest has no such holdout level");
    }
}

std::string report_name_for_path(const fs::path& path) {
    if (path.stem() == "report" && path.has_parent_path()) {
        const fs::path parent = path.parent_path();
        if (parent.has_parent_path())
            return parent.parent_path().filename().string() + "/" + parent.filename().string();
        return parent.filename().string();
    }
    return path.stem().string();
}

int cmd_split(const std::string& hierarchy_file, const std::vector<std::string>& holdout_args,
              const std::string& out_file) {
    const auto h = hood::parse_hierarchy(hood::read_text_file(hierarchy_file));
    std::vector<std::pair<std::string, hood::HoldoutLevel>> holdouts;
    for (const auto& arg : holdout_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos)
            throw hood::ConfigError("--holdout expects NODE=LEVEL, got '" + arg + "'");
        holdouts.emplace_back(arg.substr(0, eq), hood::holdout_level_from_name(arg.substr(eq + 1)));
    }
    const auto manifest = hood::emit_manifest(hood::compile_split(h, holdouts));
    hood::write_text_file(resolve_out(out_file), hood::manifest_to_string(manifest));
    return 0;
}

int cmd_synth(const GlobalOpts& g, const std::string& config_file, const std::string& out_dir) {
    const json j = load_json_file(config_file);
    hood::SynthConfig cfg = hood::synth_config_from_json(j);
    if (g.seed) cfg.seed = *g.seed;
    const auto data = hood::generate_synthetic(cfg);
    hood::write_data_dir(resolve_out(out_dir), data,
                         hood::make_provenance(hood::synth_config_to_json(cfg), cfg.seed));
    if (!g.quiet)
        std::cout << "synth: " << data.manifest.id_classes.size() << " ID classes, "
                  << data.train.size() << " train / " << data.test.size() << " test records -> "
                  << resolve_out(out_dir).string() << "\n";
    return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& config_file, const std::string& data_dir,
              const std::string& out_spec) {
    const json j = load_json_file(config_file);
    hood::TrainConfig cfg = hood::train_config_from_json(j);
    if (g.seed) cfg.seed = *g.seed;

    fs::path model_path, log_path;
    if (const auto comma = out_spec.find(','); comma != std::string::npos) {
        model_path = resolve_out(out_spec.substr(0, comma));
        log_path = resolve_out(out_spec.substr(comma + 1));
    } else {
        const fs::path dir = resolve_out(out_spec);
        model_path = dir / "model.json";
        log_path = dir / "log.jsonl";
    }

    const auto data = hood::load_data_dir(data_dir);
    hood::MlpModel model = hood::make_model(cfg, data.train.empty() ? 0 : data.train.front().x.size(),
                                            data.manifest.id_classes.size());
    const auto log = hood::train(model, data, cfg);

    json model_json = hood::model_to_json(model);
    model_json["provenance"] = hood::make_provenance(j, cfg.seed);
    hood::write_text_file(model_path, model_json.dump(2) + "\n");
    hood::write_text_file(log_path, hood::train_log_to_string(log));

    if (!g.quiet && !log.steps.empty()) {
        const auto& last = log.steps.back();
        std::cout << "train: " << cfg.epochs << " epochs, final total loss " << last.total << " -> "
                  << model_path.string() << "\n";
    }
    return 0;
}

int cmd_score(const std::string& detector, std::optional<double> temperature,
              const std::string& logits_file, const std::string& out_file) {
    const auto cfg = detector_from_flags(detector, temperature);
    auto records = hood::ingest_scores(logits_file);
    const auto scored = hood::score_batch(records, cfg);
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].score = scored[i].second;
        records[i].logits.clear();
    }
    hood::write_text_file(resolve_out(out_file), hood::scores_to_string(records));
    return 0;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& model_file, const std::string& data_dir,
                 const std::string& detector, std::optional<double> temperature,
                 const std::string& out_file) {
    const auto cfg = detector_from_flags(detector, temperature);
    const auto model = hood::model_from_json(load_json_file(model_file));
    const auto data = hood::load_data_dir(data_dir);
    const auto report = hood::evaluate(model, data.test, cfg);

    std::vector<hood::ScoreRecord> records;
    for (const auto& f : data.test) {
        hood::ScoreRecord r;
        r.record_id = f.record_id;
        r.membership = f.membership;
        r.score = hood::detector_score(model.forward(f.x), cfg);
        records.push_back(std::move(r));
    }
    std::optional<hood::TernarySummary> ternary;
    bool has_semantic = false, has_true = false, has_id = false;
    for (const auto& r : records) {
        has_id |= r.membership == hood::Membership::Id;
        has_semantic |= hood::is_semantic_ood(r.membership);
        has_true |= r.membership == hood::Membership::TrueOod;
    }
    if (has_id && has_semantic && has_true) ternary = hood::ternary_threshold_summary(records);

    const json prov = hood::make_provenance(hood::detector_config_to_json(cfg), g.seed);
    hood::write_text_file(resolve_out(out_file),
                          hood::report_to_json(report, cfg, prov, hood::score_histograms(records),
                                               ternary)
                                  .dump(2) +
                              "\n");
    if (!g.quiet) std::cout << "evaluate: wrote " << resolve_out(out_file).string() << "\n";
    return 0;
}

int cmd_report(const std::string& scores_file, const std::string& manifest_file,
               const std::string& detector, std::optional<double> temperature,
               const std::string& out_file, const std::string& table_file) {
    auto records = hood::ingest_scores(scores_file);
    const auto manifest = hood::manifest_from_string(hood::read_text_file(manifest_file));
    check_membership_against_manifest(records, manifest);

    const auto cfg = detector_from_flags(detector, temperature);
    bool has_logits = false;
    for (auto& r : records) {
        if (r.logits.empty()) continue;
        has_logits = true;
        r.score = hood::detector_score(r.logits, cfg);
    }

    hood::MetricReport report = hood::hierarchical_report(records);
    bool has_true = false, has_id = false, has_semantic = false;
    for (const auto& r : records) {
        has_id |= r.membership == hood::Membership::Id;
        has_true |= r.membership == hood::Membership::TrueOod;
        has_semantic |= hood::is_semantic_ood(r.membership);
    }
    if (has_true && has_semantic) report.rows.push_back(hood::semantic_true_row(records));
    if (has_logits) {
        bool labeled = false;
        for (const auto& r : records)
            labeled |= r.membership == hood::Membership::Id && r.true_class.has_value();
        if (labeled) report.id_accuracy = hood::id_accuracy(records);
    }

    std::optional<hood::TernarySummary> ternary;
    if (has_id && has_semantic && has_true) ternary = hood::ternary_threshold_summary(records);

    json prov = hood::make_provenance(json{{"scores", fs::path(scores_file).filename().string()}},
                                      std::nullopt);
    prov["manifest_rule_hash"] = manifest.rule_hash;
    hood::write_text_file(resolve_out(out_file),
                          hood::report_to_json(report, cfg, prov, hood::score_histograms(records),
                                               ternary)
                                  .dump(2) +
                              "\n");
    if (!table_file.empty()) {
        const std::vector<hood::NamedReport> named{
            {fs::path(scores_file).stem().string(), report}};
        hood::write_text_file(resolve_out(table_file), hood::render_csv(named));
    }
    return 0;
}

int cmd_experiment(const GlobalOpts& g, const std::string& config_file, const std::string& out_dir,
                   std::size_t jobs) {
    const json j = load_json_file(config_file);
    const auto cfg = hood::experiment_config_from_json(j);
    const auto result = hood::run_experiment(cfg, resolve_out(out_dir), jobs);
    if (!g.quiet) {
        std::cout << result.aggregate_table;
        for (const auto& f : result.failures) std::cerr << "failed: " << f << "\n";
    }
    return result.failures.empty() ? 0 : 4;
}

int cmd_render(const std::vector<std::string>& report_files, const std::string& csv_file,
               const std::string& table_file) {
    std::vector<hood::NamedReport> named;
    for (const auto& path : report_files) {
        hood::NamedReport nr;
        nr.name = report_name_for_path(path);
        nr.report = hood::report_from_json(load_json_file(path));
        named.push_back(std::move(nr));
    }
    if (!csv_file.empty()) hood::write_text_file(resolve_out(csv_file), hood::render_csv(named));
    if (!table_file.empty())
        hood::write_text_file(resolve_out(table_file), hood::render_text_table(named));
    if (csv_file.empty() && table_file.empty()) std::cout << hood::render_text_table(named);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hood: hierarchical out-of-distribution detection toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Override the config seed")
                         ->group("Global");
    app.add_flag("--quiet", g.quiet, "Suppress progress output")->group("Global");

    // split compile
    auto* split = app.add_subcommand("split", "Hierarchy split tools");
    auto* split_compile = split->add_subcommand("compile", "Compile a split manifest");
    std::string sc_hierarchy, sc_out;
    std::vector<std::string> sc_holdouts;
    split_compile->add_option("--hierarchy", sc_hierarchy, "Hierarchy spec file")->required();
    split_compile->add_option("--holdout", sc_holdouts, "NODE=LEVEL holdout (repeatable)");
    split_compile->add_option("--out", sc_out, "Manifest output file")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic data directory");
    std::string sy_config, sy_out;
    synth->add_option("--config", sy_config, "Synth config JSON")->required();
    synth->add_option("--out", sy_out, "Output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "Train a model on a data directory");
    std::string tr_config, tr_data, tr_out;
    train->add_option("--config", tr_config, "Train config JSON")->required();
    train->add_option("--data", tr_data, "Data directory from synth")->required();
    train->add_option("--out", tr_out, "model.json,log.jsonl pair or output directory")->required();

    // score
    auto* score = app.add_subcommand("score", "Apply a detector to a logits file");
    std::string s_detector = "msp", s_logits, s_out;
    double s_temp_value = 0.0;
    auto* s_temp = score->add_option("--temperature", s_temp_value, "Detector temperature");
    score->add_option("--detector", s_detector, "msp|msp-temp|energy");
    score->add_option("--logits", s_logits, "Scores file carrying logits")->required();
    score->add_option("--out", s_out, "Scored output file")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a trained model on a data directory");
    std::string e_model, e_data, e_detector = "msp", e_out;
    double e_temp_value = 0.0;
    auto* e_temp = evaluate->add_option("--temperature", e_temp_value, "Detector temperature");
    evaluate->add_option("--model", e_model, "Model file")->required();
    evaluate->add_option("--data", e_data, "Data directory")->required();
    evaluate->add_option("--detector", e_detector, "msp|msp-temp|energy");
    evaluate->add_option("--out", e_out, "Report output file")->required();

    // report
    auto* report = app.add_subcommand("report", "Compute metrics from a scores file");
    std::string r_scores, r_manifest, r_detector = "msp", r_out, r_table;
    double r_temp_value = 0.0;
    auto* r_temp = report->add_option("--temperature", r_temp_value, "Detector temperature");
    report->add_option("--scores", r_scores, "Scores file (logits or pre-scored)")->required();
    report->add_option("--manifest", r_manifest, "Split manifest for validation")->required();
    report->add_option("--detector", r_detector, "Detector for logits files");
    report->add_option("--out", r_out, "Report JSON output")->required();
    report->add_option("--table", r_table, "Optional CSV table output");

    // experiment
    auto* experiment = app.add_subcommand("experiment", "Run a seeded method sweep");
    std::string x_config, x_out;
    std::size_t x_jobs = 0;
    experiment->add_option("--config", x_config, "Experiment config JSON")->required();
    experiment->add_option("--out", x_out, "Output directory")->required();
    experiment->add_option("--jobs", x_jobs, "Worker pool size (default: hardware)");

    // render
    auto* render = app.add_subcommand("render", "Render report JSON files as CSV/table");
    std::vector<std::string> n_reports;
    std::string n_csv, n_table;
    render->add_option("--report", n_reports, "Report JSON files (repeatable)")->required();
    render->add_option("--csv", n_csv, "CSV output file");
    render->add_option("--table", n_table, "Aligned text table output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (seed_opt->count() > 0) g.seed = seed_value;

    try {
        if (split_compile->parsed()) return cmd_split(sc_hierarchy, sc_holdouts, sc_out);
        if (split->parsed()) throw hood::ConfigError("split: expected the 'compile' subcommand");
        if (synth->parsed()) return cmd_synth(g, sy_config, sy_out);
        if (train->parsed()) return cmd_train(g, tr_config, tr_data, tr_out);
        if (score->parsed())
            return cmd_score(s_detector,
                             s_temp->count() ? std::optional<double>(s_temp_value) : std::nullopt,
                             s_logits, s_out);
        if (evaluate->parsed())
            return cmd_evaluate(g, e_model, e_data, e_detector,
                                e_temp->count() ? std::optional<double>(e_temp_value) : std::nullopt,
                                e_out);
        if (report->parsed())
            return cmd_report(r_scores, r_manifest, r_detector,
                              r_temp->count() ? std::optional<double>(r_temp_value) : std::nullopt,
                              r_out, r_table);
        if (experiment->parsed()) return cmd_experiment(g, x_config, x_out, x_jobs);
        if (render->parsed()) return cmd_render(n_reports, n_csv, n_table);
        throw hood::ConfigError("no subcommand given");
    } catch (const hood::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const hood::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const hood::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
