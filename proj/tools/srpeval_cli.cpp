// srpeval command-line entry point.
#include <csignal>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "srpeval/digest.hpp"
#include "srpeval/error.hpp"
#include "srpeval/metrics.hpp"
#include "srpeval/pipeline.hpp"
#include "srpeval/report.hpp"
#include "srpeval/service.hpp"

using namespace srpeval;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

AnnotationService* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

ConfusionMatrix parse_cm(const std::string& text, std::string& name) {
    std::string counts = text;
    if (auto eq = text.find('='); eq != std::string::npos) {
        name = text.substr(0, eq);
        counts = text.substr(eq + 1);
    }
    long v[4];
    char tail = 0;
    if (std::sscanf(counts.c_str(), "%ld,%ld,%ld,%ld%c", &v[0], &v[1], &v[2], &v[3], &tail) != 4)
        throw Error(ErrorClass::InvalidArgument, "--cm expects [name=]tp,fn,fp,tn, got '" + text + "'");
    for (long x : v)
        if (x < 0) throw Error(ErrorClass::InvalidArgument, "--cm counts must be non-negative");
    return {v[0], v[1], v[2], v[3]};
}

struct Options {
    std::string config_path;
    std::string corpus;

    std::string manifest;
    std::string annotations_file;
    bool overwrite = false;

    std::string protocol;
    std::string record_path;
    std::string replay_path;
    int threshold = 0;

    std::vector<std::string> runs;
    std::vector<std::string> cms;
    bool sweep = false;
    bool as_json = false;

    std::string run;
    std::string target;

    std::string generated_at;

    std::string host;
    int port = -1;
    std::string token;
    std::string static_dir;
};

HarnessConfig resolve_config(const Options& o) {
    HarnessConfig cfg = o.config_path.empty() ? HarnessConfig{} : load_config(o.config_path);
    if (!o.corpus.empty()) cfg.corpus_root = o.corpus;
    if (o.threshold != 0) cfg.threshold = o.threshold;
    if (!o.record_path.empty() && !o.replay_path.empty())
        throw Error(ErrorClass::Config, "--record and --replay are mutually exclusive");
    if (!o.record_path.empty()) {
        cfg.session_mode = SessionMode::Record;
        cfg.session_path = o.record_path;
    }
    if (!o.replay_path.empty()) {
        cfg.session_mode = SessionMode::Replay;
        cfg.session_path = o.replay_path;
    }
    if (!o.target.empty()) {
        auto t = parse_tree_target(o.target);
        if (!t) throw Error(ErrorClass::InvalidArgument, "--target must be human or model");
        cfg.tree.target = *t;
    }
    cfg.validate();
    return cfg;
}

std::unique_ptr<Corpus> open_corpus(const HarnessConfig& cfg, bool must_exist = true) {
    if (must_exist && !fs::exists(cfg.corpus_root / "samples.jsonl"))
        throw Error(ErrorClass::MissingPrerequisite,
                    "no corpus at " + cfg.corpus_root.string() + "; run ingest first");
    auto corpus = std::make_unique<Corpus>(cfg.corpus_root);
    corpus->set_consensus_policy(cfg.ground_truth.policy);
    return corpus;
}

EvalRun load_existing_run(const Corpus& corpus, const std::string& id) {
    const auto runs = corpus.list_runs();
    if (std::find(runs.begin(), runs.end(), id) == runs.end())
        throw Error(ErrorClass::MissingPrerequisite, "run '" + id + "' does not exist");
    return corpus.load_run(id);
}

int cmd_ingest(const Options& o) {
    const auto cfg = resolve_config(o);
    auto corpus_ptr = open_corpus(cfg, false);
    Corpus& corpus = *corpus_ptr;
    const auto summary = corpus.ingest_manifest(o.manifest);
    fmt::print("ingested {} sample(s); corpus now holds {}\n", summary.ingested, summary.corpus_total);
    for (const auto& [cat, n] : summary.per_category) fmt::print("  {:<12} {}\n", to_string(cat), n);
    return 0;
}

int cmd_annotations_import(const Options& o) {
    const auto cfg = resolve_config(o);
    auto corpus_ptr = open_corpus(cfg);
    Corpus& corpus = *corpus_ptr;
    const auto n = corpus.import_annotations(o.annotations_file, o.overwrite);
    fmt::print("imported {} annotation(s)\n", n);
    return 0;
}

int cmd_evaluate(const Options& o) {
    const auto cfg = resolve_config(o);
    const auto protocol = parse_protocol(o.protocol);
    if (!protocol) throw Error(ErrorClass::InvalidArgument, "--protocol must be standard or diagnostic");
    auto corpus_ptr = open_corpus(cfg);
    Corpus& corpus = *corpus_ptr;
    const auto prompts = PromptRegistry::load(cfg.resource_dir);
    ModelClient client(cfg.endpoint, cfg.session_mode, cfg.session_path);
    auto run = evaluate(corpus, prompts, client, *protocol, cfg);
    int predicted = 0, parse_failures = 0, transport_failures = 0;
    for (const auto& r : run.records) {
        predicted += r.prediction.has_value();
        parse_failures += r.parse_error.has_value();
        transport_failures += r.transport_error.has_value();
    }
    const auto id = corpus.save_run(std::move(run));
    fmt::print("{}\n", id);
    fmt::print(stderr, "{} prediction(s), {} parse failure(s), {} transport failure(s)\n", predicted, parse_failures,
               transport_failures);
    return 0;
}

int cmd_metrics(const Options& o) {
    const auto cfg = resolve_config(o);
    std::vector<std::pair<std::string, MetricsReport>> rows;
    std::vector<std::string> notes;
    json out = json::object();

    for (const auto& text : o.cms) {
        std::string name = "method" + std::to_string(rows.size() + 1);
        const auto cm = parse_cm(text, name);
        rows.emplace_back(name, classification_metrics(cm));
    }

    std::vector<EvalRun> runs;
    if (!o.runs.empty()) {
        auto corpus_ptr = open_corpus(cfg);
        Corpus& corpus = *corpus_ptr;
        const auto truth = corpus.ground_truth(cfg.ground_truth);
        for (const auto& id : o.runs) {
            runs.push_back(load_existing_run(corpus, id));
            auto summary = summarize_run(runs.back(), truth, notes);
            rows.emplace_back(id, summary.metrics);
        }
        if (runs.size() == 2) {
            const auto cmp = build_comparison(runs[0], runs[1], truth, cfg.comparison);
            if (cmp.mcnemar) out["mcnemar"] = to_json(*cmp.mcnemar);
        }
        if (o.sweep) {
            json sweeps = json::object();
            for (const auto& run : runs) {
                std::vector<int> scores;
                std::vector<Label> labels;
                for (const auto& r : run.records) {
                    const auto* t = truth.find(r.sample_id);
                    if (!r.prediction || !t) continue;
                    scores.push_back(r.prediction->source_score);
                    labels.push_back(t->label);
                }
                json rows_json = json::array();
                for (const auto& row : threshold_sweep(scores, labels))
                    rows_json.push_back({{"threshold", row.threshold},
                                         {"predicted_complex", row.predicted_complex},
                                         {"metrics", to_json(row.metrics)}});
                sweeps[run.run_id] = rows_json;
            }
            out["sweep"] = sweeps;
        }
    }
    if (rows.empty()) throw Error(ErrorClass::InvalidArgument, "metrics needs run ids or --cm counts");

    if (o.as_json) {
        json methods = json::array();
        for (const auto& [name, m] : rows) methods.push_back({{"method", name}, {"metrics", to_json(m)}});
        out["methods"] = methods;
        out["notes"] = notes;
        std::cout << out.dump(2) << "\n";
        return 0;
    }
    std::cout << format_metrics_table(rows);
    for (const auto& [name, m] : rows)
        for (const auto& n : m.notes) fmt::print("note: {}: {}\n", name, n);
    for (const auto& n : notes) fmt::print("note: {}\n", n);
    if (out.contains("mcnemar")) {
        const auto& m = out["mcnemar"];
        fmt::print("McNemar: b={} c={} statistic={:.4f} p={:.4f} ({})\n", m["b"].get<long>(), m["c"].get<long>(),
                   m["statistic"].get<double>(), m["p_value"].get<double>(), m["method"].get<std::string>());
    }
    if (out.contains("sweep")) {
        for (const auto& [id, sweep] : out["sweep"].items()) {
            fmt::print("\nthreshold sweep for {}\n", id);
            fmt::print("{:>9}  {:>9}  {:>9}  {:>9}  {:>9}  {:>9}\n", "threshold", "predicted", "precision", "recall",
                       "f1", "kappa");
            for (const auto& row : sweep) {
                auto cell = [](const json& v) { return v.is_null() ? std::string("undefined") : fmt::format("{:.4f}", v.get<double>()); };
                const auto& m = row["metrics"];
                fmt::print("{:>9}  {:>9}  {:>9}  {:>9}  {:>9}  {:>9}\n", row["threshold"].get<int>(),
                           row["predicted_complex"].get<long>(), cell(m["precision"]), cell(m["recall"]),
                           cell(m["f1"]), cell(m["kappa"]));
            }
        }
    }
    return 0;
}

int cmd_tree(const Options& o) {
    const auto cfg = resolve_config(o);
    auto corpus_ptr = open_corpus(cfg);
    Corpus& corpus = *corpus_ptr;
    const auto run = load_existing_run(corpus, o.run);
    const auto truth = corpus.ground_truth(cfg.ground_truth);
    const auto data = build_tree_dataset(run, truth, cfg.tree.target, cfg.tree.encoding);
    TreeConfig tc = cfg.tree;
    const auto analysis = analyze_tree(data, tc);
    const auto dir = tree_dir(corpus, run.run_id, cfg.tree.target);
    write_tree_artifacts(analysis, dir);
    std::cout << format_rules_table(analysis.summary.rules);
    if (!analysis.summary.cv_error.empty()) fmt::print("note: cross-validation skipped: {}\n", analysis.summary.cv_error);
    fmt::print("artifacts: {}\n", dir.string());
    return 0;
}

int cmd_report(const Options& o) {
    const auto cfg = resolve_config(o);
    if (o.runs.size() != 2) throw Error(ErrorClass::InvalidArgument, "--runs takes a standard and a diagnostic run id");
    auto corpus_ptr = open_corpus(cfg);
    Corpus& corpus = *corpus_ptr;
    const auto run_std = load_existing_run(corpus, o.runs[0]);
    const auto run_diag = load_existing_run(corpus, o.runs[1]);
    const auto bundle = build_report(corpus, run_std, run_diag, cfg);
    const auto dir = report_dir(corpus, run_std.run_id, run_diag.run_id);
    write_report(bundle, dir, o.generated_at.empty() ? utc_now_iso8601() : o.generated_at);
    fmt::print("{}\n", dir.string());
    return 0;
}

int cmd_serve(const Options& o) {
    const auto cfg = resolve_config(o);
    auto corpus_ptr = open_corpus(cfg, false);
    Corpus& corpus = *corpus_ptr;
    ServiceOptions so;
    if (!o.host.empty()) so.host = o.host;
    if (o.port >= 0) so.port = o.port;
    if (!o.token.empty()) so.token = o.token;
    so.static_dir = o.static_dir;
    so.ground_truth = cfg.ground_truth;
    AnnotationService service(corpus, so);
    const int port = service.bind();
    fmt::print("listening on http://{}:{}\n", so.host, port);
    std::fflush(stdout);
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    service.run();
    g_service = nullptr;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Search-results-page complexity evaluation harness"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--corpus", o.corpus, "corpus root (overrides the config)");

    auto* ingest = app.add_subcommand("ingest", "validate and store a sample manifest");
    ingest->add_option("manifest", o.manifest, "manifest JSON")->required();

    auto* annotations = app.add_subcommand("annotations", "annotation management");
    annotations->require_subcommand(1);
    auto* import = annotations->add_subcommand("import", "import a JSONL annotation file");
    import->add_option("file", o.annotations_file)->required();
    import->add_flag("--overwrite", o.overwrite, "replace existing (sample, annotator) judgments");

    auto* evaluate_cmd = app.add_subcommand("evaluate", "run one prompting protocol over the corpus");
    evaluate_cmd->add_option("--protocol", o.protocol, "standard | diagnostic")->required();
    evaluate_cmd->add_option("--record", o.record_path, "record responses to a session file");
    evaluate_cmd->add_option("--replay", o.replay_path, "replay responses from a session file");
    evaluate_cmd->add_option("--threshold", o.threshold, "binarization threshold (1-4)");

    auto* metrics = app.add_subcommand("metrics", "classification metrics for runs or raw confusion matrices");
    metrics->add_option("runs", o.runs, "run ids");
    metrics->add_option("--cm", o.cms, "[name=]tp,fn,fp,tn");
    metrics->add_flag("--sweep", o.sweep, "threshold sweep over source scores");
    metrics->add_flag("--json", o.as_json, "machine-readable output");

    auto* tree = app.add_subcommand("tree", "train the explanatory decision tree on a diagnostic run");
    tree->add_option("--run", o.run, "diagnostic run id")->required();
    tree->add_option("--target", o.target, "human | model");

    auto* report = app.add_subcommand("report", "comparison report for a standard/diagnostic run pair");
    report->add_option("--runs", o.runs, "standard and diagnostic run ids")->required()->expected(2);
    report->add_option("--generated-at", o.generated_at, "header timestamp for report.md");

    auto* serve = app.add_subcommand("serve", "annotation and review HTTP API");
    serve->add_option("--host", o.host, "bind address (default 127.0.0.1)");
    serve->add_option("--port", o.port, "port (0 = ephemeral)");
    serve->add_option("--token", o.token, std::string("shared token expected in ") + kTokenHeader);
    serve->add_option("--static", o.static_dir, "directory served at /");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        fmt::print(stderr, "error: invalid_argument: {}\n", msg);
        return 2;
    }

    try {
        if (*ingest) return cmd_ingest(o);
        if (*import) return cmd_annotations_import(o);
        if (*evaluate_cmd) return cmd_evaluate(o);
        if (*metrics) return cmd_metrics(o);
        if (*tree) return cmd_tree(o);
        if (*report) return cmd_report(o);
        if (*serve) return cmd_serve(o);
    } catch (const Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        fmt::print(stderr, "error: {}: {}\n", error_class_name(e.error_class()), msg);
        return 1;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        fmt::print(stderr, "error: internal: {}\n", msg);
        return 1;
    }
    return 0;
}
