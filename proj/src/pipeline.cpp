#include "srpeval/pipeline.hpp"

#include <set>

#include <fmt/format.h>

#include "srpeval/digest.hpp"
#include "srpeval/error.hpp"
#include "srpeval/response_parser.hpp"

namespace srpeval {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<TreeTarget> parse_tree_target(std::string_view s) {
    if (s == "human") return TreeTarget::Human;
    if (s == "model") return TreeTarget::Model;
    return std::nullopt;
}

std::string_view to_string(TreeTarget t) { return t == TreeTarget::Human ? "human" : "model"; }

// -- configuration --------------------------------------------------------------

void HarnessConfig::validate() const {
    endpoint.validate();
    if (threshold < 1 || threshold > 4) throw Error(ErrorClass::Config, "threshold must be within 1-4");
    if (sampling.max_output_tokens < 1) throw Error(ErrorClass::Config, "max_output_tokens must be positive");
    if (!(sampling.temperature >= 0.0)) throw Error(ErrorClass::Config, "temperature must be non-negative");
    if (tree.params.max_depth < 0 || tree.params.min_samples_leaf < 1)
        throw Error(ErrorClass::Config, "tree: max_depth >= 0 and min_samples_leaf >= 1 required");
    if (tree.cv_folds < 2) throw Error(ErrorClass::Config, "tree: cv_folds must be at least 2");
    if (!(tree.encoding.not_sure >= 0.0 && tree.encoding.not_sure <= 1.0))
        throw Error(ErrorClass::Config, "tree: not_sure encoding must lie in [0, 1]");
    if (!(ground_truth.policy.quorum > 0.0 && ground_truth.policy.quorum <= 1.0))
        throw Error(ErrorClass::Config, "consensus: quorum must lie in (0, 1]");
    if (session_mode == SessionMode::Replay) {
        if (session_path.empty()) throw Error(ErrorClass::Config, "replay mode requires a session path");
        if (!fs::is_regular_file(session_path))
            throw Error(ErrorClass::Config, "replay session does not exist: " + session_path.string());
    }
    if (session_mode == SessionMode::Record && session_path.empty())
        throw Error(ErrorClass::Config, "record mode requires a session path");
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& context) {
    if (!j.is_object()) throw Error(ErrorClass::Config, context + " must be an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw Error(ErrorClass::Config, "unknown config key '" + context + "." + key + "'");
    }
}

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace

void apply_config_json(HarnessConfig& cfg, const json& j) {
    try {
        check_keys(j, {"corpus_root", "resource_dir", "endpoint", "sampling", "threshold", "stitch_diagnostic", "tree",
                       "consensus", "reference_tolerance", "session"},
                   "config");
        if (j.contains("corpus_root")) cfg.corpus_root = j["corpus_root"].get<std::string>();
        if (j.contains("resource_dir")) cfg.resource_dir = j["resource_dir"].get<std::string>();
        take(j, "threshold", cfg.threshold);
        take(j, "stitch_diagnostic", cfg.render.stitch_diagnostic);
        if (auto it = j.find("endpoint"); it != j.end()) {
            const auto& e = *it;
            check_keys(e, {"base_url", "path", "model_id", "wire", "auth_env", "timeout_seconds", "max_retries",
                           "max_concurrent", "backoff", "jitter_seed"},
                       "endpoint");
            take(e, "base_url", cfg.endpoint.base_url);
            take(e, "path", cfg.endpoint.path);
            take(e, "model_id", cfg.endpoint.model_id);
            take(e, "auth_env", cfg.endpoint.auth_env);
            take(e, "timeout_seconds", cfg.endpoint.timeout_seconds);
            take(e, "max_retries", cfg.endpoint.max_retries);
            take(e, "max_concurrent", cfg.endpoint.max_concurrent);
            take(e, "jitter_seed", cfg.endpoint.jitter_seed);
            if (e.contains("wire")) {
                auto w = parse_wire_format(e["wire"].get<std::string>());
                if (!w) throw Error(ErrorClass::Config, "endpoint.wire must be chat_completions or anthropic_messages");
                cfg.endpoint.wire = *w;
            }
            if (auto b = e.find("backoff"); b != e.end()) {
                check_keys(*b, {"initial_ms", "factor", "cap_ms"}, "endpoint.backoff");
                take(*b, "initial_ms", cfg.endpoint.backoff.initial_ms);
                take(*b, "factor", cfg.endpoint.backoff.factor);
                take(*b, "cap_ms", cfg.endpoint.backoff.cap_ms);
            }
        }
        if (auto it = j.find("sampling"); it != j.end()) {
            check_keys(*it, {"temperature", "max_output_tokens", "seed"}, "sampling");
            take(*it, "temperature", cfg.sampling.temperature);
            take(*it, "max_output_tokens", cfg.sampling.max_output_tokens);
            if (it->contains("seed"))
                cfg.sampling.seed = (*it)["seed"].is_null() ? std::nullopt
                                                           : std::optional<std::uint64_t>((*it)["seed"].get<std::uint64_t>());
        }
        if (auto it = j.find("tree"); it != j.end()) {
            check_keys(*it, {"max_depth", "min_samples_leaf", "seed", "target", "not_sure", "cv_folds"}, "tree");
            take(*it, "max_depth", cfg.tree.params.max_depth);
            take(*it, "min_samples_leaf", cfg.tree.params.min_samples_leaf);
            take(*it, "seed", cfg.tree.params.seed);
            take(*it, "not_sure", cfg.tree.encoding.not_sure);
            take(*it, "cv_folds", cfg.tree.cv_folds);
            if (it->contains("target")) {
                auto t = parse_tree_target((*it)["target"].get<std::string>());
                if (!t) throw Error(ErrorClass::Config, "tree.target must be human or model");
                cfg.tree.target = *t;
            }
        }
        if (auto it = j.find("consensus"); it != j.end()) {
            check_keys(*it, {"quorum", "skip_unannotated"}, "consensus");
            take(*it, "quorum", cfg.ground_truth.policy.quorum);
            take(*it, "skip_unannotated", cfg.ground_truth.skip_unannotated);
        }
        if (auto it = j.find("reference_tolerance"); it != j.end()) {
            check_keys(*it, {"standard", "diagnostic"}, "reference_tolerance");
            take(*it, "standard", cfg.comparison.standard_reference_tolerance);
            take(*it, "diagnostic", cfg.comparison.diagnostic_reference_tolerance);
        }
        if (auto it = j.find("session"); it != j.end()) {
            check_keys(*it, {"mode", "path"}, "session");
            if (it->contains("mode")) {
                auto m = parse_session_mode((*it)["mode"].get<std::string>());
                if (!m) throw Error(ErrorClass::Config, "session.mode must be live, record or replay");
                cfg.session_mode = *m;
            }
            if (it->contains("path")) cfg.session_path = (*it)["path"].get<std::string>();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorClass::Config, std::string("config has a value of the wrong type: ") + e.what());
    }
}

HarnessConfig load_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file_text(path));
    } catch (const json::exception& e) {
        throw Error(ErrorClass::Config, "config " + path.string() + " is not valid JSON: " + e.what());
    } catch (const Error& e) {
        throw Error(ErrorClass::Config, e.what());
    }
    HarnessConfig cfg;
    apply_config_json(cfg, j);
    // relative paths are relative to the config file
    const fs::path base = path.parent_path();
    auto anchor = [&](fs::path& p) {
        if (!p.empty() && p.is_relative()) p = base / p;
    };
    if (j.contains("corpus_root")) anchor(cfg.corpus_root);
    if (j.contains("resource_dir")) anchor(cfg.resource_dir);
    anchor(cfg.session_path);
    return cfg;
}

json config_snapshot(const HarnessConfig& cfg) {
    return {{"endpoint",
             {{"base_url", cfg.endpoint.base_url},
              {"path", cfg.endpoint.effective_path()},
              {"model_id", cfg.endpoint.model_id},
              {"wire", std::string(to_string(cfg.endpoint.wire))},
              {"timeout_seconds", cfg.endpoint.timeout_seconds},
              {"max_retries", cfg.endpoint.max_retries},
              {"max_concurrent", cfg.endpoint.max_concurrent}}},
            {"sampling",
             {{"temperature", cfg.sampling.temperature},
              {"max_output_tokens", cfg.sampling.max_output_tokens},
              {"seed", cfg.sampling.seed ? json(*cfg.sampling.seed) : json(nullptr)}}},
            {"threshold", cfg.threshold},
            {"stitch_diagnostic", cfg.render.stitch_diagnostic},
            {"session_mode", cfg.session_mode == SessionMode::Live     ? "live"
                             : cfg.session_mode == SessionMode::Record ? "record"
                                                                       : "replay"}};
}

// -- evaluation -----------------------------------------------------------------

void interpret_response(RunRecord& record, Protocol protocol, int threshold) {
    record.parsed.reset();
    record.parse_error.reset();
    record.prediction.reset();
    record.repair_applied = false;
    try {
        int score = 0;
        if (protocol == Protocol::Diagnostic) {
            auto parsed = parse_diagnostic(record.raw_text);
            record.repair_applied = parsed.repair_applied;
            record.parsed = to_json(parsed.response);
            score = parsed.response.complexity_score;
        } else {
            auto parsed = parse_gestalt(record.raw_text);
            record.parsed = to_json(parsed);
            score = parsed.final_score;
        }
        record.prediction = to_binary(score, threshold);
    } catch (const ParseError& e) {
        record.parse_error = ParseFailure{std::string(to_string(e.kind())), e.what()};
    }
}

EvalRun evaluate(const Corpus& corpus, const PromptRegistry& prompts, ModelClient& client, Protocol protocol,
                 const HarnessConfig& cfg) {
    const auto samples = corpus.samples();
    if (samples.empty()) throw Error(ErrorClass::MissingPrerequisite, "corpus has no samples; run ingest first");
    const auto& prompt = prompts.get(protocol);

    std::vector<RenderedRequest> requests;
    requests.reserve(samples.size());
    for (const auto& s : samples) requests.push_back(render(s, prompt, cfg.sampling, corpus.root(), cfg.render));

    EvalRun run;
    run.protocol = protocol;
    run.model_id = cfg.endpoint.model_id;
    run.temperature = cfg.sampling.temperature;
    run.seed = cfg.sampling.seed;
    run.threshold = cfg.threshold;
    run.prompt_digest = prompt_digest(prompt);
    run.created_at = utc_now_iso8601();
    run.config = config_snapshot(cfg);

    auto outcomes = client.complete_all(requests);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        RunRecord rec;
        rec.sample_id = samples[i].id;
        rec.request_digest = request_digest(requests[i]);
        if (const auto* err = std::get_if<ClientError>(&outcomes[i])) {
            if (err->error_class() == ErrorClass::ReplayMiss || err->error_class() == ErrorClass::AuthFailure)
                throw Error(err->error_class(), "sample '" + rec.sample_id + "': " + err->what());
            rec.transport_error = fmt::format("{}: {}", error_class_name(err->error_class()), err->what());
            rec.attempt_count = err->attempt_count();
        } else {
            const auto& resp = std::get<ModelResponse>(outcomes[i]);
            rec.raw_text = resp.raw_text;
            rec.latency_ms = resp.latency_ms;
            rec.attempt_count = resp.attempt_count;
            interpret_response(rec, protocol, cfg.threshold);
        }
        run.records.push_back(std::move(rec));
    }
    return run;
}

// -- trees ------------------------------------------------------------------------

TreeDataset build_tree_dataset(const EvalRun& run, const GroundTruthTable& truth, TreeTarget target,
                               const FeatureEncoding& encoding) {
    if (run.protocol != Protocol::Diagnostic)
        throw Error(ErrorClass::InvalidArgument, "decision trees need a diagnostic run; '" + run.run_id + "' is standard");
    TreeDataset data;
    for (const auto& rec : run.records) {
        if (!rec.parsed || !rec.prediction) continue;
        std::optional<Label> y;
        if (target == TreeTarget::Model) {
            y = rec.prediction->label;
        } else if (const auto* label = truth.find(rec.sample_id)) {
            y = label->label;
        }
        if (!y) continue;
        data.sample_ids.push_back(rec.sample_id);
        data.features.push_back(encode(diagnostic_from_json(*rec.parsed), encoding));
        data.targets.push_back(*y);
    }
    return data;
}

TreeAnalysis analyze_tree(const TreeDataset& data, const TreeConfig& cfg) {
    if (data.features.empty()) throw Error(ErrorClass::MissingPrerequisite, "no parsed diagnostic samples to train on");
    TreeAnalysis out;
    out.tree = train(data.features, data.targets, cfg.params);
    out.summary.target = std::string(to_string(cfg.target));
    out.summary.rules = extract_rules(out.tree);
    out.summary.importance = importance(out.tree);
    try {
        out.summary.cv = stratified_cv(data.features, data.targets, cfg.cv_folds, cfg.params, cfg.params.seed);
    } catch (const Error& e) {
        out.summary.cv_error = e.what();
    }
    return out;
}

void write_tree_artifacts(const TreeAnalysis& analysis, const fs::path& dir) {
    write_file_atomic(dir / "tree.json", to_json(analysis.tree).dump(2) + "\n");
    write_file_atomic(dir / "rules.txt", format_rules_table(analysis.summary.rules));
    write_file_atomic(dir / "importance.csv", importance_csv(analysis.summary.importance));
    const json cv = analysis.summary.cv ? to_json(*analysis.summary.cv) : json{{"error", analysis.summary.cv_error}};
    write_file_atomic(dir / "cv.json", cv.dump(2) + "\n");
}

// -- reports ----------------------------------------------------------------------

ReportBundle build_report(const Corpus& corpus, const EvalRun& run_std, const EvalRun& run_diag,
                          const HarnessConfig& cfg) {
    if (run_std.protocol != Protocol::Standard || run_diag.protocol != Protocol::Diagnostic)
        throw Error(ErrorClass::InvalidArgument, "report needs a standard run followed by a diagnostic run");
    const auto truth = corpus.ground_truth(cfg.ground_truth);
    ReportBundle bundle;
    bundle.comparison = build_comparison(run_std, run_diag, truth, cfg.comparison);
    for (const auto& w : truth.warnings) bundle.comparison.notes.push_back(w);
    bundle.failures = failure_queue(run_diag, truth, corpus.samples());
    const auto labels = truth.values();
    bundle.driver_frequency = driver_frequency(labels);

    ImportanceVector imp{};
    const auto data = build_tree_dataset(run_diag, truth, cfg.tree.target, cfg.tree.encoding);
    if (!data.features.empty()) {
        auto analysis = analyze_tree(data, cfg.tree);
        imp = analysis.summary.importance;
        bundle.tree = std::move(analysis.summary);
    } else {
        bundle.comparison.notes.emplace_back("no parsed diagnostic samples; decision tree skipped");
    }
    bundle.alignment = alignment_table(imp, bundle.driver_frequency);
    return bundle;
}

void write_report(const ReportBundle& bundle, const fs::path& dir, const std::string& generated_at) {
    write_file_atomic(dir / "report.json", render_report_json(bundle));
    write_file_atomic(dir / "report.md", render_markdown(bundle, generated_at));
    write_file_atomic(dir / "failures.csv", failures_csv(bundle.failures));
}

fs::path report_dir(const Corpus& corpus, const std::string& std_run, const std::string& diag_run) {
    return corpus.root() / "reports" / (std_run + "__" + diag_run);
}

fs::path tree_dir(const Corpus& corpus, const std::string& run_id, TreeTarget target) {
    return corpus.root() / "trees" / (run_id + "__" + std::string(to_string(target)));
}

}  // namespace srpeval
