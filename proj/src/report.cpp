#include "srpeval/report.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "srpeval/csv.hpp"
#include "srpeval/error.hpp"
#include "srpeval/response_parser.hpp"

namespace srpeval {

using nlohmann::json;

namespace {

json metric_json(const Metric& m) { return m ? json(*m) : json(nullptr); }

std::set<std::string> sample_set(const EvalRun& run) {
    std::set<std::string> ids;
    for (const auto& r : run.records) ids.insert(r.sample_id);
    return ids;
}

}  // namespace

ProtocolSummary summarize_run(const EvalRun& run, const GroundTruthTable& truth, std::vector<std::string>& notes) {
    ProtocolSummary s;
    s.run_id = run.run_id;
    s.protocol = run.protocol;
    s.model_id = run.model_id;
    s.prompt_digest = run.prompt_digest;
    s.threshold = run.threshold;
    std::vector<Label> human, model;
    int no_truth = 0;
    for (const auto& r : run.records) {
        if (r.transport_error) ++s.transport_failures;
        else if (r.parse_error) ++s.parse_failures;
        if (!r.prediction) continue;
        const auto* label = truth.find(r.sample_id);
        if (!label) {
            ++no_truth;
            continue;
        }
        human.push_back(label->label);
        model.push_back(r.prediction->label);
    }
    const std::string name(to_string(run.protocol));
    if (human.empty())
        throw Error(ErrorClass::MissingPrerequisite, "run '" + run.run_id + "' has no samples with both a prediction and a consensus label");
    s.evaluated = static_cast<int>(human.size());
    s.metrics = classification_metrics(confusion(human, model));
    if (s.transport_failures)
        notes.push_back(fmt::format("{}: {} sample(s) without a model response excluded", name, s.transport_failures));
    if (s.parse_failures)
        notes.push_back(fmt::format("{}: {} sample(s) with unparseable responses excluded", name, s.parse_failures));
    if (no_truth) notes.push_back(fmt::format("{}: {} sample(s) without a consensus label excluded", name, no_truth));
    return s;
}

ComparisonReport build_comparison(const EvalRun& run_std, const EvalRun& run_diag, const GroundTruthTable& truth,
                                  const ComparisonOptions& options) {
    if (sample_set(run_std) != sample_set(run_diag))
        throw Error(ErrorClass::InvalidArgument, "runs '" + run_std.run_id + "' and '" + run_diag.run_id +
                                                     "' cover different sample sets");
    if (run_std.threshold != run_diag.threshold)
        throw Error(ErrorClass::Validation, fmt::format("runs use different thresholds ({} vs {})", run_std.threshold,
                                                        run_diag.threshold));

    ComparisonReport r;
    r.threshold = run_std.threshold;
    r.standard = summarize_run(run_std, truth, r.notes);
    r.diagnostic = summarize_run(run_diag, truth, r.notes);

    const std::pair<const char*, Metric MetricsReport::*> metrics[] = {
        {"precision", &MetricsReport::precision},
        {"recall", &MetricsReport::recall},
        {"f1", &MetricsReport::f1},
        {"cohen_kappa", &MetricsReport::kappa},
    };
    for (const auto& [name, member] : metrics) {
        ImprovementRow row;
        row.metric = name;
        row.standard = r.standard.metrics.*member;
        row.diagnostic = r.diagnostic.metrics.*member;
        if (row.standard && row.diagnostic) {
            row.absolute = *row.diagnostic - *row.standard;
            if (*row.standard > 0.0) row.relative = *row.absolute / *row.standard;
        }
        row.absolute_text = format_absolute_delta(row.standard, row.diagnostic);
        row.relative_text = format_relative_delta(row.standard, row.diagnostic);
        r.improvements.push_back(std::move(row));
    }

    long b = 0, c = 0;
    bool any = false;
    for (const auto& rec : run_std.records) {
        const auto* other = run_diag.find(rec.sample_id);
        const auto* label = truth.find(rec.sample_id);
        if (!rec.prediction || !other || !other->prediction || !label) continue;
        const bool ok_std = rec.prediction->label == label->label;
        const bool ok_diag = other->prediction->label == label->label;
        any = true;
        if (ok_std && !ok_diag) ++b;
        if (!ok_std && ok_diag) ++c;
    }
    if (any) r.mcnemar = mcnemar_from_counts(b, c);

    r.reference_checks.push_back(
        compare_to_reference(r.standard.metrics, kReferenceStandard, options.standard_reference_tolerance));
    r.reference_checks.push_back(
        compare_to_reference(r.diagnostic.metrics, kReferenceDiagnostic, options.diagnostic_reference_tolerance));
    return r;
}

std::string excerpt(std::string_view text, std::size_t limit) {
    std::size_t cps = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if ((static_cast<unsigned char>(text[i]) & 0xC0) == 0x80) continue;
        if (cps == limit) return std::string(text.substr(0, i)) + "…";
        ++cps;
    }
    return std::string(text);
}

std::vector<FailureCase> failure_queue(const EvalRun& run, const GroundTruthTable& truth,
                                       const std::vector<Sample>& samples, bool require_unanimity) {
    std::map<std::string, const Sample*> by_id;
    for (const auto& s : samples) by_id[s.id] = &s;

    std::vector<FailureCase> out;
    for (const auto& rec : run.records) {
        if (!rec.prediction) continue;
        const auto* label = truth.find(rec.sample_id);
        if (!label || label->label == rec.prediction->label) continue;
        if (require_unanimity && !label->unanimity) continue;

        FailureCase fc;
        fc.sample_id = rec.sample_id;
        if (auto it = by_id.find(rec.sample_id); it != by_id.end()) fc.query = it->second->query;
        fc.human_label = label->label;
        fc.unanimity = label->unanimity;
        fc.complex_votes = label->complex_votes;
        fc.total_votes = label->total_votes;
        fc.model_label = rec.prediction->label;
        fc.model_score = rec.prediction->source_score;
        for (const auto& info : kDriverCatalog)
            if (int n = label->driver_counts[catalog_index(info.driver)]; n > 0) fc.human_drivers.emplace_back(info.driver, n);
        if (rec.parsed) {
            if (run.protocol == Protocol::Diagnostic) {
                const auto d = diagnostic_from_json(*rec.parsed);
                for (const auto& info : kDriverCatalog)
                    fc.model_answers.push_back({info.driver, info.question, std::string(to_string(d.answer(info.question)))});
                fc.explanation_excerpt = excerpt(d.explanation);
            } else {
                fc.explanation_excerpt = excerpt(gestalt_from_json(*rec.parsed).rationale_text);
            }
        }
        out.push_back(std::move(fc));
    }

    auto priority = [](const FailureCase& f) {
        return f.unanimity && f.human_label == Label::Complex && f.model_label == Label::NotComplex ? 0 : 1;
    };
    std::stable_sort(out.begin(), out.end(), [&](const FailureCase& a, const FailureCase& b) {
        if (priority(a) != priority(b)) return priority(a) < priority(b);
        // compare complex_votes/total_votes without division
        const long lhs = static_cast<long>(a.complex_votes) * b.total_votes;
        const long rhs = static_cast<long>(b.complex_votes) * a.total_votes;
        if (lhs != rhs) return lhs > rhs;
        return a.sample_id < b.sample_id;
    });
    return out;
}

std::vector<AlignmentRow> alignment_table(const ImportanceVector& importances, const std::vector<DriverRank>& driver_freq) {
    std::vector<AlignmentRow> rows;
    for (const auto& info : kDriverCatalog) {
        AlignmentRow row;
        row.driver = info.driver;
        row.question = info.question;
        row.importance = importances[static_cast<std::size_t>(info.question - 1)];
        for (const auto& r : driver_freq)
            if (r.driver == info.driver) {
                row.human_count = r.count;
                row.human_rank = r.rank;
            }
        rows.push_back(row);
    }
    return rows;
}

// -- JSON -----------------------------------------------------------------------

namespace {

json summary_json(const ProtocolSummary& s) {
    return {{"run_id", s.run_id},
            {"protocol", std::string(to_string(s.protocol))},
            {"model_id", s.model_id},
            {"prompt_digest", s.prompt_digest},
            {"threshold", s.threshold},
            {"evaluated", s.evaluated},
            {"parse_failures", s.parse_failures},
            {"transport_failures", s.transport_failures},
            {"metrics", to_json(s.metrics)}};
}

json reference_json(const ReferenceComparison& c) {
    json rows = json::array();
    for (const auto& d : c.rows)
        rows.push_back({{"metric", d.metric},
                        {"computed", metric_json(d.computed)},
                        {"reference", d.reference},
                        {"delta", d.delta},
                        {"within_tolerance", d.within_tolerance},
                        {"beyond_rounding", d.beyond_rounding}});
    return {{"method", c.method}, {"tolerance", c.tolerance}, {"passed", c.passed()}, {"rows", rows}, {"notes", c.notes}};
}

}  // namespace

json to_json(const ComparisonReport& r) {
    json improvements = json::array();
    for (const auto& row : r.improvements)
        improvements.push_back({{"metric", row.metric},
                                {"standard", metric_json(row.standard)},
                                {"diagnostic", metric_json(row.diagnostic)},
                                {"absolute", row.absolute ? json(*row.absolute) : json(nullptr)},
                                {"relative", row.relative ? json(*row.relative) : json(nullptr)},
                                {"absolute_text", row.absolute_text},
                                {"relative_text", row.relative_text}});
    json refs = json::array();
    for (const auto& c : r.reference_checks) refs.push_back(reference_json(c));
    return {{"positive_class", "Complex"},
            {"threshold", r.threshold},
            {"standard", summary_json(r.standard)},
            {"diagnostic", summary_json(r.diagnostic)},
            {"improvements", improvements},
            {"mcnemar", r.mcnemar ? to_json(*r.mcnemar) : json(nullptr)},
            {"reference_checks", refs},
            {"notes", r.notes}};
}

json to_json(const FailureCase& f) {
    json drivers = json::array();
    for (const auto& [d, n] : f.human_drivers) drivers.push_back({{"driver", driver_info(d).name}, {"count", n}});
    json answers = json::array();
    for (const auto& a : f.model_answers)
        answers.push_back({{"driver", driver_info(a.driver).name}, {"question", fmt::format("Q{}", a.question)}, {"answer", a.answer}});
    return {{"sample_id", f.sample_id},
            {"query", f.query},
            {"human_label", to_string(f.human_label)},
            {"unanimity", f.unanimity},
            {"complex_votes", f.complex_votes},
            {"total_votes", f.total_votes},
            {"model_label", to_string(f.model_label)},
            {"model_score", f.model_score},
            {"human_drivers", drivers},
            {"model_answers", answers},
            {"explanation_excerpt", f.explanation_excerpt}};
}

json failures_json(const std::vector<FailureCase>& cases) {
    json arr = json::array();
    for (const auto& f : cases) arr.push_back(to_json(f));
    return arr;
}

json to_json(const ReportBundle& b) {
    json freq = json::array();
    for (const auto& r : b.driver_frequency)
        freq.push_back({{"driver", driver_info(r.driver).name},
                        {"question", fmt::format("Q{}", driver_info(r.driver).question)},
                        {"count", r.count},
                        {"rank", r.rank}});
    json alignment = json::array();
    for (const auto& r : b.alignment)
        alignment.push_back({{"driver", driver_info(r.driver).name},
                             {"reason", driver_info(r.driver).reason},
                             {"question", fmt::format("Q{}", r.question)},
                             {"human_count", r.human_count},
                             {"human_rank", r.human_rank},
                             {"importance", r.importance}});
    json tree = nullptr;
    if (b.tree) {
        json rules = json::array();
        for (const auto& rule : b.tree->rules)
            rules.push_back({{"rule", rule.text()},
                             {"predicted", to_string(rule.label)},
                             {"support", rule.support},
                             {"complex", rule.complex_count},
                             {"not_complex", rule.not_complex_count}});
        json imp = json::object();
        for (int q = 1; q <= kFeatureCount; ++q) imp[fmt::format("Q{}", q)] = b.tree->importance[static_cast<std::size_t>(q - 1)];
        tree = {{"target", b.tree->target},
                {"rules", rules},
                {"importance", imp},
                {"cv", b.tree->cv ? to_json(*b.tree->cv) : json(nullptr)},
                {"cv_error", b.tree->cv_error}};
    }
    return {{"comparison", to_json(b.comparison)},
            {"failures", failures_json(b.failures)},
            {"driver_frequency", freq},
            {"tree", tree},
            {"alignment", alignment}};
}

std::string render_report_json(const ReportBundle& b) { return to_json(b).dump(2) + "\n"; }

// -- text -----------------------------------------------------------------------

std::string alignment_text(const std::vector<AlignmentRow>& rows) {
    std::string out = fmt::format("{:<36}  {:<8}  {:>10}  {:>10}  {:>10}\n", "Human Complexity Reason", "Question",
                                  "Citations", "Human Rank", "Importance");
    for (const auto& r : rows)
        out += fmt::format("{:<36}  {:<8}  {:>10}  {:>10}  {:>9.1f}%\n", driver_info(r.driver).reason,
                           fmt::format("Q{}", r.question), r.human_count, r.human_rank, r.importance * 100.0);
    return out;
}

std::string failures_csv(const std::vector<FailureCase>& cases) {
    std::string out = "sample_id,query,human_label,unanimity,complex_votes,total_votes,model_label,model_score,human_drivers,explanation_excerpt\n";
    for (const auto& f : cases) {
        std::string drivers;
        for (const auto& [d, n] : f.human_drivers) {
            if (!drivers.empty()) drivers += ';';
            drivers += fmt::format("{}:{}", driver_info(d).name, n);
        }
        out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", csv_field(f.sample_id), csv_field(f.query),
                           to_string(f.human_label), f.unanimity ? "true" : "false", f.complex_votes, f.total_votes,
                           to_string(f.model_label), f.model_score, csv_field(drivers), csv_field(f.explanation_excerpt));
    }
    return out;
}

namespace {

std::string md_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += "\\|";
        else if (c == '\n' || c == '\r') out += ' ';
        else out += c;
    }
    return out;
}

}  // namespace

std::string render_markdown(const ReportBundle& b, const std::string& generated_at) {
    const auto& c = b.comparison;
    std::string md;
    md += "# Visual complexity alignment report\n\n";
    md += fmt::format("Generated: {}\n\n", generated_at);
    md += fmt::format("Positive class: Complex. Score threshold: scores <= {} are Complex.\n\n", c.threshold);

    md += "## Runs\n\n| Protocol | Run | Model | Prompt digest | Evaluated | Parse failures | Transport failures |\n";
    md += "|---|---|---|---|---|---|---|\n";
    for (const auto* s : {&c.standard, &c.diagnostic})
        md += fmt::format("| {} | {} | {} | `{}` | {} | {} | {} |\n", to_string(s->protocol), s->run_id,
                          md_escape(s->model_id), s->prompt_digest.substr(0, 16), s->evaluated, s->parse_failures,
                          s->transport_failures);

    md += "\n## Confusion matrices\n\nRows are human consensus, columns are model labels.\n\n";
    md += "| Protocol | Human \\ Model | Complex | Not Complex | Total |\n|---|---|---|---|---|\n";
    for (const auto* s : {&c.standard, &c.diagnostic}) {
        const auto& cm = s->metrics.cm;
        md += fmt::format("| {} | Complex | {} | {} | {} |\n", to_string(s->protocol), cm.tp, cm.fn, cm.human_complex());
        md += fmt::format("| | Not Complex | {} | {} | {} |\n", cm.fp, cm.tn, cm.human_not_complex());
        md += fmt::format("| | Total | {} | {} | {} |\n", cm.predicted_complex(), cm.predicted_not_complex(), cm.total());
    }

    md += "\n## Classification performance\n\n| Method | Precision | Recall | F1-Score | Cohen's Kappa |\n";
    md += "|---|---|---|---|---|\n";
    for (const auto& [name, s] : {std::pair{"Standard Prompting", &c.standard}, std::pair{"Diagnostic Prompting", &c.diagnostic}})
        md += fmt::format("| {} | {} | {} | {} | {} |\n", name, format_metric(s->metrics.precision),
                          format_metric(s->metrics.recall), format_metric(s->metrics.f1), format_metric(s->metrics.kappa));
    md += "| **Absolute Improvement**";
    for (const auto& row : c.improvements) md += " | " + row.absolute_text;
    md += " |\n| **Relative Improvement**";
    for (const auto& row : c.improvements) md += " | " + row.relative_text;
    md += " |\n";

    if (c.mcnemar)
        md += fmt::format("\nMcNemar (standard vs diagnostic correctness): b = {}, c = {}, statistic = {:.4f}, p = {:.4f} ({})\n",
                          c.mcnemar->b, c.mcnemar->c, c.mcnemar->statistic, c.mcnemar->p_value, to_string(c.mcnemar->method));

    md += "\n## Reference figures\n\n| Method | Metric | Computed | Reference | Delta | Within tolerance |\n|---|---|---|---|---|---|\n";
    for (const auto& ref : c.reference_checks)
        for (const auto& d : ref.rows)
            md += fmt::format("| {} | {} | {} | {:.3f} | {:+.4f} | {} (±{}) |\n", ref.method, d.metric, format_metric(d.computed),
                              d.reference, d.delta, d.within_tolerance ? "yes" : "no", ref.tolerance);
    std::vector<std::string> notes = c.notes;
    for (const auto& ref : c.reference_checks) notes.insert(notes.end(), ref.notes.begin(), ref.notes.end());
    if (!notes.empty()) {
        md += "\n### Notes\n\n";
        for (const auto& n : notes) md += "- " + md_escape(n) + "\n";
    }

    if (b.tree) {
        md += fmt::format("\n## Decision tree rules (target: {} labels)\n\n| Path | Decision Rule | Predicted Class | Support |\n|---|---|---|---|\n",
                          b.tree->target);
        for (std::size_t i = 0; i < b.tree->rules.size(); ++i) {
            const auto& r = b.tree->rules[i];
            md += fmt::format("| {} | {} | {} | {} |\n", i + 1, r.text(), r.label == Label::Complex ? "Complex" : "Not Complex",
                              r.support);
        }
        if (b.tree->cv) {
            md += fmt::format("\n{}-fold stratified cross-validation (seed {}):\n\n| Metric | Mean | Std | Folds defined |\n|---|---|---|---|\n",
                              b.tree->cv->k, b.tree->cv->seed);
            for (const auto& s : b.tree->cv->summary)
                md += fmt::format("| {} | {:.4f} | {:.4f} | {} |\n", s.metric, s.mean, s.stddev, s.defined_folds);
        } else if (!b.tree->cv_error.empty()) {
            md += "\nCross-validation skipped: " + md_escape(b.tree->cv_error) + "\n";
        }
    }

    md += "\n## Human complexity drivers and diagnostic questions\n\n| Human Complexity Reason | Question | Citations | Human Rank | Importance |\n|---|---|---|---|---|\n";
    for (const auto& r : b.alignment)
        md += fmt::format("| {} | Q{} | {} | {} | {:.1f}% |\n", driver_info(r.driver).reason, r.question, r.human_count,
                          r.human_rank, r.importance * 100.0);

    md += fmt::format("\n## Failure queue ({} case(s))\n\n", b.failures.size());
    if (!b.failures.empty()) {
        md += "| # | Sample | Query | Human | Votes | Model | Score | Human drivers | Explanation |\n|---|---|---|---|---|---|---|---|---|\n";
        for (std::size_t i = 0; i < b.failures.size(); ++i) {
            const auto& f = b.failures[i];
            std::string drivers;
            for (const auto& [d, n] : f.human_drivers) {
                if (!drivers.empty()) drivers += ", ";
                drivers += fmt::format("{} ({})", driver_info(d).name, n);
            }
            md += fmt::format("| {} | {} | {} | {}{} | {}/{} | {} | {} | {} | {} |\n", i + 1, md_escape(f.sample_id),
                              md_escape(f.query), to_string(f.human_label), f.unanimity ? " (unanimous)" : "",
                              f.complex_votes, f.total_votes, to_string(f.model_label), f.model_score, drivers,
                              md_escape(f.explanation_excerpt));
        }
    }
    return md;
}

}  // namespace srpeval
