#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srpeval/consensus.hpp"
#include "srpeval/corpus.hpp"
#include "srpeval/dtree.hpp"
#include "srpeval/metrics.hpp"

namespace srpeval {

inline constexpr std::size_t kExcerptLimit = 300;

struct ProtocolSummary {
    std::string run_id;
    Protocol protocol = Protocol::Standard;
    std::string model_id;
    std::string prompt_digest;
    int threshold = 0;
    int evaluated = 0;           // samples with a prediction and a consensus label
    int parse_failures = 0;
    int transport_failures = 0;
    MetricsReport metrics;
};

struct ImprovementRow {
    std::string metric;
    Metric standard;
    Metric diagnostic;
    std::optional<double> absolute;  // diagnostic - standard
    std::optional<double> relative;  // (diagnostic - standard) / standard, only when standard > 0
    std::string absolute_text;
    std::string relative_text;
};

struct ComparisonReport {
    ProtocolSummary standard;
    ProtocolSummary diagnostic;
    std::vector<ImprovementRow> improvements;
    int threshold = 0;
    std::optional<McNemarResult> mcnemar;  // standard = A, diagnostic = B, over jointly predicted samples
    std::vector<ReferenceComparison> reference_checks;
    std::vector<std::string> notes;
};

struct ComparisonOptions {
    double standard_reference_tolerance = 5e-3;
    double diagnostic_reference_tolerance = 8e-3;
};

/// Metrics over samples with both a prediction and a consensus label; exclusions go to notes.
ProtocolSummary summarize_run(const EvalRun& run, const GroundTruthTable& truth, std::vector<std::string>& notes);

/// Both runs must cover the same sample set with the same threshold.
ComparisonReport build_comparison(const EvalRun& run_std, const EvalRun& run_diag, const GroundTruthTable& truth,
                                  const ComparisonOptions& options = {});

struct MappedAnswer {
    Driver driver;
    int question = 0;
    std::string answer;  // Yes / No / Not Sure
};

struct FailureCase {
    std::string sample_id;
    std::string query;
    Label human_label = Label::Complex;
    bool unanimity = false;
    int complex_votes = 0;
    int total_votes = 0;
    Label model_label = Label::NotComplex;
    int model_score = 0;
    std::vector<std::pair<Driver, int>> human_drivers;  // cited drivers with counts, catalog order
    std::vector<MappedAnswer> model_answers;            // diagnostic runs only
    std::string explanation_excerpt;
};

/// Disagreements between consensus and model label. Unanimous human-Complex /
/// model-NotComplex cases come first, then descending complex-vote fraction,
/// then sample id.
std::vector<FailureCase> failure_queue(const EvalRun& run, const GroundTruthTable& truth,
                                       const std::vector<Sample>& samples, bool require_unanimity = false);

struct AlignmentRow {
    Driver driver;
    int question = 0;
    int human_count = 0;
    int human_rank = 0;
    double importance = 0.0;
};

std::vector<AlignmentRow> alignment_table(const ImportanceVector& importances, const std::vector<DriverRank>& driver_freq);

/// Truncates to `limit` code points, appending "…" when anything was cut.
std::string excerpt(std::string_view text, std::size_t limit = kExcerptLimit);

struct TreeSummary {
    std::string target;  // "human" or "model"
    std::vector<Rule> rules;
    ImportanceVector importance{};
    std::optional<CvReport> cv;
    std::string cv_error;
};

/// Everything report.md / report.json render.
struct ReportBundle {
    ComparisonReport comparison;
    std::vector<FailureCase> failures;  // diagnostic run
    std::vector<DriverRank> driver_frequency;
    std::optional<TreeSummary> tree;
    std::vector<AlignmentRow> alignment;
};

nlohmann::json to_json(const ComparisonReport& r);
nlohmann::json to_json(const FailureCase& f);
nlohmann::json failures_json(const std::vector<FailureCase>& cases);
nlohmann::json to_json(const ReportBundle& b);

/// `generated_at` lands in the Markdown header only.
std::string render_markdown(const ReportBundle& b, const std::string& generated_at);
std::string render_report_json(const ReportBundle& b);
std::string failures_csv(const std::vector<FailureCase>& cases);
std::string alignment_text(const std::vector<AlignmentRow>& rows);

}  // namespace srpeval
