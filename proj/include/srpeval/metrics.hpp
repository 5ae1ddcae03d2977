#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "srpeval/labels.hpp"

namespace srpeval {

/// Positive class is Complex. Rows are human labels, columns model labels.
struct ConfusionMatrix {
    long tp = 0;
    long fn = 0;
    long fp = 0;
    long tn = 0;

    long total() const { return tp + fn + fp + tn; }
    long human_complex() const { return tp + fn; }
    long human_not_complex() const { return fp + tn; }
    long predicted_complex() const { return tp + fp; }
    long predicted_not_complex() const { return fn + tn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const Label> truth, std::span<const Label> pred);

/// nullopt marks an undefined ratio (zero denominator).
using Metric = std::optional<double>;

struct MetricsReport {
    ConfusionMatrix cm;
    Metric precision;
    Metric recall;
    Metric f1;
    Metric kappa;
    std::vector<std::string> notes;
};

struct MetricsOptions {
    /// Replace undefined ratios with 0 (batch tables only); a note records each fill.
    bool zero_fill_undefined = false;
};

MetricsReport classification_metrics(const ConfusionMatrix& cm, const MetricsOptions& options = {});

enum class McNemarMethod { ExactBinomial, ChiSquareCorrected };

std::string_view to_string(McNemarMethod m);

struct McNemarResult {
    long b = 0;  // A correct, B wrong
    long c = 0;  // A wrong, B correct
    double statistic = 0.0;
    double p_value = 1.0;
    McNemarMethod method = McNemarMethod::ExactBinomial;
};

inline constexpr long kMcNemarExactCutoff = 25;

McNemarResult mcnemar(std::span<const bool> correct_a, std::span<const bool> correct_b);
McNemarResult mcnemar_from_counts(long b, long c);

/// Two-sided exact binomial p-value for min(b, c) successes in b + c fair trials.
double mcnemar_exact_p(long b, long c);

struct SweepRow {
    int threshold = 0;
    long predicted_complex = 0;
    MetricsReport metrics;
};

std::vector<SweepRow> threshold_sweep(std::span<const int> scores, std::span<const Label> truth,
                                      std::span<const int> thresholds = {}, const MetricsOptions& options = {});

/// Reference per-method figures, rounded to three decimals.
struct ReferenceFigures {
    std::string method;
    double precision;
    double recall;
    double f1;
    double kappa;
};

extern const ReferenceFigures kReferenceStandard;
extern const ReferenceFigures kReferenceDiagnostic;
extern const ConfusionMatrix kReferenceStandardCm;
extern const ConfusionMatrix kReferenceDiagnosticCm;

struct ReferenceDelta {
    std::string metric;
    Metric computed;
    double reference = 0.0;
    double delta = 0.0;  // computed - reference; 0 when computed is undefined
    bool within_tolerance = false;
    bool beyond_rounding = false;  // |delta| > half a unit in the third decimal
};

struct ReferenceComparison {
    std::string method;
    double tolerance = 0.0;
    std::vector<ReferenceDelta> rows;
    std::vector<std::string> notes;
    bool passed() const;
};

ReferenceComparison compare_to_reference(const MetricsReport& computed, const ReferenceFigures& reference,
                                         double tolerance);

nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const MetricsReport& r);
nlohmann::json to_json(const McNemarResult& r);

/// Fixed four-decimal rendering; "undefined" for missing values.
std::string format_metric(const Metric& m);
/// "+0.1659" style signed delta; "—" when either side is undefined.
std::string format_absolute_delta(const Metric& before, const Metric& after);
/// "+83%" style relative change; "—" unless before > 0.
std::string format_relative_delta(const Metric& before, const Metric& after);

/// Plain-text table with one row per method and, when exactly two methods are
/// given, absolute and relative improvement rows of the second over the first.
std::string format_metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace srpeval
