#include "srpeval/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "srpeval/error.hpp"

namespace srpeval {

using nlohmann::json;

const ReferenceFigures kReferenceStandard{"Standard Prompting", 0.200, 0.017, 0.031, -0.016};
const ReferenceFigures kReferenceDiagnostic{"Diagnostic Prompting", 0.366, 0.250, 0.297, 0.071};
const ConfusionMatrix kReferenceStandardCm{1, 58, 4, 137};
const ConfusionMatrix kReferenceDiagnosticCm{15, 44, 26, 115};

ConfusionMatrix confusion(std::span<const Label> truth, std::span<const Label> pred) {
    if (truth.size() != pred.size())
        throw Error(ErrorClass::InvalidArgument, fmt::format("confusion: {} truth labels vs {} predictions",
                                                             truth.size(), pred.size()));
    if (truth.empty()) throw Error(ErrorClass::InvalidArgument, "confusion: empty input");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool human = truth[i] == Label::Complex;
        const bool model = pred[i] == Label::Complex;
        if (human && model) ++cm.tp;
        else if (human) ++cm.fn;
        else if (model) ++cm.fp;
        else ++cm.tn;
    }
    return cm;
}

MetricsReport classification_metrics(const ConfusionMatrix& cm, const MetricsOptions& options) {
    if (cm.tp < 0 || cm.fn < 0 || cm.fp < 0 || cm.tn < 0)
        throw Error(ErrorClass::InvalidArgument, "confusion counts must be non-negative");
    if (cm.total() == 0) throw Error(ErrorClass::InvalidArgument, "classification_metrics: empty confusion matrix");

    MetricsReport r;
    r.cm = cm;
    const double tp = static_cast<double>(cm.tp);
    const double n = static_cast<double>(cm.total());

    if (cm.predicted_complex() > 0) r.precision = tp / static_cast<double>(cm.predicted_complex());
    else r.notes.emplace_back("precision undefined: model predicted no Complex samples");
    if (cm.human_complex() > 0) r.recall = tp / static_cast<double>(cm.human_complex());
    else r.notes.emplace_back("recall undefined: no Complex samples in ground truth");

    if (r.precision && r.recall) {
        const double sum = *r.precision + *r.recall;
        r.f1 = sum > 0.0 ? 2.0 * *r.precision * *r.recall / sum : 0.0;
    } else {
        r.notes.emplace_back("f1 undefined: precision or recall undefined");
    }

    const double p_o = static_cast<double>(cm.tp + cm.tn) / n;
    const double p_e = (static_cast<double>(cm.human_complex()) * static_cast<double>(cm.predicted_complex()) +
                        static_cast<double>(cm.human_not_complex()) * static_cast<double>(cm.predicted_not_complex())) /
                       (n * n);
    if (p_e < 1.0) r.kappa = (p_o - p_e) / (1.0 - p_e);
    else r.notes.emplace_back("kappa undefined: chance agreement is 1");

    if (options.zero_fill_undefined) {
        const std::pair<const char*, Metric*> slots[] = {
            {"precision", &r.precision}, {"recall", &r.recall}, {"f1", &r.f1}, {"kappa", &r.kappa}};
        for (auto [name, m] : slots) {
            if (!*m) {
                *m = 0.0;
                r.notes.push_back(fmt::format("{} zero-filled", name));
            }
        }
    }
    return r;
}

std::string_view to_string(McNemarMethod m) {
    return m == McNemarMethod::ExactBinomial ? "exact_binomial" : "chi_square_corrected";
}

double mcnemar_exact_p(long b, long c) {
    if (b < 0 || c < 0) throw Error(ErrorClass::InvalidArgument, "mcnemar: negative counts");
    const long n = b + c;
    if (n == 0) return 1.0;
    const long k = std::min(b, c);
    // pmf(0) = 2^-n, pmf(i+1) = pmf(i) * (n-i) / (i+1)
    double pmf = std::ldexp(1.0, static_cast<int>(-n));
    double tail = 0.0;
    for (long i = 0; i <= k; ++i) {
        tail += pmf;
        pmf = pmf * static_cast<double>(n - i) / static_cast<double>(i + 1);
    }
    return std::min(1.0, 2.0 * tail);
}

McNemarResult mcnemar_from_counts(long b, long c) {
    if (b < 0 || c < 0) throw Error(ErrorClass::InvalidArgument, "mcnemar: negative counts");
    McNemarResult r;
    r.b = b;
    r.c = c;
    const long n = b + c;
    if (n < kMcNemarExactCutoff) {
        r.method = McNemarMethod::ExactBinomial;
        r.statistic = static_cast<double>(std::min(b, c));
        r.p_value = mcnemar_exact_p(b, c);
        if (n == 0) r.statistic = 0.0;
        return r;
    }
    r.method = McNemarMethod::ChiSquareCorrected;
    const double diff = std::max(0.0, std::fabs(static_cast<double>(b - c)) - 1.0);
    r.statistic = diff * diff / static_cast<double>(n);
    // chi-square survival with one degree of freedom
    r.p_value = std::erfc(std::sqrt(r.statistic / 2.0));
    return r;
}

McNemarResult mcnemar(std::span<const bool> correct_a, std::span<const bool> correct_b) {
    if (correct_a.size() != correct_b.size())
        throw Error(ErrorClass::InvalidArgument, "mcnemar: outcome vectors differ in length");
    long b = 0, c = 0;
    for (std::size_t i = 0; i < correct_a.size(); ++i) {
        if (correct_a[i] && !correct_b[i]) ++b;
        if (!correct_a[i] && correct_b[i]) ++c;
    }
    return mcnemar_from_counts(b, c);
}

std::vector<SweepRow> threshold_sweep(std::span<const int> scores, std::span<const Label> truth,
                                      std::span<const int> thresholds, const MetricsOptions& options) {
    static constexpr int kAll[] = {1, 2, 3, 4};
    if (thresholds.empty()) thresholds = kAll;
    for (int s : scores)
        if (s < 1 || s > 5) throw Error(ErrorClass::InvalidArgument, fmt::format("sweep: score {} outside 1-5", s));
    std::vector<SweepRow> rows;
    for (int t : thresholds) {
        if (t < 1 || t > 4) throw Error(ErrorClass::InvalidArgument, fmt::format("sweep: threshold {} outside 1-4", t));
        std::vector<Label> pred;
        pred.reserve(scores.size());
        for (int s : scores) pred.push_back(s <= t ? Label::Complex : Label::NotComplex);
        SweepRow row;
        row.threshold = t;
        row.metrics = classification_metrics(confusion(truth, pred), options);
        row.predicted_complex = row.metrics.cm.predicted_complex();
        rows.push_back(std::move(row));
    }
    return rows;
}

bool ReferenceComparison::passed() const {
    return std::all_of(rows.begin(), rows.end(), [](const ReferenceDelta& d) { return d.within_tolerance; });
}

ReferenceComparison compare_to_reference(const MetricsReport& computed, const ReferenceFigures& reference,
                                         double tolerance) {
    ReferenceComparison out;
    out.method = reference.method;
    out.tolerance = tolerance;
    const std::pair<const char*, std::pair<Metric, double>> items[] = {
        {"precision", {computed.precision, reference.precision}},
        {"recall", {computed.recall, reference.recall}},
        {"f1", {computed.f1, reference.f1}},
        {"kappa", {computed.kappa, reference.kappa}},
    };
    for (const auto& [name, pair] : items) {
        ReferenceDelta d;
        d.metric = name;
        d.computed = pair.first;
        d.reference = pair.second;
        if (d.computed) {
            d.delta = *d.computed - d.reference;
            d.within_tolerance = std::fabs(d.delta) <= tolerance;
            d.beyond_rounding = std::fabs(d.delta) > 0.0005 + 1e-12;
        }
        if (!d.computed)
            out.notes.push_back(fmt::format("{} {}: undefined, reference {:.3f}", reference.method, name, d.reference));
        else if (!d.within_tolerance)
            out.notes.push_back(fmt::format("{} {}: computed {:.4f} vs reference {:.3f} (delta {:+.4f}) is outside ±{}",
                                            reference.method, name, *d.computed, d.reference, d.delta, tolerance));
        else if (d.beyond_rounding)
            out.notes.push_back(fmt::format(
                "{} {}: computed {:.4f} from the confusion matrix vs reference {:.3f} (delta {:+.4f}); "
                "the difference exceeds three-decimal rounding, the confusion matrix is treated as canonical",
                reference.method, name, *d.computed, d.reference, d.delta));
        out.rows.push_back(std::move(d));
    }
    return out;
}

namespace {

json metric_json(const Metric& m) { return m ? json(*m) : json(nullptr); }

}  // namespace

json to_json(const ConfusionMatrix& cm) {
    return {{"tp", cm.tp}, {"fn", cm.fn}, {"fp", cm.fp}, {"tn", cm.tn}, {"total", cm.total()}};
}

json to_json(const MetricsReport& r) {
    return {{"positive_class", "Complex"},
            {"confusion", to_json(r.cm)},
            {"precision", metric_json(r.precision)},
            {"recall", metric_json(r.recall)},
            {"f1", metric_json(r.f1)},
            {"cohen_kappa", metric_json(r.kappa)},
            {"support", {{"complex", r.cm.human_complex()}, {"not_complex", r.cm.human_not_complex()}}},
            {"notes", r.notes}};
}

json to_json(const McNemarResult& r) {
    return {{"b", r.b},
            {"c", r.c},
            {"statistic", r.statistic},
            {"p_value", r.p_value},
            {"method", std::string(to_string(r.method))}};
}

std::string format_metric(const Metric& m) { return m ? fmt::format("{:.4f}", *m) : "undefined"; }

std::string format_absolute_delta(const Metric& before, const Metric& after) {
    if (!before || !after) return "—";
    return fmt::format("{:+.4f}", *after - *before);
}

std::string format_relative_delta(const Metric& before, const Metric& after) {
    if (!before || !after || !(*before > 0.0)) return "—";
    const long pct = std::lround((*after - *before) / *before * 100.0);
    std::string digits = std::to_string(std::labs(pct));
    for (int i = static_cast<int>(digits.size()) - 3; i > 0; i -= 3) digits.insert(static_cast<std::size_t>(i), ",");
    if (pct > 0) return "+" + digits + "%";
    if (pct < 0) return "-" + digits + "%";
    return "0%";
}

std::string format_metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    std::size_t width = 22;
    for (const auto& [name, _] : rows) width = std::max(width, name.size());
    std::string out = fmt::format("{:<{}}  {:>10}  {:>10}  {:>10}  {:>13}\n", "Method", width, "Precision",
                                  "Recall", "F1-Score", "Cohen's Kappa");
    out += std::string(width + 2 + 10 + 2 + 10 + 2 + 10 + 2 + 13, '-') + "\n";
    for (const auto& [name, r] : rows)
        out += fmt::format("{:<{}}  {:>10}  {:>10}  {:>10}  {:>13}\n", name, width, format_metric(r.precision),
                           format_metric(r.recall), format_metric(r.f1), format_metric(r.kappa));
    if (rows.size() == 2) {
        const auto& a = rows[0].second;
        const auto& b = rows[1].second;
        out += std::string(width + 2 + 10 + 2 + 10 + 2 + 10 + 2 + 13, '-') + "\n";
        out += fmt::format("{:<{}}  {:>10}  {:>10}  {:>10}  {:>13}\n", "Absolute Improvement", width,
                           format_absolute_delta(a.precision, b.precision), format_absolute_delta(a.recall, b.recall),
                           format_absolute_delta(a.f1, b.f1), format_absolute_delta(a.kappa, b.kappa));
        out += fmt::format("{:<{}}  {:>10}  {:>10}  {:>10}  {:>13}\n", "Relative Improvement", width,
                           format_relative_delta(a.precision, b.precision), format_relative_delta(a.recall, b.recall),
                           format_relative_delta(a.f1, b.f1), format_relative_delta(a.kappa, b.kappa));
    }
    return out;
}

}  // namespace srpeval
