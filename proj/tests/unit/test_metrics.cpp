#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "srpeval/error.hpp"
#include "srpeval/metrics.hpp"

using namespace srpeval;

namespace {

void check_against_oracle(const ConfusionMatrix& cm, double tol = 1e-12) {
    const auto got = classification_metrics(cm);
    const auto want = oracle::metrics({double(cm.tp), double(cm.fn), double(cm.fp), double(cm.tn)});
    auto same = [&](const Metric& a, const std::optional<double>& b) {
        REQUIRE(a.has_value() == b.has_value());
        if (a) CHECK(*a == doctest::Approx(*b).epsilon(tol));
    };
    same(got.precision, want.precision);
    same(got.recall, want.recall);
    same(got.f1, want.f1);
    same(got.kappa, want.kappa);
}

}  // namespace

TEST_CASE("reference confusion matrices reproduce the reference metrics") {
    const auto s = classification_metrics(kReferenceStandardCm);
    CHECK(*s.precision == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(*s.recall == doctest::Approx(1.0 / 59));
    CHECK(*s.f1 == doctest::Approx(2.0 / 64));
    // p_o = 138/200, p_e = (59*5 + 141*195)/200^2
    CHECK(*s.kappa == doctest::Approx((138.0 / 200 - 27790.0 / 40000) / (1 - 27790.0 / 40000)));
    CHECK(*s.kappa == doctest::Approx(-0.0156).epsilon(1e-3));

    const auto d = classification_metrics(kReferenceDiagnosticCm);
    CHECK(*d.precision == doctest::Approx(15.0 / 41));
    CHECK(*d.recall == doctest::Approx(15.0 / 59));
    CHECK(*d.f1 == doctest::Approx(0.3));
    CHECK(*d.kappa == doctest::Approx(0.07664).epsilon(1e-3));

    check_against_oracle(kReferenceStandardCm);
    check_against_oracle(kReferenceDiagnosticCm);
}

TEST_CASE("reference comparison passes at the stated tolerances and notes rounding gaps") {
    const auto s = compare_to_reference(classification_metrics(kReferenceStandardCm), kReferenceStandard, 5e-3);
    CHECK(s.passed());
    const auto d = compare_to_reference(classification_metrics(kReferenceDiagnosticCm), kReferenceDiagnostic, 8e-3);
    CHECK(d.passed());
    CHECK_FALSE(d.notes.empty());  // recall 0.2542 vs 0.250
    const auto tight = compare_to_reference(classification_metrics(kReferenceDiagnosticCm), kReferenceDiagnostic, 1e-3);
    CHECK_FALSE(tight.passed());
}

TEST_CASE("metrics agree with the closed-form oracle on random matrices") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
        ConfusionMatrix cm{long(rng() % 30), long(rng() % 30), long(rng() % 30), long(rng() % 30)};
        if (cm.total() == 0) continue;
        check_against_oracle(cm);
    }
}

TEST_CASE("undefined ratios are reported, not zeroed") {
    const auto r = classification_metrics({0, 5, 0, 5});
    CHECK_FALSE(r.precision.has_value());
    CHECK(*r.recall == 0.0);
    CHECK_FALSE(r.f1.has_value());
    CHECK(*r.kappa == doctest::Approx(0.0));

    const auto all_one_class = classification_metrics({0, 0, 0, 10});
    CHECK_FALSE(all_one_class.recall.has_value());
    CHECK_FALSE(all_one_class.kappa.has_value());  // p_e = 1

    const auto filled = classification_metrics({0, 5, 0, 5}, {.zero_fill_undefined = true});
    CHECK(*filled.precision == 0.0);
    CHECK_FALSE(filled.notes.empty());

    CHECK(*classification_metrics({0, 3, 4, 5}).f1 == 0.0);
}

TEST_CASE("kappa matches agreement simulated from the marginals") {
    // Independent raters with the matrix's marginals agree at p_e on average.
    const ConfusionMatrix cm = kReferenceDiagnosticCm;
    const double n = double(cm.total());
    const double ph = cm.human_complex() / n, pm = cm.predicted_complex() / n;
    std::mt19937_64 rng(3);
    std::bernoulli_distribution h(ph), m(pm);
    long agree = 0;
    const long trials = 400000;
    for (long i = 0; i < trials; ++i) agree += h(rng) == m(rng);
    const double pe_mc = double(agree) / trials;
    const double po = (cm.tp + cm.tn) / n;
    CHECK(*classification_metrics(cm).kappa == doctest::Approx((po - pe_mc) / (1 - pe_mc)).epsilon(5e-2));
}

TEST_CASE("confusion counts align truth and predictions") {
    const std::vector<Label> t{Label::Complex, Label::Complex, Label::NotComplex, Label::NotComplex};
    const std::vector<Label> p{Label::Complex, Label::NotComplex, Label::Complex, Label::NotComplex};
    CHECK(confusion(t, p) == ConfusionMatrix{1, 1, 1, 1});
    CHECK_THROWS_AS(confusion(t, std::vector<Label>{Label::Complex}), Error);
}

TEST_CASE("exact McNemar equals the Pascal-triangle oracle for b + c <= 25") {
    for (long b = 0; b <= 25; ++b)
        for (long c = 0; b + c <= 25; ++c) {
            const double got = mcnemar_exact_p(b, c);
            CHECK(std::fabs(got - oracle::mcnemar_exact(b, c)) <= 1e-12);
            CHECK(got == mcnemar_exact_p(c, b));
        }
    CHECK(std::fabs(mcnemar_exact_p(5, 15) - 0.0414) <= 1e-4);
    CHECK(std::fabs(mcnemar_exact_p(5, 15) - 2.0 * 21700 / 1048576) < 1e-15);
    CHECK(mcnemar_exact_p(0, 0) == 1.0);
}

TEST_CASE("McNemar switches to corrected chi-square above the cutoff") {
    const auto small = mcnemar_from_counts(10, 14);
    CHECK(small.method == McNemarMethod::ExactBinomial);
    const auto big = mcnemar_from_counts(40, 60);
    CHECK(big.method == McNemarMethod::ChiSquareCorrected);
    CHECK(big.statistic == doctest::Approx(19.0 * 19.0 / 100.0));
    CHECK(big.p_value == doctest::Approx(oracle::chi2_1_sf(3.61)).epsilon(1e-6));
    const auto equal = mcnemar_from_counts(13, 13);
    CHECK(equal.statistic == 0.0);
    CHECK(equal.p_value == doctest::Approx(1.0));
    CHECK_THROWS_AS(mcnemar_from_counts(-1, 3), Error);
}

TEST_CASE("McNemar from paired correctness vectors counts discordant pairs") {
    const bool a[] = {true, true, false, false, true};
    const bool b[] = {true, false, true, true, true};
    const auto r = mcnemar(a, b);
    CHECK(r.b == 1);
    CHECK(r.c == 2);
}

TEST_CASE("threshold sweep: predicted Complex count is monotone in the threshold") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> scores;
        std::vector<Label> truth;
        for (int i = 0; i < 40; ++i) {
            scores.push_back(1 + int(rng() % 5));
            truth.push_back(rng() % 2 ? Label::Complex : Label::NotComplex);
        }
        const auto rows = threshold_sweep(scores, truth);
        REQUIRE(rows.size() == 4);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            CHECK(rows[i].predicted_complex >= rows[i - 1].predicted_complex);
            CHECK(*rows[i].metrics.recall >= *rows[i - 1].metrics.recall);
        }
    }
}

TEST_CASE("metric formatting") {
    CHECK(format_metric(0.29999999) == "0.3000");
    CHECK(format_metric(std::nullopt) == "undefined");
    CHECK(format_absolute_delta(0.031, 0.297) == "+0.2660");
    CHECK(format_relative_delta(0.031, 0.297) == "+858%");
    CHECK(format_relative_delta(0.0169, 0.2542) == "+1,404%");
    CHECK(format_relative_delta(0.2, 0.2) == "0%");
    CHECK(format_relative_delta(-0.016, 0.071) == "—");
    CHECK(format_relative_delta(std::nullopt, 0.1) == "—");

    const auto table = format_metrics_table({{"Standard Prompting", classification_metrics(kReferenceStandardCm)},
                                             {"Diagnostic Prompting", classification_metrics(kReferenceDiagnosticCm)}});
    CHECK(table.find("Relative Improvement") != std::string::npos);
    CHECK(table.find("0.3659") != std::string::npos);
}
