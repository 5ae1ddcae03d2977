#include <doctest.h>

#include <random>

#include "scratch.hpp"
#include "srpeval/digest.hpp"
#include "srpeval/error.hpp"
#include "srpeval/response_parser.hpp"

using namespace srpeval;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string kind_of(std::string_view raw) {
    try {
        parse_diagnostic(raw);
    } catch (const ParseError& e) {
        return std::string(to_string(e.kind()));
    }
    return "accepted";
}

std::string gestalt_kind(std::string_view raw) {
    try {
        parse_gestalt(raw);
    } catch (const ParseError& e) {
        return std::string(to_string(e.kind()));
    }
    return "accepted";
}

json sample_json(int score = 3) {
    json d = json::object();
    for (int q = 1; q <= kQuestionCount; ++q) d["Q" + std::to_string(q)] = q % 3 == 0 ? "Not Sure" : q % 2 ? "Yes" : "No";
    return {{"diagnostics", d}, {"complexity_score", score}, {"explanation", "dense grid"}};
}

const char* kGestalt =
    "The grid is busy.\n"
    "\n"
    "Law of Similarity: 2 points - products share colours\n"
    "Law of Proximity: 3 points\n"
    "Law of Pragnanz: 2 points\n"
    "Law of Closure: 4 points\n"
    "Law of Continuity: 3 points\n"
    "Law of Figure/Ground: 2 points\n"
    "Result: 2\n";

}  // namespace

TEST_CASE("answer normalization") {
    CHECK(normalize_answer("yes") == Answer::Yes);
    CHECK(normalize_answer(" NO ") == Answer::No);
    CHECK(normalize_answer("not   sure") == Answer::NotSure);
    CHECK(normalize_answer("NotSure") == Answer::NotSure);
    CHECK_FALSE(normalize_answer("maybe").has_value());
    CHECK_FALSE(normalize_answer("").has_value());
}

TEST_CASE("every golden diagnostic response parses") {
    int n = 0;
    for (const auto& entry : fs::directory_iterator(fixture("parser/golden"))) {
        CAPTURE(entry.path().filename().string());
        const auto text = read_file_text(entry.path());
        const auto parsed = parse_diagnostic(text);
        CHECK(parsed.response.complexity_score >= 1);
        CHECK(parsed.response.complexity_score <= 5);
        const auto name = entry.path().filename().string();
        if (name.rfind("strict_", 0) == 0) CHECK_FALSE(parsed.repair_applied);
        if (name.rfind("fenced_", 0) == 0 || name.rfind("trailing_comma_", 0) == 0) CHECK(parsed.repair_applied);
        ++n;
    }
    CHECK(n >= 30);
}

TEST_CASE("every mutation yields the typed error named by its file") {
    int n = 0;
    for (const auto& entry : fs::directory_iterator(fixture("parser/mutations"))) {
        const auto name = entry.path().filename().string();
        CAPTURE(name);
        const auto expected = name.substr(0, name.find("__"));
        CHECK(kind_of(read_file_text(entry.path())) == expected);
        ++n;
    }
    CHECK(n >= 20);
}

TEST_CASE("duplicate keys and key checks") {
    CHECK(kind_of(R"({"diagnostics": {}, "diagnostics": {}})") == "duplicate_key");
    auto j = sample_json();
    j["diagnostics"]["Q3"] = 1;
    CHECK(kind_of(j.dump()) == "invalid_type");
    j = sample_json();
    j["explanation"] = 5;
    CHECK(kind_of(j.dump()) == "invalid_type");
    j = sample_json();
    j.erase("explanation");
    CHECK(parse_diagnostic(j.dump()).response.explanation.empty());
    j = sample_json();
    j["diagnostics"] = "none";
    CHECK(kind_of(j.dump()) == "invalid_type");
}

TEST_CASE("repair only removes wrapping, not content") {
    const auto strict = sample_json(4).dump(2);
    std::string with_comma = strict;
    with_comma.insert(with_comma.rfind('}'), ",");
    CHECK(parse_diagnostic(with_comma).response == parse_diagnostic(strict).response);
    CHECK(repair_json_text("```json\n{\"a\": [1, 2,],}\n```") == "{\"a\": [1, 2]}");
    // a comma inside a string is untouched
    CHECK(repair_json_text(R"({"s": ",}"})") == R"({"s": ",}"})");
}

TEST_CASE("diagnostic serialization round trips") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        DiagnosticResponse d;
        for (auto& a : d.answers) a = static_cast<Answer>(rng() % 3);
        d.complexity_score = 1 + int(rng() % 5);
        d.explanation = "e" + std::to_string(rng() % 1000);
        const auto once = parse_diagnostic(to_json(d).dump()).response;
        CHECK(once == d);
        CHECK(parse_diagnostic(to_json(once).dump()).response == once);
        CHECK(diagnostic_from_json(to_json(d)) == d);
    }
}

TEST_CASE("gestalt parsing") {
    const auto g = parse_gestalt(kGestalt);
    CHECK(g.similarity == 2);
    CHECK(g.proximity == 3);
    CHECK(g.pragnanz == 2);
    CHECK(g.closure == 4);
    CHECK(g.continuity == 3);
    CHECK(g.figure_ground == 2);
    CHECK(g.final_score == 2);
    CHECK(g.rationale_text == "The grid is busy.");
}

TEST_CASE("gestalt tolerates markdown and phrasing variants") {
    const auto md = parse_gestalt(
        "## Assessment\n"
        "**Law of Similarity:** 2 points\n"
        "- *Law of Proximity*: 1 point\n"
        "Law of Prägnanz: 2 points\n"
        "Closure — 3 points\n"
        "Continuity: 3 points\n"
        "Figure-Ground: 4 points\n"
        "**Final Result:** 3 (somewhat complex)\n");
    CHECK(md.proximity == 1);
    CHECK(md.pragnanz == 2);
    CHECK(md.closure == 3);
    CHECK(md.figure_ground == 4);
    CHECK(md.final_score == 3);
}

TEST_CASE("gestalt errors are typed") {
    std::string missing = kGestalt;
    missing.erase(missing.find("Law of Closure"), std::string("Law of Closure: 4 points\n").size());
    CHECK(gestalt_kind(missing) == "missing_principle_score");

    std::string no_result = kGestalt;
    no_result.erase(no_result.find("Result"));
    CHECK(gestalt_kind(no_result) == "missing_final_score");

    CHECK(gestalt_kind(std::string(kGestalt) + "Law of Similarity: 4 points\n") == "ambiguous_score");
    CHECK(gestalt_kind(std::string(kGestalt) + "Law of Similarity: 2 points\n") == "accepted");
    CHECK(gestalt_kind(std::string(kGestalt) + "Result: 5\n") == "ambiguous_score");

    std::string prox = kGestalt;
    prox.replace(prox.find("Proximity: 3"), 12, "Proximity: 4");
    CHECK(gestalt_kind(prox) == "score_out_of_range");

    std::string big = kGestalt;
    big.replace(big.find("Result: 2"), 9, "Result: 99999999999");
    CHECK(gestalt_kind(big) == "score_out_of_range");
    CHECK(gestalt_kind("") == "missing_principle_score");
}

TEST_CASE("gestalt serialization is a fixed point") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        GestaltAssessment g;
        g.similarity = 1 + int(rng() % 5);
        g.proximity = 1 + int(rng() % 3);
        g.pragnanz = 1 + int(rng() % 5);
        g.closure = 1 + int(rng() % 5);
        g.continuity = 1 + int(rng() % 5);
        g.figure_ground = 1 + int(rng() % 5);
        g.final_score = 1 + int(rng() % 5);
        g.rationale_text = i % 3 ? "note " + std::to_string(i) + "\nsecond line" : "";
        const auto once = parse_gestalt(serialize_gestalt(g));
        CHECK(once == g);
        CHECK(serialize_gestalt(parse_gestalt(serialize_gestalt(once))) == serialize_gestalt(once));
    }
}

TEST_CASE("binarization") {
    CHECK(to_binary(1, 2).label == Label::Complex);
    CHECK(to_binary(2, 2).label == Label::Complex);
    CHECK(to_binary(3, 2).label == Label::NotComplex);
    CHECK(to_binary(3, 2).source_score == 3);
    CHECK_THROWS_AS(to_binary(0, 2), Error);
    CHECK_THROWS_AS(to_binary(3, 5), Error);
    // monotone: raising the threshold never turns Complex into NotComplex
    for (int s = 1; s <= 5; ++s)
        for (int t = 1; t < 4; ++t)
            if (to_binary(s, t).label == Label::Complex) CHECK(to_binary(s, t + 1).label == Label::Complex);
}
