#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "srpeval/error.hpp"
#include "srpeval/labels.hpp"

namespace srpeval {

inline constexpr int kQuestionCount = 25;

enum class Answer { Yes, No, NotSure };

std::string_view to_string(Answer a);  // "Yes" / "No" / "Not Sure"

/// Case-folds and collapses inner whitespace; accepts Yes, No, Not Sure, NotSure.
std::optional<Answer> normalize_answer(std::string_view raw);

struct DiagnosticResponse {
    std::array<Answer, kQuestionCount> answers{};  // index 0 is Q1
    int complexity_score = 0;
    std::string explanation;

    Answer answer(int question) const { return answers.at(static_cast<std::size_t>(question - 1)); }
    bool operator==(const DiagnosticResponse&) const = default;
};

struct DiagnosticParse {
    DiagnosticResponse response;
    bool repair_applied = false;
};

struct GestaltAssessment {
    int similarity = 0;
    int proximity = 0;  // rubric tops out at 3
    int pragnanz = 0;
    int closure = 0;
    int continuity = 0;
    int figure_ground = 0;
    int final_score = 0;
    std::string rationale_text;  // response lines not consumed as scores

    bool operator==(const GestaltAssessment&) const = default;
};

enum class ParseErrorKind {
    NoParseableBlock,
    NotAnObject,
    MissingKey,
    DuplicateKey,
    UnexpectedKey,
    InvalidAnswer,
    InvalidType,
    ScoreOutOfRange,
    MissingPrincipleScore,
    AmbiguousScore,
    MissingFinalScore,
};

std::string_view to_string(ParseErrorKind k);

class ParseError : public Error {
public:
    ParseError(ParseErrorKind kind, std::string detail, const std::string& what)
        : Error(ErrorClass::Parse, what), kind_(kind), detail_(std::move(detail)) {}
    ParseErrorKind kind() const noexcept { return kind_; }
    /// The offending key, principle, or value.
    const std::string& detail() const noexcept { return detail_; }

private:
    ParseErrorKind kind_;
    std::string detail_;
};

/// Strict JSON parse first; on failure strips code fences, extracts the
/// outermost {...} block and drops trailing commas, then parses once more.
DiagnosticParse parse_diagnostic(std::string_view raw);

/// Line-oriented scan for "<principle> ... <n> point(s)" and a "Result:" line.
GestaltAssessment parse_gestalt(std::string_view raw);

/// The repair steps on their own. Returns the input unchanged when nothing applies.
std::string repair_json_text(std::string_view raw);

nlohmann::json to_json(const DiagnosticResponse& d);
nlohmann::json to_json(const GestaltAssessment& g);
DiagnosticResponse diagnostic_from_json(const nlohmann::json& j);
GestaltAssessment gestalt_from_json(const nlohmann::json& j);

/// Canonical text form accepted by parse_gestalt.
std::string serialize_gestalt(const GestaltAssessment& g);

/// Complex iff score <= threshold. Requires 1 <= score <= 5 and 1 <= threshold <= 4.
BinaryPrediction to_binary(int score, int threshold);

inline constexpr int kDefaultThreshold = 2;

}  // namespace srpeval
