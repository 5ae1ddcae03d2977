#include "srpeval/response_parser.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <vector>

namespace srpeval {

using nlohmann::json;

std::string_view to_string(Answer a) {
    switch (a) {
        case Answer::Yes: return "Yes";
        case Answer::No: return "No";
        case Answer::NotSure: return "Not Sure";
    }
    return "Not Sure";
}

std::optional<Answer> normalize_answer(std::string_view raw) {
    std::string folded;
    bool pending_space = false;
    for (unsigned char c : raw) {
        if (std::isspace(c)) {
            pending_space = !folded.empty();
            continue;
        }
        if (pending_space) folded.push_back(' ');
        pending_space = false;
        folded.push_back(static_cast<char>(std::tolower(c)));
    }
    if (folded == "yes") return Answer::Yes;
    if (folded == "no") return Answer::No;
    if (folded == "not sure" || folded == "notsure") return Answer::NotSure;
    return std::nullopt;
}

std::string_view to_string(ParseErrorKind k) {
    switch (k) {
        case ParseErrorKind::NoParseableBlock: return "no_parseable_block";
        case ParseErrorKind::NotAnObject: return "not_an_object";
        case ParseErrorKind::MissingKey: return "missing_key";
        case ParseErrorKind::DuplicateKey: return "duplicate_key";
        case ParseErrorKind::UnexpectedKey: return "unexpected_key";
        case ParseErrorKind::InvalidAnswer: return "invalid_answer";
        case ParseErrorKind::InvalidType: return "invalid_type";
        case ParseErrorKind::ScoreOutOfRange: return "score_out_of_range";
        case ParseErrorKind::MissingPrincipleScore: return "missing_principle_score";
        case ParseErrorKind::AmbiguousScore: return "ambiguous_score";
        case ParseErrorKind::MissingFinalScore: return "missing_final_score";
    }
    return "unknown";
}

namespace {

[[noreturn]] void fail(ParseErrorKind kind, std::string detail, const std::string& what) {
    throw ParseError(kind, std::move(detail), what);
}

std::string question_key(int q) { return "Q" + std::to_string(q); }

struct StrictResult {
    std::optional<json> value;
    std::optional<std::string> duplicate_key;
    std::string error;
};

/// JSON parse that also reports the first key repeated within one object.
StrictResult parse_json_checked(std::string_view text) {
    StrictResult out;
    std::vector<std::optional<std::set<std::string>>> scopes;
    auto cb = [&](int, json::parse_event_t event, json& parsed) {
        switch (event) {
            case json::parse_event_t::object_start: scopes.emplace_back(std::set<std::string>{}); break;
            case json::parse_event_t::array_start: scopes.emplace_back(std::nullopt); break;
            case json::parse_event_t::object_end:
            case json::parse_event_t::array_end:
                if (!scopes.empty()) scopes.pop_back();
                break;
            case json::parse_event_t::key:
                if (!scopes.empty() && scopes.back() && !scopes.back()->insert(parsed.get<std::string>()).second &&
                    !out.duplicate_key)
                    out.duplicate_key = parsed.get<std::string>();
                break;
            case json::parse_event_t::value: break;
        }
        return true;
    };
    try {
        out.value = json::parse(text.begin(), text.end(), cb);
    } catch (const json::parse_error& e) {
        out.error = e.what();
    }
    return out;
}

std::string strip_code_fences(std::string_view s) {
    const auto open = s.find("```");
    if (open == std::string_view::npos) return std::string(s);
    auto body_start = s.find('\n', open);
    body_start = body_start == std::string_view::npos ? s.size() : body_start + 1;
    const auto close = s.find("```", body_start);
    return std::string(s.substr(body_start, close == std::string_view::npos ? s.npos : close - body_start));
}

std::optional<std::string> outermost_block(std::string_view s) {
    const auto open = s.find('{');
    const auto close = s.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
    return std::string(s.substr(open, close - open + 1));
}

std::string drop_trailing_commas(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_string = false, escaped = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            out.push_back(c);
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        if (c == ',') {
            std::size_t j = i + 1;
            while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
            if (j < s.size() && (s[j] == '}' || s[j] == ']')) continue;
        }
        out.push_back(c);
    }
    return out;
}

int integral_score(const json& v, const std::string& key) {
    // out-of-int values map to a sentinel the range check rejects
    if (v.is_number_unsigned()) return v.get<std::uint64_t>() > 1000 ? 1001 : static_cast<int>(v.get<std::uint64_t>());
    if (v.is_number_integer()) {
        const auto n = v.get<std::int64_t>();
        return n > 1000 ? 1001 : n < -1000 ? -1001 : static_cast<int>(n);
    }
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::isfinite(d) && d == std::floor(d)) return std::fabs(d) > 1000 ? 1001 : static_cast<int>(d);
    }
    fail(ParseErrorKind::InvalidType, key, "'" + key + "' must be an integer, got " + v.dump());
}

DiagnosticResponse validate_diagnostic(const json& j) {
    if (!j.is_object()) fail(ParseErrorKind::NotAnObject, "", "diagnostic response is not a JSON object");
    auto diag_it = j.find("diagnostics");
    if (diag_it == j.end()) fail(ParseErrorKind::MissingKey, "diagnostics", "missing key 'diagnostics'");
    const json& diag = *diag_it;
    if (!diag.is_object()) fail(ParseErrorKind::InvalidType, "diagnostics", "'diagnostics' must be an object");

    DiagnosticResponse out;
    for (int q = 1; q <= kQuestionCount; ++q) {
        const auto key = question_key(q);
        auto it = diag.find(key);
        if (it == diag.end()) fail(ParseErrorKind::MissingKey, key, "missing key '" + key + "'");
        if (!it->is_string()) fail(ParseErrorKind::InvalidType, key, "answer for " + key + " must be a string");
        auto ans = normalize_answer(it->get<std::string>());
        if (!ans)
            fail(ParseErrorKind::InvalidAnswer, key,
                 "answer for " + key + " is '" + it->get<std::string>() + "', expected Yes / No / Not Sure");
        out.answers[static_cast<std::size_t>(q - 1)] = *ans;
    }
    if (diag.size() != static_cast<std::size_t>(kQuestionCount)) {
        for (const auto& [k, _] : diag.items()) {
            bool known = false;
            for (int q = 1; q <= kQuestionCount && !known; ++q) known = k == question_key(q);
            if (!known) fail(ParseErrorKind::UnexpectedKey, k, "unexpected diagnostics key '" + k + "'");
        }
    }

    auto score_it = j.find("complexity_score");
    if (score_it == j.end()) fail(ParseErrorKind::MissingKey, "complexity_score", "missing key 'complexity_score'");
    out.complexity_score = integral_score(*score_it, "complexity_score");
    if (out.complexity_score < 1 || out.complexity_score > 5)
        fail(ParseErrorKind::ScoreOutOfRange, "complexity_score",
             "complexity_score " + std::to_string(out.complexity_score) + " outside 1-5");

    if (auto it = j.find("explanation"); it != j.end()) {
        if (!it->is_string()) fail(ParseErrorKind::InvalidType, "explanation", "'explanation' must be a string");
        out.explanation = it->get<std::string>();
    }
    return out;
}

}  // namespace

std::string repair_json_text(std::string_view raw) {
    std::string text = strip_code_fences(raw);
    if (auto block = outermost_block(text)) text = std::move(*block);
    return drop_trailing_commas(text);
}

DiagnosticParse parse_diagnostic(std::string_view raw) {
    DiagnosticParse out;
    auto strict = parse_json_checked(raw);
    if (!strict.value) {
        const std::string fenced = strip_code_fences(raw);
        auto block = outermost_block(fenced);
        if (!block)
            fail(ParseErrorKind::NoParseableBlock, "", "no brace-delimited JSON block in response");
        strict = parse_json_checked(drop_trailing_commas(*block));
        if (!strict.value)
            fail(ParseErrorKind::NoParseableBlock, "", "JSON block unparseable after repair: " + strict.error);
        out.repair_applied = true;
    }
    if (strict.duplicate_key)
        fail(ParseErrorKind::DuplicateKey, *strict.duplicate_key, "duplicate key '" + *strict.duplicate_key + "'");
    out.response = validate_diagnostic(*strict.value);
    return out;
}

// -- Gestalt ----------------------------------------------------------------

namespace {

struct Principle {
    const char* name;
    std::regex pattern;
    int max_score;
    int GestaltAssessment::*field;
};

const std::vector<Principle>& principles() {
    static const std::vector<Principle> kPrinciples = [] {
        const auto flags = std::regex::icase | std::regex::ECMAScript;
        return std::vector<Principle>{
            {"similarity", std::regex("similarity", flags), 5, &GestaltAssessment::similarity},
            {"proximity", std::regex("proximity", flags), 3, &GestaltAssessment::proximity},
            {"pragnanz", std::regex("pr(a|\xc3\xa4|\xc3\x84)gnanz", flags), 5, &GestaltAssessment::pragnanz},
            {"closure", std::regex("closure", flags), 5, &GestaltAssessment::closure},
            {"continuity", std::regex("continuity", flags), 5, &GestaltAssessment::continuity},
            {"figure_ground", std::regex("figure\\s*[/-]?\\s*ground", flags), 5, &GestaltAssessment::figure_ground},
        };
    }();
    return kPrinciples;
}

std::string strip_markup(std::string_view line) {
    std::string out;
    for (char c : line)
        if (c != '*' && c != '#' && c != '_' && c != '`') out.push_back(c);
    return out;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find('\n', start);
        if (end == std::string_view::npos) end = s.size();
        std::string line(s.substr(start, end - start));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        if (end == s.size()) break;
        start = end + 1;
    }
    return lines;
}

// Long digit runs saturate instead of overflowing; the range checks reject them.
int small_int(const std::string& digits) {
    return digits.size() > 4 ? 99999 : std::stoi(digits);
}

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

void record_score(std::optional<int>& slot, int value, const std::string& name) {
    if (slot && *slot != value)
        fail(ParseErrorKind::AmbiguousScore, name,
             "conflicting scores for " + name + ": " + std::to_string(*slot) + " and " + std::to_string(value));
    slot = value;
}

}  // namespace

GestaltAssessment parse_gestalt(std::string_view raw) {
    static const std::regex kPoints(R"((\d+)\s*points?\b)", std::regex::icase);
    static const std::regex kResult(R"(^\s*(?:final\s+)?result\s*:(.*)$)", std::regex::icase);
    static const std::regex kInteger(R"(\d+)");

    const auto& table = principles();
    std::vector<std::optional<int>> scores(table.size());
    std::optional<int> final_score;
    std::vector<std::string> rationale;

    for (const auto& line : split_lines(raw)) {
        const std::string text = strip_markup(line);
        std::smatch m;
        if (std::regex_match(text, m, kResult)) {
            const std::string rest = m[1].str();
            std::smatch num;
            if (std::regex_search(rest, num, kInteger)) {
                record_score(final_score, small_int(num.str()), "final score");
                continue;
            }
        }
        // earliest principle name on the line owns it
        std::size_t best = table.size();
        std::ptrdiff_t best_pos = -1;
        std::size_t name_end = 0;
        for (std::size_t i = 0; i < table.size(); ++i) {
            std::smatch pm;
            if (std::regex_search(text, pm, table[i].pattern) && (best_pos < 0 || pm.position(0) < best_pos)) {
                best = i;
                best_pos = pm.position(0);
                name_end = static_cast<std::size_t>(pm.position(0) + pm.length(0));
            }
        }
        if (best < table.size()) {
            std::smatch pts;
            const std::string tail = text.substr(name_end);
            if (std::regex_search(tail, pts, kPoints)) {
                record_score(scores[best], small_int(pts[1].str()), table[best].name);
                continue;
            }
        }
        rationale.push_back(line);
    }

    GestaltAssessment out;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (!scores[i])
            fail(ParseErrorKind::MissingPrincipleScore, table[i].name,
                 std::string("no score found for principle ") + table[i].name);
        if (*scores[i] < 1 || *scores[i] > table[i].max_score)
            fail(ParseErrorKind::ScoreOutOfRange, table[i].name,
                 std::string(table[i].name) + " score " + std::to_string(*scores[i]) + " outside 1-" +
                     std::to_string(table[i].max_score));
        out.*(table[i].field) = *scores[i];
    }
    if (!final_score) fail(ParseErrorKind::MissingFinalScore, "result", "no 'Result:' line with a final score");
    if (*final_score < 1 || *final_score > 5)
        fail(ParseErrorKind::ScoreOutOfRange, "final_score",
             "final score " + std::to_string(*final_score) + " outside 1-5");
    out.final_score = *final_score;

    auto first = std::find_if_not(rationale.begin(), rationale.end(), is_blank);
    auto last = std::find_if_not(rationale.rbegin(), rationale.rend(), is_blank).base();
    std::string joined;
    for (auto it = first; it < last; ++it) {
        if (it != first) joined += '\n';
        joined += *it;
    }
    out.rationale_text = std::move(joined);
    return out;
}

std::string serialize_gestalt(const GestaltAssessment& g) {
    std::ostringstream os;
    if (!g.rationale_text.empty()) os << g.rationale_text << "\n\n";
    os << "Law of Similarity: " << g.similarity << " points\n"
       << "Law of Proximity: " << g.proximity << " points\n"
       << "Law of Pragnanz: " << g.pragnanz << " points\n"
       << "Law of Closure: " << g.closure << " points\n"
       << "Law of Continuity: " << g.continuity << " points\n"
       << "Law of Figure/Ground: " << g.figure_ground << " points\n"
       << "Result: " << g.final_score << "\n";
    return os.str();
}

// -- JSON forms ---------------------------------------------------------------

json to_json(const DiagnosticResponse& d) {
    json diag = json::object();
    for (int q = 1; q <= kQuestionCount; ++q) diag[question_key(q)] = std::string(to_string(d.answer(q)));
    return {{"diagnostics", diag}, {"complexity_score", d.complexity_score}, {"explanation", d.explanation}};
}

json to_json(const GestaltAssessment& g) {
    return {{"similarity", g.similarity},   {"proximity", g.proximity},
            {"pragnanz", g.pragnanz},       {"closure", g.closure},
            {"continuity", g.continuity},   {"figure_ground", g.figure_ground},
            {"final_score", g.final_score}, {"rationale_text", g.rationale_text}};
}

DiagnosticResponse diagnostic_from_json(const json& j) { return validate_diagnostic(j); }

GestaltAssessment gestalt_from_json(const json& j) {
    GestaltAssessment g;
    try {
        g.similarity = j.at("similarity").get<int>();
        g.proximity = j.at("proximity").get<int>();
        g.pragnanz = j.at("pragnanz").get<int>();
        g.closure = j.at("closure").get<int>();
        g.continuity = j.at("continuity").get<int>();
        g.figure_ground = j.at("figure_ground").get<int>();
        g.final_score = j.at("final_score").get<int>();
        g.rationale_text = j.value("rationale_text", "");
    } catch (const json::exception& e) {
        fail(ParseErrorKind::InvalidType, "", std::string("malformed gestalt record: ") + e.what());
    }
    return g;
}

BinaryPrediction to_binary(int score, int threshold) {
    if (score < 1 || score > 5)
        throw Error(ErrorClass::InvalidArgument, "score " + std::to_string(score) + " outside 1-5");
    if (threshold < 1 || threshold > 4)
        throw Error(ErrorClass::InvalidArgument, "threshold " + std::to_string(threshold) + " outside 1-4");
    return {score <= threshold ? Label::Complex : Label::NotComplex, score, threshold};
}

}  // namespace srpeval
