// Regenerates tests/fixtures/corpus20: a 20-sample synthetic corpus with
// screenshots, three annotators, and a record/replay session whose keys are the
// real request digests of both prompting protocols.
//
//   make_fixtures <out_dir> [resource_dir]
#include <fstream>
#include <iostream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "srpeval/corpus.hpp"
#include "srpeval/digest.hpp"
#include "srpeval/error.hpp"
#include "srpeval/prompts.hpp"
#include "srpeval/response_parser.hpp"

using namespace srpeval;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kSamples = 20;
constexpr const char* kRecordedAt = "2026-01-01T00:00:00Z";

// Sample numbers are 1-based throughout.
const std::set<int> kHumanComplex{2, 4, 6, 9, 11, 13, 16, 18};
const std::set<int> kUnanimousComplex{2, 4, 9, 13, 18};
const std::set<int> kLoneComplexVote{3, 8, 14, 20};
const std::set<int> kDiagModelComplex{2, 3, 4, 9, 11, 13, 20};
const std::set<int> kStdModelComplex{2, 5};
const std::set<int> kMultiShot{3, 9, 15};
constexpr int kUnparseableDiag = 17;

const char* kQueries[] = {"dancing cactus toy", "usb c hub",       "running shoes men", "dish soap",
                          "phone case",         "yoga mat",        "coffee beans",      "winter jacket",
                          "led desk lamp",      "protein powder",  "hiking backpack",   "paper towels",
                          "wireless earbuds",   "kids raincoat",   "cast iron skillet", "shampoo",
                          "bluetooth speaker",  "linen shirt",     "air fryer",         "printer paper"};
const char* kCategories[] = {"Hardlines", "Hardlines", "Softlines", "Consumables", "Other"};

std::string sample_id(int i) { return fmt::format("srp-{:03d}", i); }

cv::Mat draw_page(int i, int shot) {
    const bool busy = kHumanComplex.count(i) > 0;
    const int cols = busy ? 5 : 3;
    const int rows = busy ? 4 : 2;
    cv::Mat img(360, 480, CV_8UC3, cv::Scalar(255, 255, 255));
    cv::rectangle(img, {0, 0}, {479, 30}, cv::Scalar(40, 40, 40), cv::FILLED);
    const int tile_w = 460 / cols, tile_h = 320 / rows;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int x = 10 + c * tile_w, y = 36 + r * tile_h;
            const int hue = (i * 37 + r * 11 + c * 23 + shot * 5) % 180;
            cv::Mat px(1, 1, CV_8UC3, cv::Scalar(hue, busy ? 220 : 90, 230));
            cv::cvtColor(px, px, cv::COLOR_HSV2BGR);
            const auto v = px.at<cv::Vec3b>(0, 0);
            cv::rectangle(img, {x + 3, y + 3}, {x + tile_w - 3, y + tile_h - 3}, cv::Scalar(v[0], v[1], v[2]),
                          cv::FILLED);
            if (busy && (r + c + i) % 2 == 0)
                cv::circle(img, {x + tile_w - 12, y + 12}, 8, cv::Scalar(0, 0, 255), cv::FILLED);
            cv::putText(img, fmt::format("{}", r * cols + c + 1), {x + 8, y + tile_h - 10},
                        cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0));
        }
    }
    return img;
}

json annotation(int i, const std::string& annotator, bool complex, int salt) {
    json drivers = json::array();
    if (complex) {
        drivers.push_back(std::string(kDriverCatalog[4].name));  // badges are the usual complaint
        drivers.push_back(std::string(kDriverCatalog[(i + salt) % kDriverCount].name));
        if ((i + salt) % 3 == 0) drivers.push_back(std::string(kDriverCatalog[2].name));
    }
    return {{"sample_id", sample_id(i)},
            {"annotator_id", annotator},
            {"label", complex ? "Complex" : "NotComplex"},
            {"drivers", drivers},
            {"submitted_at", kRecordedAt}};
}

Answer diag_answer(int i, int q) {
    const bool model_complex = kDiagModelComplex.count(i) > 0;
    const bool human_complex = kHumanComplex.count(i) > 0;
    if (q == 7) return (human_complex && i != 16) || i == 3 ? Answer::Yes : Answer::No;
    if (q == 2) return human_complex && (i % 3 == 0 || i == 16) ? Answer::Yes : Answer::No;
    if (q == 19) return model_complex ? Answer::Yes : Answer::No;
    switch ((i * 7 + q * 3) % 5) {
        case 0: return Answer::Yes;
        case 1: return Answer::NotSure;
        default: return Answer::No;
    }
}

std::string diag_response(int i) {
    DiagnosticResponse d;
    for (int q = 1; q <= kQuestionCount; ++q) d.answers[static_cast<std::size_t>(q - 1)] = diag_answer(i, q);
    d.complexity_score = kDiagModelComplex.count(i) ? (i % 2 ? 1 : 2) : (i % 2 ? 3 : 4);
    d.explanation = kDiagModelComplex.count(i) ? "Dense grid with many badges competing for attention."
                                               : "Clean grid with clear spacing between product tiles.";
    json j = to_json(d);
    if (i == kUnparseableDiag) j.erase("complexity_score");
    std::string text = j.dump(2);
    switch (i) {
        case 5: return "```json\n" + text + "\n```";
        case 8: {
            auto pos = text.rfind('}');
            return text.substr(0, pos) + ",\n}";
        }
        case 12: return "Here is my assessment:\n" + text + "\nLet me know if you need more.";
        default: return text;
    }
}

std::string std_response(int i) {
    GestaltAssessment g;
    const bool complex = kStdModelComplex.count(i) > 0;
    g.similarity = complex ? 2 : 3 + i % 2;
    g.proximity = complex ? 1 : 2 + i % 2;
    g.pragnanz = complex ? 2 : 4;
    g.closure = complex ? 2 : 3;
    g.continuity = complex ? 2 : 4 - i % 2;
    g.figure_ground = complex ? 1 : 4;
    g.final_score = complex ? 2 : 3 + i % 2;
    g.rationale_text = fmt::format("The page for \"{}\" shows a {} product grid.", kQueries[i - 1],
                                   complex ? "crowded" : "regular");
    std::string text = serialize_gestalt(g);
    if (i == 10) {
        std::string out;
        std::istringstream in(text);
        for (std::string line; std::getline(in, line);) {
            if (line.rfind("Law of", 0) == 0) {
                auto colon = line.find(':');
                line = "**" + line.substr(0, colon + 1) + "**" + line.substr(colon + 1);
            }
            out += line + "\n";
        }
        return out;
    }
    if (i == 14) {
        auto pos = text.find("Result:");
        return text.substr(0, pos) + "Final Result: " + text.substr(pos + 8);
    }
    return text;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
    if (!out) throw Error(ErrorClass::Io, "cannot write " + p.string());
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: make_fixtures <out_dir> [resource_dir]\n";
        return 2;
    }
    try {
        const fs::path out = argv[1];
        const fs::path resources = argc > 2 ? fs::path(argv[2]) : default_resource_dir();
        fs::create_directories(out / "images");

        json manifest = json::array();
        for (int i = 1; i <= kSamples; ++i) {
            const int shots = kMultiShot.count(i) ? (i == 15 ? 3 : 2) : 1;
            json paths = json::array();
            for (int k = 0; k < shots; ++k) {
                const bool jpeg = i == 15 && k == 1;
                const std::string name = fmt::format("images/{}_{}.{}", sample_id(i), k, jpeg ? "jpg" : "png");
                std::vector<uchar> buf;
                cv::imencode(jpeg ? ".jpg" : ".png", draw_page(i, k), buf,
                             jpeg ? std::vector<int>{cv::IMWRITE_JPEG_QUALITY, 90} : std::vector<int>{});
                write_text(out / name, std::string(buf.begin(), buf.end()));
                paths.push_back(name);
            }
            manifest.push_back({{"id", sample_id(i)},
                                {"query", kQueries[i - 1]},
                                {"category", kCategories[i % 5]},
                                {"screenshots", paths}});
        }
        write_text(out / "manifest.json", manifest.dump(2) + "\n");

        std::string ann;
        const char* annotators[] = {"ann-a", "ann-b", "ann-c"};
        for (int i = 1; i <= kSamples; ++i) {
            int complex_votes = 0;
            if (kUnanimousComplex.count(i)) complex_votes = 3;
            else if (kHumanComplex.count(i)) complex_votes = 2;
            else if (kLoneComplexVote.count(i)) complex_votes = 1;
            for (int a = 0; a < 3; ++a) ann += annotation(i, annotators[a], a < complex_votes, a).dump() + "\n";
        }
        write_text(out / "annotations.jsonl", ann);

        // Digests depend on stored image bytes, so render from an ingested scratch corpus.
        const fs::path scratch = fs::temp_directory_path() / fmt::format("srpeval-fixtures-{}", ::getpid());
        fs::remove_all(scratch);
        std::string session;
        {
            Corpus corpus(scratch);
            corpus.ingest_manifest(out / "manifest.json");
            const auto prompts = PromptRegistry::load(resources);
            for (const auto protocol : {Protocol::Standard, Protocol::Diagnostic}) {
                for (const auto& s : corpus.samples()) {
                    const int i = std::stoi(s.id.substr(4));
                    const auto req = render(s, prompts.get(protocol), SamplingConfig{}, corpus.root(), RenderOptions{});
                    const std::string text = protocol == Protocol::Standard ? std_response(i) : diag_response(i);
                    session += json{{"request_digest", request_digest(req)},
                                    {"raw_text", text},
                                    {"recorded_at", kRecordedAt}}
                                   .dump() +
                               "\n";
                }
            }
        }
        fs::remove_all(scratch);
        write_text(out / "session.jsonl", session);

        // Designed outcomes at the default threshold, for the acceptance suite.
        auto cm = [](const std::set<int>& model, std::set<int> skip) {
            long tp = 0, fn = 0, fp = 0, tn = 0;
            for (int i = 1; i <= kSamples; ++i) {
                if (skip.count(i)) continue;
                const bool h = kHumanComplex.count(i), m = model.count(i);
                tp += h && m, fn += h && !m, fp += !h && m, tn += !h && !m;
            }
            return json{{"tp", tp}, {"fn", fn}, {"fp", fp}, {"tn", tn}};
        };
        json expected = {{"samples", kSamples},
                         {"human_complex", kHumanComplex.size()},
                         {"standard_cm", cm(kStdModelComplex, {})},
                         {"diagnostic_cm", cm(kDiagModelComplex, {kUnparseableDiag})},
                         {"diagnostic_parse_failures", 1},
                         {"first_failure", sample_id(18)}};
        write_text(out / "expected.json", expected.dump(2) + "\n");
        std::cout << "wrote " << out.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
