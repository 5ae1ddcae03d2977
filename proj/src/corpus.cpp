#include "srpeval/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "srpeval/digest.hpp"
#include "srpeval/error.hpp"

namespace srpeval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<json> read_jsonl(const fs::path& path) {
    std::vector<json> out;
    if (!fs::exists(path)) return out;
    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw Error(ErrorClass::CorruptRecord,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void append_line(const fs::path& path, const std::string& line) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorClass::Io, "cannot append to " + path.string());
    out << line << '\n';
    out.flush();
    if (!out) throw Error(ErrorClass::Io, "short write to " + path.string());
}

const json& require(const json& j, const char* key, const std::string& context) {
    auto it = j.find(key);
    if (it == j.end()) throw Error(ErrorClass::Validation, context + ": missing field '" + key + "'");
    return *it;
}

std::string require_string(const json& j, const char* key, const std::string& context) {
    const auto& v = require(j, key, context);
    if (!v.is_string()) throw Error(ErrorClass::Validation, context + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

}  // namespace

// -- serialization ----------------------------------------------------------

json to_json(const Sample& s) {
    json shots = json::array();
    for (const auto& r : s.screenshots)
        shots.push_back({{"path", r.path},
                         {"media_type", to_string(r.media_type)},
                         {"sha256", r.sha256},
                         {"width", r.width},
                         {"height", r.height}});
    return {{"id", s.id},
            {"query", s.query},
            {"category", to_string(s.category)},
            {"screenshots", shots},
            {"created_at", s.created_at}};
}

Sample sample_from_json(const json& j) {
    Sample s;
    s.id = require_string(j, "id", "sample");
    s.query = require_string(j, "query", "sample " + s.id);
    auto cat = parse_category(require_string(j, "category", "sample " + s.id));
    if (!cat) throw Error(ErrorClass::CorruptRecord, "sample " + s.id + ": unknown category");
    s.category = *cat;
    s.created_at = j.value("created_at", "");
    for (const auto& r : require(j, "screenshots", "sample " + s.id)) {
        ImageRef ref;
        ref.path = r.at("path").get<std::string>();
        auto mt = parse_media_type(r.at("media_type").get<std::string>());
        if (!mt) throw Error(ErrorClass::CorruptRecord, "sample " + s.id + ": unknown media type");
        ref.media_type = *mt;
        ref.sha256 = r.at("sha256").get<std::string>();
        ref.width = r.at("width").get<int>();
        ref.height = r.at("height").get<int>();
        s.screenshots.push_back(std::move(ref));
    }
    return s;
}

json to_json(const Annotation& a) {
    json drivers = json::array();
    for (Driver d : a.drivers) drivers.push_back(driver_info(d).name);
    return {{"sample_id", a.sample_id},
            {"annotator_id", a.annotator_id},
            {"label", to_string(a.label)},
            {"drivers", drivers},
            {"submitted_at", a.submitted_at}};
}

Annotation annotation_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorClass::Validation, "annotation must be a JSON object");
    Annotation a;
    a.sample_id = require_string(j, "sample_id", "annotation");
    a.annotator_id = require_string(j, "annotator_id", "annotation");
    auto label = parse_label(require_string(j, "label", "annotation"));
    if (!label) throw Error(ErrorClass::Validation, "annotation: label must be Complex or NotComplex");
    a.label = *label;
    if (auto it = j.find("drivers"); it != j.end()) {
        if (!it->is_array()) throw Error(ErrorClass::Validation, "annotation: drivers must be an array");
        for (const auto& d : *it) {
            if (!d.is_string()) throw Error(ErrorClass::Validation, "annotation: driver names must be strings");
            auto drv = parse_driver(d.get<std::string>());
            if (!drv)
                throw Error(ErrorClass::Validation,
                            "annotation: driver '" + d.get<std::string>() + "' is not in the catalog");
            a.drivers.push_back(*drv);
        }
    }
    a.submitted_at = j.value("submitted_at", "");
    normalize_annotation(a);
    return a;
}

json to_json(const RunRecord& r) {
    json j = {{"sample_id", r.sample_id}, {"repair_applied", r.repair_applied}};
    if (r.parsed) j["parsed"] = *r.parsed;
    if (r.parse_error) j["error"] = {{"kind", r.parse_error->kind}, {"message", r.parse_error->message}};
    if (r.prediction)
        j["prediction"] = {{"label", to_string(r.prediction->label)},
                           {"source_score", r.prediction->source_score},
                           {"threshold_used", r.prediction->threshold_used}};
    return j;
}

namespace {

json response_json(const RunRecord& r) {
    json j = {{"sample_id", r.sample_id},
              {"request_digest", r.request_digest},
              {"raw_text", r.raw_text},
              {"latency_ms", r.latency_ms},
              {"attempt_count", r.attempt_count}};
    if (r.transport_error) j["transport_error"] = *r.transport_error;
    return j;
}

}  // namespace

const RunRecord* EvalRun::find(const std::string& sample_id) const {
    for (const auto& r : records)
        if (r.sample_id == sample_id) return &r;
    return nullptr;
}

// -- corpus -----------------------------------------------------------------

Corpus::Corpus(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_ / "images");
    fs::create_directories(root_ / "runs");
    load();
}

void Corpus::load() {
    for (const auto& j : read_jsonl(root_ / "samples.jsonl")) {
        auto s = sample_from_json(j);
        sample_index_[s.id] = samples_.size();
        samples_.push_back(std::move(s));
    }
    for (const auto& j : read_jsonl(root_ / "annotations.jsonl")) {
        try {
            annotations_.push_back(annotation_from_json(j));
        } catch (const Error& e) {
            throw Error(ErrorClass::CorruptRecord, std::string("annotations.jsonl: ") + e.what());
        }
    }
}

CorpusSummary Corpus::ingest_manifest(const fs::path& manifest_file) {
    json manifest;
    try {
        manifest = json::parse(read_file_text(manifest_file));
    } catch (const json::exception& e) {
        throw Error(ErrorClass::Validation, "manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!manifest.is_array()) throw Error(ErrorClass::Validation, "manifest must be a JSON array");
    const fs::path base = manifest_file.parent_path();

    struct Staged {
        Sample sample;
        std::vector<std::vector<std::uint8_t>> bytes;
    };
    std::vector<Staged> staged;
    std::set<std::string> seen;
    const std::string now = utc_now_iso8601();

    std::unique_lock lock(mu_);
    for (const auto& entry : manifest) {
        if (!entry.is_object()) throw Error(ErrorClass::Validation, "manifest entries must be objects");
        Staged st;
        Sample& s = st.sample;
        s.id = require_string(entry, "id", "manifest entry");
        const std::string ctx = "sample '" + s.id + "'";
        if (s.id.empty()) throw Error(ErrorClass::Validation, "manifest entry has an empty id");
        if (sample_index_.count(s.id) || !seen.insert(s.id).second)
            throw Error(ErrorClass::Duplicate, "duplicate sample id '" + s.id + "'");
        s.query = require_string(entry, "query", ctx);
        auto cat = parse_category(require_string(entry, "category", ctx));
        if (!cat) throw Error(ErrorClass::Validation, ctx + ": unknown category");
        s.category = *cat;
        const auto& shots = require(entry, "screenshots", ctx);
        if (!shots.is_array()) throw Error(ErrorClass::Validation, ctx + ": screenshots must be an array");
        if (shots.empty() || shots.size() > kMaxScreenshots)
            throw Error(ErrorClass::Validation, ctx + ": has " + std::to_string(shots.size()) +
                                                    " screenshots, expected 1 to 3");
        for (const auto& p : shots) {
            if (!p.is_string()) throw Error(ErrorClass::Validation, ctx + ": screenshot paths must be strings");
            fs::path img = p.get<std::string>();
            if (img.is_relative()) img = base / img;
            if (!fs::is_regular_file(img))
                throw Error(ErrorClass::NotFound, ctx + ": missing image file " + img.string());
            auto bytes = read_file_bytes(img);
            ImageInfo info;
            try {
                info = probe_image(bytes);
            } catch (const Error& e) {
                throw Error(e.error_class(), ctx + ": " + img.string() + ": " + e.what());
            }
            ImageRef ref;
            ref.media_type = info.media_type;
            ref.width = info.width;
            ref.height = info.height;
            ref.sha256 = sha256_hex(bytes);
            ref.path = "images/" + ref.sha256 + std::string(file_extension(info.media_type));
            s.screenshots.push_back(std::move(ref));
            st.bytes.push_back(std::move(bytes));
        }
        s.created_at = now;
        staged.push_back(std::move(st));
    }

    CorpusSummary summary;
    for (auto c : kAllCategories) summary.per_category[c] = 0;
    for (auto& st : staged) {
        for (std::size_t i = 0; i < st.bytes.size(); ++i) {
            const fs::path dst = root_ / st.sample.screenshots[i].path;
            if (!fs::exists(dst))
                write_file_atomic(dst, std::string_view(reinterpret_cast<const char*>(st.bytes[i].data()),
                                                        st.bytes[i].size()));
        }
        append_line(root_ / "samples.jsonl", to_json(st.sample).dump());
        ++summary.per_category[st.sample.category];
        sample_index_[st.sample.id] = samples_.size();
        samples_.push_back(std::move(st.sample));
    }
    summary.ingested = staged.size();
    summary.corpus_total = samples_.size();
    return summary;
}

Annotation Corpus::store_annotation(Annotation a, bool overwrite) {
    normalize_annotation(a);
    if (a.submitted_at.empty()) a.submitted_at = utc_now_iso8601();
    {
        std::unique_lock lock(mu_);
        if (!sample_index_.count(a.sample_id))
            throw Error(ErrorClass::NotFound, "unknown sample '" + a.sample_id + "'");
        auto existing = std::find_if(annotations_.begin(), annotations_.end(), [&](const Annotation& x) {
            return x.sample_id == a.sample_id && x.annotator_id == a.annotator_id;
        });
        if (existing != annotations_.end()) {
            if (!overwrite)
                throw Error(ErrorClass::Duplicate, "annotator '" + a.annotator_id +
                                                       "' already annotated sample '" + a.sample_id + "'");
            *existing = a;
            rewrite_annotations_locked();
        } else {
            append_line(root_ / "annotations.jsonl", to_json(a).dump());
            annotations_.push_back(a);
        }
    }
    std::lock_guard cache_lock(cache_mu_);
    consensus_cache_.erase(a.sample_id);
    return a;
}

std::size_t Corpus::import_annotations(const fs::path& jsonl, bool overwrite) {
    if (!fs::exists(jsonl)) throw Error(ErrorClass::NotFound, "cannot open file: " + jsonl.string());
    std::size_t n = 0;
    for (const auto& j : read_jsonl(jsonl)) {
        store_annotation(annotation_from_json(j), overwrite);
        ++n;
    }
    return n;
}

void Corpus::rewrite_annotations_locked() {
    std::string content;
    for (const auto& a : annotations_) content += to_json(a).dump() + "\n";
    write_file_atomic(root_ / "annotations.jsonl", content);
}

std::vector<Sample> Corpus::samples() const {
    std::shared_lock lock(mu_);
    return samples_;
}

std::optional<Sample> Corpus::find_sample(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = sample_index_.find(id);
    if (it == sample_index_.end()) return std::nullopt;
    return samples_[it->second];
}

std::vector<std::string> Corpus::sample_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> ids;
    for (const auto& s : samples_) ids.push_back(s.id);
    return ids;
}

std::vector<Annotation> Corpus::annotations() const {
    std::shared_lock lock(mu_);
    return annotations_;
}

std::vector<Annotation> Corpus::annotations_for(const std::string& sample_id) const {
    std::shared_lock lock(mu_);
    std::vector<Annotation> out;
    for (const auto& a : annotations_)
        if (a.sample_id == sample_id) out.push_back(a);
    return out;
}

ConsensusLabel Corpus::consensus(const std::string& sample_id) const {
    {
        std::lock_guard cache_lock(cache_mu_);
        if (auto it = consensus_cache_.find(sample_id); it != consensus_cache_.end()) return it->second;
    }
    ConsensusPolicy policy;
    std::vector<Annotation> anns;
    {
        std::shared_lock lock(mu_);
        if (!sample_index_.count(sample_id))
            throw Error(ErrorClass::NotFound, "unknown sample '" + sample_id + "'");
        policy = policy_;
        for (const auto& a : annotations_)
            if (a.sample_id == sample_id) anns.push_back(a);
    }
    if (anns.empty())
        throw Error(ErrorClass::MissingPrerequisite, "sample '" + sample_id + "' has no annotations");
    auto label = aggregate(anns, policy);
    std::lock_guard cache_lock(cache_mu_);
    consensus_cache_[sample_id] = label;
    return label;
}

GroundTruthTable Corpus::ground_truth(const GroundTruthOptions& options) const {
    std::shared_lock lock(mu_);
    std::vector<std::string> ids;
    for (const auto& s : samples_) ids.push_back(s.id);
    return ground_truth_table(ids, annotations_, options);
}

void Corpus::set_consensus_policy(ConsensusPolicy policy) {
    {
        std::unique_lock lock(mu_);
        policy_ = policy;
    }
    std::lock_guard cache_lock(cache_mu_);
    consensus_cache_.clear();
}

// -- runs -------------------------------------------------------------------

std::string Corpus::next_run_id_locked(Protocol p) const {
    int max_seq = 0;
    for (const auto& entry : fs::directory_iterator(root_ / "runs")) {
        const auto name = entry.path().filename().string();
        if (name.rfind("run-", 0) != 0) continue;
        try {
            max_seq = std::max(max_seq, std::stoi(name.substr(4, 4)));
        } catch (const std::exception&) {
        }
    }
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", max_seq + 1);
    return "run-" + std::string(buf) + "-" + std::string(to_string(p));
}

std::string Corpus::save_run(EvalRun run) {
    std::unique_lock lock(mu_);
    if (run.run_id.empty()) run.run_id = next_run_id_locked(run.protocol);
    const fs::path dir = run_dir(run.run_id);
    if (fs::exists(dir)) throw Error(ErrorClass::Duplicate, "run '" + run.run_id + "' already exists");

    std::string responses, predictions;
    json sample_ids = json::array();
    for (const auto& r : run.records) {
        responses += response_json(r).dump() + "\n";
        predictions += to_json(r).dump() + "\n";
        sample_ids.push_back(r.sample_id);
    }
    json config = {{"run_id", run.run_id},
                   {"protocol", to_string(run.protocol)},
                   {"model_id", run.model_id},
                   {"temperature", run.temperature},
                   {"seed", run.seed ? json(*run.seed) : json(nullptr)},
                   {"threshold", run.threshold},
                   {"prompt_digest", run.prompt_digest},
                   {"created_at", run.created_at},
                   {"sample_ids", sample_ids},
                   {"records_sha256", sha256_hex(responses + predictions)},
                   {"config", run.config}};

    const fs::path staging = root_ / "runs" / ("." + run.run_id + ".staging");
    fs::remove_all(staging);
    write_file_atomic(staging / "responses.jsonl", responses);
    write_file_atomic(staging / "predictions.jsonl", predictions);
    write_file_atomic(staging / "config.json", config.dump(2) + "\n");
    fs::rename(staging, dir);
    return run.run_id;
}

EvalRun Corpus::load_run(const std::string& run_id) const {
    const fs::path dir = run_dir(run_id);
    if (run_id.empty() || run_id.find('/') != std::string::npos || run_id.find("..") != std::string::npos ||
        !fs::is_regular_file(dir / "config.json"))
        throw Error(ErrorClass::NotFound, "unknown run '" + run_id + "'");

    json config;
    try {
        config = json::parse(read_file_text(dir / "config.json"));
    } catch (const json::exception& e) {
        throw Error(ErrorClass::CorruptRecord, "run '" + run_id + "': config.json: " + e.what());
    }
    const std::string responses = fs::exists(dir / "responses.jsonl") ? read_file_text(dir / "responses.jsonl") : "";
    const std::string predictions =
        fs::exists(dir / "predictions.jsonl") ? read_file_text(dir / "predictions.jsonl") : "";
    if (sha256_hex(responses + predictions) != config.value("records_sha256", ""))
        throw Error(ErrorClass::CorruptRecord, "run '" + run_id + "': record digest mismatch");

    EvalRun run;
    try {
        run.run_id = config.at("run_id").get<std::string>();
        auto proto = parse_protocol(config.at("protocol").get<std::string>());
        if (!proto) throw Error(ErrorClass::CorruptRecord, "run '" + run_id + "': unknown protocol");
        run.protocol = *proto;
        run.model_id = config.at("model_id").get<std::string>();
        run.temperature = config.at("temperature").get<double>();
        if (!config.at("seed").is_null()) run.seed = config.at("seed").get<std::uint64_t>();
        run.threshold = config.at("threshold").get<int>();
        run.prompt_digest = config.at("prompt_digest").get<std::string>();
        run.created_at = config.at("created_at").get<std::string>();
        run.config = config.at("config");

        auto resp = read_jsonl(dir / "responses.jsonl");
        auto pred = read_jsonl(dir / "predictions.jsonl");
        const auto& ids = config.at("sample_ids");
        if (resp.size() != ids.size() || pred.size() != ids.size())
            throw Error(ErrorClass::CorruptRecord, "run '" + run_id + "': record count mismatch");
        for (std::size_t i = 0; i < ids.size(); ++i) {
            RunRecord r;
            r.sample_id = ids[i].get<std::string>();
            if (resp[i].at("sample_id") != r.sample_id || pred[i].at("sample_id") != r.sample_id)
                throw Error(ErrorClass::CorruptRecord, "run '" + run_id + "': record order mismatch");
            r.request_digest = resp[i].at("request_digest").get<std::string>();
            r.raw_text = resp[i].at("raw_text").get<std::string>();
            r.latency_ms = resp[i].at("latency_ms").get<std::int64_t>();
            r.attempt_count = resp[i].at("attempt_count").get<int>();
            if (resp[i].contains("transport_error"))
                r.transport_error = resp[i]["transport_error"].get<std::string>();
            r.repair_applied = pred[i].at("repair_applied").get<bool>();
            if (pred[i].contains("parsed")) r.parsed = pred[i]["parsed"];
            if (pred[i].contains("error"))
                r.parse_error = ParseFailure{pred[i]["error"].at("kind").get<std::string>(),
                                             pred[i]["error"].at("message").get<std::string>()};
            if (pred[i].contains("prediction")) {
                const auto& p = pred[i]["prediction"];
                auto label = parse_label(p.at("label").get<std::string>());
                if (!label) throw Error(ErrorClass::CorruptRecord, "run '" + run_id + "': bad label");
                r.prediction = BinaryPrediction{*label, p.at("source_score").get<int>(),
                                                p.at("threshold_used").get<int>()};
            }
            run.records.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorClass::CorruptRecord, "run '" + run_id + "': " + e.what());
    }
    return run;
}

std::vector<std::string> Corpus::list_runs() const {
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(root_ / "runs"))
        if (entry.is_directory() && fs::exists(entry.path() / "config.json"))
            out.push_back(entry.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace srpeval
