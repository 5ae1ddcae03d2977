#include "srpeval/service.hpp"

#include <atomic>
#include <fstream>
#include <mutex>

#include <httplib.h>

#include "srpeval/digest.hpp"
#include "srpeval/error.hpp"
#include "srpeval/report.hpp"

namespace srpeval {

namespace fs = std::filesystem;
using nlohmann::json;

bool is_loopback_host(const std::string& host) {
    return host == "127.0.0.1" || host == "localhost" || host == "::1";
}

json to_json(const ConsensusLabel& c) {
    json drivers = json::object();
    for (std::size_t i = 0; i < kDriverCount; ++i)
        drivers[std::string(kDriverCatalog[i].name)] = c.driver_counts[i];
    return {{"sample_id", c.sample_id},
            {"label", std::string(to_string(c.label))},
            {"complex_votes", c.complex_votes},
            {"total_votes", c.total_votes},
            {"unanimity", c.unanimity},
            {"tied", c.tied},
            {"driver_counts", drivers}};
}

namespace {

std::string_view verdict_name(ReviewVerdict v) {
    return v == ReviewVerdict::ConfirmedGap ? "confirmed-gap" : "annotation-suspect";
}

int http_status(ErrorClass c) {
    switch (c) {
        case ErrorClass::NotFound:
        case ErrorClass::MissingPrerequisite: return 404;
        case ErrorClass::Duplicate: return 409;
        case ErrorClass::Validation:
        case ErrorClass::InvalidArgument:
        case ErrorClass::Parse: return 422;
        case ErrorClass::Config: return 403;
        default: return 500;
    }
}

json error_body(ErrorClass c, const std::string& msg) {
    return {{"error", std::string(error_class_name(c))}, {"message", msg}};
}

}  // namespace

json to_json(const ReviewNote& r) {
    return {{"run_id", r.run_id},
            {"sample_id", r.sample_id},
            {"verdict", std::string(verdict_name(r.verdict))},
            {"reviewer", r.reviewer},
            {"note", r.note},
            {"submitted_at", r.submitted_at}};
}

struct AnnotationService::Impl {
    Corpus& corpus;
    ServiceOptions options;
    httplib::Server server;
    std::mutex write_mu;
    std::atomic<bool> running{false};
    int bound_port = -1;

    Impl(Corpus& c, ServiceOptions o) : corpus(c), options(std::move(o)) {}

    fs::path reviews_path(const std::string& run_id) const {
        return corpus.root() / "reviews" / (run_id + ".jsonl");
    }
};

AnnotationService::AnnotationService(Corpus& corpus, ServiceOptions options)
    : impl_(std::make_unique<Impl>(corpus, std::move(options))) {
    auto& opt = impl_->options;
    if (!is_loopback_host(opt.host) && (!opt.token || opt.token->empty()))
        throw Error(ErrorClass::Config, "binding to " + opt.host + " requires a shared token");
    if (opt.token && opt.token->empty()) opt.token.reset();

    auto& svr = impl_->server;
    auto guard = [this](auto&& fn) {
        return [this, fn](const httplib::Request& req, httplib::Response& res) {
            const auto& token = impl_->options.token;
            if (token && req.get_header_value(kTokenHeader) != *token) {
                res.status = 401;
                res.set_content(error_body(ErrorClass::AuthFailure, "missing or wrong token").dump(), "application/json");
                return;
            }
            try {
                fn(req, res);
            } catch (const Error& e) {
                res.status = http_status(e.error_class());
                res.set_content(error_body(e.error_class(), e.what()).dump(), "application/json");
            } catch (const json::exception& e) {
                res.status = 422;
                res.set_content(error_body(ErrorClass::Validation, e.what()).dump(), "application/json");
            }
        };
    };
    auto send = [](httplib::Response& res, const json& body, int status = 200) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    };

    svr.Get("/api/samples", guard([this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, list_samples(req.get_param_value("status"), req.get_param_value("annotator")));
            }));
    svr.Get(R"(/api/samples/([^/]+))", guard([this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, sample_detail(req.matches[1]));
            }));
    svr.Get(R"(/api/samples/([^/]+)/image/(\d+))",
            guard([this](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                const auto sample = impl_->corpus.find_sample(id);
                if (!sample) throw Error(ErrorClass::NotFound, "unknown sample '" + id + "'");
                const std::size_t k = std::stoul(req.matches[2]);
                if (k >= sample->screenshots.size())
                    throw Error(ErrorClass::NotFound, "sample '" + id + "' has no screenshot " + std::to_string(k));
                const auto& ref = sample->screenshots[k];
                const auto bytes = read_file_bytes(impl_->corpus.image_path(ref));
                res.set_content(std::string(bytes.begin(), bytes.end()), std::string(mime_type(ref.media_type)));
            }));
    svr.Post(R"(/api/samples/([^/]+)/annotations)",
             guard([this, send](const httplib::Request& req, httplib::Response& res) {
                 json body;
                 try {
                     body = json::parse(req.body);
                 } catch (const json::exception& e) {
                     throw Error(ErrorClass::Validation, std::string("body is not valid JSON: ") + e.what());
                 }
                 const std::string ow = req.get_param_value("overwrite");
                 send(res, post_annotation(req.matches[1], body, ow == "1" || ow == "true"), 201);
             }));
    svr.Get(R"(/api/samples/([^/]+)/consensus)",
            guard([this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, consensus(req.matches[1]));
            }));
    svr.Get(R"(/api/runs/([^/]+)/failures)", guard([this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, run_failures(req.matches[1]));
            }));
    svr.Get(R"(/api/runs/([^/]+)/reviews)", guard([this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, reviews(req.matches[1]));
            }));
    svr.Post(R"(/api/runs/([^/]+)/reviews)", guard([this, send](const httplib::Request& req, httplib::Response& res) {
                 json body;
                 try {
                     body = json::parse(req.body);
                 } catch (const json::exception& e) {
                     throw Error(ErrorClass::Validation, std::string("body is not valid JSON: ") + e.what());
                 }
                 send(res, post_review(req.matches[1], body), 201);
             }));

    if (!impl_->options.static_dir.empty()) {
        if (!svr.set_mount_point("/", impl_->options.static_dir.string()))
            throw Error(ErrorClass::Config, "static dir does not exist: " + impl_->options.static_dir.string());
    }
}

AnnotationService::~AnnotationService() { stop(); }

int AnnotationService::bind() {
    auto& opt = impl_->options;
    int port = opt.port == 0 ? impl_->server.bind_to_any_port(opt.host)
                             : (impl_->server.bind_to_port(opt.host, opt.port) ? opt.port : -1);
    if (port < 0) throw Error(ErrorClass::Io, "cannot bind " + opt.host + ":" + std::to_string(opt.port));
    impl_->bound_port = port;
    return port;
}

void AnnotationService::run() {
    if (impl_->bound_port < 0) bind();
    impl_->running = true;
    impl_->server.listen_after_bind();
    impl_->running = false;
}

void AnnotationService::stop() {
    if (impl_) impl_->server.stop();
}

bool AnnotationService::running() const { return impl_->server.is_running(); }

json AnnotationService::list_samples(const std::string& status, const std::string& annotator) const {
    if (!status.empty() && status != "pending" && status != "done")
        throw Error(ErrorClass::InvalidArgument, "status must be pending or done");
    const auto annotations = impl_->corpus.annotations();
    json out = json::array();
    for (const auto& s : impl_->corpus.samples()) {
        int count = 0;
        bool mine = false;
        for (const auto& a : annotations) {
            if (a.sample_id != s.id) continue;
            ++count;
            mine = mine || a.annotator_id == annotator;
        }
        const bool done = annotator.empty() ? count > 0 : mine;
        if ((status == "pending" && done) || (status == "done" && !done)) continue;
        out.push_back({{"id", s.id},
                       {"query", s.query},
                       {"category", std::string(to_string(s.category))},
                       {"screenshot_count", s.screenshots.size()},
                       {"annotation_count", count}});
    }
    return out;
}

json AnnotationService::sample_detail(const std::string& id) const {
    const auto sample = impl_->corpus.find_sample(id);
    if (!sample) throw Error(ErrorClass::NotFound, "unknown sample '" + id + "'");
    json j = to_json(*sample);
    json urls = json::array();
    for (std::size_t k = 0; k < sample->screenshots.size(); ++k)
        urls.push_back("/api/samples/" + id + "/image/" + std::to_string(k));
    j["image_urls"] = urls;
    j["annotation_count"] = impl_->corpus.annotations_for(id).size();
    return j;
}

json AnnotationService::post_annotation(const std::string& id, const json& body, bool overwrite) {
    if (!body.is_object()) throw Error(ErrorClass::Validation, "annotation must be a JSON object");
    json j = body;
    if (j.contains("sample_id") && j["sample_id"] != id)
        throw Error(ErrorClass::Validation, "body sample_id does not match the URL");
    j["sample_id"] = id;
    if (!impl_->corpus.find_sample(id)) throw Error(ErrorClass::NotFound, "unknown sample '" + id + "'");
    const Annotation a = annotation_from_json(j);
    std::lock_guard lock(impl_->write_mu);
    const auto stored = impl_->corpus.store_annotation(a, overwrite);
    return {{"annotation", to_json(stored)}, {"consensus", to_json(impl_->corpus.consensus(id))}};
}

json AnnotationService::consensus(const std::string& id) const {
    if (!impl_->corpus.find_sample(id)) throw Error(ErrorClass::NotFound, "unknown sample '" + id + "'");
    return to_json(impl_->corpus.consensus(id));
}

json AnnotationService::run_failures(const std::string& run_id) const {
    const auto runs = impl_->corpus.list_runs();
    if (std::find(runs.begin(), runs.end(), run_id) == runs.end())
        throw Error(ErrorClass::NotFound, "unknown run '" + run_id + "'");
    const auto run = impl_->corpus.load_run(run_id);
    const auto truth = impl_->corpus.ground_truth(impl_->options.ground_truth);
    return failures_json(failure_queue(run, truth, impl_->corpus.samples()));
}

json AnnotationService::post_review(const std::string& run_id, const json& body) {
    const auto runs = impl_->corpus.list_runs();
    if (std::find(runs.begin(), runs.end(), run_id) == runs.end())
        throw Error(ErrorClass::NotFound, "unknown run '" + run_id + "'");
    if (!body.is_object()) throw Error(ErrorClass::Validation, "review must be a JSON object");
    ReviewNote r;
    r.run_id = run_id;
    auto str = [&](const char* key, bool required) {
        auto it = body.find(key);
        if (it == body.end()) {
            if (required) throw Error(ErrorClass::Validation, std::string("review: missing '") + key + "'");
            return std::string();
        }
        if (!it->is_string()) throw Error(ErrorClass::Validation, std::string("review: '") + key + "' must be a string");
        return it->get<std::string>();
    };
    r.sample_id = str("sample_id", true);
    const std::string verdict = str("verdict", true);
    if (verdict == "confirmed-gap")
        r.verdict = ReviewVerdict::ConfirmedGap;
    else if (verdict == "annotation-suspect")
        r.verdict = ReviewVerdict::AnnotationSuspect;
    else
        throw Error(ErrorClass::Validation, "review: verdict must be confirmed-gap or annotation-suspect");
    r.reviewer = str("reviewer", false);
    r.note = str("note", false);
    r.submitted_at = utc_now_iso8601();
    if (!impl_->corpus.find_sample(r.sample_id))
        throw Error(ErrorClass::NotFound, "unknown sample '" + r.sample_id + "'");

    std::lock_guard lock(impl_->write_mu);
    const auto path = impl_->reviews_path(run_id);
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorClass::Io, "cannot append to " + path.string());
    out << to_json(r).dump() << "\n";
    return to_json(r);
}

json AnnotationService::reviews(const std::string& run_id) const {
    const auto runs = impl_->corpus.list_runs();
    if (std::find(runs.begin(), runs.end(), run_id) == runs.end())
        throw Error(ErrorClass::NotFound, "unknown run '" + run_id + "'");
    json out = json::array();
    const auto path = impl_->reviews_path(run_id);
    std::lock_guard lock(impl_->write_mu);
    if (!fs::exists(path)) return out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

}  // namespace srpeval
