#include "enrichkit/service.hpp"
#include "enrichkit/enrichment.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/eval.hpp"
#include "enrichkit/format_registry.hpp"
#include "enrichkit/judge.hpp"
#include "enrichkit/util.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <regex>

namespace enrichkit {

using json = nlohmann::json;

int http_status_for(Errc code) {
    switch (code) {
    case Errc::invalid_argument:
    case Errc::malformed_line:
    case Errc::malformed_item:
    case Errc::unknown_kind:
    case Errc::config:
    case Errc::empty_pool:
        return 400;
    case Errc::unknown_task:
    case Errc::unknown_task_name:
    case Errc::missing_file:
    case Errc::empty_input:
        return 404;
    case Errc::version_conflict:
        return 409;
    case Errc::upstream_failure:
    case Errc::cache_miss:
    case Errc::backend_unavailable:
        return 502;
    default:
        return 422;
    }
}

json error_body(const Error& e) {
    return {{"error", std::string(to_string(e.code()))}, {"message", e.what()}, {"detail", e.detail()}};
}

struct WorkbenchService::Server {
    httplib::Server http;
};

WorkbenchService::WorkbenchService(Runtime& runtime, std::vector<InstructionRecord> records)
    : rt_(runtime), records_(std::move(records)) {
    for (std::size_t i = 0; i < records_.size(); ++i) by_id_[records_[i].id] = i;
}

const InstructionRecord* WorkbenchService::find_record(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &records_[it->second];
}

std::vector<InstructionRecord> WorkbenchService::task_records(const std::string& task) const {
    std::vector<InstructionRecord> out;
    for (const auto& r : records_)
        if (r.task_name == task) out.push_back(r);
    return out;
}

namespace {

json task_json(const TaskSpec& t, std::size_t count) {
    json j = to_json(t);
    j["record_count"] = count;
    return j;
}

template <typename T>
T field(const json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        throw Error(Errc::invalid_argument, std::string("field '") + key + "' has the wrong type");
    }
}

} // namespace

HttpReply WorkbenchService::list_tasks() {
    json tasks = json::array();
    for (const auto& t : rt_.registry->current()) tasks.push_back(task_json(t, task_records(t.name).size()));
    return {200, {{"tasks", tasks}}};
}

HttpReply WorkbenchService::sample(const std::string& task, const json& req) {
    TaskSpec spec = rt_.registry->load(task);
    WorkbenchConfig cfg = rt_.workbench;
    cfg.sample_size = field<int>(req, "k", cfg.sample_size);
    cfg.sampling_seed = field<std::uint64_t>(req, "seed", cfg.sampling_seed);
    cfg.pool_size = field<int>(req, "pool_size", cfg.pool_size);
    auto pool = task_records(task);
    auto picked = sample_examples(spec, pool, cfg);
    json ex = json::array();
    for (const auto& r : picked) ex.push_back(to_json(r));
    return {200, {{"task", task}, {"pool_size", std::min<std::size_t>(pool.size(), static_cast<std::size_t>(cfg.pool_size))},
                  {"examples", ex}}};
}

HttpReply WorkbenchService::generate_format(const json& req) {
    std::string description = field<std::string>(req, "task_description", "");
    std::string name = field<std::string>(req, "task_name", "");
    if (description.empty() && !name.empty()) description = rt_.registry->load(name).description;
    if (trim(description).empty()) throw Error(Errc::invalid_argument, "task_description is required");
    std::vector<InstructionRecord> examples;
    for (const auto& id : field<std::vector<std::string>>(req, "example_ids", {})) {
        const auto* r = find_record(id);
        if (!r) throw Error(Errc::invalid_argument, "unknown example id " + id);
        examples.push_back(*r);
    }
    CandidateOptions opts;
    opts.model_id = rt_.pipeline.model_id;
    opts.prompts = rt_.prompts.get();
    if (!name.empty() && rt_.registry->contains(name)) opts.current_version = rt_.registry->versions(name).back();
    auto fmt = generate_candidate(description, examples, field<std::string>(req, "prompt_kind", "specific"),
                                  *rt_.gateway, opts);
    return {200, {{"format", to_json(fmt)}}};
}

HttpReply WorkbenchService::put_format(const std::string& task, const json& req) {
    if (!req.is_object()) throw Error(Errc::invalid_argument, "body must be a JSON object");
    FormatTemplate fmt;
    try {
        fmt = format_from_json(req.contains("format") ? req["format"] : req);
    } catch (const json::exception& e) {
        throw Error(Errc::invalid_argument, std::string("format: ") + e.what());
    }
    if (!req.contains("provenance") && !(req.contains("format") && req["format"].contains("provenance")))
        fmt.provenance = Provenance::expert_edited;
    fmt.version = field<int>(req, "version", fmt.version);
    fmt.validate();

    TaskSpec spec;
    if (rt_.registry->contains(task)) {
        spec = rt_.registry->load(task);
        int latest = spec.format.version;
        // Replaying the request that created the latest version is a no-op.
        if (fmt.version == latest && rt_.registry->load(task, latest).format.steps == fmt.steps)
            return {200, {{"task", task_json(spec, task_records(task).size())}, {"version", latest}}};
    } else {
        spec.name = task;
    }
    spec.description = field<std::string>(req, "description", spec.description);
    spec.requires_search = field<bool>(req, "requires_search", spec.requires_search);
    spec.requires_grounding_doc = field<bool>(req, "requires_grounding_doc", spec.requires_grounding_doc);
    spec.format = fmt;
    spec.validate();
    int v = rt_.registry->save(spec);
    return {200, {{"task", task_json(rt_.registry->load(task, v), task_records(task).size())}, {"version", v}}};
}

HttpReply WorkbenchService::get_format(const std::string& task, const std::map<std::string, std::string>& query) {
    TaskSpec spec;
    if (auto it = query.find("version"); it != query.end()) {
        int v = 0;
        try {
            v = std::stoi(it->second);
        } catch (const std::exception&) {
            throw Error(Errc::invalid_argument, "version must be an integer");
        }
        spec = rt_.registry->load(task, v);
    } else {
        spec = rt_.registry->load(task);
    }
    return {200, {{"task", task_json(spec, task_records(task).size())}, {"versions", rt_.registry->versions(task)}}};
}

HttpReply WorkbenchService::run_pipeline(const json& req) {
    if (!req.is_object()) throw Error(Errc::invalid_argument, "body must be a JSON object");
    InstructionRecord record;
    if (req.contains("record") && req["record"].is_object()) {
        json r = req["record"];
        if (!r.contains("id")) r["id"] = "inline";
        if (!r.contains("origin")) r["origin"] = "seed_original";
        try {
            record = record_from_json(r);
        } catch (const Error& e) {
            throw Error(Errc::invalid_argument, e.what());
        }
    } else {
        std::string id = field<std::string>(req, "record_id", "");
        const auto* r = find_record(id);
        if (!r) throw Error(Errc::invalid_argument, "unknown record id '" + id + "'");
        record = *r;
    }
    std::string task_name = field<std::string>(req, "task_name", record.task_name);
    TaskSpec task = req.contains("format_version") ? rt_.registry->load(task_name, req["format_version"].get<int>())
                                                   : rt_.registry->load(task_name);
    record.task_name = task.name;
    record.origin = Origin::seed_original;

    PipelineConfig cfg = rt_.pipeline;
    json ov = req.contains("overrides") ? req["overrides"] : json::object();
    task.requires_search = field<bool>(ov, "web_search", task.requires_search);
    int k = field<int>(ov, "K", cfg.K), r = field<int>(ov, "R", cfg.R);
    cfg.R_max = field<int>(ov, "R_max", cfg.R_max);
    if (k != cfg.K || r != cfg.R) cfg.evidence_cap = k * r;
    cfg.K = k;
    cfg.R = r;
    cfg.summarize = field<bool>(ov, "summarize", cfg.summarize);
    if (ov.contains("grounding_doc") && ov["grounding_doc"].is_string()) record.grounding_doc = ov["grounding_doc"].get<std::string>();
    cfg.validate();

    auto enriched = enrich_record(record, task, cfg, *rt_.gateway, *rt_.prompts);
    auto verdict = judge_readability(record.instruction, record.response, enriched.rewritten_response, *rt_.gateway, rt_.judge);
    int fact = judge_factuality(record.response, enriched.rewritten_response, *rt_.gateway, rt_.judge);

    json body{{"record_id", record.id},
              {"task", task.name},
              {"format_version", task.format.version},
              {"grounding_mode", std::string(to_string(enriched.grounding_mode))},
              {"rewritten_response", enriched.rewritten_response},
              {"readability",
               {{"order1", std::string(to_string(verdict.order1))},
                {"order2", std::string(to_string(verdict.order2))},
                {"outcome", std::string(to_string(verdict.outcome))}}},
              {"factuality", fact}};
    if (field<bool>(req, "return_evidence", false)) {
        json ev = json::array();
        for (const auto& d : enriched.evidence)
            ev.push_back({{"query", d.source_query},
                          {"locator", d.locator},
                          {"title", d.title},
                          {"rank", d.rank},
                          {"truncated", d.truncated},
                          {"text", d.text}});
        body["evidence"] = ev;
    }
    return {200, body};
}

HttpReply WorkbenchService::quality_report() {
    std::string path = rt_.config.get("reports.verdicts");
    if (path.empty()) throw Error(Errc::empty_input, "no verdict file configured (reports.verdicts)");
    auto verdicts = load_verdicts(path);
    auto report = aggregate_quality(verdicts);
    std::map<std::string, TaskFlags> flags;
    for (const auto& t : rt_.registry->current()) flags[t.name] = {t.requires_search, t.requires_grounding_doc};
    json body = to_json(report);
    json f = json::object();
    for (const auto& [name, fl] : flags)
        f[name] = {{"requires_search", fl.requires_search}, {"requires_grounding_doc", fl.requires_grounding_doc}};
    body["flags"] = f;
    body["table"] = render_quality_table(report, flags);
    return {200, body};
}

HttpReply WorkbenchService::run_eval(const json& req) {
    std::vector<BenchmarkItem> items;
    if (req.contains("items") && req["items"].is_array()) {
        for (const auto& j : req["items"]) items.push_back(benchmark_item_from_json(j));
    } else {
        std::string path = field<std::string>(req, "benchmark", "");
        if (path.empty()) throw Error(Errc::invalid_argument, "give either items or a benchmark path");
        items = load_benchmark(path);
    }
    EvalPromptTemplate tmpl = EvalPromptTemplate::builtin();
    if (req.contains("template") && req["template"].is_string()) tmpl = EvalPromptTemplate::parse(req["template"].get<std::string>());

    EvalRunOptions opts;
    opts.model_id = field<std::string>(req, "model_id", rt_.pipeline.model_id);
    opts.workers = rt_.workers;
    std::vector<Prediction> preds;
    std::string oracle = field<std::string>(req, "oracle", "");
    if (!oracle.empty()) {
        Gateway gw(make_oracle_model(items, oracle, field<std::uint64_t>(req, "seed", 0)),
                   std::make_shared<ReplayCache>(CacheMode::passthrough));
        preds = run_model(items, tmpl, gw, opts);
    } else {
        preds = run_model(items, tmpl, *rt_.gateway, opts);
    }
    auto report = score(items, preds, field<std::string>(req, "name", "benchmark"));
    json body = to_json(report);
    body["table"] = render_eval_table(report);
    return {200, body};
}

HttpReply WorkbenchService::handle(const std::string& method, const std::string& path, const std::string& body,
                                   const std::map<std::string, std::string>& query) {
    static const std::regex sample_re(R"(^/tasks/([A-Za-z0-9_.-]+)/sample$)");
    static const std::regex format_re(R"(^/formats/([A-Za-z0-9_.-]+)$)");
    try {
        json req = json::object();
        if (!trim(body).empty()) {
            try {
                req = json::parse(body);
            } catch (const json::exception&) {
                throw Error(Errc::invalid_argument, "request body is not valid JSON");
            }
        }
        std::smatch m;
        if (method == "GET" && path == "/tasks") return list_tasks();
        if (method == "POST" && std::regex_match(path, m, sample_re)) return sample(m[1], req);
        if (method == "POST" && path == "/formats/generate") return generate_format(req);
        if (method == "PUT" && std::regex_match(path, m, format_re)) return put_format(m[1], req);
        if (method == "GET" && std::regex_match(path, m, format_re)) return get_format(m[1], query);
        if (method == "POST" && path == "/pipeline/run") return run_pipeline(req);
        if (method == "GET" && path == "/reports/quality") return quality_report();
        if (method == "POST" && path == "/eval/run") return run_eval(req);
        return {404, {{"error", "NotFound"}, {"message", method + " " + path + " is not an endpoint"}, {"detail", 0}}};
    } catch (const Error& e) {
        return {http_status_for(e.code()), error_body(e)};
    } catch (const std::exception& e) {
        spdlog::error("{} {} failed: {}", method, path, e.what());
        return {500, {{"error", "Internal"}, {"message", e.what()}, {"detail", 0}}};
    }
}

void WorkbenchService::serve(const std::string& host, int port, const std::function<void(int)>& on_ready) {
    server_ = std::make_shared<Server>();
    auto& srv = server_->http;
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> query;
        for (const auto& [k, v] : req.params) query[k] = v;
        auto reply = handle(req.method, req.path, req.body, query);
        res.status = reply.status;
        res.set_content(reply.body.dump(), "application/json");
    };
    srv.Get(".*", route);
    srv.Post(".*", route);
    srv.Put(".*", route);
    int bound = port;
    if (port == 0) {
        bound = srv.bind_to_any_port(host);
    } else if (!srv.bind_to_port(host, port)) {
        throw Error(Errc::config, "cannot bind " + host + ":" + std::to_string(port));
    }
    if (bound < 0) throw Error(Errc::config, "cannot bind " + host);
    spdlog::info("workbench service listening on {}:{}", host, bound);
    if (on_ready) on_ready(bound);
    srv.listen_after_bind();
}

void WorkbenchService::stop() {
    if (server_) server_->http.stop();
}

} // namespace enrichkit
