#include "enrichkit/config.hpp"
#include "enrichkit/corpus.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/http_clients.hpp"
#include "enrichkit/simulated.hpp"
#include "enrichkit/util.hpp"

#include <cstdlib>

namespace enrichkit {

const std::map<std::string, std::string>& Config::defaults() {
    static const std::map<std::string, std::string> d{
        {"model.endpoint", "simulated"},
        {"model.id", ""},
        {"model.api_key_env", ""},
        {"model.timeout_s", "120"},
        {"model.max_attempts", "3"},
        {"model.seed", "0"},
        {"search.backend", "web"},
        {"search.web.endpoint", ""},
        {"search.vector.endpoint", ""},
        {"search.api_key_env", ""},
        {"search.corpus", ""},
        {"fetch.max_concurrent", "4"},
        {"fetch.per_host_delay_ms", "500"},
        {"fetch.user_agent", "enrichkit/0.1"},
        {"cache.mode", "passthrough"},
        {"cache.path", ""},
        {"pipeline.K", "2"},
        {"pipeline.R_max", "8"},
        {"pipeline.R", "2"},
        {"pipeline.summarize", "false"},
        {"pipeline.evidence_cap", ""},
        {"pipeline.context_budget_tokens", "12000"},
        {"pipeline.max_output_tokens", "4096"},
        {"workers", "4"},
        {"registry.root", ""},
        {"prompts.dir", ""},
        {"dataset.path", ""},
        {"workbench.pool_size", "500"},
        {"workbench.sample_size", "1"},
        {"workbench.seed", "0"},
        {"judge.strict", "false"},
        {"mix.fast_fraction", "0.25"},
        {"mix.min_quality_score", "8"},
        {"mix.length_ceiling_tokens", "300"},
        {"mix.heldout_ratio", "0.05"},
        {"mix.seed", "0"},
        {"mix.system_prompt", ""},
        {"reports.verdicts", ""},
        {"service.host", "127.0.0.1"},
        {"service.port", "8080"},
    };
    return d;
}

namespace {

std::string interpolate(std::string_view value, const Config::EnvLookup& env, int lineno) {
    std::string out;
    for (std::size_t i = 0; i < value.size();) {
        if (value.compare(i, 2, "${") == 0) {
            std::size_t end = value.find('}', i + 2);
            if (end == std::string_view::npos) throw Error(Errc::config, "unterminated ${ on line " + std::to_string(lineno), lineno);
            std::string name(value.substr(i + 2, end - i - 2));
            std::optional<std::string> v;
            if (env) v = env(name);
            else if (const char* e = std::getenv(name.c_str())) v = e;
            if (!v) throw Error(Errc::config, "environment variable " + name + " is not set (line " + std::to_string(lineno) + ")", lineno);
            out += *v;
            i = end + 1;
        } else {
            out += value[i++];
        }
    }
    return out;
}

} // namespace

Config Config::parse(std::string_view text, const EnvLookup& env) {
    Config c;
    int lineno = 0;
    for (const auto& raw : split_lines(text)) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw Error(Errc::config, "line " + std::to_string(lineno) + " is not key = value", lineno);
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = interpolate(trim(std::string_view(line).substr(eq + 1)), env, lineno);
        if (!defaults().count(key)) throw Error(Errc::config, "unknown setting '" + key + "' on line " + std::to_string(lineno), lineno);
        c.values_[key] = value;
    }
    return c;
}

Config Config::load(const std::string& path, const EnvLookup& env) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        throw Error(Errc::config, std::string("cannot read config: ") + e.what());
    }
    return parse(text, env);
}

void Config::set(const std::string& key, const std::string& value) {
    if (!defaults().count(key)) throw Error(Errc::config, "unknown setting '" + key + "'");
    values_[key] = value;
}

void Config::set_assignment(std::string_view assignment) {
    std::size_t eq = assignment.find('=');
    if (eq == std::string_view::npos) throw Error(Errc::config, "override must be key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string Config::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    auto d = defaults().find(key);
    if (d == defaults().end()) throw Error(Errc::config, "unknown setting '" + key + "'");
    return d->second;
}

int Config::get_int(const std::string& key) const {
    std::string v = get(key);
    try {
        std::size_t used = 0;
        int n = std::stoi(v, &used);
        if (used == v.size()) return n;
    } catch (const std::exception&) {
    }
    throw Error(Errc::config, key + " must be an integer, got '" + v + "'");
}

std::uint64_t Config::get_u64(const std::string& key) const {
    std::string v = get(key);
    try {
        std::size_t used = 0;
        auto n = std::stoull(v, &used);
        if (used == v.size() && v.front() != '-') return n;
    } catch (const std::exception&) {
    }
    throw Error(Errc::config, key + " must be a non-negative integer, got '" + v + "'");
}

double Config::get_double(const std::string& key) const {
    std::string v = get(key);
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw Error(Errc::config, key + " must be a number, got '" + v + "'");
}

bool Config::get_bool(const std::string& key) const {
    std::string v = to_lower(get(key));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off" || v.empty()) return false;
    throw Error(Errc::config, key + " must be true or false, got '" + v + "'");
}

nlohmann::json Config::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, d] : defaults()) j[k] = get(k);
    return j;
}

PipelineConfig pipeline_config(const Config& cfg) {
    PipelineConfig p;
    p.K = cfg.get_int("pipeline.K");
    p.R_max = cfg.get_int("pipeline.R_max");
    p.R = cfg.get_int("pipeline.R");
    p.summarize = cfg.get_bool("pipeline.summarize");
    p.evidence_cap = cfg.get("pipeline.evidence_cap").empty() ? p.K * p.R : cfg.get_int("pipeline.evidence_cap");
    p.context_budget_tokens = cfg.get_int("pipeline.context_budget_tokens");
    p.max_output_tokens = cfg.get_int("pipeline.max_output_tokens");
    p.model_id = cfg.get("model.id");
    try {
        p.backend = search_backend_from_string(cfg.get("search.backend"));
        p.validate();
    } catch (const Error& e) {
        throw Error(Errc::config, e.what());
    }
    return p;
}

WorkbenchConfig workbench_config(const Config& cfg) {
    WorkbenchConfig w;
    w.pool_size = cfg.get_int("workbench.pool_size");
    w.sample_size = cfg.get_int("workbench.sample_size");
    w.sampling_seed = cfg.get_u64("workbench.seed");
    try {
        w.validate();
    } catch (const Error& e) {
        throw Error(Errc::config, e.what());
    }
    return w;
}

MixPlan mix_plan(const Config& cfg) {
    MixPlan m;
    m.fast_fraction = cfg.get_double("mix.fast_fraction");
    m.min_quality_score = cfg.get_int("mix.min_quality_score");
    m.length_ceiling_tokens = cfg.get_int("mix.length_ceiling_tokens");
    m.heldout_ratio = cfg.get_double("mix.heldout_ratio");
    m.seed = cfg.get_u64("mix.seed");
    m.system_prompt = cfg.get("mix.system_prompt");
    try {
        m.validate();
    } catch (const Error& e) {
        throw Error(Errc::config, e.what());
    }
    return m;
}

JudgeOptions judge_options(const Config& cfg) {
    JudgeOptions j;
    j.model_id = cfg.get("model.id");
    j.strict = cfg.get_bool("judge.strict");
    return j;
}

std::unique_ptr<Runtime> Runtime::build(const Config& cfg, std::shared_ptr<ChatModel> model_override) {
    auto rt = std::make_unique<Runtime>();
    rt->config = cfg;
    rt->pipeline = pipeline_config(cfg);
    rt->workbench = workbench_config(cfg);
    rt->mix = mix_plan(cfg);
    rt->judge = judge_options(cfg);
    rt->workers = cfg.get_int("workers");
    if (rt->workers <= 0) throw Error(Errc::config, "workers must be positive");

    rt->prompts = std::make_shared<PromptLibrary>();
    if (!cfg.get("prompts.dir").empty()) rt->prompts->load_dir(cfg.get("prompts.dir"));
    rt->judge.prompts = rt->prompts.get();

    CacheMode mode;
    try {
        mode = cache_mode_from_string(cfg.get("cache.mode"));
    } catch (const Error& e) {
        throw Error(Errc::config, e.what());
    }
    if (mode != CacheMode::passthrough && cfg.get("cache.path").empty() && mode == CacheMode::replay_strict)
        throw Error(Errc::config, "cache.mode replay_strict needs cache.path");
    rt->cache = std::make_shared<ReplayCache>(mode, cfg.get("cache.path"));

    HttpOptions http;
    http.timeout = std::chrono::seconds(cfg.get_int("model.timeout_s"));
    http.bearer_token_env = cfg.get("model.api_key_env");
    http.user_agent = cfg.get("fetch.user_agent");

    std::shared_ptr<ChatModel> model = std::move(model_override);
    if (!model) {
        const std::string endpoint = cfg.get("model.endpoint");
        if (endpoint == "simulated") model = make_simulated_model(cfg.get_u64("model.seed"));
        else model = std::make_shared<HttpChatModel>(endpoint, http);
    }
    GatewayOptions gopts;
    gopts.max_attempts = cfg.get_int("model.max_attempts");
    rt->gateway = std::make_shared<Gateway>(model, rt->cache, gopts);

    HttpOptions search_http = http;
    search_http.bearer_token_env = cfg.get("search.api_key_env");
    auto throttle = std::make_shared<RequestThrottle>(cfg.get_int("fetch.max_concurrent"),
                                                      std::chrono::milliseconds(cfg.get_int("fetch.per_host_delay_ms")));
    auto router = std::make_shared<RoutingFetcher>();
    auto web = std::make_shared<HttpFetcher>(http, throttle);
    router->route("http", web);
    router->route("https", web);
    if (!cfg.get("search.corpus").empty()) {
        auto corpus = std::make_shared<LocalCorpus>(LocalCorpus::load(cfg.get("search.corpus")));
        router->route("corpus", corpus);
        rt->gateway->set_search_backend(SearchBackendKind::web, corpus);
        rt->gateway->set_search_backend(SearchBackendKind::vector_store, corpus);
    }
    if (!cfg.get("search.web.endpoint").empty())
        rt->gateway->set_search_backend(SearchBackendKind::web,
                                        std::make_shared<HttpWebSearch>(cfg.get("search.web.endpoint"), search_http, throttle));
    if (!cfg.get("search.vector.endpoint").empty())
        rt->gateway->set_search_backend(SearchBackendKind::vector_store,
                                        std::make_shared<HttpVectorStore>(cfg.get("search.vector.endpoint"), search_http));
    rt->gateway->set_fetcher(router);

    rt->registry = std::make_shared<FormatRegistry>(cfg.get("registry.root"));
    return rt;
}

} // namespace enrichkit
