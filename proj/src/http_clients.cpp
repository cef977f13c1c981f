#include <httplib.h>

#include "enrichkit/error.hpp"
#include "enrichkit/http_clients.hpp"
#include "enrichkit/util.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <thread>

namespace enrichkit {

using nlohmann::json;

std::string Url::origin() const { return scheme + "://" + host + ":" + std::to_string(port); }

Url parse_url(const std::string& url) {
    Url u;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(Errc::invalid_argument, "URL lacks a scheme: " + url);
    u.scheme = to_lower(url.substr(0, scheme_end));
    if (u.scheme != "http" && u.scheme != "https") throw Error(Errc::invalid_argument, "unsupported scheme: " + url);
    std::string rest = url.substr(scheme_end + 3);
    auto slash = rest.find('/');
    std::string authority = rest.substr(0, slash);
    u.path = slash == std::string::npos ? "/" : rest.substr(slash);
    auto colon = authority.rfind(':');
    if (colon != std::string::npos && authority.find(']') == std::string::npos) {
        u.host = authority.substr(0, colon);
        u.port = std::stoi(authority.substr(colon + 1));
    } else {
        u.host = authority;
        u.port = u.scheme == "https" ? 443 : 80;
    }
    if (u.host.empty()) throw Error(Errc::invalid_argument, "URL lacks a host: " + url);
    return u;
}

RequestThrottle::RequestThrottle(int max_concurrent, std::chrono::milliseconds per_host_delay)
    : max_concurrent_(max_concurrent < 1 ? 1 : max_concurrent), delay_(per_host_delay) {}

RequestThrottle::Slot::~Slot() {
    if (owner_) owner_->release();
}

RequestThrottle::Slot RequestThrottle::acquire(const std::string& host) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return active_ < max_concurrent_; });
    ++active_;
    auto now = std::chrono::steady_clock::now();
    auto& next = next_allowed_[host];
    auto start = next > now ? next : now;
    next = start + delay_;
    lock.unlock();
    std::this_thread::sleep_until(start);
    return Slot(this);
}

void RequestThrottle::release() {
    {
        std::lock_guard lock(mu_);
        --active_;
    }
    cv_.notify_one();
}

std::string bearer_token_from_env(const std::string& env_name) {
    if (env_name.empty()) return {};
    const char* v = std::getenv(env_name.c_str());
    return v ? std::string(v) : std::string{};
}

namespace {

httplib::Client make_client(const Url& url, const HttpOptions& options) {
    httplib::Client cli(url.origin());
    cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(options.timeout).count(), 0);
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(options.timeout).count(), 0);
    cli.set_follow_location(true);
    std::string token = bearer_token_from_env(options.bearer_token_env);
    if (!token.empty()) cli.set_bearer_token_auth(token);
    return cli;
}

httplib::Headers base_headers(const HttpOptions& options) { return {{"User-Agent", options.user_agent}}; }

Error upstream_error(const std::string& what, const httplib::Result& res) {
    if (!res) return Error(Errc::upstream_failure, what + ": " + httplib::to_string(res.error()), 0);
    return Error(Errc::upstream_failure, what + ": HTTP " + std::to_string(res->status), res->status);
}

} // namespace

HttpChatModel::HttpChatModel(std::string endpoint_url, HttpOptions options)
    : url_(parse_url(endpoint_url)), options_(std::move(options)) {}

std::string HttpChatModel::complete(const CompletionRequest& req) {
    json body = {{"model", req.model_id},
                 {"temperature", req.temperature},
                 {"max_tokens", req.max_output_tokens},
                 {"messages",
                  json::array({{{"role", "system"}, {"content", req.system_prompt}},
                               {{"role", "user"}, {"content", req.user_prompt}}})}};
    auto cli = make_client(url_, options_);
    auto res = cli.Post(url_.path, base_headers(options_), body.dump(), "application/json");
    if (!res || res->status != 200) throw upstream_error("chat completion", res);
    try {
        json j = json::parse(res->body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw Error(Errc::upstream_failure, "chat completion: content is not text", 200);
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw Error(Errc::upstream_failure, std::string("chat completion: malformed body: ") + e.what(), 200);
    }
}

HttpWebSearch::HttpWebSearch(std::string endpoint_url, HttpOptions options, std::shared_ptr<RequestThrottle> throttle)
    : url_(parse_url(endpoint_url)), options_(std::move(options)), throttle_(std::move(throttle)) {}

std::vector<SearchResult> HttpWebSearch::search(std::string_view query, int top_k) {
    std::optional<RequestThrottle::Slot> slot;
    if (throttle_) slot.emplace(throttle_->acquire(url_.host));
    auto cli = make_client(url_, options_);
    httplib::Params params = {{"q", std::string(query)}, {"count", std::to_string(top_k)}};
    auto res = cli.Get(url_.path, params, base_headers(options_));
    if (!res || res->status != 200)
        throw Error(Errc::backend_unavailable,
                    "web search unavailable: " + (res ? "HTTP " + std::to_string(res->status)
                                                      : httplib::to_string(res.error())));
    std::vector<SearchResult> out;
    try {
        json parsed = json::parse(res->body);
        for (const auto& item : parsed.at("results")) {
            SearchResult r;
            r.query = std::string(query);
            r.locator = item.at("url").get<std::string>();
            r.title = item.value("title", std::string{});
            r.rank = static_cast<int>(out.size()) + 1;
            out.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw Error(Errc::backend_unavailable, std::string("web search returned malformed body: ") + e.what());
    }
    return out;
}

HttpVectorStore::HttpVectorStore(std::string endpoint_url, HttpOptions options)
    : url_(parse_url(endpoint_url)), options_(std::move(options)) {}

std::vector<SearchResult> HttpVectorStore::search(std::string_view query, int top_k) {
    auto cli = make_client(url_, options_);
    json body = {{"query", query}, {"top_k", top_k}};
    auto res = cli.Post(url_.path, base_headers(options_), body.dump(), "application/json");
    if (!res || res->status != 200)
        throw Error(Errc::backend_unavailable,
                    "vector store unavailable: " + (res ? "HTTP " + std::to_string(res->status)
                                                        : httplib::to_string(res.error())));
    std::vector<SearchResult> out;
    try {
        json parsed = json::parse(res->body);
        for (const auto& doc : parsed.at("documents")) {
            SearchResult r;
            r.query = std::string(query);
            r.locator = doc.at("id").get<std::string>();
            r.title = doc.value("title", std::string{});
            r.rank = static_cast<int>(out.size()) + 1;
            out.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw Error(Errc::backend_unavailable, std::string("vector store returned malformed body: ") + e.what());
    }
    return out;
}

HttpFetcher::HttpFetcher(HttpOptions options, std::shared_ptr<RequestThrottle> throttle)
    : options_(std::move(options)), throttle_(std::move(throttle)) {}

FetchResponse HttpFetcher::fetch(const std::string& locator) {
    Url url;
    try {
        url = parse_url(locator);
    } catch (const Error& e) {
        return FetchResponse{0, "", e.what()};
    }
    std::optional<RequestThrottle::Slot> slot;
    if (throttle_) slot.emplace(throttle_->acquire(url.host));
    httplib::Client cli(url.origin());
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout).count();
    cli.set_connection_timeout(secs, 0);
    cli.set_read_timeout(secs, 0);
    cli.set_follow_location(true);
    auto res = cli.Get(url.path, base_headers(options_));
    if (!res) return FetchResponse{0, "", httplib::to_string(res.error())};
    return FetchResponse{res->status, res->get_header_value("Content-Type"), res->body};
}

} // namespace enrichkit
