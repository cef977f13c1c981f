#include "enrichkit/gateway.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/text.hpp"
#include "enrichkit/util.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

namespace enrichkit {

using nlohmann::json;

void CompletionRequest::validate() const {
    if (trim(system_prompt).empty() || trim(user_prompt).empty())
        throw Error(Errc::invalid_argument, "completion prompts must be non-empty");
    if (!std::isfinite(temperature) || temperature < 0.0)
        throw Error(Errc::invalid_argument, "temperature must be finite and >= 0");
    if (max_output_tokens <= 0) throw Error(Errc::invalid_argument, "max_output_tokens must be positive");
}

json canonical_request(const CompletionRequest& req) {
    // nlohmann::json objects are key-sorted, so dump() is canonical.
    return {{"kind", "complete"},
            {"model_id", req.model_id},
            {"system", req.system_prompt},
            {"user", req.user_prompt},
            {"temperature", req.temperature},
            {"max_output_tokens", req.max_output_tokens}};
}

std::string canonical_key(const CompletionRequest& req) { return sha256_hex(canonical_request(req).dump()); }

std::string_view to_string(SearchBackendKind kind) {
    return kind == SearchBackendKind::web ? "web" : "vector_store";
}

SearchBackendKind search_backend_from_string(std::string_view s) {
    if (s == "web") return SearchBackendKind::web;
    if (s == "vector_store" || s == "vector") return SearchBackendKind::vector_store;
    throw Error(Errc::invalid_argument, "unknown search backend '" + std::string(s) + "'");
}

std::string_view to_string(CacheMode mode) {
    switch (mode) {
    case CacheMode::record: return "record";
    case CacheMode::replay_strict: return "replay_strict";
    case CacheMode::passthrough: return "passthrough";
    }
    return "passthrough";
}

CacheMode cache_mode_from_string(std::string_view s) {
    if (s == "record") return CacheMode::record;
    if (s == "replay_strict" || s == "replay") return CacheMode::replay_strict;
    if (s == "passthrough" || s == "off") return CacheMode::passthrough;
    throw Error(Errc::invalid_argument, "unknown cache mode '" + std::string(s) + "'");
}

void RoutingFetcher::route(std::string scheme, std::shared_ptr<DocumentFetcher> fetcher) {
    routes_[std::move(scheme)] = std::move(fetcher);
}

FetchResponse RoutingFetcher::fetch(const std::string& locator) {
    auto colon = locator.find(':');
    std::string scheme = colon == std::string::npos ? "" : to_lower(locator.substr(0, colon));
    auto it = routes_.find(scheme);
    if (it == routes_.end()) return FetchResponse{0, "", "no fetcher for scheme '" + scheme + "'"};
    return it->second->fetch(locator);
}

ReplayCache::ReplayCache(CacheMode mode, std::string path) : mode_(mode), path_(std::move(path)) {
    if (path_.empty() || !std::filesystem::exists(path_)) return;
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            json j = json::parse(line);
            store_.emplace(j.at("hash").get<std::string>(), j.at("response").get<std::string>());
        } catch (const json::exception& e) {
            throw Error(Errc::malformed_line, path_ + ": cache line " + std::to_string(line_no) + ": " + e.what(),
                        line_no);
        }
    }
}

std::size_t ReplayCache::size() const {
    std::shared_lock lock(mu_);
    return store_.size();
}

std::optional<std::string> ReplayCache::lookup(const std::string& key) const {
    std::shared_lock lock(mu_);
    auto it = store_.find(key);
    if (it == store_.end()) return std::nullopt;
    return it->second;
}

void ReplayCache::prime(const std::string& key, std::string response) {
    std::unique_lock lock(mu_);
    store_.emplace(key, std::move(response));
}

void ReplayCache::append_to_file(const std::string& key, const json& request, const std::string& response) {
    if (path_.empty()) return;
    json line = {{"hash", key}, {"request", request}, {"response", response}};
    std::lock_guard lock(file_mu_);
    std::filesystem::path p(path_);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw Error(Errc::io_failure, "cannot append to cache " + path_);
    out << line.dump() << '\n';
}

std::string ReplayCache::resolve(const std::string& key, const json& request,
                                 const std::function<std::string()>& compute) {
    if (mode_ == CacheMode::passthrough) return compute();
    if (auto hit = lookup(key)) return *hit;
    if (mode_ == CacheMode::replay_strict) throw Error(Errc::cache_miss, "replay cache miss for " + key);

    std::promise<std::string> promise;
    std::shared_future<std::string> shared;
    bool owner = false;
    {
        std::lock_guard lock(inflight_mu_);
        auto it = inflight_.find(key);
        if (it != inflight_.end()) {
            shared = it->second;
        } else {
            shared = promise.get_future().share();
            inflight_.emplace(key, shared);
            owner = true;
        }
    }
    if (!owner) return shared.get();

    auto finish = [&] {
        std::lock_guard lock(inflight_mu_);
        inflight_.erase(key);
    };
    try {
        // A concurrent owner may have completed between lookup and registration.
        std::string value;
        if (auto hit = lookup(key)) {
            value = *hit;
        } else {
            value = compute();
            bool inserted;
            {
                std::unique_lock lock(mu_);
                inserted = store_.emplace(key, value).second;
                if (!inserted) value = store_.at(key);
            }
            if (inserted) append_to_file(key, request, value);
        }
        promise.set_value(value);
        finish();
        return value;
    } catch (...) {
        promise.set_exception(std::current_exception());
        finish();
        throw;
    }
}

Gateway::Gateway(std::shared_ptr<ChatModel> model, std::shared_ptr<ReplayCache> cache, GatewayOptions options)
    : model_(std::move(model)),
      cache_(cache ? std::move(cache) : std::make_shared<ReplayCache>()),
      options_(options) {
    if (options_.max_attempts < 1) options_.max_attempts = 1;
}

void Gateway::set_search_backend(SearchBackendKind kind, std::shared_ptr<SearchBackend> backend) {
    backends_[kind] = std::move(backend);
}

void Gateway::set_fetcher(std::shared_ptr<DocumentFetcher> fetcher) { fetcher_ = std::move(fetcher); }

namespace {

bool transient_status(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

} // namespace

std::string Gateway::complete(const CompletionRequest& req) {
    req.validate();
    return cache_->resolve(canonical_key(req), canonical_request(req), [&]() -> std::string {
        if (!model_) throw Error(Errc::upstream_failure, "no chat model configured", 0);
        for (int attempt = 1;; ++attempt) {
            try {
                ++upstream_calls_;
                return model_->complete(req);
            } catch (const Error& e) {
                if (e.code() != Errc::upstream_failure || !transient_status(e.detail()) ||
                    attempt >= options_.max_attempts)
                    throw;
                spdlog::warn("completion attempt {}/{} failed ({}); retrying", attempt, options_.max_attempts,
                             e.what());
                std::this_thread::sleep_for(options_.retry_backoff * attempt);
            }
        }
    });
}

std::vector<SearchResult> Gateway::search(std::string_view query, SearchBackendKind backend, int r_max) {
    if (trim(query).empty()) throw Error(Errc::invalid_argument, "search query must be non-empty");
    if (r_max < 1) throw Error(Errc::invalid_argument, "r_max must be >= 1");
    auto it = backends_.find(backend);
    if (it == backends_.end() || !it->second)
        throw Error(Errc::backend_unavailable, "no " + std::string(to_string(backend)) + " search backend configured");

    json request = {{"kind", "search"}, {"backend", to_string(backend)}, {"query", query}, {"top_k", r_max}};
    std::string payload = cache_->resolve(sha256_hex(request.dump()), request, [&] {
        ++upstream_calls_;
        json arr = json::array();
        for (const auto& r : it->second->search(query, r_max))
            arr.push_back({{"locator", r.locator}, {"title", r.title}});
        return arr.dump();
    });

    std::vector<SearchResult> out;
    for (const auto& item : json::parse(payload)) {
        if (static_cast<int>(out.size()) >= r_max) break;
        SearchResult r;
        r.query = std::string(query);
        r.locator = item.at("locator").get<std::string>();
        r.title = item.value("title", std::string{});
        r.rank = static_cast<int>(out.size()) + 1;
        out.push_back(std::move(r));
    }
    return out;
}

std::string Gateway::fetch_and_extract(const std::string& locator) {
    if (!fetcher_) throw Error(Errc::unparseable, "no document fetcher configured");
    json request = {{"kind", "fetch"}, {"locator", locator}};
    std::string payload = cache_->resolve(sha256_hex(request.dump()), request, [&] {
        ++upstream_calls_;
        FetchResponse resp;
        try {
            resp = fetcher_->fetch(locator);
        } catch (const std::exception& e) {
            resp = FetchResponse{0, "", e.what()};
        }
        return json{{"status", resp.status}, {"content_type", resp.content_type}, {"body", resp.body}}.dump();
    });

    json j = json::parse(payload);
    int status = j.at("status").get<int>();
    if (status < 200 || status >= 300)
        throw Error(Errc::unparseable, locator + ": HTTP status " + std::to_string(status), status);
    std::string body = j.at("body").get<std::string>();
    std::string content_type = j.value("content_type", std::string{});
    std::string text = looks_like_markup(body, content_type) ? html_to_text(body) : body;
    if (trim(text).empty()) throw Error(Errc::unparseable, locator + ": no extractable text", status);
    if (looks_bot_blocked(text)) throw Error(Errc::unparseable, locator + ": blocked for automated access", status);
    return text;
}

} // namespace enrichkit
