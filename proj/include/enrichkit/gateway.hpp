#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace enrichkit {

struct CompletionRequest {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.0;
    int max_output_tokens = 2048;
    std::string model_id;
    // Stage label ("judge.readability", "eval:<item id>", ...). Not part of the
    // cache key; scripted models dispatch on it.
    std::string tag;

    void validate() const;
};

// Hash over the semantic fields only (prompts, temperature, token limit, model).
std::string canonical_key(const CompletionRequest& req);
nlohmann::json canonical_request(const CompletionRequest& req);

class ChatModel {
public:
    virtual ~ChatModel() = default;
    // Throws Error(upstream_failure, ..., status) on transport or HTTP failure.
    virtual std::string complete(const CompletionRequest& req) = 0;
};

// Adapts a callable; used by tests, the Python binding and oracle models.
class FunctionChatModel : public ChatModel {
public:
    using Fn = std::function<std::string(const CompletionRequest&)>;
    explicit FunctionChatModel(Fn fn) : fn_(std::move(fn)) {}
    std::string complete(const CompletionRequest& req) override { return fn_(req); }

private:
    Fn fn_;
};

enum class SearchBackendKind { web, vector_store };

std::string_view to_string(SearchBackendKind kind);
SearchBackendKind search_backend_from_string(std::string_view s);

struct SearchResult {
    std::string query;
    std::string locator;
    std::string title;
    int rank = 0;

    bool operator==(const SearchResult&) const = default;
};

class SearchBackend {
public:
    virtual ~SearchBackend() = default;
    // Results in rank order; throws Error(backend_unavailable) when the backend
    // cannot be reached.
    virtual std::vector<SearchResult> search(std::string_view query, int top_k) = 0;
};

struct FetchResponse {
    int status = 0; // 0 = transport failure
    std::string content_type;
    std::string body;
};

class DocumentFetcher {
public:
    virtual ~DocumentFetcher() = default;
    virtual FetchResponse fetch(const std::string& locator) = 0;
};

// Dispatches on the locator scheme ("https", "corpus", ...).
class RoutingFetcher : public DocumentFetcher {
public:
    void route(std::string scheme, std::shared_ptr<DocumentFetcher> fetcher);
    FetchResponse fetch(const std::string& locator) override;

private:
    std::map<std::string, std::shared_ptr<DocumentFetcher>> routes_;
};

enum class CacheMode { record, replay_strict, passthrough };

std::string_view to_string(CacheMode mode);
CacheMode cache_mode_from_string(std::string_view s);

// Canonical-request-hash -> response store. Backed by an append-only JSONL
// file of {hash, request, response} when a path is given. The first stored
// response for a key wins; concurrent misses on one key share one upstream call.
class ReplayCache {
public:
    explicit ReplayCache(CacheMode mode = CacheMode::passthrough, std::string path = {});

    CacheMode mode() const noexcept { return mode_; }
    const std::string& path() const noexcept { return path_; }
    std::size_t size() const;

    std::optional<std::string> lookup(const std::string& key) const;
    void prime(const std::string& key, std::string response);

    // Applies the mode contract: passthrough calls `compute`; replay_strict
    // throws Error(cache_miss) on a miss; record computes once and persists.
    std::string resolve(const std::string& key, const nlohmann::json& request,
                        const std::function<std::string()>& compute);

private:
    void append_to_file(const std::string& key, const nlohmann::json& request, const std::string& response);

    CacheMode mode_;
    std::string path_;
    mutable std::shared_mutex mu_;
    std::unordered_map<std::string, std::string> store_;
    std::mutex inflight_mu_;
    std::unordered_map<std::string, std::shared_future<std::string>> inflight_;
    std::mutex file_mu_;
};

struct GatewayOptions {
    int max_attempts = 3;
    std::chrono::milliseconds retry_backoff{200};
};

class Gateway {
public:
    Gateway(std::shared_ptr<ChatModel> model, std::shared_ptr<ReplayCache> cache, GatewayOptions options = {});

    void set_search_backend(SearchBackendKind kind, std::shared_ptr<SearchBackend> backend);
    void set_fetcher(std::shared_ptr<DocumentFetcher> fetcher);

    std::string complete(const CompletionRequest& req);
    std::vector<SearchResult> search(std::string_view query, SearchBackendKind backend, int r_max);
    // Throws Error(unparseable) for blocked, failed or empty documents.
    std::string fetch_and_extract(const std::string& locator);

    ReplayCache& cache() { return *cache_; }
    std::size_t upstream_calls() const noexcept { return upstream_calls_.load(); }

private:
    std::shared_ptr<ChatModel> model_;
    std::shared_ptr<ReplayCache> cache_;
    GatewayOptions options_;
    std::map<SearchBackendKind, std::shared_ptr<SearchBackend>> backends_;
    std::shared_ptr<DocumentFetcher> fetcher_;
    std::atomic<std::size_t> upstream_calls_{0};
};

} // namespace enrichkit
