#pragma once

#include "enrichkit/gateway.hpp"

#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <string>

namespace enrichkit {

struct Url {
    std::string scheme; // "http" or "https"
    std::string host;
    int port = 0;
    std::string path; // starts with '/'

    std::string origin() const;
};

Url parse_url(const std::string& url);

// Global concurrent-request ceiling plus a minimum delay between requests to
// the same host.
class RequestThrottle {
public:
    RequestThrottle(int max_concurrent, std::chrono::milliseconds per_host_delay);

    class Slot {
    public:
        Slot(Slot&& other) noexcept : owner_(other.owner_) { other.owner_ = nullptr; }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;
        ~Slot();

    private:
        friend class RequestThrottle;
        explicit Slot(RequestThrottle* owner) : owner_(owner) {}
        RequestThrottle* owner_;
    };

    // Blocks until a slot is free and the host's politeness interval elapsed.
    Slot acquire(const std::string& host);

private:
    void release();

    int max_concurrent_;
    std::chrono::milliseconds delay_;
    std::mutex mu_;
    std::condition_variable cv_;
    int active_ = 0;
    std::map<std::string, std::chrono::steady_clock::time_point> next_allowed_;
};

struct HttpOptions {
    std::chrono::seconds timeout{60};
    std::string bearer_token_env; // name of the environment variable holding the token
    std::string user_agent = "enrichkit/0.1";
};

std::string bearer_token_from_env(const std::string& env_name);

// OpenAI-compatible chat-completion endpoint: POST {messages, temperature,
// max_tokens, model} -> choices[0].message.content.
class HttpChatModel : public ChatModel {
public:
    HttpChatModel(std::string endpoint_url, HttpOptions options);
    std::string complete(const CompletionRequest& req) override;

private:
    Url url_;
    HttpOptions options_;
};

// GET {url}?q=<query>&count=<k> -> {"results":[{"url","title"}...]}
class HttpWebSearch : public SearchBackend {
public:
    HttpWebSearch(std::string endpoint_url, HttpOptions options, std::shared_ptr<RequestThrottle> throttle = {});
    std::vector<SearchResult> search(std::string_view query, int top_k) override;

private:
    Url url_;
    HttpOptions options_;
    std::shared_ptr<RequestThrottle> throttle_;
};

// POST {url} {"query","top_k"} -> {"documents":[{"id","title","score"}...]}
class HttpVectorStore : public SearchBackend {
public:
    HttpVectorStore(std::string endpoint_url, HttpOptions options);
    std::vector<SearchResult> search(std::string_view query, int top_k) override;

private:
    Url url_;
    HttpOptions options_;
};

// GET for http(s) locators, following redirects.
class HttpFetcher : public DocumentFetcher {
public:
    HttpFetcher(HttpOptions options, std::shared_ptr<RequestThrottle> throttle = {});
    FetchResponse fetch(const std::string& locator) override;

private:
    HttpOptions options_;
    std::shared_ptr<RequestThrottle> throttle_;
};

} // namespace enrichkit
