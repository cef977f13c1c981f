#pragma once

#include "enrichkit/enrichment.hpp"
#include "enrichkit/gateway.hpp"
#include "enrichkit/record.hpp"
#include "enrichkit/task.hpp"

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace testing {

using namespace enrichkit;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& stem = "enrichkit-test");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

// Replies taken in order from a script, per tag prefix. The last reply of a
// script repeats once the script is exhausted.
class ScriptedModel : public ChatModel {
public:
    void on(std::string tag_prefix, std::vector<std::string> replies);
    std::string complete(const CompletionRequest& req) override;

    std::size_t calls() const { return calls_.load(); }
    std::vector<CompletionRequest> requests() const;

private:
    mutable std::mutex mu_;
    std::vector<std::pair<std::string, std::vector<std::string>>> scripts_;
    std::map<std::string, std::size_t> cursor_;
    std::vector<CompletionRequest> seen_;
    std::atomic<std::size_t> calls_{0};
};

// Search backend answering each query with a fixed result list.
class MockSearch : public SearchBackend {
public:
    void set(const std::string& query, std::vector<std::string> locators);
    void set_default(std::vector<std::string> locators) { default_ = std::move(locators); }
    std::vector<SearchResult> search(std::string_view query, int top_k) override;

    std::size_t calls() const { return calls_.load(); }

private:
    std::map<std::string, std::vector<std::string>, std::less<>> results_;
    std::vector<std::string> default_;
    std::atomic<std::size_t> calls_{0};
};

// Fetcher over an in-memory map; unknown locators answer 404.
class MockFetcher : public DocumentFetcher {
public:
    void page(const std::string& locator, std::string body, int status = 200,
              std::string content_type = "text/plain");
    FetchResponse fetch(const std::string& locator) override;

    std::vector<std::string> fetched() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, FetchResponse> pages_;
    std::vector<std::string> fetched_;
};

InstructionRecord make_record(const std::string& id, const std::string& task = "",
                              const std::string& instruction = "Explain the vulnerability.",
                              const std::string& response = "It is a flaw.");

TaskSpec make_task(const std::string& name, std::vector<std::string> steps, bool search = false,
                   bool grounding = false, const std::string& description = "A security task.");

std::shared_ptr<Gateway> make_gateway(std::shared_ptr<ChatModel> model,
                                      CacheMode mode = CacheMode::passthrough, const std::string& cache_path = {});

// Rewrite reply with one "### <step>" heading per step.
std::string conforming_answer(const FormatTemplate& format, const std::string& body = "Details.");

} // namespace testing
