#include "support.hpp"

#include <random>

namespace testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& stem) {
    std::random_device rd;
    for (int attempt = 0; attempt < 100; ++attempt) {
        fs::path p = fs::temp_directory_path() / (stem + "-" + std::to_string(rd()));
        if (fs::create_directory(p)) {
            path_ = p;
            return;
        }
    }
    throw std::runtime_error("cannot create temporary directory");
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void ScriptedModel::on(std::string tag_prefix, std::vector<std::string> replies) {
    std::lock_guard lock(mu_);
    scripts_.emplace_back(std::move(tag_prefix), std::move(replies));
}

std::string ScriptedModel::complete(const CompletionRequest& req) {
    ++calls_;
    std::lock_guard lock(mu_);
    seen_.push_back(req);
    // Longest matching prefix wins so "judge.readability:1" can override "judge".
    const std::pair<std::string, std::vector<std::string>>* best = nullptr;
    for (const auto& s : scripts_)
        if (req.tag.rfind(s.first, 0) == 0 && (!best || s.first.size() > best->first.size())) best = &s;
    if (!best || best->second.empty()) return "no script for " + req.tag;
    std::size_t& i = cursor_[best->first];
    const std::string& reply = best->second[std::min(i, best->second.size() - 1)];
    ++i;
    return reply;
}

std::vector<CompletionRequest> ScriptedModel::requests() const {
    std::lock_guard lock(mu_);
    return seen_;
}

void MockSearch::set(const std::string& query, std::vector<std::string> locators) {
    results_[query] = std::move(locators);
}

std::vector<SearchResult> MockSearch::search(std::string_view query, int top_k) {
    ++calls_;
    auto it = results_.find(query);
    const auto& locs = it == results_.end() ? default_ : it->second;
    std::vector<SearchResult> out;
    for (std::size_t i = 0; i < locs.size() && static_cast<int>(i) < top_k; ++i)
        out.push_back({std::string(query), locs[i], "title " + locs[i], static_cast<int>(i) + 1});
    return out;
}

void MockFetcher::page(const std::string& locator, std::string body, int status, std::string content_type) {
    std::lock_guard lock(mu_);
    pages_[locator] = {status, std::move(content_type), std::move(body)};
}

FetchResponse MockFetcher::fetch(const std::string& locator) {
    std::lock_guard lock(mu_);
    fetched_.push_back(locator);
    auto it = pages_.find(locator);
    if (it == pages_.end()) return {404, "text/plain", "not found"};
    return it->second;
}

std::vector<std::string> MockFetcher::fetched() const {
    std::lock_guard lock(mu_);
    return fetched_;
}

InstructionRecord make_record(const std::string& id, const std::string& task, const std::string& instruction,
                              const std::string& response) {
    InstructionRecord r;
    r.id = id;
    r.task_name = task;
    r.instruction = instruction;
    r.response = response;
    return r;
}

TaskSpec make_task(const std::string& name, std::vector<std::string> steps, bool search, bool grounding,
                   const std::string& description) {
    TaskSpec t;
    t.name = name;
    t.description = description;
    t.requires_search = search;
    t.requires_grounding_doc = grounding;
    for (auto& s : steps) t.format.steps.push_back({s, "Cover " + s + "."});
    t.format.version = 1;
    return t;
}

std::shared_ptr<Gateway> make_gateway(std::shared_ptr<ChatModel> model, CacheMode mode, const std::string& cache_path) {
    GatewayOptions opts;
    opts.retry_backoff = std::chrono::milliseconds(0);
    return std::make_shared<Gateway>(std::move(model), std::make_shared<ReplayCache>(mode, cache_path), opts);
}

std::string conforming_answer(const FormatTemplate& format, const std::string& body) {
    std::string out;
    for (const auto& s : format.steps) out += "### " + s.name + "\n" + body + "\n\n";
    return out;
}

} // namespace testing
