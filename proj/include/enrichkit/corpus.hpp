#pragma once

#include "enrichkit/gateway.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace enrichkit {

struct CorpusDocument {
    std::string id;
    std::string title;
    std::string body;
    std::string content_type = "text/plain";
    int status = 200; // lets fixtures model blocked pages
};

// Offline document collection serving both as a search backend (keyword
// overlap ranking) and as the fetcher for "corpus://<id>" locators.
class LocalCorpus : public SearchBackend, public DocumentFetcher {
public:
    LocalCorpus() = default;
    explicit LocalCorpus(std::vector<CorpusDocument> docs);

    // JSONL: {"id","title","text","content_type"?,"status"?}
    static LocalCorpus load(const std::string& path);

    void add(CorpusDocument doc);
    std::size_t size() const { return docs_.size(); }

    static std::string locator_for(const std::string& id) { return "corpus://" + id; }

    std::vector<SearchResult> search(std::string_view query, int top_k) override;
    FetchResponse fetch(const std::string& locator) override;

private:
    std::vector<CorpusDocument> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

} // namespace enrichkit
