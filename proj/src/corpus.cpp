#include "enrichkit/corpus.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

namespace enrichkit {

LocalCorpus::LocalCorpus(std::vector<CorpusDocument> docs) {
    for (auto& d : docs) add(std::move(d));
}

LocalCorpus LocalCorpus::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::missing_file, "cannot open corpus " + path);
    LocalCorpus corpus;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            CorpusDocument d;
            d.id = j.at("id").get<std::string>();
            d.title = j.value("title", std::string{});
            d.body = j.at("text").get<std::string>();
            d.content_type = j.value("content_type", std::string("text/plain"));
            d.status = j.value("status", 200);
            corpus.add(std::move(d));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::malformed_line, path + ": line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
    }
    return corpus;
}

void LocalCorpus::add(CorpusDocument doc) {
    if (by_id_.count(doc.id)) throw Error(Errc::invalid_argument, "duplicate corpus id " + doc.id);
    by_id_[doc.id] = docs_.size();
    docs_.push_back(std::move(doc));
}

std::vector<SearchResult> LocalCorpus::search(std::string_view query, int top_k) {
    std::vector<std::string> terms = keywords(query);
    std::vector<std::pair<std::size_t, std::size_t>> scored; // (score, index)
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        auto words = keywords(docs_[i].title + " " + docs_[i].body);
        std::set<std::string> vocab(words.begin(), words.end());
        std::size_t score = 0;
        for (const auto& t : terms) score += vocab.count(t);
        if (score > 0) scored.emplace_back(score, i);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<SearchResult> out;
    for (const auto& [score, idx] : scored) {
        if (static_cast<int>(out.size()) >= top_k) break;
        out.push_back({std::string(query), locator_for(docs_[idx].id), docs_[idx].title,
                       static_cast<int>(out.size()) + 1});
    }
    return out;
}

FetchResponse LocalCorpus::fetch(const std::string& locator) {
    constexpr std::string_view prefix = "corpus://";
    std::string id = locator.rfind(prefix, 0) == 0 ? locator.substr(prefix.size()) : locator;
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return FetchResponse{404, "text/plain", "not found"};
    const auto& d = docs_[it->second];
    return FetchResponse{d.status, d.content_type, d.body};
}

} // namespace enrichkit
