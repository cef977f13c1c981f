#include "enrichkit/simulated.hpp"
#include "enrichkit/record.hpp"
#include "enrichkit/util.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

namespace enrichkit {

namespace {

// Text between `start` and the next line equal to one of `stops` (or the end).
std::string section(std::string_view prompt, std::string_view start, std::initializer_list<std::string_view> stops) {
    std::size_t a = prompt.find(start);
    if (a == std::string_view::npos) return {};
    a += start.size();
    std::size_t b = prompt.size();
    for (auto s : stops) {
        std::size_t p = prompt.find(s, a);
        if (p != std::string_view::npos) b = std::min(b, p);
    }
    return trim(prompt.substr(a, b - a));
}

std::string join_words(const std::vector<std::string>& words, std::size_t from, std::size_t n) {
    std::string out;
    for (std::size_t i = from; i < std::min(words.size(), from + n); ++i) out += (out.empty() ? "" : " ") + words[i];
    return out;
}

std::string first_sentence(std::string_view text, std::size_t max_tokens) {
    std::string t = trim(text);
    std::size_t dot = t.find(". ");
    if (dot != std::string::npos) t = t.substr(0, dot + 1);
    return std::string(truncate_tokens(t, max_tokens));
}

std::string reply_classify(const CompletionRequest& req) {
    std::string listing = section(req.user_prompt, "Registered tasks:\n", {"\n\nInstruction:"});
    std::string text = section(req.user_prompt, "Instruction:\n", {"\n\nWhich task"});
    auto words = keywords(text);
    std::set<std::string> bag(words.begin(), words.end());
    std::string best;
    std::size_t best_score = 0;
    for (const auto& line : split_lines(listing)) {
        std::string l = trim(line);
        if (l.rfind("- ", 0) != 0) continue;
        std::size_t colon = l.find(':');
        if (colon == std::string::npos) continue;
        std::string name = trim(std::string_view(l).substr(2, colon - 2));
        std::size_t score = 0;
        for (const auto& w : keywords(l)) score += bag.count(w);
        if (best.empty() || score > best_score) {
            best = name;
            best_score = score;
        }
    }
    return "The instruction matches this task best.\nTASK: " + best;
}

std::string reply_format(const CompletionRequest& req) {
    std::string desc = section(req.user_prompt, "Task description:\n", {"\n\n"});
    auto words = keywords(desc);
    std::string focus = words.empty() ? std::string("the request") : join_words(words, 0, 3);
    return "1. **Context**: Restate what is being asked about " + focus + ".\n"
           "2. **Analysis**: Work through the relevant evidence and technical details.\n"
           "3. **Answer**: State the conclusion directly.\n"
           "4. **Recommendations**: List mitigations or next steps where they apply.";
}

std::string reply_queries(const CompletionRequest& req, bool retry) {
    std::string inst = section(req.user_prompt, "Instruction:\n", {"\n\nBrainstorm", "\n\nThese queries"});
    auto words = keywords(inst);
    std::size_t k = 2;
    std::string out;
    std::size_t offset = retry ? 3 : 0;
    for (std::size_t i = 0; i < k + 1; ++i) {
        std::string q = join_words(words, offset + i * 2, 4);
        if (q.empty()) q = join_words(words, 0, 3) + (i ? " overview" : "");
        out += q + (retry ? " guidance" : "") + "\n";
    }
    return out;
}

std::string reply_rewrite(const CompletionRequest& req) {
    std::string headings = section(req.user_prompt, "Required headings, in this order:\n", {"\n\nWrite the improved"});
    std::string original = section(req.user_prompt, "## Original answer\n", {"\n## ", "\n\nRequired headings"});
    std::string instruction = section(req.user_prompt, "## Instruction\n", {"\n## "});
    std::vector<std::string> evidence;
    for (std::size_t p = 0; (p = req.user_prompt.find("\nSource: ", p)) != std::string::npos;) {
        std::size_t body = req.user_prompt.find('\n', p + 1);
        if (body == std::string::npos) break;
        std::size_t end = std::min(req.user_prompt.find("\n## ", body), req.user_prompt.find("\n\nRequired headings", body));
        evidence.push_back(trim(std::string_view(req.user_prompt).substr(body + 1, end == std::string::npos ? std::string::npos : end - body - 1)));
        p = body;
    }
    std::vector<std::string> names;
    for (const auto& h : split_lines(headings)) {
        std::string t = trim(h);
        if (t.rfind("### ", 0) == 0) names.push_back(t.substr(4));
    }
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        out += "### " + names[i] + "\n";
        if (i == 0) {
            out += "The question asks: " + first_sentence(instruction, 60) + "\n\n";
        } else if (i == names.size() - 1) {
            out += original + "\n\n";
        } else {
            std::size_t e = i - 1;
            if (e < evidence.size())
                out += "According to the retrieved material: " + first_sentence(evidence[e], 60) + "\n\n";
            else
                out += first_sentence(original, 80) + "\n\n";
        }
    }
    return trim(out);
}

std::size_t heading_count(std::string_view answer) {
    std::size_t n = 0;
    for (const auto& l : split_lines(answer))
        if (trim(l).rfind("#", 0) == 0) ++n;
    return n;
}

std::string reply_readability(const CompletionRequest& req) {
    std::string a1 = section(req.user_prompt, "[Answer 1]\n", {"\n\n[Answer 2]"});
    std::string a2 = section(req.user_prompt, "[Answer 2]\n", {"\n\nExplain briefly"});
    std::size_t h1 = heading_count(a1), h2 = heading_count(a2);
    std::string verdict = h1 > h2 ? "1" : h2 > h1 ? "2" : "tie";
    return "The structured answer is easier to follow.\nVERDICT: " + verdict;
}

std::string reply_grounded(const CompletionRequest& req) {
    std::string a1 = section(req.user_prompt, "[Answer 1]\n", {"\n\n[Answer 2]"});
    std::string a2 = section(req.user_prompt, "[Answer 2]\n", {"\n\nWrite one line"});
    std::string g = section(req.user_prompt, "Grounding documents:\n", {"\n\n[Answer 1]"});
    auto gw = keywords(g);
    std::set<std::string> bag(gw.begin(), gw.end());
    auto overlap = [&](const std::string& a) {
        std::size_t n = 0;
        for (const auto& w : keywords(a)) n += bag.count(w);
        return n;
    };
    std::size_t o1 = overlap(a1), o2 = overlap(a2);
    std::string verdict = o1 == 0 && o2 == 0 ? "both_bad" : o1 > o2 ? "1" : o2 > o1 ? "2" : "tie";
    return "Contextual Accuracy: compared against the grounding documents.\n"
           "Helpfulness: both answers address the question.\n"
           "Relevance: judged by overlap with the documents.\n"
           "Conciseness: acceptable.\n"
           "Completeness: acceptable.\n"
           "Length Bias: length was not used.\n"
           "VERDICT: " + verdict;
}

std::string reply_taxonomy(const CompletionRequest& req) {
    std::string text = to_lower(section(req.user_prompt, "Question:\n", {"\n\nList every category"}));
    static const std::vector<std::pair<std::string, std::string>> cues{
        {"encrypt", "CryptoSec"}, {"cipher", "CryptoSec"},  {"certificate", "CryptoSec"}, {"key ", "CryptoSec"},
        {"phish", "HumanSec"},    {"insider", "HumanSec"},  {"firewall", "NetSec"},       {"network", "NetSec"},
        {"cloud", "CloudSec"},    {"siem", "SecOps"},       {"log", "SecOps"},            {"malware", "ThreatOps_IR"},
        {"apt", "ThreatOps_IR"},  {"incident", "ThreatOps_IR"}, {"cwe", "AppSec"},        {"injection", "AppSec"},
        {"overflow", "AppSec"},   {"authentication", "IAM_ZT"}, {"privilege", "IAM_ZT"},  {"compliance", "GCR"},
        {"risk", "GCR"},          {"policy", "GCR"},
    };
    std::set<std::string> labels;
    for (const auto& [cue, label] : cues)
        if (text.find(cue) != std::string::npos) labels.insert(label);
    std::string out;
    for (const auto& l : labels) out += (out.empty() ? "" : ", ") + l;
    return "CATEGORIES: " + (out.empty() ? std::string("Other") : out);
}

} // namespace

std::shared_ptr<ChatModel> make_simulated_model(std::uint64_t seed) {
    return std::make_shared<FunctionChatModel>([seed](const CompletionRequest& req) -> std::string {
        const std::string& tag = req.tag;
        auto h = fnv1a64(req.user_prompt, seed);
        if (tag == "classify") return reply_classify(req);
        if (tag == "format.generate") return reply_format(req);
        if (tag == "enrich.queries") return reply_queries(req, false);
        if (tag == "enrich.queries_retry") return reply_queries(req, true);
        if (tag == "enrich.filter") return h % 5 == 0 ? "The first query covers the gap.\nKEEP: 1" : "KEEP: 1, 2";
        if (tag == "enrich.summarize")
            return std::string(truncate_tokens(section(req.user_prompt, "Document:\n", {"\n\nSummarize"}), 200));
        if (tag == "enrich.rewrite") return reply_rewrite(req);
        if (tag.rfind("judge.readability", 0) == 0) return reply_readability(req);
        if (tag == "judge.factuality") return "The rewrite keeps the original facts.\nSCORE: " + std::to_string(8 + h % 3);
        if (tag == "judge.seed_quality") return "SCORE: " + std::to_string(5 + h % 6);
        if (tag.rfind("judge.grounded", 0) == 0) return reply_grounded(req);
        if (tag.rfind("taxonomy", 0) == 0) return reply_taxonomy(req);
        if (tag.rfind("eval:", 0) == 0) {
            static const char* letters[] = {"A", "B", "C", "D"};
            return "Reasoning through the options.\nANSWER: " + std::string(letters[h % 4]);
        }
        return "No reply for this request.";
    });
}

} // namespace enrichkit
