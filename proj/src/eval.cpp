#include "enrichkit/eval.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <regex>
#include <sstream>

namespace enrichkit {

namespace {

constexpr std::array<BenchmarkKind, 5> kKinds{BenchmarkKind::mcq_single, BenchmarkKind::mcq_multi,
                                               BenchmarkKind::rcm_mapping, BenchmarkKind::relationship_binary,
                                               BenchmarkKind::impact_multilabel};

std::string collapse_spaces(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!out.empty() && out.back() != ' ') out += ' ';
        } else {
            out += c;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

bool is_choice_kind(BenchmarkKind k) {
    return k == BenchmarkKind::mcq_single || k == BenchmarkKind::mcq_multi || k == BenchmarkKind::relationship_binary;
}

std::optional<std::string> normalize_cwe(std::string_view s) {
    static const std::regex re(R"(CWE[-_ ]?0*(\d+))", std::regex::icase);
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(s.begin(), s.end(), m, re)) return std::nullopt;
    std::string digits = m[1].str();
    return "CWE-" + (digits.empty() ? std::string("0") : digits);
}

std::optional<std::string> single_letter(std::string_view s) {
    std::string t = trim(s);
    const std::string junk = "*`\"'()[].:";
    while (!t.empty() && junk.find(t.front()) != std::string::npos) t.erase(0, 1);
    while (!t.empty() && junk.find(t.back()) != std::string::npos) t.pop_back();
    t = trim(t);
    if (starts_with_ci(t, "option ")) t = trim(std::string_view(t).substr(7));
    if (t.size() == 1 && std::isalpha(static_cast<unsigned char>(t[0])))
        return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(t[0]))));
    return std::nullopt;
}

std::vector<std::string> split_any(std::string_view s, std::string_view seps) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (seps.find(c) != std::string_view::npos) {
            if (!trim(cur).empty()) out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

} // namespace

std::string_view to_string(BenchmarkKind kind) {
    switch (kind) {
    case BenchmarkKind::mcq_single: return "mcq_single";
    case BenchmarkKind::mcq_multi: return "mcq_multi";
    case BenchmarkKind::rcm_mapping: return "rcm_mapping";
    case BenchmarkKind::relationship_binary: return "relationship_binary";
    case BenchmarkKind::impact_multilabel: return "impact_multilabel";
    }
    return "mcq_single";
}

BenchmarkKind benchmark_kind_from_string(std::string_view s) {
    for (auto k : kKinds)
        if (to_string(k) == s) return k;
    throw Error(Errc::unknown_kind, "unknown benchmark kind '" + std::string(s) + "'");
}

std::span<const BenchmarkKind> all_benchmark_kinds() { return kKinds; }

const std::vector<std::string>& technical_impacts() {
    static const std::vector<std::string> impacts{
        "Modify Data",
        "Read Data",
        "DoS: Unreliable Execution",
        "DoS: Resource Consumption",
        "Execute Unauthorized Code or Commands",
        "Gain Privileges or Assume Identity",
        "Bypass Protection Mechanism",
        "Hide Activities",
    };
    return impacts;
}

std::optional<std::string> canonical_impact(std::string_view s) {
    auto norm = [](std::string_view v) {
        std::string t = to_lower(collapse_spaces(v));
        for (std::size_t p; (p = t.find(" / ")) != std::string::npos;) t.replace(p, 3, " or ");
        for (std::size_t p; (p = t.find('/')) != std::string::npos;) t.replace(p, 1, " or ");
        for (std::size_t p; (p = t.find("dos :")) != std::string::npos;) t.replace(p, 5, "dos:");
        while (!t.empty() && (t.back() == '.' || t.back() == '*')) t.pop_back();
        while (!t.empty() && t.front() == '*') t.erase(0, 1);
        return collapse_spaces(t);
    };
    std::string key = norm(s);
    for (const auto& i : technical_impacts())
        if (norm(i) == key) return i;
    return std::nullopt;
}

std::string format_answer(const Answer& a) {
    std::string out;
    for (const auto& x : a) out += (out.empty() ? "" : ", ") + x;
    return out;
}

BenchmarkItem benchmark_item_from_json(const nlohmann::json& j) {
    std::string id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : std::string();
    auto bad = [&](const std::string& why) { return Error(Errc::malformed_item, "item '" + id + "': " + why); };
    if (id.empty()) throw bad("missing id");
    BenchmarkItem item;
    item.id = id;
    try {
        item.kind = benchmark_kind_from_string(j.at("kind").get<std::string>());
    } catch (const Error& e) {
        throw bad(e.what());
    } catch (const nlohmann::json::exception&) {
        throw bad("missing kind");
    }
    if (!j.contains("question") || !j["question"].is_string() || trim(j["question"].get<std::string>()).empty())
        throw bad("missing question");
    item.question = j["question"].get<std::string>();

    if (j.contains("options") && !j["options"].is_null()) {
        const auto& o = j["options"];
        if (o.is_object()) {
            for (auto it = o.begin(); it != o.end(); ++it) {
                auto label = single_letter(it.key());
                if (!label || !it.value().is_string()) throw bad("option labels must be single letters with text");
                item.options.emplace_back(*label, it.value().get<std::string>());
            }
        } else if (o.is_array()) {
            if (o.size() > 26) throw bad("too many options");
            for (std::size_t i = 0; i < o.size(); ++i) {
                if (!o[i].is_string()) throw bad("option text must be a string");
                item.options.emplace_back(std::string(1, static_cast<char>('A' + i)), o[i].get<std::string>());
            }
        } else {
            throw bad("options must be an object or an array");
        }
    }
    if (is_choice_kind(item.kind) && item.options.size() < 2) throw bad("choice items need at least two options");
    if (item.kind == BenchmarkKind::relationship_binary) {
        if (item.options.size() != 2 || item.options[0].first != "A" || item.options[1].first != "B")
            throw bad("relationship items need exactly options A and B");
    }

    if (!j.contains("answer")) throw bad("missing answer");
    std::vector<std::string> raw;
    if (j["answer"].is_string()) {
        raw.push_back(j["answer"].get<std::string>());
        if (item.kind == BenchmarkKind::mcq_multi || item.kind == BenchmarkKind::impact_multilabel)
            raw = split_any(raw.front(), item.kind == BenchmarkKind::mcq_multi ? ", ;" : ",;");
    } else if (j["answer"].is_array()) {
        for (const auto& a : j["answer"]) {
            if (!a.is_string()) throw bad("answer entries must be strings");
            raw.push_back(a.get<std::string>());
        }
    } else {
        throw bad("answer must be a string or an array");
    }
    if (raw.empty()) throw bad("empty answer");

    std::set<std::string> labels;
    for (const auto& [l, t] : item.options) labels.insert(l);
    for (const auto& r : raw) {
        switch (item.kind) {
        case BenchmarkKind::mcq_single:
        case BenchmarkKind::mcq_multi:
        case BenchmarkKind::relationship_binary: {
            auto l = single_letter(r);
            if (!l || !labels.count(*l)) throw bad("answer '" + r + "' is not an option label");
            item.gold.insert(*l);
            break;
        }
        case BenchmarkKind::rcm_mapping: {
            auto c = normalize_cwe(r);
            if (!c) throw bad("answer '" + r + "' is not a CWE id");
            item.gold.insert(*c);
            break;
        }
        case BenchmarkKind::impact_multilabel: {
            auto c = canonical_impact(r);
            if (!c) throw bad("answer '" + r + "' is not a technical impact");
            item.gold.insert(*c);
            break;
        }
        }
    }
    if ((item.kind == BenchmarkKind::mcq_single || item.kind == BenchmarkKind::relationship_binary ||
         item.kind == BenchmarkKind::rcm_mapping) &&
        item.gold.size() != 1)
        throw bad("single-answer item has " + std::to_string(item.gold.size()) + " answers");

    if (j.contains("taxonomy") && !j["taxonomy"].is_null()) {
        LabelSet set;
        if (!j["taxonomy"].is_array()) throw bad("taxonomy must be an array");
        for (const auto& t : j["taxonomy"]) {
            auto l = t.is_string() ? taxonomy_from_string(t.get<std::string>()) : std::nullopt;
            if (!l) throw bad("unknown taxonomy label " + t.dump());
            set.insert(*l);
        }
        item.taxonomy = set;
    }
    return item;
}

nlohmann::json to_json(const BenchmarkItem& item) {
    nlohmann::json j{{"id", item.id}, {"kind", std::string(to_string(item.kind))}, {"question", item.question}};
    if (!item.options.empty()) {
        nlohmann::json o = nlohmann::json::object();
        for (const auto& [l, t] : item.options) o[l] = t;
        j["options"] = o;
    }
    j["answer"] = std::vector<std::string>(item.gold.begin(), item.gold.end());
    if (item.taxonomy) {
        nlohmann::json t = nlohmann::json::array();
        for (auto l : *item.taxonomy) t.push_back(std::string(to_string(l)));
        j["taxonomy"] = t;
    }
    return j;
}

std::vector<BenchmarkItem> load_benchmark(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<BenchmarkItem> out;
    std::set<std::string> ids;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw Error(Errc::malformed_item, path + ": line " + std::to_string(lineno) + " is not JSON", lineno);
        }
        auto item = benchmark_item_from_json(j);
        if (!ids.insert(item.id).second) throw Error(Errc::malformed_item, "duplicate item id '" + item.id + "'", lineno);
        out.push_back(std::move(item));
    }
    return out;
}

void EvalPromptTemplate::validate() const {
    std::size_t first = scaffold.find(kExplToken);
    if (first == std::string::npos || scaffold.find(kExplToken, first + 1) != std::string::npos)
        throw Error(Errc::invalid_argument, "evaluation scaffold must contain <EXPL> exactly once");
    for (auto k : kKinds)
        if (!explanations.count(k))
            throw Error(Errc::invalid_argument, "evaluation template lacks an explanation for " + std::string(to_string(k)));
}

const EvalPromptTemplate& EvalPromptTemplate::builtin() {
    static const EvalPromptTemplate t = [] {
        EvalPromptTemplate t;
        // Reconstruction of the zero-shot chain-of-thought evaluation prompt.
        t.scaffold =
            "You are a cybersecurity expert. Read the question carefully and think step by step: identify "
            "the concepts involved, recall the relevant facts, rule out incorrect alternatives and then "
            "commit to an answer.\n\n<EXPL>";
        std::string impacts;
        for (const auto& i : technical_impacts()) impacts += "- " + i + "\n";
        t.explanations = {
            {BenchmarkKind::mcq_single,
             "This is a multiple-choice question with exactly one correct option. Options are labeled with "
             "letters."},
            {BenchmarkKind::mcq_multi,
             "This is a multiple-choice question where one or more options may be correct. Select every "
             "correct option."},
            {BenchmarkKind::rcm_mapping,
             "This is a root cause mapping task. Read the vulnerability description and identify the CWE "
             "weakness that best describes its root cause."},
            {BenchmarkKind::relationship_binary,
             "Two explanations are given for the relationship between the entities in the question. Option A "
             "and option B disagree; decide which explanation is correct."},
            {BenchmarkKind::impact_multilabel,
             "Map the weakness to every technical impact it can cause if exploited. Choose one or more of "
             "these eight technical impacts:\n" +
                 impacts},
        };
        return t;
    }();
    return t;
}

EvalPromptTemplate EvalPromptTemplate::parse(std::string_view text) {
    EvalPromptTemplate t = builtin();
    t.scaffold.clear();
    bool has_scaffold = false;
    std::string section;
    std::map<std::string, std::string> bodies;
    for (const auto& raw : split_lines(text)) {
        std::string line = trim(raw);
        if (line.size() > 2 && line.front() == '[' && line.back() == ']' && line.find(' ') == std::string::npos) {
            section = line.substr(1, line.size() - 2);
            bodies[section];
            continue;
        }
        if (section.empty()) continue;
        auto& b = bodies[section];
        b += (b.empty() ? "" : "\n") + raw;
    }
    for (auto& [name, body] : bodies) {
        std::string value = trim(body);
        if (name == "scaffold") {
            t.scaffold = value;
            has_scaffold = true;
        } else if (name.rfind("expl.", 0) == 0) {
            t.explanations[benchmark_kind_from_string(std::string_view(name).substr(5))] = value;
        } else {
            throw Error(Errc::invalid_argument, "unknown evaluation template section [" + name + "]");
        }
    }
    if (!has_scaffold) throw Error(Errc::invalid_argument, "evaluation template has no [scaffold] section");
    t.validate();
    return t;
}

EvalPromptTemplate EvalPromptTemplate::load(const std::string& path) { return parse(read_file(path)); }

std::string final_answer_instruction(BenchmarkKind kind) {
    switch (kind) {
    case BenchmarkKind::mcq_single:
        return "End your response with a final line of the form \"ANSWER: <letter>\" giving the single letter of "
               "the correct option.";
    case BenchmarkKind::mcq_multi:
        return "End your response with a final line of the form \"ANSWER: <letters>\" listing the letters of all "
               "correct options, separated by commas.";
    case BenchmarkKind::rcm_mapping:
        return "End your response with a final line of the form \"ANSWER: CWE-<number>\".";
    case BenchmarkKind::relationship_binary:
        return "End your response with a final line \"ANSWER: A\" or \"ANSWER: B\".";
    case BenchmarkKind::impact_multilabel:
        return "End your response with a final line of the form \"ANSWER: <impacts>\" listing the applicable "
               "technical impacts exactly as named above, separated by commas.";
    }
    throw Error(Errc::unknown_kind, "unknown benchmark kind");
}

std::string render_prompt(const BenchmarkItem& item, const EvalPromptTemplate& tmpl) {
    tmpl.validate();
    auto it = tmpl.explanations.find(item.kind);
    if (it == tmpl.explanations.end())
        throw Error(Errc::unknown_kind, "no explanation for kind " + std::string(to_string(item.kind)));
    std::string out = tmpl.scaffold;
    out.replace(out.find(kExplToken), kExplToken.size(), it->second);
    out += "\n\nQuestion:\n" + trim(item.question) + "\n";
    if (!item.options.empty()) {
        out += "\nOptions:\n";
        for (const auto& [label, text] : item.options) out += label + ". " + trim(text) + "\n";
    }
    out += "\n" + final_answer_instruction(item.kind);
    return out;
}

std::optional<Answer> extract_answer(std::string_view completion, BenchmarkKind kind) {
    std::string lower = to_lower(completion);
    std::size_t pos = lower.rfind("answer:");
    if (pos == std::string::npos) return std::nullopt;
    std::string_view rest = completion.substr(pos + 7);
    std::string payload = trim(rest.substr(0, rest.find('\n')));
    while (!payload.empty() && (payload.back() == '*' || payload.back() == '`')) payload.pop_back();
    while (!payload.empty() && (payload.front() == '*' || payload.front() == '`')) payload.erase(0, 1);
    payload = trim(payload);
    if (payload.empty()) return std::nullopt;

    Answer a;
    switch (kind) {
    case BenchmarkKind::mcq_single:
    case BenchmarkKind::relationship_binary: {
        static const std::regex lead(R"(^\(?([A-Za-z])\)?(?:[\s.:)\],;]|$))");
        std::smatch m;
        if (!std::regex_search(payload, m, lead)) return std::nullopt;
        // "A, B" names two options for a one-option question.
        static const std::regex another(R"(^\)?\s*(?:[,;/&]|and\b)\s*\(?[A-Za-z]\)?(?:\W|$))", std::regex::icase);
        std::string tail = payload.substr(static_cast<std::size_t>(m.position(1) + 1));
        if (std::regex_search(tail, another)) return std::nullopt;
        std::string l(1, static_cast<char>(std::toupper(static_cast<unsigned char>(m[1].str()[0]))));
        if (kind == BenchmarkKind::relationship_binary && l != "A" && l != "B") return std::nullopt;
        a.insert(l);
        break;
    }
    case BenchmarkKind::mcq_multi: {
        std::string p = payload;
        for (std::size_t at; (at = to_lower(p).find(" and ")) != std::string::npos;) p.replace(at, 5, ",");
        for (const auto& tok : split_any(p, ",;/& ")) {
            auto l = single_letter(tok);
            if (!l) return std::nullopt;
            a.insert(*l);
        }
        break;
    }
    case BenchmarkKind::rcm_mapping: {
        auto c = normalize_cwe(payload);
        if (!c) return std::nullopt;
        a.insert(*c);
        break;
    }
    case BenchmarkKind::impact_multilabel:
        for (const auto& tok : split_any(payload, ",;")) {
            auto c = canonical_impact(tok);
            if (c) a.insert(*c);
        }
        break;
    }
    if (a.empty()) return std::nullopt;
    return a;
}

std::vector<Prediction> run_model(std::span<const BenchmarkItem> items, const EvalPromptTemplate& tmpl,
                                  Gateway& gateway, const EvalRunOptions& opts) {
    tmpl.validate();
    std::vector<Prediction> out(items.size());
    std::vector<std::string> prompts;
    prompts.reserve(items.size());
    for (const auto& item : items) prompts.push_back(render_prompt(item, tmpl));
    parallel_for(items.size(), opts.workers, [&](std::size_t i) {
        Prediction& p = out[i];
        p.item_id = items[i].id;
        CompletionRequest req;
        req.system_prompt = opts.system_prompt;
        req.user_prompt = prompts[i];
        req.temperature = 0.0;
        req.max_output_tokens = opts.max_output_tokens;
        req.model_id = opts.model_id;
        req.tag = "eval:" + items[i].id;
        try {
            p.raw_completion = gateway.complete(req);
        } catch (const Error& e) {
            p.error = std::string(to_string(e.code())) + ": " + e.what();
            return;
        } catch (const std::exception& e) {
            p.error = std::string("Internal: ") + e.what();
            return;
        }
        p.extracted = extract_answer(p.raw_completion, items[i].kind);
        p.parse_ok = p.extracted.has_value();
    });
    return out;
}

double jaccard(const Answer& a, const Answer& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

EvalReport score(std::span<const BenchmarkItem> items, std::span<const Prediction> predictions, std::string benchmark) {
    std::map<std::string, const Prediction*> by_id;
    for (const auto& p : predictions) by_id[p.item_id] = &p;

    EvalReport r;
    r.benchmark = std::move(benchmark);
    double jac = 0;
    std::size_t answered = 0;
    for (const auto& item : items) {
        ++r.total;
        bool correct = false;
        auto it = by_id.find(item.id);
        if (it == by_id.end()) {
            ++r.missing;
        } else if (!it->second->error.empty()) {
            ++r.quarantined;
        } else {
            ++answered;
            if (!it->second->extracted) {
                ++r.parse_failures;
            } else {
                correct = *it->second->extracted == item.gold;
                jac += jaccard(*it->second->extracted, item.gold);
            }
        }
        if (correct) ++r.correct;
        auto& kind_row = r.per_kind[std::string(to_string(item.kind))];
        ++kind_row.total;
        kind_row.correct += correct;
        if (item.taxonomy)
            for (auto label : *item.taxonomy) {
                auto& row = r.per_taxonomy[std::string(to_string(label))];
                ++row.total;
                row.correct += correct;
            }
    }
    auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
    r.accuracy = ratio(r.correct, r.total);
    r.mean_jaccard = r.total ? jac / static_cast<double>(r.total) : 0.0;
    r.parse_failure_rate = ratio(r.parse_failures, r.total);
    r.coverage = ratio(answered, r.total);
    for (auto& [k, row] : r.per_kind) row.accuracy = ratio(row.correct, row.total);
    for (auto& [k, row] : r.per_taxonomy) row.accuracy = ratio(row.correct, row.total);
    return r;
}

nlohmann::json to_json(const EvalReport& r) {
    auto rows = [](const std::map<std::string, AccuracyRow>& m) {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, row] : m) j[k] = {{"total", row.total}, {"correct", row.correct}, {"accuracy", row.accuracy}};
        return j;
    };
    return {{"benchmark", r.benchmark},
            {"total", r.total},
            {"correct", r.correct},
            {"accuracy", r.accuracy},
            {"mean_jaccard", r.mean_jaccard},
            {"parse_failures", r.parse_failures},
            {"parse_failure_rate", r.parse_failure_rate},
            {"quarantined", r.quarantined},
            {"missing", r.missing},
            {"coverage", r.coverage},
            {"per_kind", rows(r.per_kind)},
            {"per_taxonomy", rows(r.per_taxonomy)}};
}

std::string render_eval_table(const EvalReport& r) {
    char buf[200];
    std::string out;
    std::snprintf(buf, sizeof buf, "%s: accuracy %.3f (%zu/%zu), jaccard %.3f, parse failures %zu, quarantined %zu\n",
                  r.benchmark.empty() ? "benchmark" : r.benchmark.c_str(), r.accuracy, r.correct, r.total,
                  r.mean_jaccard, r.parse_failures, r.quarantined);
    out += buf;
    if (!r.per_taxonomy.empty()) {
        out += "category        items  correct  accuracy\n";
        for (const auto& [k, row] : r.per_taxonomy) {
            std::snprintf(buf, sizeof buf, "%-14s %6zu %8zu %9.3f\n", k.c_str(), row.total, row.correct, row.accuracy);
            out += buf;
        }
    }
    return out;
}

nlohmann::json to_json(const Prediction& p) {
    nlohmann::json j{{"item_id", p.item_id}, {"raw_completion", p.raw_completion}, {"parse_ok", p.parse_ok}};
    j["extracted"] = p.extracted ? nlohmann::json(std::vector<std::string>(p.extracted->begin(), p.extracted->end()))
                                 : nlohmann::json(nullptr);
    if (!p.error.empty()) j["error"] = p.error;
    return j;
}

std::set<std::string> oracle_mask(std::span<const BenchmarkItem> items, double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::invalid_argument, "oracle fraction must be in [0, 1]");
    std::vector<std::string> ids;
    for (const auto& i : items) ids.push_back(i.id);
    std::sort(ids.begin(), ids.end());
    Rng rng(seed);
    rng.shuffle(ids);
    auto n = static_cast<std::size_t>(std::llround(p * static_cast<double>(ids.size())));
    return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n)};
}

namespace {

Answer wrong_answer(const BenchmarkItem& item) {
    switch (item.kind) {
    case BenchmarkKind::mcq_single:
    case BenchmarkKind::relationship_binary:
        for (const auto& [l, t] : item.options)
            if (!item.gold.count(l)) return {l};
        break;
    case BenchmarkKind::mcq_multi: {
        // Toggle the first option.
        Answer a = item.gold;
        const std::string& l = item.options.front().first;
        if (a.count(l) && a.size() > 1) a.erase(l);
        else if (!a.count(l)) a.insert(l);
        else a = {item.options.back().first};
        return a;
    }
    case BenchmarkKind::rcm_mapping: {
        int n = std::stoi(item.gold.begin()->substr(4));
        return {"CWE-" + std::to_string(n + 1)};
    }
    case BenchmarkKind::impact_multilabel: {
        Answer a = item.gold;
        const std::string& first = technical_impacts().front();
        if (a.count(first) && a.size() > 1) a.erase(first);
        else if (!a.count(first)) a.insert(first);
        else a = {technical_impacts().back()};
        return a;
    }
    }
    throw Error(Errc::invalid_argument, "item " + item.id + " has no wrong answer");
}

} // namespace

std::shared_ptr<ChatModel> make_oracle_model(std::span<const BenchmarkItem> items, std::string_view spec,
                                             std::uint64_t seed) {
    enum class Mode { gold, corrupt, parsefail } mode;
    double p = 0;
    std::string s(spec);
    if (s == "gold") {
        mode = Mode::gold;
    } else if (s.rfind("corrupt:", 0) == 0 || s.rfind("parsefail:", 0) == 0) {
        mode = s[0] == 'c' ? Mode::corrupt : Mode::parsefail;
        try {
            p = std::stod(s.substr(s.find(':') + 1));
        } catch (const std::exception&) {
            throw Error(Errc::invalid_argument, "bad oracle fraction in '" + s + "'");
        }
    } else {
        throw Error(Errc::invalid_argument, "unknown oracle '" + s + "'");
    }
    auto mask = mode == Mode::gold ? std::set<std::string>{} : oracle_mask(items, p, seed);
    auto table = std::make_shared<std::map<std::string, std::string>>();
    for (const auto& item : items) {
        std::string reply = "Considering the question step by step, the evidence points to one answer.\n";
        bool hit = mask.count(item.id) > 0;
        if (mode == Mode::parsefail && hit)
            reply += "I am unable to settle on a final choice.";
        else
            reply += "ANSWER: " + format_answer(mode == Mode::corrupt && hit ? wrong_answer(item) : item.gold);
        (*table)[item.id] = reply;
    }
    return std::make_shared<FunctionChatModel>([table](const CompletionRequest& req) -> std::string {
        if (req.tag.rfind("eval:", 0) == 0) {
            auto it = table->find(req.tag.substr(5));
            if (it != table->end()) return it->second;
        }
        return "No answer.";
    });
}

LabelSet parse_taxonomy_reply(std::string_view reply) {
    std::string payload;
    auto lines = split_lines(reply);
    bool marked = false;
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        std::string t = trim(*it);
        while (!t.empty() && (t.front() == '*' || t.front() == '#')) t.erase(0, 1);
        if (starts_with_ci(trim(t), "categories:")) {
            payload = trim(std::string_view(trim(t)).substr(11));
            marked = true;
            break;
        }
    }
    if (!marked) payload = trim(reply);
    LabelSet out;
    std::vector<std::string> unknown;
    for (auto tok : split_any(payload, ",;\n")) {
        while (!tok.empty() && (tok.back() == '.' || tok.back() == '*' || tok.back() == '`')) tok.pop_back();
        while (!tok.empty() && (tok.front() == '*' || tok.front() == '`' || tok.front() == '-')) tok.erase(0, 1);
        if (auto l = taxonomy_from_string(trim(tok))) out.insert(*l);
        else unknown.push_back(trim(tok));
    }
    if (!unknown.empty()) spdlog::warn("dropped {} unknown taxonomy label(s)", unknown.size());
    if (out.empty()) {
        spdlog::warn("taxonomy reply names no known category; using Other");
        out.insert(TaxonomyLabel::Other);
    }
    return out;
}

LabelSet classify_taxonomy(const BenchmarkItem& item, Gateway& gateway, const TaxonomyOptions& opts) {
    const PromptLibrary& lib = opts.prompts ? *opts.prompts : PromptLibrary::builtin();
    const auto& tmpl = lib.get(prompt_names::taxonomy);
    static const std::map<TaxonomyLabel, std::string> blurbs{
        {TaxonomyLabel::GCR, "Governance, risk and compliance: risk management, regulations, frameworks, policies"},
        {TaxonomyLabel::NetSec, "Network, infrastructure and endpoint security, IoT/OT, mobile"},
        {TaxonomyLabel::AppSec, "Application and software security, vulnerability management, supply chain"},
        {TaxonomyLabel::CloudSec, "Cloud and data security, DLP, privacy, shared responsibility"},
        {TaxonomyLabel::IAM_ZT, "Identity, access and zero trust: authentication, authorization, privileged access"},
        {TaxonomyLabel::SecOps, "Security operations and monitoring: SIEM, SOC, SOAR, detection engineering"},
        {TaxonomyLabel::ThreatOps_IR, "Threat intelligence and incident response: hunting, IOCs, APTs, malware, forensics"},
        {TaxonomyLabel::CryptoSec, "Cryptography and secure communications: algorithms, PKI, key management"},
        {TaxonomyLabel::HumanSec, "Security awareness and human risk: social engineering, insider threat"},
        {TaxonomyLabel::Other, "Cross-domain or emerging topics not covered above"},
    };
    std::string cats;
    for (auto l : all_taxonomy_labels()) cats += "- " + std::string(to_string(l)) + ": " + blurbs.at(l) + "\n";
    std::string text = item.question;
    for (const auto& [l, t] : item.options) text += "\n" + l + ". " + t;

    CompletionRequest req;
    req.system_prompt = tmpl.system;
    req.user_prompt = render(tmpl.user, {{"categories", cats}, {"text", text}});
    req.model_id = opts.model_id;
    req.max_output_tokens = 256;
    req.tag = "taxonomy:" + item.id;
    return parse_taxonomy_reply(gateway.complete(req));
}

const std::map<std::string, TaxonomyLabel>& default_external_mapping() {
    static const std::map<std::string, TaxonomyLabel> m{
        {"ApplicationSecurity", TaxonomyLabel::AppSec}, {"Cryptography", TaxonomyLabel::CryptoSec},
        {"MemorySafety", TaxonomyLabel::AppSec},        {"NetworkSecurity", TaxonomyLabel::NetSec},
        {"PenTest", TaxonomyLabel::AppSec},             {"SoftwareSecurity", TaxonomyLabel::AppSec},
        {"SystemSecurity", TaxonomyLabel::NetSec},      {"Vulnerability", TaxonomyLabel::AppSec},
        {"WebSecurity", TaxonomyLabel::AppSec},
    };
    return m;
}

std::map<std::string, AgreementRow> validate_taxonomy_agreement(std::span<const ExternalLabeled> items,
                                                                const std::map<std::string, TaxonomyLabel>& mapping) {
    std::map<std::string, AgreementRow> out;
    for (const auto& [cat, label] : mapping) out[cat];
    for (const auto& it : items) {
        auto m = mapping.find(it.external_category);
        if (m == mapping.end()) {
            spdlog::warn("external category '{}' has no mapping; skipped", it.external_category);
            continue;
        }
        auto& row = out[it.external_category];
        ++row.items;
        if (it.ours.count(m->second)) ++row.matched;
    }
    for (auto& [cat, row] : out)
        if (row.items)
            row.percent = std::round(1000.0 * static_cast<double>(row.matched) / static_cast<double>(row.items)) / 10.0;
    return out;
}

} // namespace enrichkit
