#include "enrichkit/judge.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace enrichkit {

std::string_view to_string(Decision d) {
    switch (d) {
    case Decision::first: return "first";
    case Decision::second: return "second";
    case Decision::tie: return "tie";
    case Decision::both_bad: return "both_bad";
    }
    return "tie";
}

Decision decision_from_string(std::string_view s) {
    if (s == "first") return Decision::first;
    if (s == "second") return Decision::second;
    if (s == "tie") return Decision::tie;
    if (s == "both_bad") return Decision::both_bad;
    throw Error(Errc::invalid_argument, "unknown decision '" + std::string(s) + "'");
}

std::string_view to_string(ReadabilityOutcome o) {
    switch (o) {
    case ReadabilityOutcome::rewritten: return "rewritten";
    case ReadabilityOutcome::original: return "original";
    case ReadabilityOutcome::tie: return "tie";
    case ReadabilityOutcome::inconsistent: return "inconsistent";
    }
    return "tie";
}

ReadabilityOutcome readability_outcome_from_string(std::string_view s) {
    if (s == "rewritten") return ReadabilityOutcome::rewritten;
    if (s == "original") return ReadabilityOutcome::original;
    if (s == "tie") return ReadabilityOutcome::tie;
    if (s == "inconsistent") return ReadabilityOutcome::inconsistent;
    throw Error(Errc::invalid_argument, "unknown outcome '" + std::string(s) + "'");
}

std::string_view to_string(GroundedFinal f) {
    switch (f) {
    case GroundedFinal::A: return "A";
    case GroundedFinal::B: return "B";
    case GroundedFinal::tie: return "tie";
    case GroundedFinal::both_bad: return "both_bad";
    case GroundedFinal::inconsistent: return "inconsistent";
    }
    return "tie";
}

namespace {

// De-anonymized preference: +1 for the side in slot 1 of order 1, -1 for the
// other side, 0 for tie, 2 for both_bad.
int side(Decision d, bool swapped) {
    switch (d) {
    case Decision::first: return swapped ? -1 : 1;
    case Decision::second: return swapped ? 1 : -1;
    case Decision::tie: return 0;
    case Decision::both_bad: return 2;
    }
    return 0;
}

// Returns the combined side, or nullopt for inconsistent.
std::optional<int> combine_sides(int s1, int s2, bool strict) {
    if (s1 == s2) return s1;
    if (!strict && (s1 == 0 || s2 == 0) && s1 != 2 && s2 != 2) return s1 == 0 ? s2 : s1;
    return std::nullopt;
}

const PromptLibrary& library(const JudgeOptions& opts) { return opts.prompts ? *opts.prompts : PromptLibrary::builtin(); }

CompletionRequest judge_request(const PromptTemplate& tmpl, const std::map<std::string, std::string>& vars,
                                const JudgeOptions& opts, std::string tag) {
    CompletionRequest req;
    req.system_prompt = tmpl.system;
    req.user_prompt = render(tmpl.user, vars);
    req.model_id = opts.model_id;
    req.max_output_tokens = 1024;
    req.tag = std::move(tag);
    return req;
}

std::optional<std::string> last_marker(std::string_view reply, std::string_view marker) {
    auto lines = split_lines(reply);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        std::string t = trim(*it);
        while (!t.empty() && (t.front() == '*' || t.front() == '#' || t.front() == '`')) t.erase(0, 1);
        t = trim(t);
        if (starts_with_ci(t, marker)) return trim(std::string_view(t).substr(marker.size()));
    }
    return std::nullopt;
}

std::string strip_token(std::string s) {
    const std::string junk = "*`\"'[]().:";
    while (!s.empty() && junk.find(s.front()) != std::string::npos) s.erase(0, 1);
    while (!s.empty() && junk.find(s.back()) != std::string::npos) s.pop_back();
    return to_lower(trim(s));
}

std::optional<int> parse_int(std::string_view s) {
    std::string t = strip_token(std::string(s));
    if (t.empty() || t.size() > 4) return std::nullopt;
    std::size_t i = (t[0] == '-' || t[0] == '+') ? 1 : 0;
    if (i == t.size()) return std::nullopt;
    for (std::size_t j = i; j < t.size(); ++j)
        if (!std::isdigit(static_cast<unsigned char>(t[j]))) {
            // "7/10"
            if (t[j] == '/' && j > i) return std::stoi(t.substr(0, j));
            return std::nullopt;
        }
    return std::stoi(t);
}

Decision ask_decision(CompletionRequest req, Gateway& gateway, bool allow_both_bad) {
    std::string reply = gateway.complete(req);
    auto d = parse_verdict(reply, allow_both_bad);
    if (!d) {
        req.user_prompt += "\n\nYour previous reply did not end with a valid verdict line. Reply again and finish "
                           "with exactly one final line of the form \"VERDICT: <choice>\".";
        d = parse_verdict(gateway.complete(req), allow_both_bad);
    }
    if (!d) throw Error(Errc::unparseable_judgment, "judge reply has no parseable verdict");
    return *d;
}

int ask_score(CompletionRequest req, Gateway& gateway) {
    auto in_range = [](std::optional<int> s) { return s && *s >= 1 && *s <= 10; };
    auto s = parse_score(gateway.complete(req));
    if (!in_range(s)) {
        req.user_prompt += "\n\nYour previous reply did not contain a valid score. Finish with exactly one final "
                           "line \"SCORE: <integer from 1 to 10>\".";
        s = parse_score(gateway.complete(req));
    }
    if (!in_range(s)) throw Error(Errc::unparseable_score, "judge reply has no score in [1, 10]");
    return *s;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

} // namespace

ReadabilityOutcome combine_readability(Decision order1, Decision order2, bool strict) {
    if (order1 == Decision::both_bad || order2 == Decision::both_bad)
        throw Error(Errc::invalid_argument, "both_bad is not a readability decision");
    // Order 1 places the original in slot 1.
    auto c = combine_sides(side(order1, false), side(order2, true), strict);
    if (!c) return ReadabilityOutcome::inconsistent;
    if (*c == 1) return ReadabilityOutcome::original;
    if (*c == -1) return ReadabilityOutcome::rewritten;
    return ReadabilityOutcome::tie;
}

std::optional<Decision> parse_verdict(std::string_view reply, bool allow_both_bad) {
    auto m = last_marker(reply, "verdict:");
    if (!m) return std::nullopt;
    std::string t = strip_token(*m);
    if (t == "1" || t == "answer 1") return Decision::first;
    if (t == "2" || t == "answer 2") return Decision::second;
    if (t == "tie") return Decision::tie;
    if (allow_both_bad && (t == "both_bad" || t == "both bad")) return Decision::both_bad;
    return std::nullopt;
}

std::optional<int> parse_score(std::string_view reply) {
    if (auto m = last_marker(reply, "score:")) return parse_int(*m);
    return parse_int(trim(reply));
}

ReadabilityVerdict judge_readability(std::string_view instruction, std::string_view original,
                                     std::string_view rewritten, Gateway& gateway, const JudgeOptions& opts) {
    if (trim(original).empty() || trim(rewritten).empty())
        throw Error(Errc::invalid_argument, "both answers must be non-empty");
    const auto& tmpl = library(opts).get(prompt_names::readability);
    const std::string inst(instruction), orig(original), rew(rewritten);
    ReadabilityVerdict v;
    v.order1 = ask_decision(
        judge_request(tmpl, {{"instruction", inst}, {"answer_1", orig}, {"answer_2", rew}}, opts, "judge.readability:1"),
        gateway, false);
    v.order2 = ask_decision(
        judge_request(tmpl, {{"instruction", inst}, {"answer_1", rew}, {"answer_2", orig}}, opts, "judge.readability:2"),
        gateway, false);
    v.outcome = combine_readability(v.order1, v.order2, opts.strict);
    return v;
}

int judge_factuality(std::string_view original, std::string_view rewritten, Gateway& gateway,
                     const JudgeOptions& opts) {
    if (trim(original).empty() || trim(rewritten).empty())
        throw Error(Errc::invalid_argument, "both answers must be non-empty");
    return ask_score(judge_request(library(opts).get(prompt_names::factuality),
                                   {{"original", std::string(original)}, {"rewritten", std::string(rewritten)}}, opts,
                                   "judge.factuality"),
                     gateway);
}

int judge_seed_quality(std::string_view instruction, std::string_view response, Gateway& gateway,
                       const JudgeOptions& opts) {
    return ask_score(judge_request(library(opts).get(prompt_names::seed_quality),
                                   {{"instruction", std::string(instruction)}, {"response", std::string(response)}},
                                   opts, "judge.seed_quality"),
                     gateway);
}

GroundedPermutation score_permutation(Decision decision, bool a_in_first_slot) {
    GroundedPermutation p;
    p.decision = decision;
    switch (decision) {
    case Decision::tie: p.points_A = p.points_B = 1; break;
    case Decision::both_bad: break;
    case Decision::first:
    case Decision::second: {
        bool a_wins = (decision == Decision::first) == a_in_first_slot;
        (a_wins ? p.points_A : p.points_B) = 3;
        break;
    }
    }
    return p;
}

GroundedFinal combine_grounded(Decision order1, Decision order2, bool strict) {
    auto c = combine_sides(side(order1, false), side(order2, true), strict);
    if (!c) return GroundedFinal::inconsistent;
    switch (*c) {
    case 1: return GroundedFinal::A;
    case -1: return GroundedFinal::B;
    case 0: return GroundedFinal::tie;
    default: return GroundedFinal::both_bad;
    }
}

std::map<std::string, std::string> parse_dimension_notes(std::string_view reply) {
    std::map<std::string, std::string> notes;
    for (const auto& raw : split_lines(reply)) {
        std::string line = trim(raw);
        while (!line.empty() && (line.front() == '-' || line.front() == '*' || line.front() == '#')) line.erase(0, 1);
        line = trim(line);
        for (const auto& dim : grounded_dimensions()) {
            std::string lower = to_lower(line);
            std::string key = to_lower(dim);
            if (lower.rfind(key, 0) != 0) continue;
            std::string rest = line.substr(dim.size());
            while (!rest.empty() && (rest.front() == '*' || rest.front() == ' ')) rest.erase(0, 1);
            if (rest.empty() || rest.front() != ':') continue;
            notes[dim] = trim(std::string_view(rest).substr(1));
        }
    }
    return notes;
}

GroundedVerdict judge_grounded_pair(std::string_view question, std::string_view answer_a, std::string_view answer_b,
                                    std::span<const std::string> grounding_docs, Gateway& gateway,
                                    const JudgeOptions& opts, bool ungrounded) {
    if (grounding_docs.empty() && !ungrounded)
        throw Error(Errc::invalid_argument, "grounded judging needs at least one grounding document");
    if (trim(answer_a).empty() || trim(answer_b).empty())
        throw Error(Errc::invalid_argument, "both answers must be non-empty");
    std::string grounding;
    for (std::size_t i = 0; i < grounding_docs.size(); ++i)
        grounding += "[Document " + std::to_string(i + 1) + "]\n" + grounding_docs[i] + "\n\n";
    if (grounding.empty()) grounding = "(none)\n";
    const auto& tmpl = library(opts).get(prompt_names::grounded);
    const std::string q(question), a(answer_a), b(answer_b);

    GroundedVerdict v;
    auto run = [&](const std::string& first, const std::string& second, const char* tag, bool a_first) {
        auto req = judge_request(tmpl, {{"question", q}, {"grounding", grounding}, {"answer_1", first}, {"answer_2", second}},
                                 opts, tag);
        std::string reply = gateway.complete(req);
        auto d = parse_verdict(reply, true);
        if (!d) {
            req.user_prompt += "\n\nYour previous reply did not end with a valid verdict line. Reply again and "
                               "finish with exactly one final line of the form \"VERDICT: <choice>\".";
            reply = gateway.complete(req);
            d = parse_verdict(reply, true);
        }
        if (!d) throw Error(Errc::unparseable_judgment, "grounded judge reply has no parseable verdict");
        auto p = score_permutation(*d, a_first);
        p.notes = parse_dimension_notes(reply);
        return p;
    };
    v.order1 = run(a, b, "judge.grounded:1", true);
    v.order2 = run(b, a, "judge.grounded:2", false);
    v.final = combine_grounded(v.order1.decision, v.order2.decision, opts.strict);
    return v;
}

std::vector<JudgedRecord> judge_all(std::span<const JudgeInput> inputs, Gateway& gateway, const JudgeOptions& opts,
                                    int workers) {
    if (workers <= 0) throw Error(Errc::invalid_argument, "worker count must be positive");
    std::vector<JudgedRecord> out(inputs.size());
    parallel_for(inputs.size(), workers, [&](std::size_t i) {
        const auto& in = inputs[i];
        auto& r = out[i];
        r.record_id = in.record_id;
        r.task = in.task;
        try {
            r.verdict = judge_readability(in.instruction, in.original, in.rewritten, gateway, opts);
            r.factuality = judge_factuality(in.original, in.rewritten, gateway, opts);
        } catch (const Error& e) {
            r.verdict.reset();
            r.factuality.reset();
            r.error = std::string(to_string(e.code())) + ": " + e.what();
        } catch (const std::exception& e) {
            r.verdict.reset();
            r.factuality.reset();
            r.error = std::string("Internal: ") + e.what();
        }
    });
    return out;
}

nlohmann::json to_json(const JudgedRecord& r) {
    nlohmann::json j{{"record_id", r.record_id}, {"task", r.task}};
    if (r.verdict) {
        j["order1"] = std::string(to_string(r.verdict->order1));
        j["order2"] = std::string(to_string(r.verdict->order2));
        j["outcome"] = std::string(to_string(r.verdict->outcome));
    } else {
        j["order1"] = j["order2"] = j["outcome"] = nullptr;
    }
    j["factuality"] = r.factuality ? nlohmann::json(*r.factuality) : nlohmann::json(nullptr);
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

JudgedRecord judged_from_json(const nlohmann::json& j) {
    JudgedRecord r;
    try {
        r.record_id = j.at("record_id").get<std::string>();
        r.task = j.value("task", "");
        if (j.contains("outcome") && !j["outcome"].is_null()) {
            ReadabilityVerdict v;
            v.order1 = decision_from_string(j.at("order1").get<std::string>());
            v.order2 = decision_from_string(j.at("order2").get<std::string>());
            v.outcome = readability_outcome_from_string(j.at("outcome").get<std::string>());
            r.verdict = v;
        }
        if (j.contains("factuality") && !j["factuality"].is_null()) {
            int s = j["factuality"].get<int>();
            if (s < 1 || s > 10) throw Error(Errc::malformed_line, "factuality out of range");
            r.factuality = s;
        }
        r.error = j.value("error", "");
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::malformed_line, std::string("verdict: ") + e.what());
    } catch (const Error& e) {
        throw Error(Errc::malformed_line, std::string("verdict: ") + e.what());
    }
    return r;
}

void write_verdicts(const std::string& path, std::span<const JudgedRecord> records) {
    std::string body;
    for (const auto& r : records) body += to_json(r).dump() + "\n";
    write_file(path, body);
}

std::vector<JudgedRecord> load_verdicts(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<JudgedRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(judged_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw Error(Errc::malformed_line, path + ": line " + std::to_string(lineno) + ": " + e.what(), lineno);
        }
    }
    return out;
}

namespace {

void add(QualityRow& row, const JudgedRecord& r, std::vector<long long>& sums, std::size_t slot) {
    if (!r.error.empty()) ++row.failed;
    if (r.verdict) {
        ++row.judged;
        switch (r.verdict->outcome) {
        case ReadabilityOutcome::rewritten: ++row.rewritten; break;
        case ReadabilityOutcome::original: ++row.original; break;
        case ReadabilityOutcome::tie: ++row.tie; break;
        case ReadabilityOutcome::inconsistent: ++row.inconsistent; break;
        }
    }
    if (r.factuality) {
        ++row.scored;
        sums[slot] += *r.factuality;
    }
}

void finish(QualityRow& row, long long sum) {
    if (row.judged) {
        double n = static_cast<double>(row.judged);
        row.pct_rewritten = round2(100.0 * static_cast<double>(row.rewritten) / n);
        row.pct_original = round2(100.0 * static_cast<double>(row.original) / n);
        row.pct_tie = round2(100.0 * static_cast<double>(row.tie) / n);
        row.pct_inconsistent = round2(100.0 * static_cast<double>(row.inconsistent) / n);
    }
    if (row.scored) row.mean_factuality = round2(static_cast<double>(sum) / static_cast<double>(row.scored));
}

nlohmann::json row_json(const QualityRow& row) {
    return {{"judged", row.judged},
            {"counts",
             {{"rewritten", row.rewritten},
              {"original", row.original},
              {"tie", row.tie},
              {"inconsistent", row.inconsistent}}},
            {"pct_rewritten", row.pct_rewritten},
            {"pct_original", row.pct_original},
            {"pct_tie", row.pct_tie},
            {"pct_inconsistent", row.pct_inconsistent},
            {"scored", row.scored},
            {"mean_factuality", row.mean_factuality ? nlohmann::json(*row.mean_factuality) : nlohmann::json(nullptr)},
            {"failed", row.failed}};
}

} // namespace

QualityReport aggregate_quality(std::span<const JudgedRecord> records) {
    QualityReport rep;
    std::map<std::string, std::size_t> index;
    std::vector<long long> sums(1, 0);
    for (const auto& r : records) {
        auto [it, fresh] = index.try_emplace(r.task, sums.size());
        if (fresh) sums.push_back(0);
        add(rep.per_task[r.task], r, sums, it->second);
        add(rep.overall, r, sums, 0);
    }
    if (rep.overall.judged == 0 && rep.overall.scored == 0)
        throw Error(Errc::empty_input, "no verdicts or factuality scores to aggregate");
    finish(rep.overall, sums[0]);
    for (auto& [task, row] : rep.per_task) finish(row, sums[index[task]]);
    return rep;
}

nlohmann::json to_json(const QualityReport& report) {
    nlohmann::json tasks = nlohmann::json::object();
    for (const auto& [name, row] : report.per_task) tasks[name] = row_json(row);
    return {{"overall", row_json(report.overall)}, {"tasks", std::move(tasks)}};
}

std::string render_quality_table(const QualityReport& report, const std::map<std::string, TaskFlags>& flags) {
    std::size_t width = 7;
    for (const auto& [name, row] : report.per_task) width = std::max(width, name.size() + 8);
    auto line = [&](const std::string& label, const QualityRow& row) {
        char buf[160];
        std::string fact = row.mean_factuality ? [&] {
            char b[16];
            std::snprintf(b, sizeof b, "%.2f", *row.mean_factuality);
            return std::string(b);
        }()
                                               : std::string("-");
        std::snprintf(buf, sizeof buf, " %8.2f %8.2f %8.2f %8.2f %6s %7zu\n", row.pct_rewritten, row.pct_original,
                      row.pct_tie, row.pct_inconsistent, fact.c_str(), row.judged);
        std::string l = label;
        l.resize(width, ' ');
        return l + buf;
    };
    std::string head = "task";
    head.resize(width, ' ');
    std::string out = head + "  rewrite original      tie   incons   fact       n\n";
    for (const auto& [name, row] : report.per_task) {
        std::string label = name;
        auto f = flags.find(name);
        if (f != flags.end()) {
            if (f->second.requires_search) label += " [S]";
            if (f->second.requires_grounding_doc) label += " [G]";
        }
        out += line(label, row);
    }
    out += line("overall", report.overall);
    return out;
}

} // namespace enrichkit
