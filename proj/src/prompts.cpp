#include "enrichkit/prompts.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/util.hpp"

#include <algorithm>
#include <filesystem>

namespace enrichkit {

namespace {

// Defaults. The wording of the rewrite, judge, evaluation and taxonomy prompts
// is a reconstruction; every template can be replaced from a prompt directory.
void install_builtins(PromptLibrary& lib) {
    lib.set(std::string(prompt_names::classify),
            {"You route cybersecurity instructions to the task they belong to. Reply with exactly one task "
             "name from the list, on a final line of the form \"TASK: <name>\".",
             "Registered tasks:\n{{tasks}}\n\nInstruction:\n{{instruction}}\n\nReference answer:\n{{response}}\n\n"
             "Which task does this instruction belong to?"});

    lib.set("format.specific",
            {"You design answer formats for a cybersecurity instruction dataset. A format is an ordered list of "
             "reasoning steps that a complete, well-grounded answer must follow.",
             "Task description:\n{{task_description}}\n\n{{examples}}"
             "The instructions in this task come from a single source and always ask for the same kind of "
             "information. Write the answer format as a numbered list, one step per line, in the form\n"
             "1. **<Step name>**: <what the step must contain>\n"
             "Use short, distinct step names."});

    lib.set("format.general",
            {"You design answer formats for a cybersecurity instruction dataset. A format is an ordered list of "
             "reasoning steps that a complete, well-grounded answer must follow.",
             "Task description:\n{{task_description}}\n\n"
             "The instructions in this task vary widely, so the format must stay general and must not assume "
             "details of any particular instruction. Write the answer format as a numbered list, one step per "
             "line, in the form\n"
             "1. **<Step name>**: <what the step must contain>\n"
             "Use short, distinct step names."});

    lib.set(std::string(prompt_names::queries),
            {"You write web search queries that retrieve evidence for answering cybersecurity questions.",
             "Instruction:\n{{instruction}}\n\nBrainstorm {{k}} diverse search queries that would find "
             "authoritative sources for answering this instruction. Reply with one query per line and nothing "
             "else."});

    lib.set(std::string(prompt_names::queries_retry),
            {"You write web search queries that retrieve evidence for answering cybersecurity questions.",
             "Instruction:\n{{instruction}}\n\nThese queries were already proposed:\n{{existing}}\n\n"
             "Write {{k}} further search queries that differ from all of the above. Reply with one query per "
             "line and nothing else."});

    lib.set(std::string(prompt_names::filter),
            {"You decide which search queries are worth running before an answer is rewritten.",
             "Instruction:\n{{instruction}}\n\nCurrent answer:\n{{response}}\n\nRequired answer format:\n"
             "{{format}}\n\nCandidate queries:\n{{queries}}\n\n"
             "Keep only the queries expected to return new or useful information that fills gaps in the "
             "current answer with respect to the format. Finish with a final line \"KEEP: <comma-separated "
             "query numbers>\" or \"KEEP: none\"."});

    lib.set(std::string(prompt_names::summarize),
            {"You condense retrieved documents for a downstream writer.",
             "The writer must fill these format steps:\n{{format_steps}}\n\nDocument:\n{{document}}\n\n"
             "Summarize the document, keeping every detail relevant to the steps above (identifiers, "
             "versions, commands, indicators, mitigations). Omit unrelated material."});

    lib.set(std::string(prompt_names::rewrite),
            {"You rewrite answers in a cybersecurity instruction dataset. Keep every fact of the original "
             "answer, ground additional claims in the supplied documents, and never invent identifiers. "
             "Structure the answer with one markdown heading per format step, using the step names verbatim "
             "as headings and keeping their order.",
             "{{context}}\n\nRequired headings, in this order:\n{{headings}}\n\n"
             "Write the improved answer now."});

    lib.set(std::string(prompt_names::readability),
            {"You are an impartial judge comparing two answers to the same cybersecurity instruction. Prefer "
             "the answer that is clearer, better structured, more complete and more helpful. Do not let the "
             "order of the answers or their length alone influence you.",
             "Instruction:\n{{instruction}}\n\n[Answer 1]\n{{answer_1}}\n\n[Answer 2]\n{{answer_2}}\n\n"
             "Explain briefly, then finish with a final line \"VERDICT: 1\", \"VERDICT: 2\" or "
             "\"VERDICT: tie\"."});

    lib.set(std::string(prompt_names::factuality),
            {"You check rewritten answers for factual consistency. The original answer is the ground truth.",
             "Original answer (ground truth):\n{{original}}\n\nRewritten answer:\n{{rewritten}}\n\n"
             "Rate from 1 to 10 how factual the rewritten answer is with respect to the original: 10 means "
             "no contradiction and nothing unsupported that conflicts with it, 1 means it contradicts the "
             "original. Finish with a final line \"SCORE: <integer 1-10>\"."});

    lib.set(std::string(prompt_names::grounded),
            {"You are an expert cybersecurity judge comparing two answers to a question. Use the grounding "
             "documents as the source of truth. Assess, in this order of priority: Contextual Accuracy "
             "(highest priority), Helpfulness, Relevance, Conciseness, Completeness, and watch for length "
             "bias.",
             "Question:\n{{question}}\n\nGrounding documents:\n{{grounding}}\n\n[Answer 1]\n{{answer_1}}\n\n"
             "[Answer 2]\n{{answer_2}}\n\nWrite one line per dimension (Contextual Accuracy, Helpfulness, "
             "Relevance, Conciseness, Completeness, Length Bias) as \"<Dimension>: <note>\", then "
             "finish with a final line \"VERDICT: 1\", \"VERDICT: 2\", \"VERDICT: tie\" or "
             "\"VERDICT: both_bad\"."});

    lib.set(std::string(prompt_names::seed_quality),
            {"You rate instruction-response pairs for a cybersecurity training set.",
             "Instruction:\n{{instruction}}\n\nResponse:\n{{response}}\n\nRate from 1 to 10 how correct, "
             "direct and useful the response is as a short answer. Finish with a final line "
             "\"SCORE: <integer 1-10>\"."});

    lib.set(std::string(prompt_names::taxonomy),
            {"You classify cybersecurity evaluation questions into topic categories. A question may belong "
             "to more than one category.",
             "Categories:\n{{categories}}\n\nQuestion:\n{{text}}\n\nList every category that applies. Finish "
             "with a final line \"CATEGORIES: <comma-separated category codes>\"."});
}

} // namespace

PromptLibrary::PromptLibrary() { install_builtins(*this); }

const PromptLibrary& PromptLibrary::builtin() {
    static const PromptLibrary lib;
    return lib;
}

PromptTemplate PromptLibrary::parse(std::string_view text) {
    PromptTemplate t;
    std::string* target = nullptr;
    for (const auto& line : split_lines(text)) {
        std::string stripped = trim(line);
        if (stripped == "[system]") {
            target = &t.system;
            continue;
        }
        if (stripped == "[user]") {
            target = &t.user;
            continue;
        }
        if (!target) {
            if (stripped.empty()) continue;
            throw Error(Errc::config, "prompt file text before [system]/[user] section");
        }
        if (!target->empty()) *target += '\n';
        *target += line;
    }
    t.system = trim(t.system);
    t.user = trim(t.user);
    if (t.system.empty() || t.user.empty()) throw Error(Errc::config, "prompt file needs [system] and [user] sections");
    return t;
}

void PromptLibrary::load_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error(Errc::config, "prompt directory not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        try {
            set(p.stem().string(), parse(read_file(p.string())));
        } catch (const Error& e) {
            throw Error(Errc::config, p.string() + ": " + e.what());
        }
    }
}

void PromptLibrary::set(std::string name, PromptTemplate tmpl) { templates_[std::move(name)] = std::move(tmpl); }

bool PromptLibrary::contains(std::string_view name) const { return templates_.find(name) != templates_.end(); }

const PromptTemplate& PromptLibrary::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw Error(Errc::invalid_argument, "unknown prompt '" + std::string(name) + "'");
    return it->second;
}

std::vector<std::string> PromptLibrary::names(std::string_view prefix) const {
    std::vector<std::string> out;
    for (const auto& [name, _] : templates_)
        if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(name);
    return out;
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        std::size_t open = tmpl.find("{{", i);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(i));
            break;
        }
        std::size_t close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out.append(tmpl.substr(i));
            break;
        }
        out.append(tmpl.substr(i, open - i));
        std::string key = trim(tmpl.substr(open + 2, close - open - 2));
        auto it = vars.find(key);
        if (it != vars.end()) out += it->second;
        else out.append(tmpl.substr(open, close + 2 - open));
        i = close + 2;
    }
    return out;
}

} // namespace enrichkit
