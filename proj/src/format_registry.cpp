#include "enrichkit/format_registry.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/util.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <regex>
#include <set>

namespace enrichkit {

namespace fs = std::filesystem;

void WorkbenchConfig::validate() const {
    if (pool_size < 1) throw Error(Errc::invalid_argument, "pool_size must be positive");
    if (sample_size < 1) throw Error(Errc::invalid_argument, "sample_size must be positive");
    if (sample_size > pool_size) throw Error(Errc::invalid_argument, "sample_size must not exceed pool_size");
}

std::vector<InstructionRecord> sample_examples(const TaskSpec& task, std::span<const InstructionRecord> records,
                                               const WorkbenchConfig& cfg) {
    cfg.validate();
    for (const auto& r : records)
        if (!r.task_name.empty() && r.task_name != task.name)
            throw Error(Errc::invalid_argument, "record " + r.id + " belongs to task " + r.task_name);
    if (records.empty()) throw Error(Errc::empty_pool, "task " + task.name + " has no records to sample");

    std::size_t pool = std::min<std::size_t>(records.size(), static_cast<std::size_t>(cfg.pool_size));
    std::size_t k = std::min<std::size_t>(pool, static_cast<std::size_t>(cfg.sample_size));
    std::vector<std::size_t> idx(pool);
    for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
    // Partial Fisher-Yates: the first k slots end up as the sample.
    Rng rng(cfg.sampling_seed);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.below(pool - i));
        std::swap(idx[i], idx[j]);
    }
    std::vector<InstructionRecord> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(records[idx[i]]);
    return out;
}

namespace {

std::string clean_step_name(std::string name) {
    name = trim(name);
    while (!name.empty() && (name.back() == ':' || name.back() == '*' || name.back() == '.')) name.pop_back();
    while (!name.empty() && (name.front() == '*' || name.front() == '#' || name.front() == '`')) name.erase(0, 1);
    while (!name.empty() && name.back() == '`') name.pop_back();
    return trim(name);
}

std::string strip_separator(std::string_view s) {
    std::string t = trim(s);
    for (std::string_view sep : {":", "-", "\xE2\x80\x93", "\xE2\x80\x94"}) {
        if (t.compare(0, sep.size(), sep) == 0) return trim(std::string_view(t).substr(sep.size()));
    }
    return t;
}

std::size_t word_count(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : s) {
        bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

// Splits "**Name**: text", "Name: text" or "Name - text" into (name, text).
FormatStep split_item(std::string_view item) {
    std::string t = trim(item);
    if (t.rfind("**", 0) == 0) {
        auto close = t.find("**", 2);
        if (close != std::string::npos)
            return {clean_step_name(t.substr(2, close - 2)), strip_separator(std::string_view(t).substr(close + 2))};
    }
    auto colon = t.find(':');
    if (colon != std::string::npos && colon > 0 && word_count(std::string_view(t).substr(0, colon)) <= 8)
        return {clean_step_name(t.substr(0, colon)), trim(std::string_view(t).substr(colon + 1))};
    for (std::string_view sep : {" - ", " \xE2\x80\x93 ", " \xE2\x80\x94 "}) {
        auto pos = t.find(sep);
        if (pos != std::string::npos && word_count(std::string_view(t).substr(0, pos)) <= 8)
            return {clean_step_name(t.substr(0, pos)), trim(std::string_view(t).substr(pos + sep.size()))};
    }
    return {clean_step_name(t), ""};
}

void append_text(std::string& dst, std::string_view extra) {
    std::string e = trim(extra);
    if (e.empty()) return;
    if (!dst.empty()) dst += '\n';
    dst += e;
}

void make_names_unique(std::vector<FormatStep>& steps) {
    std::map<std::string, int> seen;
    for (auto& s : steps) {
        int n = ++seen[s.name];
        if (n > 1) s.name += " (" + std::to_string(n) + ")";
    }
}

} // namespace

std::vector<FormatStep> parse_format_steps(std::string_view text) {
    static const std::regex numbered(R"(^\s*(?:[Ss]tep\s+)?(\d{1,2})\s*[.):]\s+(.+)$)");
    static const std::regex bold(R"(^\s*(?:#{1,6}\s*)?(?:[-*]\s+)?\*\*([^*]+)\*\*\s*(.*)$)");

    const auto lines = split_lines(text);

    std::vector<FormatStep> steps;
    bool after_blank = false;
    for (const auto& line : lines) {
        std::smatch m;
        if (std::regex_match(line, m, numbered)) {
            FormatStep s = split_item(m[2].str());
            if (!s.name.empty()) steps.push_back(std::move(s));
            after_blank = false;
            continue;
        }
        if (steps.empty()) continue;
        if (trim(line).empty()) {
            after_blank = true;
            continue;
        }
        bool indented = !line.empty() && (line[0] == ' ' || line[0] == '\t');
        std::string t = trim(line);
        bool bullet = t.rfind("- ", 0) == 0 || t.rfind("* ", 0) == 0;
        if (after_blank && !indented && !bullet) {
            // Prose after the list ends it.
            break;
        }
        append_text(steps.back().instruction, t);
    }
    if (!steps.empty()) {
        make_names_unique(steps);
        return steps;
    }

    for (const auto& line : lines) {
        std::smatch m;
        if (std::regex_match(line, m, bold)) {
            std::string name = clean_step_name(m[1].str());
            if (name.empty() || word_count(name) > 12) continue;
            steps.push_back({name, strip_separator(m[2].str())});
            continue;
        }
        if (!steps.empty()) append_text(steps.back().instruction, line);
    }
    make_names_unique(steps);
    return steps;
}

FormatTemplate generate_candidate(std::string_view task_description, std::span<const InstructionRecord> examples,
                                  std::string_view prompt_kind, Gateway& gateway, const CandidateOptions& opts) {
    if (trim(task_description).empty()) throw Error(Errc::invalid_argument, "task description must be non-empty");
    const PromptLibrary& prompts = opts.prompts ? *opts.prompts : PromptLibrary::builtin();
    std::string prompt_name = std::string(prompt_names::format_prefix) + std::string(prompt_kind);
    if (!prompts.contains(prompt_name))
        throw Error(Errc::invalid_argument, "unknown format prompt kind '" + std::string(prompt_kind) + "'");
    const PromptTemplate& tmpl = prompts.get(prompt_name);

    std::string example_block;
    if (tmpl.user.find("{{examples}}") != std::string::npos && !examples.empty()) {
        example_block = "Examples from this task:\n\n";
        for (std::size_t i = 0; i < examples.size(); ++i) {
            example_block += "Example " + std::to_string(i + 1) + "\nInstruction: " + examples[i].instruction +
                             "\nAnswer: " + examples[i].response + "\n\n";
        }
    }

    CompletionRequest req;
    req.system_prompt = tmpl.system;
    req.user_prompt = render(tmpl.user, {{"task_description", trim(task_description)}, {"examples", example_block}});
    req.temperature = opts.temperature;
    req.model_id = opts.model_id;
    req.tag = "format.generate";

    std::vector<FormatStep> steps = parse_format_steps(gateway.complete(req));
    if (steps.empty()) {
        req.user_prompt += "\n\nYour previous reply contained no numbered steps. Reply only with the numbered list "
                           "of format steps.";
        steps = parse_format_steps(gateway.complete(req));
    }
    if (steps.empty()) throw Error(Errc::unparseable_format, "format generator reply has no recognizable steps");

    FormatTemplate f;
    f.steps = std::move(steps);
    f.version = opts.current_version + 1;
    f.provenance = Provenance::llm_generated;
    f.validate();
    return f;
}

std::string serialize_task(const TaskSpec& task) {
    std::string out;
    out += "name: " + task.name + "\n";
    auto desc_lines = split_lines(task.description);
    out += "description: " + (desc_lines.empty() ? std::string{} : desc_lines[0]) + "\n";
    for (std::size_t i = 1; i < desc_lines.size(); ++i) out += "  " + desc_lines[i] + "\n";
    out += std::string("requires_search: ") + (task.requires_search ? "true" : "false") + "\n";
    out += std::string("requires_grounding_doc: ") + (task.requires_grounding_doc ? "true" : "false") + "\n";
    out += "version: " + std::to_string(task.format.version) + "\n";
    out += "provenance: " + std::string(to_string(task.format.provenance)) + "\n";
    for (const auto& step : task.format.steps) {
        out += "\n## " + step.name + "\n";
        if (!step.instruction.empty()) out += step.instruction + "\n";
    }
    return out;
}

namespace {

bool parse_bool(const std::string& v) {
    std::string l = to_lower(trim(v));
    if (l == "true" || l == "yes" || l == "1") return true;
    if (l == "false" || l == "no" || l == "0") return false;
    throw Error(Errc::invalid_argument, "expected true/false, got '" + v + "'");
}

} // namespace

TaskSpec parse_task_file(std::string_view text) {
    TaskSpec t;
    auto lines = split_lines(text);
    std::size_t i = 0;
    std::string last_key;
    for (; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.rfind("## ", 0) == 0) break;
        if (trim(line).empty()) {
            last_key.clear();
            continue;
        }
        if ((line[0] == ' ' || line[0] == '\t') && last_key == "description") {
            t.description += "\n" + trim(line);
            continue;
        }
        auto colon = line.find(':');
        if (colon == std::string::npos) throw Error(Errc::invalid_argument, "task file header line without ':': " + line);
        std::string key = trim(std::string_view(line).substr(0, colon));
        std::string value = trim(std::string_view(line).substr(colon + 1));
        last_key = key;
        if (key == "name") t.name = value;
        else if (key == "description") t.description = value;
        else if (key == "requires_search") t.requires_search = parse_bool(value);
        else if (key == "requires_grounding_doc") t.requires_grounding_doc = parse_bool(value);
        else if (key == "version") t.format.version = std::stoi(value);
        else if (key == "provenance") t.format.provenance = provenance_from_string(value);
        else throw Error(Errc::invalid_argument, "unknown task file key '" + key + "'");
    }
    for (; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.rfind("## ", 0) == 0) {
            t.format.steps.push_back({trim(std::string_view(line).substr(3)), ""});
            continue;
        }
        if (t.format.steps.empty()) continue;
        auto& instr = t.format.steps.back().instruction;
        if (!instr.empty() || !trim(line).empty()) {
            if (!instr.empty()) instr += '\n';
            instr += line;
        }
    }
    for (auto& s : t.format.steps) {
        while (!s.instruction.empty() && (s.instruction.back() == '\n' || s.instruction.back() == ' '))
            s.instruction.pop_back();
    }
    return t;
}

FormatRegistry::FormatRegistry(std::string root) : root_(std::move(root)) {
    if (root_.empty()) return;
    if (!fs::exists(root_)) {
        fs::create_directories(root_);
        return;
    }
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root_))
        if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        std::vector<TaskSpec> versions;
        for (const auto& f : fs::directory_iterator(dir)) {
            if (!f.is_regular_file() || f.path().extension() != ".fmt") continue;
            TaskSpec spec;
            try {
                spec = parse_task_file(read_file(f.path().string()));
                spec.validate();
            } catch (const Error& e) {
                throw Error(Errc::config, f.path().string() + ": " + e.what());
            }
            if (spec.name != dir.filename().string())
                throw Error(Errc::config, f.path().string() + ": task name does not match directory");
            versions.push_back(std::move(spec));
        }
        std::sort(versions.begin(), versions.end(),
                  [](const TaskSpec& a, const TaskSpec& b) { return a.format.version < b.format.version; });
        for (std::size_t i = 1; i < versions.size(); ++i)
            if (versions[i].format.version == versions[i - 1].format.version)
                throw Error(Errc::config, dir.string() + ": duplicate version " +
                                              std::to_string(versions[i].format.version));
        if (!versions.empty()) history_[dir.filename().string()] = std::move(versions);
    }
}

void FormatRegistry::persist(const TaskSpec& spec) const {
    if (root_.empty()) return;
    char name[32];
    std::snprintf(name, sizeof name, "v%04d.fmt", spec.format.version);
    fs::path path = fs::path(root_) / spec.name / name;
    if (fs::exists(path))
        throw Error(Errc::version_conflict, spec.name + " version " + std::to_string(spec.format.version) +
                                                " already exists on disk");
    write_file(path.string(), serialize_task(spec));
}

int FormatRegistry::save(TaskSpec spec) {
    std::unique_lock lock(mu_);
    auto& versions = history_[spec.name];
    int latest = versions.empty() ? 0 : versions.back().format.version;
    if (spec.format.version == 0) {
        spec.format.version = latest + 1;
    } else if (spec.format.version != latest + 1) {
        if (versions.empty()) history_.erase(spec.name);
        throw Error(Errc::version_conflict, spec.name + ": version " + std::to_string(spec.format.version) +
                                                " conflicts with stored version " + std::to_string(latest));
    }
    try {
        spec.validate();
        persist(spec);
    } catch (...) {
        if (versions.empty()) history_.erase(spec.name);
        throw;
    }
    versions.push_back(spec);
    return spec.format.version;
}

TaskSpec FormatRegistry::load(std::string_view name) const {
    std::shared_lock lock(mu_);
    auto it = history_.find(name);
    if (it == history_.end() || it->second.empty())
        throw Error(Errc::unknown_task_name, "no task named '" + std::string(name) + "'");
    return it->second.back();
}

TaskSpec FormatRegistry::load(std::string_view name, int version) const {
    std::shared_lock lock(mu_);
    auto it = history_.find(name);
    if (it == history_.end()) throw Error(Errc::unknown_task_name, "no task named '" + std::string(name) + "'");
    for (const auto& spec : it->second)
        if (spec.format.version == version) return spec;
    throw Error(Errc::unknown_task_name, std::string(name) + " has no version " + std::to_string(version));
}

std::vector<int> FormatRegistry::versions(std::string_view name) const {
    std::shared_lock lock(mu_);
    std::vector<int> out;
    auto it = history_.find(name);
    if (it == history_.end()) throw Error(Errc::unknown_task_name, "no task named '" + std::string(name) + "'");
    for (const auto& spec : it->second) out.push_back(spec.format.version);
    return out;
}

bool FormatRegistry::contains(std::string_view name) const {
    std::shared_lock lock(mu_);
    auto it = history_.find(name);
    return it != history_.end() && !it->second.empty();
}

std::vector<TaskSpec> FormatRegistry::current() const {
    std::shared_lock lock(mu_);
    std::vector<TaskSpec> out;
    for (const auto& [_, versions] : history_)
        if (!versions.empty()) out.push_back(versions.back());
    return out;
}

std::vector<std::string> FormatRegistry::names() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [name, versions] : history_)
        if (!versions.empty()) out.push_back(name);
    return out;
}

} // namespace enrichkit
