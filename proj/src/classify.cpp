#include "enrichkit/classify.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/util.hpp"

#include <set>

namespace enrichkit {

Partition partition(std::span<const InstructionRecord> records, std::span<const TaskSpec> tasks) {
    Partition out;
    for (const auto& t : tasks) out[t.name];
    for (const auto& r : records) {
        auto it = out.find(r.task_name);
        if (r.task_name.empty() || it == out.end())
            throw Error(Errc::unknown_task, "record " + r.id + " is labeled with unregistered task '" + r.task_name + "'");
        it->second.push_back(r);
    }
    return out;
}

std::optional<std::string> match_task_reply(std::string_view reply, std::span<const TaskSpec> tasks) {
    auto lines = split_lines(reply);
    // The last "TASK:" line wins; otherwise the last non-empty line.
    std::string candidate;
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        std::string t = trim(*it);
        if (starts_with_ci(t, "task:")) {
            candidate = trim(std::string_view(t).substr(5));
            break;
        }
        if (candidate.empty() && !t.empty()) candidate = t;
    }
    auto strip = [](std::string s) {
        const std::string junk = "\"'`*.";
        while (!s.empty() && junk.find(s.front()) != std::string::npos) s.erase(0, 1);
        while (!s.empty() && junk.find(s.back()) != std::string::npos) s.pop_back();
        return trim(s);
    };
    candidate = strip(candidate);
    for (const auto& t : tasks)
        if (t.name == candidate) return t.name;
    for (const auto& t : tasks)
        if (to_lower(t.name) == to_lower(candidate)) return t.name;
    return std::nullopt;
}

std::string classify_record(InstructionRecord& record, std::span<const TaskSpec> tasks, Gateway& gateway,
                            const ClassifyOptions& opts) {
    if (tasks.empty()) throw Error(Errc::invalid_argument, "no tasks registered");
    if (!record.task_name.empty())
        throw Error(Errc::invalid_argument, "record " + record.id + " is already labeled " + record.task_name);
    std::string listing;
    for (const auto& t : tasks) {
        if (trim(t.description).empty())
            throw Error(Errc::invalid_argument, "task " + t.name + " has no description");
        listing += "- " + t.name + ": " + t.description + "\n";
    }
    const PromptLibrary& prompts = opts.prompts ? *opts.prompts : PromptLibrary::builtin();
    const PromptTemplate& tmpl = prompts.get(prompt_names::classify);

    CompletionRequest req;
    req.system_prompt = tmpl.system;
    req.user_prompt = render(tmpl.user, {{"tasks", listing}, {"instruction", record.instruction},
                                         {"response", record.response}});
    req.model_id = opts.model_id;
    req.max_output_tokens = 256;
    req.tag = "classify";

    std::string reply = gateway.complete(req);
    auto match = match_task_reply(reply, tasks);
    if (!match) {
        req.user_prompt += "\n\nYour previous reply \"" + trim(reply) +
                           "\" is not one of the registered task names. Reply with exactly one name from the list.";
        reply = gateway.complete(req);
        match = match_task_reply(reply, tasks);
    }
    if (!match) throw Error(Errc::unresolvable_label, "record " + record.id + ": classifier reply names no registered task");
    record.task_name = *match;
    return *match;
}

} // namespace enrichkit
