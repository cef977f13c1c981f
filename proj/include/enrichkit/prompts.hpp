#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace enrichkit {

struct PromptTemplate {
    std::string system;
    std::string user;
};

// Named prompt templates with {{placeholder}} substitution. The built-in set
// covers every pipeline stage; a directory of "<name>.txt" files with
// "[system]" / "[user]" sections overrides or extends it. Names form an open
// set, so new format-generation prompt kinds are just new files.
class PromptLibrary {
public:
    static const PromptLibrary& builtin();

    PromptLibrary();
    void load_dir(const std::string& dir);
    void set(std::string name, PromptTemplate tmpl);

    bool contains(std::string_view name) const;
    const PromptTemplate& get(std::string_view name) const;
    std::vector<std::string> names(std::string_view prefix = {}) const;

    static PromptTemplate parse(std::string_view text);

private:
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars);

namespace prompt_names {
inline constexpr std::string_view classify = "classify.task";
inline constexpr std::string_view format_prefix = "format.";
inline constexpr std::string_view queries = "enrich.queries";
inline constexpr std::string_view queries_retry = "enrich.queries_retry";
inline constexpr std::string_view filter = "enrich.filter";
inline constexpr std::string_view summarize = "enrich.summarize";
inline constexpr std::string_view rewrite = "enrich.rewrite";
inline constexpr std::string_view readability = "judge.readability";
inline constexpr std::string_view factuality = "judge.factuality";
inline constexpr std::string_view grounded = "judge.grounded";
inline constexpr std::string_view seed_quality = "judge.seed_quality";
inline constexpr std::string_view taxonomy = "taxonomy.classify";
} // namespace prompt_names

} // namespace enrichkit
