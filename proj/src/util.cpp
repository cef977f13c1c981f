#include "enrichkit/util.hpp"
#include "enrichkit/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace enrichkit {

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
    };
    std::size_t width = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), std::max<std::size_t>(n, 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < width; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
}

std::string_view to_string(Errc code) {
    switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::missing_file: return "MissingFile";
    case Errc::malformed_line: return "MalformedLine";
    case Errc::unknown_task: return "UnknownTask";
    case Errc::unresolvable_label: return "UnresolvableLabel";
    case Errc::upstream_failure: return "UpstreamFailure";
    case Errc::cache_miss: return "CacheMiss";
    case Errc::backend_unavailable: return "BackendUnavailable";
    case Errc::unparseable: return "Unparseable";
    case Errc::empty_pool: return "EmptyPool";
    case Errc::unparseable_format: return "UnparseableFormat";
    case Errc::unknown_task_name: return "UnknownTaskName";
    case Errc::version_conflict: return "VersionConflict";
    case Errc::budget_too_small: return "BudgetTooSmall";
    case Errc::missing_grounding_doc: return "MissingGroundingDoc";
    case Errc::step_coverage: return "StepCoverage";
    case Errc::unparseable_judgment: return "UnparseableJudgment";
    case Errc::unparseable_score: return "UnparseableScore";
    case Errc::empty_input: return "EmptyInput";
    case Errc::io_failure: return "IOFailure";
    case Errc::malformed_item: return "MalformedItem";
    case Errc::unknown_kind: return "UnknownKind";
    case Errc::config: return "ConfigError";
    }
    return "Unknown";
}

int exit_code_for(Errc code) {
    switch (code) {
    case Errc::invalid_argument:
    case Errc::config:
        return 1;
    case Errc::upstream_failure:
    case Errc::cache_miss:
    case Errc::backend_unavailable:
        return 3;
    default:
        return 2;
    }
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < s.size()) out.emplace_back(s.substr(start));
            break;
        }
        std::string_view line = s.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.emplace_back(line);
        start = nl + 1;
    }
    return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    }
    return true;
}

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

// Calls fn(begin, end) for each token; stops early when fn returns false.
template <typename Fn>
void for_each_token(std::string_view text, Fn&& fn) {
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (is_word_byte(c)) {
            while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        } else {
            ++i;
        }
        if (!fn(start, i)) return;
    }
}

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        "a", "an", "and", "are", "as", "at", "be", "by", "can", "could", "describe",
        "did", "do", "does", "explain", "for", "from", "give", "has", "have", "how",
        "i", "if", "in", "into", "is", "it", "its", "me", "of", "on", "or", "please",
        "provide", "should", "that", "the", "their", "this", "to", "was", "what",
        "when", "where", "which", "who", "why", "will", "with", "would", "you", "your"};
    return words;
}

} // namespace

std::size_t approx_tokens(std::string_view text) {
    std::size_t n = 0;
    for_each_token(text, [&](std::size_t, std::size_t) {
        ++n;
        return true;
    });
    return n;
}

std::string_view truncate_tokens(std::string_view text, std::size_t max_tokens) {
    if (max_tokens == 0) return text.substr(0, 0);
    std::size_t n = 0;
    std::size_t end = text.size();
    bool cut = false;
    for_each_token(text, [&](std::size_t, std::size_t e) {
        if (++n == max_tokens) {
            end = e;
            cut = true;
            return false;
        }
        return true;
    });
    return cut ? text.substr(0, end) : text;
}

std::vector<std::string> keywords(std::string_view text) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for_each_token(text, [&](std::size_t b, std::size_t e) {
        if (!is_word_byte(static_cast<unsigned char>(text[b]))) return true;
        std::string w = to_lower(text.substr(b, e - b));
        if (stopwords().count(w) || seen.count(w)) return true;
        seen.insert(w);
        out.push_back(std::move(w));
        return true;
    });
    return out;
}

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    // Rejection sampling keeps draws unbiased and identical across platforms.
    const std::uint64_t threshold = (std::uint64_t{0} - bound) % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x < threshold);
    return x % bound;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::missing_file, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_failure, "cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(Errc::io_failure, "write failed for " + path);
}

} // namespace enrichkit
