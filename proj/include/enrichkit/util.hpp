#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace enrichkit {

std::string sha256_hex(std::string_view data);

// 64-bit FNV-1a; used where a cheap stable hash is enough (phrase choice, masks).
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);

// Approximate token count: each maximal alphanumeric run is one token and
// every other non-space character is a token of its own.
std::size_t approx_tokens(std::string_view text);

// Prefix of `text` holding at most `max_tokens` approximate tokens.
std::string_view truncate_tokens(std::string_view text, std::size_t max_tokens);

// Lowercased content words of `text` in first-occurrence order, stopwords removed.
std::vector<std::string> keywords(std::string_view text);

// Seeded generator with portable bounded draws; libstdc++ distributions are
// not specified bit-for-bit, so sampling goes through these helpers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform in [0, bound).
    std::uint64_t below(std::uint64_t bound);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Calls fn(i) for i in [0, n) on up to `workers` threads (the caller is one of
// them). fn must not throw.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace enrichkit
