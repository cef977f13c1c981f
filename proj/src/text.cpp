#include "enrichkit/text.hpp"
#include "enrichkit/util.hpp"

#include <array>
#include <cctype>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>

namespace enrichkit {

namespace {

const std::set<std::string>& block_tags() {
    static const std::set<std::string> tags = {
        "address", "article", "aside", "blockquote", "br", "caption", "dd", "div", "dl", "dt",
        "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5",
        "h6", "header", "hr", "li", "main", "nav", "ol", "p", "pre", "section", "table",
        "tbody", "td", "tfoot", "th", "thead", "title", "tr", "ul"};
    return tags;
}

// Elements whose content is never text.
const std::set<std::string>& skipped_tags() {
    static const std::set<std::string> tags = {"script", "style", "noscript", "template", "svg"};
    return tags;
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp <= 0x10FFFF) {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string lower_tag_name(std::string_view s, std::size_t& i) {
    std::string name;
    while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '-' || s[i] == ':')) {
        name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
        ++i;
    }
    return name;
}

// Index just past the '>' closing the tag that starts at `i`, honouring quoted attributes.
std::size_t skip_tag(std::string_view s, std::size_t i) {
    char quote = 0;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (quote) {
            if (c == quote) quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '>') {
            return i + 1;
        }
    }
    return s.size();
}

// Collapses runs of spaces within lines, trims lines and squeezes blank lines.
std::string normalize_whitespace(std::string_view raw) {
    std::string out;
    std::string line;
    bool pending_blank = false;
    auto flush_line = [&] {
        std::string t = trim(line);
        line.clear();
        if (t.empty()) {
            if (!out.empty()) pending_blank = true;
            return;
        }
        if (!out.empty()) out += pending_blank ? "\n\n" : "\n";
        pending_blank = false;
        out += t;
    };
    bool last_space = false;
    for (char c : raw) {
        if (c == '\n') {
            flush_line();
            last_space = false;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
            if (!last_space) line.push_back(' ');
            last_space = true;
        } else {
            line.push_back(c);
            last_space = false;
        }
    }
    flush_line();
    return out;
}

} // namespace

std::string decode_entities(std::string_view text) {
    static const std::unordered_map<std::string, std::uint32_t> named = {
        {"amp", '&'},     {"lt", '<'},       {"gt", '>'},       {"quot", '"'},    {"apos", '\''},
        {"nbsp", 0xA0},   {"ndash", 0x2013}, {"mdash", 0x2014}, {"hellip", 0x2026},
        {"lsquo", 0x2018}, {"rsquo", 0x2019}, {"ldquo", 0x201C}, {"rdquo", 0x201D},
        {"copy", 0xA9},   {"reg", 0xAE},     {"trade", 0x2122}, {"bull", 0x2022}, {"middot", 0xB7},
        {"laquo", 0xAB},  {"raquo", 0xBB},   {"times", 0xD7},   {"deg", 0xB0}};
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '&') {
            out.push_back(text[i]);
            continue;
        }
        std::size_t semi = text.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back('&');
            continue;
        }
        std::string_view ent = text.substr(i + 1, semi - i - 1);
        std::uint32_t cp = 0;
        bool ok = false;
        if (!ent.empty() && ent[0] == '#') {
            bool hex = ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X');
            std::string_view digits = ent.substr(hex ? 2 : 1);
            ok = !digits.empty();
            for (char d : digits) {
                int v;
                if (d >= '0' && d <= '9') v = d - '0';
                else if (hex && d >= 'a' && d <= 'f') v = d - 'a' + 10;
                else if (hex && d >= 'A' && d <= 'F') v = d - 'A' + 10;
                else { ok = false; break; }
                cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
                if (cp > 0x10FFFF) { ok = false; break; }
            }
        } else if (auto it = named.find(std::string(ent)); it != named.end()) {
            cp = it->second;
            ok = true;
        }
        if (!ok) {
            out.push_back('&');
            continue;
        }
        append_utf8(out, cp == 0xA0 ? ' ' : cp);
        i = semi;
    }
    return out;
}

std::string html_to_text(std::string_view html) {
    std::string raw;
    raw.reserve(html.size());
    std::size_t i = 0;
    while (i < html.size()) {
        char c = html[i];
        if (c != '<') {
            std::size_t next = html.find('<', i);
            if (next == std::string_view::npos) next = html.size();
            raw += decode_entities(html.substr(i, next - i));
            i = next;
            continue;
        }
        if (html.compare(i, 4, "<!--") == 0) {
            std::size_t end = html.find("-->", i + 4);
            i = end == std::string_view::npos ? html.size() : end + 3;
            continue;
        }
        if (html.compare(i, 9, "<![CDATA[") == 0) {
            std::size_t end = html.find("]]>", i + 9);
            std::size_t stop = end == std::string_view::npos ? html.size() : end;
            raw.append(html.substr(i + 9, stop - i - 9));
            i = end == std::string_view::npos ? html.size() : end + 3;
            continue;
        }
        std::size_t j = i + 1;
        bool closing = j < html.size() && html[j] == '/';
        if (closing) ++j;
        if (j >= html.size() || !(std::isalpha(static_cast<unsigned char>(html[j])) || html[j] == '!' || html[j] == '?')) {
            // A bare '<' in text.
            raw.push_back('<');
            ++i;
            continue;
        }
        std::string name = lower_tag_name(html, j);
        std::size_t after = skip_tag(html, j);
        if (!closing && skipped_tags().count(name)) {
            std::size_t k = after;
            while (k < html.size()) {
                std::size_t pos = html.find("</", k);
                if (pos == std::string_view::npos) { k = html.size(); break; }
                std::size_t n = pos + 2;
                if (lower_tag_name(html, n) == name) { k = skip_tag(html, n); break; }
                k = pos + 2;
            }
            i = k;
            continue;
        }
        if (block_tags().count(name)) raw.push_back('\n');
        else if (name == "td" || name == "th" || name == "span") raw.push_back(' ');
        i = after;
    }
    return normalize_whitespace(raw);
}

bool looks_like_markup(std::string_view body, std::string_view content_type) {
    std::string ct = to_lower(content_type);
    if (ct.find("html") != std::string::npos || ct.find("xml") != std::string::npos) return true;
    if (!ct.empty() && ct.find("text/plain") != std::string::npos) return false;
    std::string head = to_lower(trim(body.substr(0, 512)));
    if (head.empty() || head[0] != '<') return false;
    return head.rfind("<!doctype", 0) == 0 || head.rfind("<html", 0) == 0 || head.rfind("<?xml", 0) == 0 ||
           head.find('>') != std::string::npos;
}

bool looks_bot_blocked(std::string_view extracted_text) {
    if (extracted_text.size() > 600) return false;
    std::string t = to_lower(extracted_text);
    static const std::array<std::string_view, 6> markers = {
        "captcha", "enable javascript", "access denied", "are you a robot", "verify you are human",
        "unusual traffic"};
    for (auto m : markers)
        if (t.find(m) != std::string::npos) return true;
    return false;
}

} // namespace enrichkit
